//! Competitive-ratio formula engine.
//!
//! Evaluates the general guarantee for a discounting function (with and
//! without fractional last matching), the closed forms for the
//! exponential and polynomial families, the deterministic upper bound
//! `1 - kappa`, the learning-augmented bound, and numeric optimization of
//! the family parameters.
//!
//! The general guarantee for bid-budget ratio `kappa` and series order `n`
//! reads `eta = 1 / (1 + kappa^{n+1} R + max_y Delta(y) + phi(kappa)/(1-kappa))`
//! with
//!
//! ```text
//! Delta(y) = varphi(y)/y - (1/y) int_0^y varphi
//!          + (1/y) sum_{i=1..n} kappa^i (varphi^{(i-1)}(y) - varphi^{(i-1)}(0))
//! ```
//!
//! maximized over `y in [0,1]`, where `R` is the Lipschitz constant of
//! `varphi^{(n)}`. The fractional-last-matching variant replaces the final
//! term by `phi(kappa)` and uses `kappa^n R` with `R = max varphi^{(n)}`.
//!
//! Two caveats discovered while cross-checking the closed forms, both
//! surfaced by tests rather than hidden:
//!
//! * The exponential closed form is the `n -> infinity` limit. Truncated
//!   evaluation converges geometrically in `kappa * theta`, so
//!   [`auto_order`] picks the order from the tail bound
//!   `C e^theta (kappa theta)^{n+1} / (1 - kappa theta)` instead of a
//!   fixed constant; a fixed `n = 40` leaves ~1e-4 gaps near
//!   `kappa * theta = 0.9`.
//! * The quadratic closed form `(11/4 k^2 + 5/2 k + 3/4 + 1/(1-k))^{-1}`
//!   maximizes the concave `Delta` at its vertex `3(1+kappa)/2`, which
//!   lies outside `[0,1]`. It therefore understates (is a valid, looser
//!   bound than) the general evaluation restricted to `[0,1]`.
//!   [`eta_poly`] reproduces the closed form by maximizing over
//!   `y >= 0`; [`eta_general`] keeps the `[0,1]` domain. Tests pin both
//!   routes and the gap between them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::discount::DiscountSpec;
use crate::numeric::{cauchy_root_bound, golden_section_max, grid_then_golden_max};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RatioError {
    #[error("kappa {kappa} outside the admissible range")]
    KappaOutOfRange { kappa: f64 },
    #[error("series order {n} unsupported: {reason}")]
    UnsupportedOrder { n: u32, reason: String },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RatioMethod {
    ClosedForm,
    GeneralTheorem,
    Optimized,
}

/// A computed competitive ratio together with what produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub kappa: f64,
    pub eta: f64,
    /// Discounting function that achieved the ratio, when one is involved.
    pub spec: Option<DiscountSpec>,
    /// Slackness parameter, for the learning-augmented bound only.
    pub lambda: Option<f64>,
    /// Dual-construction exponent, for the learning-augmented bound only.
    pub theta: Option<f64>,
    /// `1 + kappa-power R + max Delta`; the per-round primal-dual factor.
    pub gamma: Option<f64>,
    pub flm: bool,
    pub method: RatioMethod,
}

impl RatioReport {
    fn theorem(kappa: f64, eta: f64, spec: &DiscountSpec, gamma: f64, flm: bool) -> Self {
        RatioReport {
            kappa,
            eta,
            spec: Some(spec.clone()),
            lambda: None,
            theta: None,
            gamma: Some(gamma),
            flm,
            method: RatioMethod::GeneralTheorem,
        }
    }

    fn closed(kappa: f64, eta: f64, spec: Option<DiscountSpec>, gamma: Option<f64>, flm: bool) -> Self {
        RatioReport {
            kappa,
            eta,
            spec,
            lambda: None,
            theta: None,
            gamma,
            flm,
            method: RatioMethod::ClosedForm,
        }
    }
}

/// Geometric sum `sum_{i=1..n} kappa^i theta^{i-1}`.
fn geometric_sum(kappa: f64, theta: f64, n: u32) -> f64 {
    let q = kappa * theta;
    if (q - 1.0).abs() < 1e-14 {
        kappa * n as f64
    } else {
        kappa * (1.0 - q.powi(n as i32)) / (1.0 - q)
    }
}

/// `Delta(y)` for `y in [0,1]`, with the analytic `y -> 0` limit.
pub fn delta_eval(spec: &DiscountSpec, kappa: f64, n: u32, y: f64) -> f64 {
    const Y_LIMIT: f64 = 1e-9;
    match spec {
        DiscountSpec::ConstantOne => 0.0,
        DiscountSpec::Exponential { .. } | DiscountSpec::ClassicSmallBid => {
            let (c, theta) = spec.exp_params().expect("exponential-shaped");
            if c == 0.0 {
                return 0.0;
            }
            let g = if y < Y_LIMIT {
                theta
            } else {
                (theta * y).exp_m1() / y
            };
            c + c * g * (1.0 - 1.0 / theta + geometric_sum(kappa, theta, n))
        }
        DiscountSpec::Polynomial { coeffs } => {
            let deg = spec.poly_degree().unwrap_or(0);
            if deg == 0 {
                return 0.0;
            }
            if y < Y_LIMIT {
                // varphi'(0) + sum_{i<=n} kappa^i varphi^{(i)}(0), with
                // varphi^{(i)}(0) = C_i i!.
                let mut total = coeffs[0];
                let mut kpow = 1.0;
                let mut fact = 1.0;
                for i in 1..=(n as usize).min(deg) {
                    kpow *= kappa;
                    fact *= i as f64;
                    total += kpow * coeffs[i - 1] * fact;
                }
                return total;
            }
            let mut p1 = 0.0; // varphi(y)/y
            let mut p2 = 0.0; // (1/y) int_0^y varphi
            for (idx, cj) in coeffs.iter().enumerate() {
                let j = idx + 1;
                p1 += cj * y.powi(j as i32 - 1);
                p2 += cj * y.powi(j as i32) / (j as f64 + 1.0);
            }
            let mut p3 = 0.0;
            let mut kpow = 1.0;
            for i in 1..=(n as usize).min(deg) {
                kpow *= kappa;
                // (varphi^{(i-1)}(y) - varphi^{(i-1)}(0)) / y
                let mut term = 0.0;
                for (idx, cj) in coeffs.iter().enumerate() {
                    let j = idx + 1;
                    if j < i {
                        continue;
                    }
                    let mut fall = 1.0;
                    for k in 0..(i - 1) {
                        fall *= (j - k) as f64;
                    }
                    term += cj * fall * y.powi((j - i) as i32);
                }
                p3 += kpow * term;
            }
            p1 - p2 + p3
        }
    }
}

/// `max_{y in [0,1]} Delta(y)`: 1e4-point scan, golden-section refinement
/// around the scan argmax, and the analytic `y -> 0` limit.
pub fn delta_max(spec: &DiscountSpec, kappa: f64, n: u32) -> Result<f64, RatioError> {
    if n == 0 {
        return Err(RatioError::UnsupportedOrder {
            n,
            reason: "the guarantee needs at least one derivative order".into(),
        });
    }
    let f = |y: f64| delta_eval(spec, kappa, n, y);
    let (_, max) = grid_then_golden_max(f, 0.0, 1.0, 10_001, 1e-12);
    Ok(max.max(f(0.0)).max(f(1.0)))
}

/// Lipschitz constant of `varphi^{(n)}` on `[0,1]` (zero when that
/// derivative is non-increasing), per family.
pub fn lipschitz_r(spec: &DiscountSpec, n: u32) -> f64 {
    match spec {
        DiscountSpec::ConstantOne => 0.0,
        DiscountSpec::Exponential { .. } | DiscountSpec::ClassicSmallBid => {
            let (c, theta) = spec.exp_params().expect("exponential-shaped");
            c * theta.powi(n as i32 + 1) * theta.exp()
        }
        DiscountSpec::Polynomial { .. } => {
            let deg = spec.poly_degree().unwrap_or(0) as u32;
            if n >= deg {
                0.0
            } else {
                spec.varphi_deriv(n + 1, 1.0).unwrap_or(0.0)
            }
        }
    }
}

/// `max_{x in [0,1]} varphi^{(n)}(x)`, per family (the fractional-last-
/// matching rule for `R`).
pub fn max_r(spec: &DiscountSpec, n: u32) -> f64 {
    match spec {
        DiscountSpec::ConstantOne => 0.0,
        DiscountSpec::Exponential { .. } | DiscountSpec::ClassicSmallBid => {
            let (c, theta) = spec.exp_params().expect("exponential-shaped");
            c * theta.powi(n as i32) * theta.exp()
        }
        DiscountSpec::Polynomial { .. } => {
            let deg = spec.poly_degree().unwrap_or(0) as u32;
            if n > deg {
                0.0
            } else {
                spec.varphi_deriv(n, 1.0).unwrap_or(0.0)
            }
        }
    }
}

/// Series order at which truncation error is negligible for the family at
/// this `kappa`: exact degree for polynomials, tail-bound-driven (floor 40)
/// for the exponential families.
pub fn auto_order(spec: &DiscountSpec, kappa: f64, flm: bool) -> u32 {
    let floor = if flm { 2 } else { 1 };
    match spec {
        DiscountSpec::ConstantOne => floor,
        DiscountSpec::Polynomial { .. } => (spec.poly_degree().unwrap_or(0) as u32).max(floor),
        DiscountSpec::Exponential { .. } | DiscountSpec::ClassicSmallBid => {
            let (c, theta) = spec.exp_params().expect("exponential-shaped");
            let q = kappa * theta;
            if c == 0.0 || q <= 0.0 {
                return 40;
            }
            if q >= 1.0 - 1e-9 {
                return 20_000;
            }
            // smallest n with C e^theta q^{n+1} / (1 - q) <= 1e-10
            let scale = c * theta.exp() / (1.0 - q);
            let need = ((1e-10 / scale).ln() / q.ln()).ceil();
            (need as i64).clamp(40, 20_000) as u32
        }
    }
}

fn check_kappa_unit(kappa: f64) -> Result<(), RatioError> {
    if (0.0..=1.0).contains(&kappa) {
        Ok(())
    } else {
        Err(RatioError::KappaOutOfRange { kappa })
    }
}

/// The general guarantee at explicit series order `n` (no fractional last
/// matching). `kappa = 1` yields zero: no deterministic rule earns
/// anything against the hard pair there.
pub fn eta_general(spec: &DiscountSpec, kappa: f64, n: u32) -> Result<RatioReport, RatioError> {
    check_kappa_unit(kappa)?;
    if kappa == 1.0 {
        let mut report = RatioReport::theorem(kappa, 0.0, spec, 0.0, false);
        report.gamma = None;
        return Ok(report);
    }
    let r_term = kappa.powi(n as i32 + 1) * lipschitz_r(spec, n);
    let dmax = delta_max(spec, kappa, n)?;
    let phi_k = spec
        .phi(kappa)
        .map_err(|e| RatioError::InvalidParams(e.to_string()))?;
    let gamma = 1.0 + r_term + dmax;
    let denom = gamma + phi_k / (1.0 - kappa);
    Ok(RatioReport::theorem(kappa, 1.0 / denom, spec, gamma, false))
}

/// [`eta_general`] at an automatically chosen series order.
pub fn eta_general_auto(spec: &DiscountSpec, kappa: f64) -> Result<RatioReport, RatioError> {
    eta_general(spec, kappa, auto_order(spec, kappa, false))
}

/// The general guarantee under fractional last matching: `phi(kappa)`
/// replaces `phi(kappa)/(1-kappa)` and `kappa^n max varphi^{(n)}` replaces
/// the Lipschitz term. Requires `n >= 2`.
pub fn eta_flm_general(spec: &DiscountSpec, kappa: f64, n: u32) -> Result<RatioReport, RatioError> {
    eta_flm_general_variant(spec, kappa, n, false)
}

/// As [`eta_flm_general`]; `proof_variant` truncates the `Delta` sum at
/// `n - 1` (the alternative reading exposed for sensitivity analysis).
pub fn eta_flm_general_variant(
    spec: &DiscountSpec,
    kappa: f64,
    n: u32,
    proof_variant: bool,
) -> Result<RatioReport, RatioError> {
    check_kappa_unit(kappa)?;
    if n < 2 {
        return Err(RatioError::UnsupportedOrder {
            n,
            reason: "the fractional-last-matching guarantee needs n >= 2".into(),
        });
    }
    let r_term = kappa.powi(n as i32) * max_r(spec, n);
    let sum_order = if proof_variant { n - 1 } else { n };
    let dmax = delta_max(spec, kappa, sum_order)?;
    let phi_k = spec
        .phi(kappa)
        .map_err(|e| RatioError::InvalidParams(e.to_string()))?;
    let gamma = 1.0 + r_term + dmax;
    let denom = gamma + phi_k;
    let mut report = RatioReport::theorem(kappa, 1.0 / denom, spec, gamma, true);
    report.flm = true;
    Ok(report)
}

/// [`eta_flm_general`] at an automatically chosen series order.
pub fn eta_flm_general_auto(spec: &DiscountSpec, kappa: f64) -> Result<RatioReport, RatioError> {
    eta_flm_general(spec, kappa, auto_order(spec, kappa, true))
}

fn validate_exp_params(c: f64, theta: f64) -> Result<(), RatioError> {
    if !(c >= 0.0) || !c.is_finite() {
        return Err(RatioError::InvalidParams(format!("C {c} must be >= 0")));
    }
    if c > 0.0 {
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(RatioError::InvalidParams(format!(
                "theta {theta} outside (0,1]"
            )));
        }
        if c * theta.exp_m1() > 1.0 + 1e-12 {
            return Err(RatioError::InvalidParams(format!(
                "C (e^theta - 1) = {} exceeds 1",
                c * theta.exp_m1()
            )));
        }
    }
    Ok(())
}

/// Closed form for the exponential family (the `n -> infinity` limit of
/// the general guarantee). `C = 0` degenerates to the greedy ratio
/// `(1 - kappa) / (2 - kappa)`.
pub fn eta_exponential(c: f64, theta: f64, kappa: f64) -> Result<RatioReport, RatioError> {
    check_kappa_unit(kappa)?;
    validate_exp_params(c, theta)?;
    let spec = DiscountSpec::Exponential { c, theta };
    if kappa == 1.0 {
        return Ok(RatioReport::closed(kappa, 0.0, Some(spec), None, false));
    }
    let dmax = exp_delta_max_closed(c, theta, kappa);
    let phi_k = 1.0 - c * (theta * (1.0 - kappa)).exp_m1();
    let gamma = 1.0 + dmax;
    let denom = gamma + phi_k / (1.0 - kappa);
    Ok(RatioReport::closed(
        kappa,
        1.0 / denom,
        Some(spec),
        Some(gamma),
        false,
    ))
}

/// Closed form for the exponential family under fractional last matching.
/// `C = 0` gives exactly one half for every `kappa`.
pub fn eta_exponential_flm(c: f64, theta: f64, kappa: f64) -> Result<RatioReport, RatioError> {
    check_kappa_unit(kappa)?;
    validate_exp_params(c, theta)?;
    let spec = DiscountSpec::Exponential { c, theta };
    if c == 0.0 {
        let mut report = RatioReport::closed(kappa, 0.5, Some(spec), Some(1.0), true);
        report.flm = true;
        return Ok(report);
    }
    if kappa * theta >= 1.0 {
        return Err(RatioError::InvalidParams(format!(
            "kappa * theta = {} must stay below 1",
            kappa * theta
        )));
    }
    let dmax = exp_delta_max_closed(c, theta, kappa);
    let phi_k = 1.0 - c * (theta * (1.0 - kappa)).exp_m1();
    let gamma = 1.0 + dmax;
    let denom = gamma + phi_k;
    let mut report = RatioReport::closed(kappa, 1.0 / denom, Some(spec), Some(gamma), true);
    report.flm = true;
    Ok(report)
}

/// `max_{y in [0,1]} Delta(y)` of the exponential family in the infinite-
/// order limit: `Delta = C + C A g(y)` with `A = 1 - 1/theta +
/// kappa/(1 - kappa theta)` and `g` increasing, so the maximum sits at
/// `y = 1` when `A >= 0` and at `y -> 0` otherwise.
fn exp_delta_max_closed(c: f64, theta: f64, kappa: f64) -> f64 {
    if c == 0.0 {
        return 0.0;
    }
    let a = 1.0 - 1.0 / theta + kappa / (1.0 - kappa * theta);
    let g = if a >= 0.0 { theta.exp_m1() } else { theta };
    c + c * a * g
}

/// The quadratic closed form `(11/4 k^2 + 5/2 k + 3/4 + 1/(1-k))^{-1}`.
pub fn eta_quadratic(kappa: f64) -> Result<RatioReport, RatioError> {
    check_kappa_unit(kappa)?;
    let spec = DiscountSpec::Polynomial {
        coeffs: vec![0.0, 1.0],
    };
    if kappa == 1.0 {
        return Ok(RatioReport::closed(kappa, 0.0, Some(spec), None, false));
    }
    let denom = 2.75 * kappa * kappa + 2.5 * kappa + 0.75 + 1.0 / (1.0 - kappa);
    let gamma = 1.0 + 0.75 * (1.0 + kappa) * (1.0 + kappa) + 2.0 * kappa * kappa;
    Ok(RatioReport::closed(
        kappa,
        1.0 / denom,
        Some(spec),
        Some(gamma),
        false,
    ))
}

/// `Delta` of the polynomial closed form as explicit power-basis
/// coefficients (index = power of `y`), `C_0 = 0` implied.
pub fn poly_delta_coeffs(coeffs: &[f64], kappa: f64) -> Vec<f64> {
    let n = coeffs.iter().rposition(|c| *c != 0.0).map_or(0, |j| j + 1);
    if n == 0 {
        return vec![0.0];
    }
    let cj = |j: usize| -> f64 {
        if j >= 1 && j <= n {
            coeffs[j - 1]
        } else {
            0.0
        }
    };
    let mut out = vec![0.0; n + 1];
    for (k, slot) in out.iter_mut().enumerate() {
        let mut v = (1.0 + kappa) * cj(k + 1);
        if k >= 1 {
            v -= cj(k) / (k + 1) as f64;
        }
        // sum_{i=2}^{n-k} kappa^i C_{i+k} (i+k)! / (k+1)!
        let mut kpow = kappa;
        let mut ratio = 1.0; // (i+k)!/(k+1)! built incrementally
        for i in 2..=n.saturating_sub(k) {
            kpow *= kappa;
            ratio *= (i + k) as f64;
            v += kpow * cj(i + k) * ratio;
        }
        *slot = v;
    }
    out
}

/// Polynomial-family closed form: `1 / (1 + max Delta + 1/(1-k) -
/// sum_j C_j (1-k)^{j-1})`, with `Delta` maximized over `y >= 0` (the
/// domain under which the quadratic specialization was derived; see the
/// module docs).
pub fn eta_poly(coeffs: &[f64], kappa: f64) -> Result<RatioReport, RatioError> {
    check_kappa_unit(kappa)?;
    let spec = DiscountSpec::Polynomial {
        coeffs: coeffs.to_vec(),
    };
    if !spec.validate().is_empty() {
        return Err(RatioError::InvalidParams(format!(
            "polynomial coefficients {coeffs:?} violate the family constraints"
        )));
    }
    if kappa == 1.0 {
        return Ok(RatioReport::closed(kappa, 0.0, Some(spec), None, false));
    }
    let delta = poly_delta_coeffs(coeffs, kappa);
    let dmax = poly_max_nonneg(&delta);
    #[cfg(debug_assertions)]
    cross_check_poly_delta(&spec, coeffs, kappa, &delta);
    let mut tail = 0.0;
    for (idx, cj) in coeffs.iter().enumerate() {
        tail += cj * (1.0 - kappa).powi(idx as i32);
    }
    let denom = 1.0 + dmax + 1.0 / (1.0 - kappa) - tail;
    Ok(RatioReport::closed(
        kappa,
        1.0 / denom,
        Some(spec),
        Some(1.0 + dmax),
        false,
    ))
}

/// Maximize a power-basis polynomial over `y >= 0`. Stationary points are
/// bounded via the Cauchy bound on the derivative's roots.
fn poly_max_nonneg(coeffs: &[f64]) -> f64 {
    let deriv: Vec<f64> = coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(j, c)| j as f64 * c)
        .collect();
    let hi = cauchy_root_bound(&deriv) + 1.0;
    let eval = |y: f64| {
        let mut acc = 0.0;
        for c in coeffs.iter().rev() {
            acc = acc * y + c;
        }
        acc
    };
    let (_, max) = grid_then_golden_max(eval, 0.0, hi, 10_001, 1e-12);
    max.max(eval(0.0))
}

/// Compare the coefficient expansion against the direct evaluation of the
/// general `Delta`; disagreement is reported on stderr, never patched.
#[cfg(debug_assertions)]
fn cross_check_poly_delta(spec: &DiscountSpec, coeffs: &[f64], kappa: f64, delta: &[f64]) {
    let n = spec.poly_degree().unwrap_or(0) as u32;
    if n == 0 {
        return;
    }
    for k in 1..=8 {
        let y = k as f64 / 8.0;
        let direct = delta_eval(spec, kappa, n, y);
        let mut expanded = 0.0;
        for c in delta.iter().rev() {
            expanded = expanded * y + c;
        }
        if (direct - expanded).abs() > 1e-9 {
            eprintln!(
                "polynomial Delta mismatch at y={y}, kappa={kappa}, coeffs={coeffs:?}: \
                 direct {direct} vs expanded {expanded}"
            );
        }
    }
}

/// Deterministic upper bound `1 - kappa` (zero at `kappa = 1`).
pub fn upper_bound(kappa: f64) -> f64 {
    assert!((0.0..=1.0).contains(&kappa), "kappa {kappa} outside [0,1]");
    1.0 - kappa
}

/// The learning-augmented guarantee at slackness `lambda`, dual exponent
/// `theta`, and bid-budget ratio `kappa`:
///
/// ```text
/// lambda (1 - e^-theta)
/// / (1 + lambda ((1 - e^{-theta kappa})/(1-kappa)
///                + (1 - e^-theta) [ (e^{theta kappa} - 1)/kappa - 1 ]^+ / theta))
/// ```
pub fn eta_lobm(lambda: f64, theta: f64, kappa: f64) -> Result<RatioReport, RatioError> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(RatioError::InvalidParams(format!(
            "lambda {lambda} outside [0,1]"
        )));
    }
    if !(theta > 0.0) || !theta.is_finite() {
        return Err(RatioError::InvalidParams(format!(
            "theta {theta} must be positive"
        )));
    }
    if !(0.0..1.0).contains(&kappa) {
        return Err(RatioError::KappaOutOfRange { kappa });
    }
    let rho = -(-theta).exp_m1();
    let shortfall = -(-theta * kappa).exp_m1() / (1.0 - kappa);
    let bracket = if kappa < 1e-12 {
        (theta - 1.0).max(0.0)
    } else {
        ((theta * kappa).exp_m1() / kappa - 1.0).max(0.0)
    };
    let denom = 1.0 + lambda * (shortfall + rho * bracket / theta);
    Ok(RatioReport {
        kappa,
        eta: lambda * rho / denom,
        spec: None,
        lambda: Some(lambda),
        theta: Some(theta),
        gamma: None,
        flm: false,
        method: RatioMethod::ClosedForm,
    })
}

/// Families [`optimize_eta`] can search over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizeFamily {
    Exponential,
    Quadratic,
}

/// Maximize the family's closed-form guarantee at `kappa` over its
/// parameter box (`theta in (0,1]`, `C in [0, 1/(e^theta-1)]` for the
/// exponential family; `C in [0,1]` for the quadratic). Coarse 200x200
/// scan followed by coordinate golden-section refinement.
pub fn optimize_eta(
    family: OptimizeFamily,
    kappa: f64,
    flm: bool,
) -> Result<RatioReport, RatioError> {
    check_kappa_unit(kappa)?;
    match family {
        OptimizeFamily::Exponential => optimize_exponential(kappa, flm),
        OptimizeFamily::Quadratic => optimize_quadratic(kappa, flm),
    }
}

fn exp_eta_value(c: f64, theta: f64, kappa: f64, flm: bool) -> f64 {
    let res = if flm {
        eta_exponential_flm(c, theta, kappa)
    } else {
        eta_exponential(c, theta, kappa)
    };
    res.map(|r| r.eta).unwrap_or(f64::NEG_INFINITY)
}

fn optimize_exponential(kappa: f64, flm: bool) -> Result<RatioReport, RatioError> {
    if kappa == 1.0 && !flm {
        let mut report = RatioReport::closed(
            kappa,
            0.0,
            Some(DiscountSpec::Exponential { c: 0.0, theta: 1.0 }),
            None,
            false,
        );
        report.method = RatioMethod::Optimized;
        return Ok(report);
    }
    const GRID: usize = 200;
    let mut best = (f64::NEG_INFINITY, 0.0, 1.0); // (eta, c, theta)
    for ti in 1..=GRID {
        let theta = ti as f64 / GRID as f64;
        let c_max = 1.0 / theta.exp_m1();
        for ci in 0..GRID {
            let c = c_max * ci as f64 / (GRID - 1) as f64;
            let eta = exp_eta_value(c, theta, kappa, flm);
            if eta > best.0 {
                best = (eta, c, theta);
            }
        }
    }
    let (_, mut c, mut theta) = best;
    let step_t = 1.0 / GRID as f64;
    for _ in 0..4 {
        let (t_new, _) = golden_section_max(
            |t| {
                let cm = 1.0 / t.exp_m1();
                exp_eta_value(c.min(cm), t, kappa, flm)
            },
            (theta - 2.0 * step_t).max(1e-6),
            (theta + 2.0 * step_t).min(1.0),
            1e-10,
        );
        theta = t_new;
        let c_max = 1.0 / theta.exp_m1();
        let step_c = c_max / (GRID - 1) as f64;
        let (c_new, _) = golden_section_max(
            |cc| exp_eta_value(cc, theta, kappa, flm),
            (c - 2.0 * step_c).max(0.0),
            (c + 2.0 * step_c).min(c_max),
            1e-12,
        );
        c = c_new;
    }
    // Snap to the meaningful boundaries when refinement lands next to them.
    let c_max = 1.0 / theta.exp_m1();
    for cand_c in [c, 0.0, c_max] {
        for cand_t in [theta, 1.0] {
            if exp_eta_value(cand_c, cand_t, kappa, flm) > exp_eta_value(c, theta, kappa, flm) {
                c = cand_c;
                theta = cand_t;
            }
        }
    }
    let mut report = if flm {
        eta_exponential_flm(c, theta, kappa)?
    } else {
        eta_exponential(c, theta, kappa)?
    };
    report.method = RatioMethod::Optimized;
    Ok(report)
}

fn optimize_quadratic(kappa: f64, flm: bool) -> Result<RatioReport, RatioError> {
    let eval = |c: f64| -> f64 {
        let res = if flm {
            eta_flm_general(
                &DiscountSpec::Polynomial {
                    coeffs: vec![0.0, c],
                },
                kappa,
                2,
            )
        } else {
            eta_poly(&[0.0, c], kappa)
        };
        res.map(|r| r.eta).unwrap_or(f64::NEG_INFINITY)
    };
    let (c, _) = grid_then_golden_max(eval, 0.0, 1.0, 401, 1e-10);
    let mut report = if flm {
        eta_flm_general(
            &DiscountSpec::Polynomial {
                coeffs: vec![0.0, c],
            },
            kappa,
            2,
        )?
    } else {
        eta_poly(&[0.0, c], kappa)?
    };
    if eval(1.0) >= report.eta {
        report = if flm {
            eta_flm_general(
                &DiscountSpec::Polynomial {
                    coeffs: vec![0.0, 1.0],
                },
                kappa,
                2,
            )?
        } else {
            eta_poly(&[0.0, 1.0], kappa)?
        };
    }
    report.method = RatioMethod::Optimized;
    Ok(report)
}
