//! Discounting-function families.
//!
//! A discounting function `phi: [0,1] -> [0,1]` maps the normalized
//! remaining budget of an offline node to a damping factor for its score.
//! The analysis works with the reflected form `varphi(x) = 1 - phi(1 - x)`
//! (a function of the normalized *consumed* budget), its derivatives, and
//! its antiderivative; all are stored in closed form per family.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Maximum derivative order served by [`DiscountSpec::varphi_deriv`].
pub const MAX_DERIV_ORDER: u32 = 60;

/// Tolerance for clamping arguments just outside `[0,1]`.
const DOMAIN_TOL: f64 = 1e-12;

/// A parameterized discounting function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DiscountSpec {
    /// `phi(x) = 1`: no discounting (the greedy rule).
    ConstantOne,
    /// `phi(x) = (e - e^{1-x}) / (e - 1)`, the classic small-bid rule.
    ClassicSmallBid,
    /// `varphi(x) = C (e^{theta x} - 1)` with `C >= 0`, `theta` in `(0,1]`,
    /// and `C (e^theta - 1) <= 1`.
    Exponential {
        #[serde(rename = "C")]
        c: f64,
        theta: f64,
    },
    /// `varphi(x) = sum_j C_j x^j` with `coeffs[j-1] = C_j` (no constant
    /// term), `sum_j C_j <= 1`, and non-negative derivatives on `[0,1]`.
    Polynomial { coeffs: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiscountError {
    #[error("argument {x} outside [0,1] beyond tolerance")]
    DomainError { x: f64 },
    #[error("derivative order {order} exceeds cap {MAX_DERIV_ORDER}")]
    UnsupportedOrder { order: u32 },
}

/// A constraint violated by a [`DiscountSpec`], reported by
/// [`DiscountSpec::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum SpecViolation {
    /// `phi` (equivalently `varphi`) leaves `[0,1]` at `x`.
    RangeExceeded { x: f64, value: f64 },
    /// `phi` decreases at `x`.
    NotMonotone { x: f64 },
    /// Polynomial coefficients sum above one.
    SumExceedsOne { sum: f64 },
    /// A polynomial derivative goes negative on `[0,1]`.
    NegativeDerivative { order: u32, x: f64 },
    /// Exponential `theta` outside `(0,1]`.
    InvalidTheta { theta: f64 },
    /// Exponential `C` negative or non-finite.
    InvalidC { c: f64 },
}

fn clamp_unit(x: f64) -> Result<f64, DiscountError> {
    if x < -DOMAIN_TOL || x > 1.0 + DOMAIN_TOL || !x.is_finite() {
        Err(DiscountError::DomainError { x })
    } else {
        Ok(x.clamp(0.0, 1.0))
    }
}

/// `C` of the classic small-bid family, `1 / (e - 1)`.
fn classic_c() -> f64 {
    1.0 / 1.0_f64.exp_m1()
}

impl DiscountSpec {
    /// Degree of the polynomial family after ignoring trailing zeros;
    /// `None` for other families.
    pub fn poly_degree(&self) -> Option<usize> {
        match self {
            DiscountSpec::Polynomial { coeffs } => {
                Some(coeffs.iter().rposition(|c| *c != 0.0).map_or(0, |j| j + 1))
            }
            _ => None,
        }
    }

    /// Exponential parameters `(C, theta)` for the two exp-shaped families.
    pub(crate) fn exp_params(&self) -> Option<(f64, f64)> {
        match self {
            DiscountSpec::Exponential { c, theta } => Some((*c, *theta)),
            DiscountSpec::ClassicSmallBid => Some((classic_c(), 1.0)),
            _ => None,
        }
    }

    /// `phi(x)`, the discount applied at normalized remaining budget `x`.
    pub fn phi(&self, x: f64) -> Result<f64, DiscountError> {
        let x = clamp_unit(x)?;
        Ok(match self {
            DiscountSpec::ConstantOne => 1.0,
            DiscountSpec::ClassicSmallBid => 1.0 - (1.0 - x).exp_m1() / 1.0_f64.exp_m1(),
            DiscountSpec::Exponential { c, theta } => 1.0 - c * (theta * (1.0 - x)).exp_m1(),
            DiscountSpec::Polynomial { coeffs } => 1.0 - horner(coeffs, 1.0 - x),
        })
    }

    /// The reflected form `varphi(x) = 1 - phi(1 - x)`.
    pub fn varphi(&self, x: f64) -> Result<f64, DiscountError> {
        let x = clamp_unit(x)?;
        Ok(match self {
            DiscountSpec::ConstantOne => 0.0,
            DiscountSpec::ClassicSmallBid => x.exp_m1() / 1.0_f64.exp_m1(),
            DiscountSpec::Exponential { c, theta } => c * (theta * x).exp_m1(),
            DiscountSpec::Polynomial { coeffs } => horner(coeffs, x),
        })
    }

    /// `i`-th derivative of `varphi` at `x`, `i >= 1`, exact per family.
    pub fn varphi_deriv(&self, order: u32, x: f64) -> Result<f64, DiscountError> {
        if order == 0 {
            return self.varphi(x);
        }
        if order > MAX_DERIV_ORDER {
            return Err(DiscountError::UnsupportedOrder { order });
        }
        let x = clamp_unit(x)?;
        Ok(match self {
            DiscountSpec::ConstantOne => 0.0,
            DiscountSpec::ClassicSmallBid => x.exp() / 1.0_f64.exp_m1(),
            DiscountSpec::Exponential { c, theta } => {
                c * theta.powi(order as i32) * (theta * x).exp()
            }
            DiscountSpec::Polynomial { coeffs } => poly_deriv(coeffs, order as usize, x),
        })
    }

    /// `int_0^y varphi(x) dx`, exact per family.
    pub fn varphi_antideriv(&self, y: f64) -> Result<f64, DiscountError> {
        let y = clamp_unit(y)?;
        Ok(match self {
            DiscountSpec::ConstantOne => 0.0,
            DiscountSpec::ClassicSmallBid => (y.exp_m1() - y) / 1.0_f64.exp_m1(),
            DiscountSpec::Exponential { c, theta } => c * ((theta * y).exp_m1() / theta - y),
            DiscountSpec::Polynomial { coeffs } => {
                let mut acc = 0.0;
                for (idx, cj) in coeffs.iter().enumerate().rev() {
                    let j = (idx + 1) as f64;
                    acc = acc * y + cj / (j + 1.0);
                }
                acc * y * y
            }
        })
    }

    /// Check every family constraint plus the generic range and
    /// monotonicity requirements on a dense grid. Returns the full list of
    /// violations; an empty list means the spec is usable.
    pub fn validate(&self) -> Vec<SpecViolation> {
        let mut out = Vec::new();
        match self {
            DiscountSpec::ConstantOne | DiscountSpec::ClassicSmallBid => {}
            DiscountSpec::Exponential { c, theta } => {
                if !(*theta > 0.0 && *theta <= 1.0) {
                    out.push(SpecViolation::InvalidTheta { theta: *theta });
                }
                if !(*c >= 0.0) || !c.is_finite() {
                    out.push(SpecViolation::InvalidC { c: *c });
                }
                if out.is_empty() {
                    let top = c * theta.exp_m1();
                    if top > 1.0 + DOMAIN_TOL {
                        out.push(SpecViolation::RangeExceeded { x: 1.0, value: top });
                    }
                }
            }
            DiscountSpec::Polynomial { coeffs } => {
                let sum: f64 = coeffs.iter().sum();
                if sum > 1.0 + DOMAIN_TOL {
                    out.push(SpecViolation::SumExceedsOne { sum });
                }
                let deg = self.poly_degree().unwrap_or(0);
                'orders: for order in 1..=deg {
                    for k in 0..=200 {
                        let x = k as f64 / 200.0;
                        let d = poly_deriv(coeffs, order, x);
                        if d < -DOMAIN_TOL {
                            out.push(SpecViolation::NegativeDerivative {
                                order: order as u32,
                                x,
                            });
                            continue 'orders;
                        }
                    }
                }
            }
        }
        if !out.is_empty() {
            return out;
        }
        // Generic grid checks: phi stays in [0,1] and never decreases.
        let mut prev = f64::NEG_INFINITY;
        for k in 0..=1000 {
            let x = k as f64 / 1000.0;
            let v = match self.phi(x) {
                Ok(v) => v,
                Err(_) => unreachable!("grid points are in-domain"),
            };
            if !(-DOMAIN_TOL..=1.0 + DOMAIN_TOL).contains(&v) {
                out.push(SpecViolation::RangeExceeded { x, value: v });
                break;
            }
            if v < prev - DOMAIN_TOL {
                out.push(SpecViolation::NotMonotone { x });
                break;
            }
            prev = v;
        }
        out
    }
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    // varphi(x) = C_1 x + C_2 x^2 + ... ; coeffs[j-1] = C_j.
    let mut acc = 0.0;
    for cj in coeffs.iter().rev() {
        acc = acc * x + cj;
    }
    acc * x
}

fn poly_deriv(coeffs: &[f64], order: usize, x: f64) -> f64 {
    let mut total = 0.0;
    for (idx, cj) in coeffs.iter().enumerate() {
        let j = idx + 1;
        if j < order {
            continue;
        }
        // falling factorial j (j-1) ... (j-order+1)
        let mut fall = 1.0;
        for k in 0..order {
            fall *= (j - k) as f64;
        }
        total += cj * fall * x.powi((j - order) as i32);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::adaptive_simpson;
    use proptest::prelude::*;
    use std::f64::consts::E;

    fn sample_specs() -> Vec<DiscountSpec> {
        vec![
            DiscountSpec::ConstantOne,
            DiscountSpec::ClassicSmallBid,
            DiscountSpec::Exponential {
                c: 1.0 / (E - 1.0),
                theta: 1.0,
            },
            DiscountSpec::Exponential {
                c: 0.3,
                theta: 0.5,
            },
            DiscountSpec::Polynomial {
                coeffs: vec![0.0, 1.0],
            },
            DiscountSpec::Polynomial {
                coeffs: vec![0.5, 0.25, 0.25],
            },
        ]
    }

    #[test]
    fn phi_constant_one() {
        assert_eq!(DiscountSpec::ConstantOne.phi(0.37).unwrap(), 1.0);
    }

    #[test]
    fn phi_exponential_endpoints_and_midpoint() {
        let spec = DiscountSpec::Exponential {
            c: 1.0 / (E - 1.0),
            theta: 1.0,
        };
        assert!((spec.phi(1.0).unwrap() - 1.0).abs() < 1e-15);
        // phi(0.5) = 1 - (e^{0.5}-1)/(e-1)
        let expect = 1.0 - (0.5_f64.exp() - 1.0) / (E - 1.0);
        assert!((spec.phi(0.5).unwrap() - expect).abs() < 1e-15);
        assert!((expect - 0.62246).abs() < 1e-5);
    }

    #[test]
    fn varphi_closed_forms() {
        let spec = DiscountSpec::Exponential { c: 0.4, theta: 0.7 };
        // varphi_deriv(i, 0) = C theta^i
        for i in 1..=5u32 {
            let d = spec.varphi_deriv(i, 0.0).unwrap();
            assert!((d - 0.4 * 0.7_f64.powi(i as i32)).abs() < 1e-15);
        }
        let quad = DiscountSpec::Polynomial {
            coeffs: vec![0.0, 1.0],
        };
        assert!((quad.varphi_antideriv(0.9).unwrap() - 0.9_f64.powi(3) / 3.0).abs() < 1e-15);
        assert_eq!(DiscountSpec::ConstantOne.varphi(0.3).unwrap(), 0.0);
    }

    #[test]
    fn classic_equals_unit_exponential() {
        let exp = DiscountSpec::Exponential {
            c: 1.0 / (E - 1.0),
            theta: 1.0,
        };
        for k in 0..=50 {
            let x = k as f64 / 50.0;
            let a = DiscountSpec::ClassicSmallBid.phi(x).unwrap();
            let b = exp.phi(x).unwrap();
            assert!((a - b).abs() < 1e-14, "x={x}: {a} vs {b}");
        }
    }

    #[test]
    fn domain_and_order_errors() {
        let spec = DiscountSpec::ClassicSmallBid;
        assert!(matches!(
            spec.phi(1.5),
            Err(DiscountError::DomainError { .. })
        ));
        assert!(spec.phi(1.0 + 1e-13).is_ok());
        assert!(matches!(
            spec.varphi_deriv(61, 0.5),
            Err(DiscountError::UnsupportedOrder { order: 61 })
        ));
    }

    #[test]
    fn validate_flags_range_violation() {
        let bad = DiscountSpec::Exponential { c: 10.0, theta: 1.0 };
        let v = bad.validate();
        assert!(v
            .iter()
            .any(|v| matches!(v, SpecViolation::RangeExceeded { .. })));
    }

    #[test]
    fn validate_polynomial_constraints() {
        let ok = DiscountSpec::Polynomial {
            coeffs: vec![0.5, 0.5],
        };
        assert!(ok.validate().is_empty());
        let bad = DiscountSpec::Polynomial { coeffs: vec![1.2] };
        assert!(bad
            .validate()
            .iter()
            .any(|v| matches!(v, SpecViolation::SumExceedsOne { .. })));
        let wiggly = DiscountSpec::Polynomial {
            coeffs: vec![0.5, -0.3],
        };
        assert!(wiggly
            .validate()
            .iter()
            .any(|v| matches!(v, SpecViolation::NegativeDerivative { .. })));
    }

    #[test]
    fn reflection_identity_on_grid() {
        for spec in sample_specs() {
            for k in 0..=200 {
                let x = k as f64 / 200.0;
                let lhs = spec.phi(x).unwrap() + spec.varphi(1.0 - x).unwrap();
                assert!((lhs - 1.0).abs() < 1e-12, "{spec:?} at x={x}");
            }
        }
    }

    #[test]
    fn first_derivative_matches_finite_differences() {
        let h = 1e-6;
        for spec in sample_specs() {
            for k in 1..=99 {
                let x = k as f64 / 100.0;
                let num = (spec.varphi(x + h).unwrap() - spec.varphi(x - h).unwrap()) / (2.0 * h);
                let ana = spec.varphi_deriv(1, x).unwrap();
                let scale = ana.abs().max(1.0);
                assert!(
                    (num - ana).abs() / scale < 1e-6,
                    "{spec:?} at x={x}: {num} vs {ana}"
                );
            }
        }
    }

    #[test]
    fn antiderivative_matches_varphi_and_quadrature() {
        let h = 1e-6;
        for spec in sample_specs() {
            for k in 1..=19 {
                let y = k as f64 / 20.0;
                let num = (spec.varphi_antideriv(y + h).unwrap()
                    - spec.varphi_antideriv(y - h).unwrap())
                    / (2.0 * h);
                let ana = spec.varphi(y).unwrap();
                assert!((num - ana).abs() < 1e-6, "{spec:?} at y={y}");
                let quad = adaptive_simpson(&|x| spec.varphi(x).unwrap(), 0.0, y, 1e-12);
                assert!(
                    (quad - spec.varphi_antideriv(y).unwrap()).abs() < 1e-10,
                    "{spec:?} at y={y}"
                );
            }
        }
    }

    #[test]
    fn serde_round_trip_matches_schema() {
        let spec = DiscountSpec::Exponential {
            c: 0.368,
            theta: 0.7,
        };
        let json = serde_json::to_string(&spec).unwrap();
        assert_eq!(json, r#"{"family":"exponential","C":0.368,"theta":0.7}"#);
        assert_eq!(serde_json::from_str::<DiscountSpec>(&json).unwrap(), spec);
        let poly: DiscountSpec =
            serde_json::from_str(r#"{"family":"polynomial","coeffs":[0.0,1.0]}"#).unwrap();
        assert_eq!(
            poly,
            DiscountSpec::Polynomial {
                coeffs: vec![0.0, 1.0]
            }
        );
        assert_eq!(
            serde_json::to_string(&DiscountSpec::ClassicSmallBid).unwrap(),
            r#"{"family":"classic_small_bid"}"#
        );
    }

    proptest! {
        #[test]
        fn varphi_monotone_for_valid_specs(c in 0.0_f64..0.55, theta in 0.05_f64..1.0, x in 0.0_f64..1.0, dx in 0.0_f64..0.5) {
            let spec = DiscountSpec::Exponential { c, theta };
            prop_assume!(spec.validate().is_empty());
            let hi = (x + dx).min(1.0);
            prop_assert!(spec.varphi(hi).unwrap() + 1e-12 >= spec.varphi(x).unwrap());
        }
    }
}
