//! Dual-variable construction along a run, feasibility certification, and
//! the discounting-function condition behind the per-round primal-dual
//! ratio.
//!
//! The construction shadows the online loop: during the run
//! `alpha_{u,t} = varphi(c_{u,t} / B_u)` and `beta_t` is the score of the
//! selected node; after the run, nodes that ever lacked budget for a
//! positive bid get their `alpha_u` lifted — to 1 without fractional last
//! matching, and to `max(alpha_{u,V}, max_t 1 - (b/w) phi(b/B))` over
//! their insufficiency rounds with it. Feasible duals upper-bound the
//! offline optimum by weak duality, which is what turns a run plus its
//! duals into a checkable certificate.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::discount::DiscountSpec;
use crate::instance::Instance;
use crate::online::{budget_sufficient, score, RunTrace};
use crate::ratio::{delta_eval, lipschitz_r};

/// Absolute tolerance for certification checks.
pub const CERT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DualError {
    #[error("trace inconsistent with instance: {0}")]
    TraceMismatch(String),
}

/// Dual variables constructed alongside one run.
#[derive(Debug, Clone, PartialEq)]
pub struct DualTrace {
    /// `alpha_{u,t}` after each round (`V x U`).
    pub alpha_rounds: Vec<Vec<f64>>,
    /// `beta_t` per round; zero on skips.
    pub beta: Vec<f64>,
    /// Nodes that ever had insufficient budget for a positive bid.
    pub insufficient_nodes: BTreeSet<usize>,
    /// Rounds at which some node was insufficient.
    pub insufficient_rounds: BTreeSet<usize>,
    /// `alpha_u` after the end-of-run adjustment.
    pub alpha_final: Vec<f64>,
    /// `D = sum_u B_u alpha_u + sum_t beta_t`.
    pub dual_objective: f64,
    pub flm: bool,
}

impl DualTrace {
    /// Running dual objective after round `t` (before the final
    /// adjustment): `sum_u B_u alpha_{u,t} + sum_{i<=t} beta_i`.
    pub fn running_dual(&self, inst: &Instance, t: usize) -> f64 {
        let alphas: f64 = self.alpha_rounds[t]
            .iter()
            .zip(inst.budgets())
            .map(|(a, b)| a * b)
            .sum();
        alphas + self.beta[..=t].iter().sum::<f64>()
    }
}

/// Build the dual trace for a run produced by the online loop with the
/// same spec and matching semantics. The trace is replayed against the
/// instance; any inconsistency is a [`DualError::TraceMismatch`].
pub fn construct_duals(
    inst: &Instance,
    spec: &DiscountSpec,
    trace: &RunTrace,
    flm: bool,
) -> Result<DualTrace, DualError> {
    if trace.decisions.len() != inst.v_count() {
        return Err(DualError::TraceMismatch(format!(
            "trace covers {} rounds, instance has {}",
            trace.decisions.len(),
            inst.v_count()
        )));
    }
    if trace.flm != flm {
        return Err(DualError::TraceMismatch(
            "trace and dual construction disagree on matching semantics".into(),
        ));
    }
    let u_count = inst.u_count();
    let mut budgets = inst.budgets().to_vec();
    let mut dual = DualTrace {
        alpha_rounds: Vec::with_capacity(inst.v_count()),
        beta: Vec::with_capacity(inst.v_count()),
        insufficient_nodes: BTreeSet::new(),
        insufficient_rounds: BTreeSet::new(),
        alpha_final: vec![0.0; u_count],
        dual_objective: 0.0,
        flm,
    };
    // Per-node running max of the fractional-last-matching adjustment.
    let mut flm_adjust = vec![f64::NEG_INFINITY; u_count];

    for (t, arrival) in inst.arrivals().iter().enumerate() {
        for (&u, &w) in arrival {
            if !budget_sufficient(budgets[u], w, false) {
                dual.insufficient_nodes.insert(u);
                dual.insufficient_rounds.insert(t);
                let ratio = (budgets[u] / inst.budgets()[u]).clamp(0.0, 1.0);
                let phi = spec.phi(ratio).expect("in-domain");
                flm_adjust[u] = flm_adjust[u].max(1.0 - budgets[u] / w * phi);
            }
        }
        let beta = match trace.decisions[t] {
            None => 0.0,
            Some(x) => {
                let w = *arrival.get(&x).ok_or_else(|| {
                    DualError::TraceMismatch(format!("round {t} selects node {x} with no bid"))
                })?;
                let s = score(spec, w, budgets[x], inst.budgets()[x], flm);
                let charge = trace.rewards[t];
                budgets[x] = (budgets[x] - charge).max(0.0);
                s
            }
        };
        dual.beta.push(beta);
        let mut alphas = Vec::with_capacity(u_count);
        for u in 0..u_count {
            if (budgets[u] - trace.budgets_after[t][u]).abs() > 1e-9 {
                return Err(DualError::TraceMismatch(format!(
                    "round {t}: replayed budget of node {u} is {}, trace says {}",
                    budgets[u], trace.budgets_after[t][u]
                )));
            }
            let consumed = ((inst.budgets()[u] - budgets[u]) / inst.budgets()[u]).clamp(0.0, 1.0);
            alphas.push(spec.varphi(consumed).expect("in-domain"));
        }
        dual.alpha_rounds.push(alphas);
    }

    for u in 0..u_count {
        let at_end = dual
            .alpha_rounds
            .last()
            .map_or(0.0, |row| row[u]);
        dual.alpha_final[u] = if !dual.insufficient_nodes.contains(&u) {
            at_end
        } else if flm {
            at_end.max(flm_adjust[u])
        } else {
            1.0
        };
    }
    dual.dual_objective = dual
        .alpha_final
        .iter()
        .zip(inst.budgets())
        .map(|(a, b)| a * b)
        .sum::<f64>()
        + dual.beta.iter().sum::<f64>();
    Ok(dual)
}

/// One failed dual constraint `beta_t >= w_{u,t} (1 - alpha_u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityViolation {
    pub u: usize,
    pub t: usize,
    pub lhs: f64,
    pub rhs: f64,
}

/// Outcome of checking every dual constraint of an instance.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    pub violations: Vec<FeasibilityViolation>,
    /// Raw signed minimum of `beta_t - w_{u,t} (1 - alpha_u)`; negative
    /// slack within tolerance is visible here even when no violation is
    /// recorded.
    pub min_slack: f64,
}

impl FeasibilityReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Verify `beta_t >= w_{u,t} (1 - alpha_u)` for every positive bid, with
/// `CERT_TOL` slack.
pub fn check_dual_feasibility(inst: &Instance, duals: &DualTrace) -> FeasibilityReport {
    let mut report = FeasibilityReport {
        violations: Vec::new(),
        min_slack: f64::INFINITY,
    };
    for (t, arrival) in inst.arrivals().iter().enumerate() {
        for (&u, &w) in arrival {
            let lhs = duals.beta[t];
            let rhs = w * (1.0 - duals.alpha_final[u]);
            report.min_slack = report.min_slack.min(lhs - rhs);
            if lhs < rhs - CERT_TOL {
                report.violations.push(FeasibilityViolation { u, t, lhs, rhs });
            }
        }
    }
    if report.min_slack == f64::INFINITY {
        report.min_slack = 0.0;
    }
    report
}

/// Outcome of the end-to-end primal-dual comparison `P >= eta * D`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PdRatioCheck {
    Pass,
    Fail { gap: f64 },
}

impl PdRatioCheck {
    pub fn passed(&self) -> bool {
        matches!(self, PdRatioCheck::Pass)
    }
}

/// `P >= eta * D` up to `CERT_TOL`.
pub fn check_primal_dual_ratio(p: f64, d: f64, eta: f64) -> PdRatioCheck {
    if p >= eta * d - CERT_TOL {
        PdRatioCheck::Pass
    } else {
        PdRatioCheck::Fail { gap: eta * d - p }
    }
}

/// Result of scanning the per-round ratio condition on the discounting
/// function (the inequality whose solution fixes `gamma`).
#[derive(Debug, Clone, PartialEq)]
pub struct PhiConditionReport {
    pub pass: bool,
    /// Largest signed violation of the inequality over the scan.
    pub worst_violation: f64,
    pub worst_y: f64,
    /// Normalized slack of the analytic `y -> 0` limit.
    pub limit_slack: f64,
}

/// Scan the condition
/// `varphi(y) - int_0^y varphi + sum kappa^i varphi^{(i-1)}(y)
///  + (kappa^{n+1} R - gamma + 1) y <= sum kappa^i varphi^{(i-1)}(0)`
/// over a uniform `y` grid of the given step plus the analytic `y -> 0`
/// limit. Equivalent form used here: `y (Delta(y) + kappa^{n+1} R + 1 -
/// gamma) <= 0`.
pub fn check_phi_condition(
    spec: &DiscountSpec,
    kappa: f64,
    gamma: f64,
    n: u32,
    grid_step: f64,
) -> PhiConditionReport {
    let r_term = kappa.powi(n as i32 + 1) * lipschitz_r(spec, n);
    let slack_at = |y: f64| y * (delta_eval(spec, kappa, n, y) + r_term + 1.0 - gamma);
    let mut worst = f64::NEG_INFINITY;
    let mut worst_y = 0.0;
    let steps = (1.0 / grid_step).ceil() as usize;
    for k in 0..=steps {
        let y = (k as f64 * grid_step).min(1.0);
        let g = slack_at(y);
        if g > worst {
            worst = g;
            worst_y = y;
        }
    }
    let limit_slack = delta_eval(spec, kappa, n, 0.0) + r_term + 1.0 - gamma;
    PhiConditionReport {
        pass: worst <= CERT_TOL && limit_slack <= CERT_TOL,
        worst_violation: worst,
        worst_y,
        limit_slack,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{gen_random, Arrival, Meta, RandomParams};
    use crate::online::{run_greedy, run_metaad};
    use crate::ratio::{auto_order, eta_exponential, eta_flm_general, eta_general};
    use std::f64::consts::E;

    fn arrival(pairs: &[(usize, f64)]) -> Arrival {
        pairs.iter().copied().collect()
    }

    fn unit_exp() -> DiscountSpec {
        DiscountSpec::Exponential {
            c: 1.0 / (E - 1.0),
            theta: 1.0,
        }
    }

    fn two_node_example() -> (Instance, DualTrace) {
        let inst = Instance::new(
            vec![1.0, 1.0],
            vec![
                arrival(&[(0, 0.4), (1, 0.3)]),
                arrival(&[(0, 0.5), (1, 0.5)]),
            ],
            Meta::default(),
        )
        .unwrap();
        let trace = run_metaad(&inst, &unit_exp(), false);
        let duals = construct_duals(&inst, &unit_exp(), &trace, false).unwrap();
        (inst, duals)
    }

    #[test]
    fn two_node_dual_values() {
        let (_, duals) = two_node_example();
        let varphi = |x: f64| (x.exp() - 1.0) / (E - 1.0);
        assert!((duals.alpha_final[0] - varphi(0.4)).abs() < 1e-12);
        assert!((duals.alpha_final[1] - varphi(0.5)).abs() < 1e-12);
        assert!((duals.alpha_final[0] - 0.28623).abs() < 1e-5);
        assert!((duals.alpha_final[1] - 0.37754).abs() < 1e-5);
        assert_eq!(duals.beta, vec![0.4, 0.5]);
        assert!((duals.dual_objective - 1.56377).abs() < 1e-5);
        assert!(duals.insufficient_nodes.is_empty());
    }

    #[test]
    fn insufficiency_lifts_alpha_to_one() {
        let inst = Instance::new(
            vec![1.0],
            vec![arrival(&[(0, 0.6)]), arrival(&[(0, 0.5)])],
            Meta::default(),
        )
        .unwrap();
        let trace = run_greedy(&inst, false);
        let duals = construct_duals(&inst, &DiscountSpec::ConstantOne, &trace, false).unwrap();
        assert_eq!(duals.insufficient_nodes.iter().copied().collect::<Vec<_>>(), vec![0]);
        assert_eq!(duals.alpha_final[0], 1.0);
        assert!((duals.dual_objective - 1.6).abs() < 1e-12);
        let report = check_dual_feasibility(&inst, &duals);
        assert!(report.is_clean(), "{:?}", report.violations);

        // negative control: erase the adjustment; the skipped round now
        // violates (beta = 0 against w (1 - alpha) = 0.5)
        let mut broken = duals.clone();
        broken.alpha_final[0] = 0.0;
        let report = check_dual_feasibility(&inst, &broken);
        assert_eq!(report.violations.len(), 1);
        let worst = &report.violations[0];
        assert_eq!((worst.u, worst.t), (0, 1));
        assert_eq!(worst.lhs, 0.0);
        assert!((worst.rhs - 0.5).abs() < 1e-12);
    }

    #[test]
    fn all_skip_instance_has_zero_duals() {
        let inst = Instance::new(
            vec![1.0, 2.0],
            vec![Arrival::new(), Arrival::new()],
            Meta::default(),
        )
        .unwrap();
        let trace = run_greedy(&inst, false);
        let duals = construct_duals(&inst, &DiscountSpec::ConstantOne, &trace, false).unwrap();
        assert!(duals.alpha_final.iter().all(|a| *a == 0.0));
        assert!(duals.beta.iter().all(|b| *b == 0.0));
        assert_eq!(duals.dual_objective, 0.0);
    }

    #[test]
    fn feasibility_on_the_two_node_example() {
        let (inst, duals) = two_node_example();
        let report = check_dual_feasibility(&inst, &duals);
        assert!(report.is_clean());
        // spot value at (u0, t=1): 0.5 >= 0.5 (1 - 0.28623)
        assert!(duals.beta[1] >= 0.5 * (1.0 - duals.alpha_final[0]));
    }

    #[test]
    fn primal_dual_ratio_examples() {
        assert!(check_primal_dual_ratio(0.9, 1.56377, 0.5).passed());
        assert!(check_primal_dual_ratio(0.0, 0.0, 0.5).passed());
        match check_primal_dual_ratio(0.4, 1.0, 0.5) {
            PdRatioCheck::Fail { gap } => assert!((gap - 0.1).abs() < 1e-12),
            PdRatioCheck::Pass => panic!("expected failure"),
        }
    }

    #[test]
    fn phi_condition_examples() {
        // constant-one: inequality reads (1 - gamma) y <= 0
        let r = check_phi_condition(&DiscountSpec::ConstantOne, 0.5, 1.0, 1, 1e-4);
        assert!(r.pass);
        // the unit exponential solves the condition with equality at gamma = e/(e-1)
        let gamma = E / (E - 1.0);
        let r = check_phi_condition(&unit_exp(), 0.0, gamma, 1, 1e-4);
        assert!(r.pass);
        assert!(r.worst_violation.abs() < 1e-12);
        // gamma below the threshold fails at positive y
        let r = check_phi_condition(&unit_exp(), 0.0, 1.0, 1, 1e-4);
        assert!(!r.pass);
        assert!(r.worst_violation > 0.0 && r.worst_y > 0.0);
    }

    #[test]
    fn trace_mismatch_is_detected() {
        let (inst, _) = two_node_example();
        let mut trace = run_metaad(&inst, &unit_exp(), false);
        trace.budgets_after[1][0] += 0.25;
        let err = construct_duals(&inst, &unit_exp(), &trace, false).unwrap_err();
        assert!(matches!(err, DualError::TraceMismatch(_)));
        let trace = run_metaad(&inst, &unit_exp(), false);
        assert!(construct_duals(&inst, &unit_exp(), &trace, true).is_err());
    }

    #[test]
    fn certification_suite_on_random_instances() {
        let params = RandomParams {
            u_count: 5,
            v_count: 18,
            mean_degree: 2.5,
            capacity_range: (1.0, 3.0),
            load_range: (0.5, 2.5),
            rate_range: (0.8, 1.2),
        };
        let specs = [unit_exp(), DiscountSpec::ConstantOne];
        for seed in 0..60u64 {
            let inst = gen_random(seed, &params).unwrap();
            let kappa = inst.bid_budget_ratio();
            for flm in [false, true] {
                for spec in &specs {
                    let trace = run_metaad(&inst, spec, flm);
                    let duals = construct_duals(&inst, spec, &trace, flm).unwrap();
                    let feas = check_dual_feasibility(&inst, &duals);
                    assert!(feas.is_clean(), "seed {seed} flm {flm} {spec:?}");

                    // alpha monotone in consumed budget
                    for u in 0..inst.u_count() {
                        for t in 1..inst.v_count() {
                            assert!(
                                duals.alpha_rounds[t][u] + 1e-12 >= duals.alpha_rounds[t - 1][u]
                            );
                        }
                    }

                    let n = auto_order(spec, kappa, flm);
                    let report = if flm {
                        eta_flm_general(spec, kappa, n).unwrap()
                    } else {
                        eta_general(spec, kappa, n).unwrap()
                    };
                    assert!(
                        check_primal_dual_ratio(
                            trace.total_reward,
                            duals.dual_objective,
                            report.eta
                        )
                        .passed(),
                        "seed {seed} flm {flm} {spec:?}"
                    );
                    // per-round ratio against gamma
                    if let Some(gamma) = report.gamma {
                        let mut p_t = 0.0;
                        for t in 0..inst.v_count() {
                            p_t += trace.rewards[t];
                            let d_t = duals.running_dual(&inst, t);
                            assert!(
                                p_t >= d_t / gamma - CERT_TOL,
                                "seed {seed} flm {flm} t {t}: {p_t} < {d_t}/{gamma}"
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn greedy_ratio_certificate_on_tight_instance() {
        let inst = Instance::new(
            vec![1.0],
            vec![arrival(&[(0, 0.6)]), arrival(&[(0, 0.5)])],
            Meta::default(),
        )
        .unwrap();
        let kappa = inst.bid_budget_ratio();
        let trace = run_greedy(&inst, false);
        let duals = construct_duals(&inst, &DiscountSpec::ConstantOne, &trace, false).unwrap();
        let eta = eta_exponential(0.0, 1.0, kappa).unwrap().eta;
        assert!((eta - (1.0 - kappa) / (2.0 - kappa)).abs() < 1e-12);
        assert!(check_primal_dual_ratio(trace.total_reward, duals.dual_objective, eta).passed());
    }
}
