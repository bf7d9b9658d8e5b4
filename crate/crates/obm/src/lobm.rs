//! Learning-augmented online matching.
//!
//! Each round a predictor proposes a discounting factor `z_{u,t}`; the
//! run projects it onto the per-node interval of values that keep the
//! constructed duals feasible and the primal-dual ratio bounded, scores
//! the node `w (1 - z)`, and selects the argmax. The slackness parameter
//! `lambda` widens the interval (`lambda = 0` disables projection and dual
//! bookkeeping entirely; the run follows raw predictions).
//!
//! The dual construction is fixed to the exponential shape with exponent
//! `theta`: on a match of bid `w` against remaining budget `b`,
//! `alpha += w z / (lambda rho B) + delta(theta, w, b, B)` and
//! `beta_t = s / (lambda rho)` with `rho = 1 - e^{-theta}`.

use std::collections::{BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::instance::Instance;
use crate::online::{budget_sufficient, RunTrace};

/// Predictions that differ from their projection by more than this are
/// counted as clamped.
pub const CLAMP_TOL: f64 = 1e-9;

/// Interval endpoints may cross by at most this much before the run
/// treats the competitive space as genuinely empty (a bug, not an input
/// condition).
pub const INTERVAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LobmError {
    #[error("no prediction for node {u} at round {t}")]
    PredictionMissing { u: usize, t: usize },
    #[error("competitive interval empty at (u={u}, t={t}): [{lo}, {hi}]")]
    EmptyInterval { u: usize, t: usize, lo: f64, hi: f64 },
    #[error("lambda = 0 leaves the whole half-line feasible; no interval to compute")]
    LambdaZero,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("prediction file: {0}")]
    PredictionFile(String),
}

/// Where per-round predictions come from.
#[derive(Debug, Clone, PartialEq)]
pub enum Predictor {
    /// CSV file with header `t,u,z`, one row per positive-bid pair.
    FileStream(PathBuf),
    /// The same value for every pair.
    Constant(f64),
    /// The closed-form reference prediction
    /// `z = lambda_1 rho e^{theta (1 - b/B)} / (e^theta - 1)`, feasible at
    /// every round for any `lambda_1 in [lambda, 1]`.
    ReferencePolicy { lambda1: f64 },
    /// Constant zero.
    AdversarialZero,
    /// Constant one.
    AdversarialOne,
}

impl Predictor {
    /// Parse the CLI form: `file:<path>`, `const:<v>`, `ref:<lambda1>`,
    /// `adv0`, `adv1`.
    pub fn parse(text: &str) -> Result<Self, LobmError> {
        if text == "adv0" {
            return Ok(Predictor::AdversarialZero);
        }
        if text == "adv1" {
            return Ok(Predictor::AdversarialOne);
        }
        if let Some(path) = text.strip_prefix("file:") {
            return Ok(Predictor::FileStream(PathBuf::from(path)));
        }
        if let Some(v) = text.strip_prefix("const:") {
            let v: f64 = v
                .parse()
                .map_err(|_| LobmError::InvalidParams(format!("bad constant {v:?}")))?;
            if v < 0.0 {
                return Err(LobmError::InvalidParams("predictions are >= 0".into()));
            }
            return Ok(Predictor::Constant(v));
        }
        if let Some(l) = text.strip_prefix("ref:") {
            let lambda1: f64 = l
                .parse()
                .map_err(|_| LobmError::InvalidParams(format!("bad lambda1 {l:?}")))?;
            return Ok(Predictor::ReferencePolicy { lambda1 });
        }
        Err(LobmError::InvalidParams(format!(
            "unknown predictor {text:?}"
        )))
    }
}

/// Read a prediction file (`t,u,z` header) into a lookup map.
pub fn read_predictions(path: &Path) -> Result<HashMap<(usize, usize), f64>, LobmError> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| LobmError::PredictionFile(e.to_string()))?;
    let mut map = HashMap::new();
    for record in reader.deserialize() {
        let (t, u, z): (usize, usize, f64) =
            record.map_err(|e| LobmError::PredictionFile(e.to_string()))?;
        if z < 0.0 {
            return Err(LobmError::PredictionFile(format!(
                "negative prediction at t={t}, u={u}"
            )));
        }
        map.insert((t, u), z);
    }
    Ok(map)
}

/// Dual bookkeeping of a run; absent when `lambda = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LobmDuals {
    /// `alpha_{u,t}` after each round (`V x U`).
    pub alpha_rounds: Vec<Vec<f64>>,
    /// `alpha_u` after the final lift of insufficient nodes to 1.
    pub alpha_final: Vec<f64>,
    pub beta: Vec<f64>,
    pub dual_objective: f64,
}

/// Run state and statistics returned next to the trace.
#[derive(Debug, Clone, PartialEq)]
pub struct LobmState {
    pub theta: f64,
    pub lambda: f64,
    /// `rho = 1 - e^{-theta}`.
    pub rho_theta: f64,
    pub insufficient_nodes: BTreeSet<usize>,
    pub duals: Option<LobmDuals>,
    /// Projected predictions that moved by more than [`CLAMP_TOL`].
    pub clamped_predictions: usize,
    /// Number of projected predictions.
    pub projected_predictions: usize,
}

impl LobmState {
    pub fn clamp_rate(&self) -> f64 {
        if self.projected_predictions == 0 {
            0.0
        } else {
            self.clamped_predictions as f64 / self.projected_predictions as f64
        }
    }
}

/// `delta(theta, w, b, B) = e^{theta (1 - b/B)} / (e^theta - 1)
/// * (e^{theta w / B} - 1 - w/B)`; vanishes as `w -> 0` and is
/// non-negative whenever `theta >= 1` (for smaller `theta` the bracket
/// can dip below zero, which is why the ratio bound clamps its aggregate
/// at zero).
pub fn delta(theta: f64, w: f64, b: f64, total: f64) -> f64 {
    let lead = (theta * (1.0 - b / total)).exp() / theta.exp_m1();
    lead * ((theta * w / total).exp_m1() - w / total)
}

/// The projection interval `[z_lo, z_hi]` for a sufficient-budget bid:
/// `z_hi = 1 - lambda rho (1 - alpha_prev)` keeps the score high enough
/// for dual feasibility, `z_lo` forces the dual increment to track the
/// exponential lower envelope.
pub fn feasible_interval(
    alpha_prev: f64,
    w: f64,
    b: f64,
    total: f64,
    theta: f64,
    lambda: f64,
) -> Result<(f64, f64), LobmError> {
    if lambda == 0.0 {
        return Err(LobmError::LambdaZero);
    }
    let rho = -(-theta).exp_m1();
    let z_hi = 1.0 - lambda * rho * (1.0 - alpha_prev);
    let target = (theta * (1.0 - (b - w) / total)).exp_m1() / theta.exp_m1();
    let z_lo = (lambda * rho * total / w * (target - alpha_prev - delta(theta, w, b, total)))
        .max(0.0);
    if z_lo > z_hi + INTERVAL_TOL {
        return Err(LobmError::EmptyInterval {
            u: usize::MAX,
            t: usize::MAX,
            lo: z_lo,
            hi: z_hi,
        });
    }
    Ok((z_lo.min(z_hi), z_hi))
}

/// Clamp a prediction into the interval.
pub fn project(z_tilde: f64, interval: (f64, f64)) -> f64 {
    z_tilde.clamp(interval.0, interval.1)
}

/// Run the learning-augmented loop over the whole arrival sequence.
///
/// With `lambda > 0`, every sufficient-budget prediction is projected,
/// scores are `w (1 - z)`, selection is argmax with lowest-index ties,
/// rounds with no positive score are skipped, and the duals are updated as
/// described at the module level, ending with the lift of insufficient
/// nodes to `alpha_u = 1`. With `lambda = 0` the raw predictions drive the
/// run and no duals are kept.
pub fn run_lobm(
    inst: &Instance,
    theta: f64,
    lambda: f64,
    predictor: &Predictor,
) -> Result<(RunTrace, LobmState), LobmError> {
    if !(theta > 0.0) || !theta.is_finite() {
        return Err(LobmError::InvalidParams(format!(
            "theta {theta} must be positive"
        )));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(LobmError::InvalidParams(format!(
            "lambda {lambda} outside [0,1]"
        )));
    }
    if let Predictor::ReferencePolicy { lambda1 } = predictor {
        if !(*lambda1 >= lambda && *lambda1 <= 1.0) {
            return Err(LobmError::InvalidParams(format!(
                "reference lambda1 {lambda1} outside [lambda, 1]"
            )));
        }
    }
    let rho = -(-theta).exp_m1();
    let file_predictions = match predictor {
        Predictor::FileStream(path) => Some(read_predictions(path)?),
        _ => None,
    };

    let u_count = inst.u_count();
    let track_duals = lambda > 0.0;
    let mut budgets = inst.budgets().to_vec();
    let mut alpha = vec![0.0_f64; u_count];
    let mut trace = RunTrace {
        decisions: Vec::with_capacity(inst.v_count()),
        rewards: Vec::with_capacity(inst.v_count()),
        budgets_after: Vec::with_capacity(inst.v_count()),
        consumed_after: Vec::with_capacity(inst.v_count()),
        total_reward: 0.0,
        flm: false,
    };
    let mut state = LobmState {
        theta,
        lambda,
        rho_theta: rho,
        insufficient_nodes: BTreeSet::new(),
        duals: None,
        clamped_predictions: 0,
        projected_predictions: 0,
    };
    let mut alpha_rounds = Vec::with_capacity(inst.v_count());
    let mut beta = Vec::with_capacity(inst.v_count());

    for (t, arrival) in inst.arrivals().iter().enumerate() {
        let mut best: Option<(usize, f64, f64)> = None; // (u, score, z)
        for (&u, &w) in arrival {
            let z_tilde = match predictor {
                Predictor::FileStream(_) => *file_predictions
                    .as_ref()
                    .expect("loaded above")
                    .get(&(t, u))
                    .ok_or(LobmError::PredictionMissing { u, t })?,
                Predictor::Constant(v) => *v,
                Predictor::AdversarialZero => 0.0,
                Predictor::AdversarialOne => 1.0,
                Predictor::ReferencePolicy { lambda1 } => {
                    lambda1 * rho * (theta * (1.0 - budgets[u] / inst.budgets()[u])).exp()
                        / theta.exp_m1()
                }
            };
            if !budget_sufficient(budgets[u], w, false) {
                state.insufficient_nodes.insert(u);
                continue;
            }
            let z = if track_duals {
                let interval = feasible_interval(
                    alpha[u],
                    w,
                    budgets[u],
                    inst.budgets()[u],
                    theta,
                    lambda,
                )
                .map_err(|e| match e {
                    LobmError::EmptyInterval { lo, hi, .. } => {
                        LobmError::EmptyInterval { u, t, lo, hi }
                    }
                    other => other,
                })?;
                state.projected_predictions += 1;
                let z = project(z_tilde, interval);
                if (z - z_tilde).abs() > CLAMP_TOL {
                    state.clamped_predictions += 1;
                }
                z
            } else {
                z_tilde
            };
            let s = w * (1.0 - z);
            if s > 0.0 && best.map_or(true, |(_, bs, _)| s > bs) {
                best = Some((u, s, z));
            }
        }
        let (decision, reward) = match best {
            None => {
                if track_duals {
                    beta.push(0.0);
                }
                (None, 0.0)
            }
            Some((u, s, z)) => {
                let w = arrival[&u];
                if track_duals {
                    beta.push(s / (lambda * rho));
                    alpha[u] += w * z / (lambda * rho * inst.budgets()[u])
                        + delta(theta, w, budgets[u], inst.budgets()[u]);
                }
                budgets[u] = (budgets[u] - w).max(0.0);
                (Some(u), w)
            }
        };
        trace.decisions.push(decision);
        trace.rewards.push(reward);
        trace.total_reward += reward;
        trace.budgets_after.push(budgets.clone());
        trace.consumed_after.push(
            (0..u_count)
                .map(|u| inst.budgets()[u] - budgets[u])
                .collect(),
        );
        if track_duals {
            alpha_rounds.push(alpha.clone());
        }
    }

    if track_duals {
        let mut alpha_final = alpha;
        for &u in &state.insufficient_nodes {
            alpha_final[u] = alpha_final[u].max(1.0);
        }
        let dual_objective = alpha_final
            .iter()
            .zip(inst.budgets())
            .map(|(a, b)| a * b)
            .sum::<f64>()
            + beta.iter().sum::<f64>();
        state.duals = Some(LobmDuals {
            alpha_rounds,
            alpha_final,
            beta,
            dual_objective,
        });
    }
    Ok((trace, state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{gen_adversarial_pair, gen_random, Arrival, Meta, RandomParams};
    use std::f64::consts::E;

    fn arrival(pairs: &[(usize, f64)]) -> Arrival {
        pairs.iter().copied().collect()
    }

    #[test]
    fn delta_examples() {
        // w -> 0 limit
        assert!(delta(1.0, 1e-12, 0.5, 1.0).abs() < 1e-20);
        // theta=1, b=B, w=B: (e-2)/(e-1)
        let d = delta(1.0, 1.0, 1.0, 1.0);
        assert!((d - (E - 2.0) / (E - 1.0)).abs() < 1e-14);
        assert!((d - 0.41802).abs() < 1e-5);
        // theta=1, b=0, w=0.5, B=1: e/(e-1) (e^{1/2} - 3/2)
        let d = delta(1.0, 0.5, 0.0, 1.0);
        let expect = E / (E - 1.0) * (0.5_f64.exp() - 1.5);
        assert!((d - expect).abs() < 1e-14);
        assert!((d - 0.235273).abs() < 1e-6);
        // non-negative across the domain once theta >= 1
        for &theta in &[1.0, 1.5, 3.0] {
            for k in 1..=10 {
                let w = k as f64 / 10.0;
                assert!(delta(theta, w, 0.6, 1.0) >= 0.0, "theta={theta} w={w}");
            }
        }
        // below theta = 1 the bracket can dip negative
        assert!(delta(0.7, 0.3, 0.6, 1.0) < 0.0);
    }

    #[test]
    fn first_round_interval_is_a_singleton_at_full_trust() {
        let (lo, hi) = feasible_interval(0.0, 0.4, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert!((lo - 1.0 / E).abs() < 1e-12);
        assert!((hi - 1.0 / E).abs() < 1e-12);
        let (lo, hi) = feasible_interval(0.0, 0.4, 1.0, 1.0, 1.0, 0.5).unwrap();
        assert!((lo - 0.5 / E).abs() < 1e-12);
        assert!((hi - (1.0 - 0.5 * (1.0 - 1.0 / E))).abs() < 1e-12);
        assert!((lo - 0.18394).abs() < 1e-5);
        assert!((hi - 0.68394).abs() < 1e-5);
        assert!(matches!(
            feasible_interval(0.0, 0.4, 1.0, 1.0, 1.0, 0.0),
            Err(LobmError::LambdaZero)
        ));
    }

    #[test]
    fn projection_clamps() {
        assert_eq!(project(0.9, (0.18394, 0.68394)), 0.68394);
        assert_eq!(project(0.3, (0.18394, 0.68394)), 0.3);
        let singleton = (1.0 / E, 1.0 / E);
        assert_eq!(project(0.0, singleton), 1.0 / E);
    }

    #[test]
    fn single_round_run_forces_the_reference_value() {
        let inst = Instance::new(vec![1.0], vec![arrival(&[(0, 0.5)])], Meta::default()).unwrap();
        let (trace, state) = run_lobm(&inst, 1.0, 1.0, &Predictor::Constant(10.0)).unwrap();
        assert_eq!(trace.decisions, vec![Some(0)]);
        assert!((trace.total_reward - 0.5).abs() < 1e-15);
        let duals = state.duals.unwrap();
        assert!((duals.beta[0] - 0.5).abs() < 1e-12);
        assert_eq!(state.projected_predictions, 1);
        assert_eq!(state.clamped_predictions, 1);
    }

    #[test]
    fn reference_policy_is_never_clamped() {
        let params = RandomParams {
            u_count: 5,
            v_count: 20,
            mean_degree: 2.5,
            capacity_range: (1.0, 3.0),
            load_range: (0.5, 2.0),
            rate_range: (0.8, 1.2),
        };
        for &lambda in &[0.3, 0.5, 1.0] {
            for &lambda1 in &[lambda, 1.0] {
                for seed in 0..40u64 {
                    let inst = gen_random(seed, &params).unwrap();
                    let (_, state) =
                        run_lobm(&inst, 1.0, lambda, &Predictor::ReferencePolicy { lambda1 })
                            .unwrap();
                    assert_eq!(
                        state.clamped_predictions, 0,
                        "seed {seed} lambda {lambda} lambda1 {lambda1}"
                    );
                }
            }
        }
    }

    #[test]
    fn duals_stay_feasible_and_track_the_accounting_identity() {
        let params = RandomParams {
            u_count: 4,
            v_count: 15,
            mean_degree: 2.0,
            capacity_range: (1.0, 2.5),
            load_range: (0.5, 2.0),
            rate_range: (0.8, 1.2),
        };
        let predictors = [
            Predictor::Constant(0.0),
            Predictor::Constant(1.0),
            Predictor::Constant(0.5),
            Predictor::ReferencePolicy { lambda1: 1.0 },
        ];
        for &lambda in &[0.3, 0.8, 1.0] {
            for seed in 0..30u64 {
                let inst = gen_random(seed, &params).unwrap();
                for predictor in &predictors {
                    let (trace, state) = run_lobm(&inst, 1.0, lambda, predictor).unwrap();
                    let duals = state.duals.as_ref().unwrap();

                    // beta_t >= w (1 - alpha_u) for every positive bid
                    for (t, arr) in inst.arrivals().iter().enumerate() {
                        for (&u, &w) in arr {
                            assert!(
                                duals.beta[t] >= w * (1.0 - duals.alpha_final[u]) - 1e-9,
                                "seed {seed} lambda {lambda} u {u} t {t}"
                            );
                        }
                    }

                    // alpha monotone per node
                    for u in 0..inst.u_count() {
                        for t in 1..inst.v_count() {
                            assert!(duals.alpha_rounds[t][u] + 1e-12 >= duals.alpha_rounds[t - 1][u]);
                        }
                    }

                    // D_t = P_t / (lambda rho) + sum B delta along matches
                    let mut p_t = 0.0;
                    let mut delta_sum = 0.0;
                    for t in 0..inst.v_count() {
                        if let Some(u) = trace.decisions[t] {
                            let w = inst.arrivals()[t][&u];
                            let b_prev = trace.budget_before(&inst, u, t);
                            delta_sum +=
                                inst.budgets()[u] * delta(1.0, w, b_prev, inst.budgets()[u]);
                            p_t += w;
                        }
                        let d_t: f64 = duals.alpha_rounds[t]
                            .iter()
                            .zip(inst.budgets())
                            .map(|(a, b)| a * b)
                            .sum::<f64>()
                            + duals.beta[..=t].iter().sum::<f64>();
                        let expect = p_t / (lambda * state.rho_theta) + delta_sum;
                        assert!(
                            (d_t - expect).abs() < 1e-9,
                            "seed {seed} lambda {lambda} t {t}: {d_t} vs {expect}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn lambda_zero_is_pure_prediction_mode() {
        let inst = Instance::new(
            vec![1.0],
            vec![arrival(&[(0, 0.5)]), arrival(&[(0, 0.4)])],
            Meta::default(),
        )
        .unwrap();
        let (trace, state) = run_lobm(&inst, 1.0, 0.0, &Predictor::Constant(0.2)).unwrap();
        assert!(state.duals.is_none());
        assert_eq!(state.clamped_predictions, 0);
        assert_eq!(trace.decisions, vec![Some(0), Some(0)]);
        // a prediction at 1 zeroes every score: everything is skipped
        let (trace, _) = run_lobm(&inst, 1.0, 0.0, &Predictor::AdversarialOne).unwrap();
        assert_eq!(trace.decisions, vec![None, None]);
        assert_eq!(trace.total_reward, 0.0);
    }

    #[test]
    fn hard_pair_respects_the_robustness_bound() {
        use crate::offline::{solve_exact, SolveLimits};
        use crate::ratio::eta_lobm;
        for &kappa in &[0.3, 0.6, 0.9] {
            let (high, zero) = gen_adversarial_pair(kappa, 60, 1e-4).unwrap();
            for inst in [&high, &zero] {
                let opt = solve_exact(inst, false, &SolveLimits::default()).unwrap();
                for &lambda in &[0.3, 1.0] {
                    for predictor in [Predictor::AdversarialZero, Predictor::AdversarialOne] {
                        let (trace, _) = run_lobm(inst, 1.0, lambda, &predictor).unwrap();
                        let bound = eta_lobm(lambda, 1.0, inst.bid_budget_ratio()).unwrap().eta;
                        assert!(
                            trace.total_reward / opt.value >= bound - 1e-6,
                            "kappa {kappa} lambda {lambda}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn prediction_file_round_trip_and_missing_entry() {
        let dir = std::env::temp_dir().join(format!("obm-pred-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("pred.csv");
        std::fs::write(&path, "t,u,z\n0,0,0.25\n").unwrap();
        let inst = Instance::new(
            vec![1.0],
            vec![arrival(&[(0, 0.5)]), arrival(&[(0, 0.4)])],
            Meta::default(),
        )
        .unwrap();
        let err = run_lobm(&inst, 1.0, 0.5, &Predictor::FileStream(path.clone())).unwrap_err();
        assert_eq!(err, LobmError::PredictionMissing { u: 0, t: 1 });
        std::fs::write(&path, "t,u,z\n0,0,0.25\n1,0,0.75\n").unwrap();
        let (trace, _) = run_lobm(&inst, 1.0, 0.5, &Predictor::FileStream(path)).unwrap();
        assert_eq!(trace.decisions.len(), 2);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn predictor_parsing() {
        assert_eq!(Predictor::parse("adv0").unwrap(), Predictor::AdversarialZero);
        assert_eq!(Predictor::parse("adv1").unwrap(), Predictor::AdversarialOne);
        assert_eq!(
            Predictor::parse("const:0.5").unwrap(),
            Predictor::Constant(0.5)
        );
        assert_eq!(
            Predictor::parse("ref:0.7").unwrap(),
            Predictor::ReferencePolicy { lambda1: 0.7 }
        );
        assert!(Predictor::parse("nope").is_err());
    }
}
