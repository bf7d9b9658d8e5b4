//! The online matching loop: discounted scoring, argmax selection with
//! lowest-index ties, skip handling, and budget bookkeeping, with or
//! without fractional last matching.

use crate::discount::DiscountSpec;
use crate::instance::Instance;

/// Tolerance absorbed by budget comparisons during non-strict runs.
pub const BUDGET_TOL: f64 = 1e-12;

/// Options for a single run.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Allow a node with insufficient budget to accept its remaining
    /// budget as a final partial match.
    pub flm: bool,
    /// Disable the `BUDGET_TOL` slack in feasibility comparisons.
    pub strict: bool,
}

/// Round-by-round record of one online run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    /// Selected node per round; `None` is a skip.
    pub decisions: Vec<Option<usize>>,
    /// Reward earned per round (the charged amount).
    pub rewards: Vec<f64>,
    /// Remaining budget of every node after each round (`V x U`).
    pub budgets_after: Vec<Vec<f64>>,
    /// Consumed budget of every node after each round (`V x U`).
    pub consumed_after: Vec<Vec<f64>>,
    /// Total reward `P`.
    pub total_reward: f64,
    pub flm: bool,
}

impl RunTrace {
    /// Remaining budget of `u` entering round `t`.
    pub fn budget_before(&self, inst: &Instance, u: usize, t: usize) -> f64 {
        if t == 0 {
            inst.budgets()[u]
        } else {
            self.budgets_after[t - 1][u]
        }
    }
}

/// Whether remaining budget `b` suffices for bid `w`.
pub fn budget_sufficient(b: f64, w: f64, strict: bool) -> bool {
    if strict {
        b >= w
    } else {
        b >= w - BUDGET_TOL
    }
}

/// The score a node receives for a bid: `w * phi(b / B)` when the budget
/// suffices, else 0 without fractional matching or `b * phi(b / B)` with it.
pub fn score(spec: &DiscountSpec, w: f64, b: f64, total: f64, flm: bool) -> f64 {
    score_opts(spec, w, b, total, RunOptions { flm, strict: false })
}

fn score_opts(spec: &DiscountSpec, w: f64, b: f64, total: f64, opts: RunOptions) -> f64 {
    let ratio = (b / total).clamp(0.0, 1.0);
    let phi = spec.phi(ratio).expect("ratio is clamped to [0,1]");
    if budget_sufficient(b, w, opts.strict) {
        w * phi
    } else if opts.flm {
        b * phi
    } else {
        0.0
    }
}

/// Run the discounted-score online algorithm over the whole arrival
/// sequence. Deterministic: the argmax breaks ties toward the lowest node
/// index, and a round is skipped exactly when no node scores above zero.
pub fn run_metaad(inst: &Instance, spec: &DiscountSpec, flm: bool) -> RunTrace {
    run_metaad_opts(inst, spec, RunOptions { flm, strict: false })
}

pub fn run_metaad_opts(inst: &Instance, spec: &DiscountSpec, opts: RunOptions) -> RunTrace {
    let u_count = inst.u_count();
    let mut budgets = inst.budgets().to_vec();
    let mut trace = RunTrace {
        decisions: Vec::with_capacity(inst.v_count()),
        rewards: Vec::with_capacity(inst.v_count()),
        budgets_after: Vec::with_capacity(inst.v_count()),
        consumed_after: Vec::with_capacity(inst.v_count()),
        total_reward: 0.0,
        flm: opts.flm,
    };
    for arrival in inst.arrivals() {
        let mut best: Option<(usize, f64)> = None;
        for (&u, &w) in arrival {
            let s = score_opts(spec, w, budgets[u], inst.budgets()[u], opts);
            if s > 0.0 && best.map_or(true, |(_, bs)| s > bs) {
                best = Some((u, s));
            }
        }
        let (decision, reward) = match best {
            None => (None, 0.0),
            Some((u, _)) => {
                let w = arrival[&u];
                let b = budgets[u];
                let charge = if budget_sufficient(b, w, opts.strict) {
                    w
                } else {
                    b
                };
                budgets[u] = (b - charge).max(0.0);
                (Some(u), charge)
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
    }
    trace
}

/// The greedy specialization: no discounting at all.
pub fn run_greedy(inst: &Instance, flm: bool) -> RunTrace {
    run_metaad(inst, &DiscountSpec::ConstantOne, flm)
}
