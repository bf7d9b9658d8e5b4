//! Exact offline optimum by depth-first branch and bound, the weak-duality
//! upper bound from a certified dual trace, and empirical ratio summaries.

use std::time::{Duration, Instant};

use thiserror::Error;

use crate::dual::{DualTrace, FeasibilityReport};
use crate::instance::Instance;
use crate::online::{budget_sufficient, run_greedy, BUDGET_TOL};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OfflineError {
    #[error("dual trace was not certified feasible")]
    UncertifiedDuals,
    #[error("reward and optimum lists differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("optimum value at index {0} is not positive")]
    ZeroOpt(usize),
}

/// Search limits; `None` means unlimited.
#[derive(Debug, Clone, Copy, Default)]
pub struct SolveLimits {
    pub max_nodes: Option<u64>,
    pub max_time: Option<Duration>,
}

/// Result of an offline solve. When a limit interrupts the search,
/// `exact` is false, `value` holds the best incumbent and `bound_used`
/// the largest still-open upper bound.
#[derive(Debug, Clone, PartialEq)]
pub struct OptResult {
    pub value: f64,
    pub assignment: Vec<Option<usize>>,
    pub exact: bool,
    pub nodes_explored: u64,
    pub bound_used: f64,
}

struct Search<'a> {
    inst: &'a Instance,
    flm: bool,
    limits: &'a SolveLimits,
    started: Instant,
    nodes: u64,
    interrupted: bool,
    /// Branch positions to original round indices, largest max-bid first.
    /// The offline value is order-free (per-node reward is
    /// `min(B_u, sum of matched bids)`), so reordering is sound and puts
    /// strong incumbents and tight budget bounds up front.
    order: Vec<usize>,
    /// `[k] -> per-node sum of bids over positions k..` (`(K+1) x U`).
    suffix_node: Vec<Vec<f64>>,
    /// `[k] -> sum over positions k.. of the round's largest bid`.
    suffix_round: Vec<f64>,
    /// Multiplier vectors for the dual bound, with the matching suffix
    /// `[k] -> sum over positions k.. of max_u w (1 - alpha_u)`.
    alphas: Vec<(Vec<f64>, Vec<f64>)>,
    best_value: f64,
    best_assignment: Vec<Option<usize>>,
    open_bound: f64,
    current: Vec<Option<usize>>,
}

impl Search<'_> {
    fn out_of_budget(&mut self) -> bool {
        if let Some(max) = self.limits.max_nodes {
            if self.nodes >= max {
                self.interrupted = true;
            }
        }
        if !self.interrupted && self.nodes % 4096 == 0 {
            if let Some(max) = self.limits.max_time {
                if self.started.elapsed() >= max {
                    self.interrupted = true;
                }
            }
        }
        self.interrupted
    }

    /// Optimistic completion bound from position `k`. Three caps, none of
    /// which understates a completion because budgets only shrink down
    /// the tree:
    /// * each remaining round earns at most its largest bid;
    /// * each node earns at most `min(remaining budget, remaining bid mass)`;
    /// * for any multipliers `alpha in [0,1]^U`, splitting each earned
    ///   amount `r_u = alpha_u r_u + (1-alpha_u) r_u` gives
    ///   `sum_u r_u <= sum_u alpha_u b_u + sum_t max_u w_{u,t} (1-alpha_u)`.
    fn completion_bound(&self, k: usize, budgets: &[f64]) -> f64 {
        let per_node: f64 = budgets
            .iter()
            .zip(&self.suffix_node[k])
            .map(|(b, s)| b.min(*s))
            .sum();
        let mut bound = per_node.min(self.suffix_round[k]);
        for (alpha, suffix) in &self.alphas {
            let dual: f64 = alpha
                .iter()
                .zip(budgets)
                .map(|(a, b)| a * b)
                .sum::<f64>()
                + suffix[k];
            bound = bound.min(dual);
        }
        bound
    }

    /// Replay the current assignment in original arrival order. Keeps
    /// reported values bit-identical to an order-respecting enumeration.
    fn canonical_value(&self, budgets_template: &[f64]) -> f64 {
        let mut budgets = budgets_template.to_vec();
        let mut value = 0.0;
        for (t, decision) in self.current.iter().enumerate() {
            if let Some(u) = decision {
                let w = self.inst.arrivals()[t][u];
                let gain = if budget_sufficient(budgets[*u], w, false) {
                    w
                } else {
                    budgets[*u]
                };
                budgets[*u] = (budgets[*u] - gain).max(0.0);
                value += gain;
            }
        }
        value
    }

    fn dfs(&mut self, k: usize, value: f64, budgets: &mut Vec<f64>) {
        self.nodes += 1;
        if self.out_of_budget() {
            self.open_bound = self
                .open_bound
                .max(value + self.completion_bound(k, budgets));
            return;
        }
        if k == self.order.len() {
            if value > self.best_value - 1e-9 {
                let canonical = self.canonical_value(self.inst.budgets());
                if canonical > self.best_value {
                    self.best_value = canonical;
                    self.best_assignment = self.current.clone();
                }
            }
            return;
        }
        // A subtree that cannot strictly improve the incumbent is useless;
        // pruning at equality is what collapses the plateau of co-optimal
        // assignments on saturated instances.
        if value + self.completion_bound(k, budgets) <= self.best_value {
            return;
        }
        let t = self.order[k];
        // Feasible matches first, highest immediate reward first, then skip.
        let mut children: Vec<(usize, f64)> = Vec::new();
        for (&u, &w) in &self.inst.arrivals()[t] {
            let gain = if budget_sufficient(budgets[u], w, false) {
                w
            } else if self.flm && budgets[u] > BUDGET_TOL {
                budgets[u]
            } else {
                continue;
            };
            children.push((u, gain));
        }
        children.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        for (u, gain) in children {
            let saved = budgets[u];
            budgets[u] = (saved - gain).max(0.0);
            self.current[t] = Some(u);
            self.dfs(k + 1, value + gain, budgets);
            budgets[u] = saved;
            self.current[t] = None;
        }
        self.dfs(k + 1, value, budgets);
    }
}

/// Minimize the dual objective
/// `f(alpha) = sum_u alpha_u b_u + sum_t max_u w_{u,t} (1 - alpha_u)`
/// over `[0,1]^U`; its exact minimum is the relaxation optimum, and any
/// point is a valid bound. Coordinate descent (exact piecewise-linear line
/// searches) warm-starts a projected-subgradient polish, which cannot
/// stall on the kinks the way coordinate descent can.
fn descend_alpha(inst: &Instance, budgets: &[f64]) -> Vec<f64> {
    let u_count = inst.u_count();
    let objective = |alpha: &[f64]| -> f64 {
        let mut f: f64 = alpha.iter().zip(budgets).map(|(a, b)| a * b).sum();
        for arrival in inst.arrivals() {
            f += arrival
                .iter()
                .map(|(u, w)| w * (1.0 - alpha[*u]))
                .fold(0.0_f64, f64::max);
        }
        f
    };
    let mut alpha = vec![0.5_f64; u_count];
    for _ in 0..3 {
        for u in 0..u_count {
            // rounds where u bids, with the best competing discounted bid
            let mut candidates = vec![0.0_f64, 1.0];
            let mut rounds: Vec<(f64, f64)> = Vec::new(); // (w_u, competitor)
            for arrival in inst.arrivals() {
                let Some(&w) = arrival.get(&u) else { continue };
                let competitor = arrival
                    .iter()
                    .filter(|(v, _)| **v != u)
                    .map(|(v, wv)| wv * (1.0 - alpha[*v]))
                    .fold(0.0_f64, f64::max);
                rounds.push((w, competitor));
                let breakpoint = 1.0 - competitor / w;
                if breakpoint > 0.0 && breakpoint < 1.0 {
                    candidates.push(breakpoint);
                }
            }
            let line = |a: f64| -> f64 {
                budgets[u] * a
                    + rounds
                        .iter()
                        .map(|(w, c)| c.max(w * (1.0 - a)))
                        .sum::<f64>()
            };
            let mut best = (line(alpha[u]), alpha[u]);
            for a in candidates {
                let v = line(a);
                if v < best.0 {
                    best = (v, a);
                }
            }
            alpha[u] = best.1;
        }
    }

    let mut best_alpha = alpha.clone();
    let mut best_f = objective(&alpha);
    let scale = budgets.iter().copied().fold(1e-12_f64, f64::max);
    for iter in 1..=1500u32 {
        // subgradient: b_u minus the bid mass of rounds u currently wins
        let mut grad = budgets.to_vec();
        for arrival in inst.arrivals() {
            let mut winner: Option<(usize, f64)> = None;
            for (&u, &w) in arrival {
                let v = w * (1.0 - alpha[u]);
                if winner.map_or(true, |(_, bv)| v > bv) {
                    winner = Some((u, v));
                }
            }
            if let Some((u, _)) = winner {
                grad[u] -= arrival[&u];
            }
        }
        let step = 0.5 / (scale * (iter as f64).sqrt());
        for u in 0..u_count {
            alpha[u] = (alpha[u] - step * grad[u]).clamp(0.0, 1.0);
        }
        let f = objective(&alpha);
        if f < best_f {
            best_f = f;
            best_alpha = alpha.clone();
        }
    }
    best_alpha
}

/// Exact optimum of the offline assignment problem under the given
/// matching semantics. Fractional last matching lets a node accept its
/// remaining budget once (the node is exhausted afterwards).
pub fn solve_exact(
    inst: &Instance,
    flm: bool,
    limits: &SolveLimits,
) -> Result<OptResult, OfflineError> {
    let u_count = inst.u_count();
    let mut order: Vec<usize> = (0..inst.v_count())
        .filter(|t| !inst.arrivals()[*t].is_empty())
        .collect();
    let round_max = |t: usize| -> f64 {
        inst.arrivals()[t]
            .values()
            .copied()
            .fold(0.0_f64, f64::max)
    };
    order.sort_by(|a, b| round_max(*b).total_cmp(&round_max(*a)).then(a.cmp(b)));

    let positions = order.len();
    let mut suffix_node = vec![vec![0.0_f64; u_count]; positions + 1];
    let mut suffix_round = vec![0.0_f64; positions + 1];
    for k in (0..positions).rev() {
        let t = order[k];
        suffix_node[k] = suffix_node[k + 1].clone();
        for (&u, &w) in &inst.arrivals()[t] {
            suffix_node[k][u] += w;
        }
        suffix_round[k] = suffix_round[k + 1] + round_max(t);
    }

    // Dual multipliers tuned for the root budgets and for partially
    // consumed ones (deeper search nodes).
    let mut alphas = Vec::new();
    for shrink in [1.0, 0.5, 0.25] {
        let scaled: Vec<f64> = inst.budgets().iter().map(|b| b * shrink).collect();
        let alpha = descend_alpha(inst, &scaled);
        if alphas
            .iter()
            .any(|(existing, _): &(Vec<f64>, Vec<f64>)| existing == &alpha)
        {
            continue;
        }
        let mut suffix = vec![0.0_f64; positions + 1];
        for k in (0..positions).rev() {
            let t = order[k];
            let best = inst.arrivals()[t]
                .iter()
                .map(|(u, w)| w * (1.0 - alpha[*u]))
                .fold(0.0_f64, f64::max);
            suffix[k] = suffix[k + 1] + best;
        }
        alphas.push((alpha, suffix));
    }

    // Seed the incumbent with the greedy value so pruning bites early.
    let greedy = run_greedy(inst, flm);
    let mut search = Search {
        inst,
        flm,
        limits,
        started: Instant::now(),
        nodes: 0,
        interrupted: false,
        order,
        suffix_node,
        suffix_round,
        alphas,
        best_value: (greedy.total_reward - 1e-12).max(0.0),
        best_assignment: Vec::new(),
        open_bound: 0.0,
        current: vec![None; inst.v_count()],
    };
    let mut budgets = inst.budgets().to_vec();
    search.dfs(0, 0.0, &mut budgets);
    let exact = !search.interrupted;
    let mut assignment = search.best_assignment;
    let mut value = search.best_value;
    if assignment.is_empty() {
        // Greedy was never improved upon; reuse its assignment verbatim.
        assignment = greedy.decisions;
        value = greedy.total_reward;
    }
    Ok(OptResult {
        value,
        assignment,
        exact,
        nodes_explored: search.nodes,
        bound_used: if exact { value } else { search.open_bound.max(value) },
    })
}

/// The certified weak-duality bound `D >= OPT`. Callers pass the
/// feasibility report produced for the same duals; unclean reports are
/// rejected.
pub fn dual_upper_bound(
    duals: &DualTrace,
    feasibility: &FeasibilityReport,
) -> Result<f64, OfflineError> {
    if feasibility.is_clean() {
        Ok(duals.dual_objective)
    } else {
        Err(OfflineError::UncertifiedDuals)
    }
}

/// Distribution summary of per-instance reward ratios.
#[derive(Debug, Clone, PartialEq)]
pub struct CrSummary {
    pub min: f64,
    pub mean: f64,
    /// Nearest-rank percentiles at 50, 90, 95, 99, and 100.
    pub percentiles: Vec<(u8, f64)>,
}

/// Ratios of algorithm reward to offline optimum: min, mean, and
/// nearest-rank percentiles.
pub fn empirical_cr(alg_rewards: &[f64], opt_values: &[f64]) -> Result<CrSummary, OfflineError> {
    if alg_rewards.len() != opt_values.len() {
        return Err(OfflineError::LengthMismatch(
            alg_rewards.len(),
            opt_values.len(),
        ));
    }
    let mut ratios = Vec::with_capacity(alg_rewards.len());
    for (i, (p, opt)) in alg_rewards.iter().zip(opt_values).enumerate() {
        if !(*opt > 0.0) {
            return Err(OfflineError::ZeroOpt(i));
        }
        ratios.push(p / opt);
    }
    let mut sorted = ratios.clone();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let nearest_rank = |p: u8| -> f64 {
        let rank = ((p as f64 / 100.0 * n as f64).ceil() as usize).clamp(1, n);
        sorted[rank - 1]
    };
    Ok(CrSummary {
        min: sorted[0],
        mean: ratios.iter().sum::<f64>() / n as f64,
        percentiles: [50u8, 90, 95, 99, 100]
            .iter()
            .map(|&p| (p, nearest_rank(p)))
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discount::DiscountSpec;
    use crate::dual::{check_dual_feasibility, construct_duals};
    use crate::instance::{gen_adversarial_pair, gen_random, Arrival, Meta, RandomParams};
    use crate::online::run_metaad;
    use std::f64::consts::E;

    fn arrival(pairs: &[(usize, f64)]) -> Arrival {
        pairs.iter().copied().collect()
    }

    fn tight_instance() -> Instance {
        Instance::new(
            vec![1.0],
            vec![arrival(&[(0, 0.6)]), arrival(&[(0, 0.5)])],
            Meta::default(),
        )
        .unwrap()
    }

    #[test]
    fn exact_values_on_the_tight_instance() {
        let inst = tight_instance();
        let plain = solve_exact(&inst, false, &SolveLimits::default()).unwrap();
        assert!(plain.exact);
        assert!((plain.value - 0.6).abs() < 1e-15);
        let flm = solve_exact(&inst, true, &SolveLimits::default()).unwrap();
        assert!((flm.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hard_pair_optimum_skips_one_small_round() {
        let (high, zero) = gen_adversarial_pair(0.5, 50, 0.005).unwrap();
        let omega = 0.505 / 50.0;
        let opt = solve_exact(&high, false, &SolveLimits::default()).unwrap();
        assert!(opt.exact);
        assert!((opt.value - (1.005 - omega)).abs() < 1e-12);
        assert!((opt.value - 0.99490).abs() < 1e-5);
        let opt_zero = solve_exact(&zero, false, &SolveLimits::default()).unwrap();
        assert!((opt_zero.value - 0.505).abs() < 1e-12);
    }

    #[test]
    fn limits_return_an_incumbent() {
        let params = RandomParams {
            u_count: 6,
            v_count: 22,
            mean_degree: 3.0,
            capacity_range: (1.0, 2.0),
            load_range: (0.5, 1.5),
            rate_range: (0.8, 1.2),
        };
        let inst = gen_random(11, &params).unwrap();
        let limited = solve_exact(
            &inst,
            false,
            &SolveLimits {
                max_nodes: Some(10),
                max_time: None,
            },
        )
        .unwrap();
        assert!(!limited.exact);
        let full = solve_exact(&inst, false, &SolveLimits::default()).unwrap();
        assert!(full.exact);
        assert!(limited.value <= full.value + 1e-12);
        assert!(limited.bound_used >= full.value - 1e-9);
    }

    /// Plain recursive enumeration of every feasible assignment; shares
    /// nothing with the branch-and-bound path.
    fn enumerate_exact(inst: &Instance, flm: bool) -> f64 {
        fn rec(inst: &Instance, flm: bool, t: usize, value: f64, budgets: &mut Vec<f64>) -> f64 {
            if t == inst.v_count() {
                return value;
            }
            let mut best = rec(inst, flm, t + 1, value, budgets);
            let arrival = inst.arrivals()[t].clone();
            for (&u, &w) in &arrival {
                let gain = if budgets[u] >= w - BUDGET_TOL {
                    w
                } else if flm && budgets[u] > BUDGET_TOL {
                    budgets[u]
                } else {
                    continue;
                };
                let saved = budgets[u];
                budgets[u] = (saved - gain).max(0.0);
                best = best.max(rec(inst, flm, t + 1, value + gain, budgets));
                budgets[u] = saved;
            }
            best
        }
        let mut budgets = inst.budgets().to_vec();
        rec(inst, flm, 0, 0.0, &mut budgets)
    }

    #[test]
    fn branch_and_bound_equals_enumeration() {
        let params = RandomParams {
            u_count: 4,
            v_count: 9,
            mean_degree: 2.0,
            capacity_range: (0.8, 2.0),
            load_range: (0.4, 1.6),
            rate_range: (0.8, 1.2),
        };
        for seed in 0..100u64 {
            let inst = gen_random(seed, &params).unwrap();
            for flm in [false, true] {
                let bb = solve_exact(&inst, flm, &SolveLimits::default()).unwrap();
                let brute = enumerate_exact(&inst, flm);
                assert_eq!(bb.value, brute, "seed {seed} flm {flm}");
            }
        }
    }

    #[test]
    fn flm_relaxation_dominates_and_beats_online() {
        let params = RandomParams {
            u_count: 5,
            v_count: 14,
            mean_degree: 2.5,
            capacity_range: (1.0, 2.5),
            load_range: (0.5, 2.0),
            rate_range: (0.8, 1.2),
        };
        let spec = DiscountSpec::Exponential {
            c: 1.0 / (E - 1.0),
            theta: 1.0,
        };
        for seed in 0..50u64 {
            let inst = gen_random(seed, &params).unwrap();
            let plain = solve_exact(&inst, false, &SolveLimits::default()).unwrap();
            let flm = solve_exact(&inst, true, &SolveLimits::default()).unwrap();
            assert!(flm.value >= plain.value - 1e-12);
            for semantics in [false, true] {
                let opt = if semantics { &flm } else { &plain };
                let online = run_metaad(&inst, &spec, semantics);
                assert!(opt.value >= online.total_reward - 1e-9, "seed {seed}");
            }
        }
    }

    #[test]
    fn dual_bound_dominates_the_exact_optimum() {
        let spec = DiscountSpec::Exponential {
            c: 1.0 / (E - 1.0),
            theta: 1.0,
        };
        // two-node worked example
        let inst = Instance::new(
            vec![1.0, 1.0],
            vec![
                arrival(&[(0, 0.4), (1, 0.3)]),
                arrival(&[(0, 0.5), (1, 0.5)]),
            ],
            Meta::default(),
        )
        .unwrap();
        let trace = run_metaad(&inst, &spec, false);
        let duals = construct_duals(&inst, &spec, &trace, false).unwrap();
        let feas = check_dual_feasibility(&inst, &duals);
        let bound = dual_upper_bound(&duals, &feas).unwrap();
        let opt = solve_exact(&inst, false, &SolveLimits::default()).unwrap();
        assert!((opt.value - 0.9).abs() < 1e-12);
        assert!(bound >= opt.value);

        // greedy insufficiency example: D = 1.6 >= OPT = 0.6
        let inst = tight_instance();
        let trace = run_metaad(&inst, &DiscountSpec::ConstantOne, false);
        let duals = construct_duals(&inst, &DiscountSpec::ConstantOne, &trace, false).unwrap();
        let feas = check_dual_feasibility(&inst, &duals);
        let bound = dual_upper_bound(&duals, &feas).unwrap();
        assert!((bound - 1.6).abs() < 1e-12);
        assert!(bound >= 0.6);

        // uncertified duals are rejected
        let mut broken = duals.clone();
        broken.alpha_final[0] = 0.0;
        let feas = check_dual_feasibility(&inst, &broken);
        assert_eq!(
            dual_upper_bound(&broken, &feas).unwrap_err(),
            OfflineError::UncertifiedDuals
        );
    }

    #[test]
    fn empirical_cr_examples() {
        let s = empirical_cr(&[0.5], &[1.0]).unwrap();
        assert_eq!(s.min, 0.5);
        assert_eq!(s.mean, 0.5);
        let s = empirical_cr(&[0.3, 0.7], &[0.3, 0.7]).unwrap();
        assert_eq!(s.min, 1.0);
        assert!(s.percentiles.iter().all(|(_, v)| *v == 1.0));
        assert!(matches!(
            empirical_cr(&[1.0], &[1.0, 2.0]),
            Err(OfflineError::LengthMismatch(1, 2))
        ));
        assert!(matches!(
            empirical_cr(&[1.0], &[0.0]),
            Err(OfflineError::ZeroOpt(0))
        ));
    }

    #[test]
    fn greedy_ratio_on_the_hard_pair() {
        let (high, zero) = gen_adversarial_pair(0.5, 50, 0.005).unwrap();
        let rewards = vec![
            run_greedy(&high, false).total_reward,
            run_greedy(&zero, false).total_reward,
        ];
        let opts = vec![
            solve_exact(&high, false, &SolveLimits::default()).unwrap().value,
            solve_exact(&zero, false, &SolveLimits::default()).unwrap().value,
        ];
        let s = empirical_cr(&rewards, &opts).unwrap();
        assert!((s.min - 0.50758).abs() < 1e-4, "{}", s.min);
        assert!(s.min <= 0.5 + 0.01);
    }
}
