//! `verify`: the end-to-end invariant battery. Prints one line per check
//! and reports overall success through the exit code.

use anyhow::Result;
use rayon::prelude::*;

use obm::{
    check_dual_feasibility, check_primal_dual_ratio, construct_duals, eta_exponential_flm,
    eta_flm_general_auto, eta_general_auto, eta_lobm, eta_poly, eta_quadratic, gen_adversarial_pair,
    gen_random, optimize_eta, run_lobm, run_metaad_opts, solve_exact, upper_bound, DiscountSpec,
    Instance, OptimizeFamily, Predictor, RandomParams, RunOptions, SolveLimits,
};

pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn report(checks: &mut Vec<Check>, name: &'static str, pass: bool, detail: String) {
    println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    checks.push(Check { name, pass, detail });
}

fn verification_suite(seed: u64, count: usize) -> Vec<(String, Instance)> {
    let shapes = [
        RandomParams {
            u_count: 4,
            v_count: 15,
            mean_degree: 2.0,
            capacity_range: (1.0, 3.0),
            load_range: (0.5, 2.0),
            rate_range: (0.8, 1.2),
        },
        RandomParams {
            u_count: 6,
            v_count: 20,
            mean_degree: 3.0,
            capacity_range: (2.0, 5.0),
            load_range: (0.5, 2.5),
            rate_range: (0.5, 1.5),
        },
        RandomParams {
            u_count: 8,
            v_count: 12,
            mean_degree: 4.0,
            capacity_range: (20.0, 40.0),
            load_range: (1.0, 4.0),
            rate_range: (0.08, 0.12),
        },
    ];
    (0..count)
        .map(|i| {
            let params = &shapes[i % shapes.len()];
            let inst = gen_random(seed.wrapping_add(i as u64), params).expect("valid params");
            (format!("verify_{i:03}"), inst)
        })
        .collect()
}

pub fn cmd_verify(seed: u64, strict: bool) -> Result<bool> {
    let mut checks = Vec::new();

    // hard pairs force the deterministic upper bound
    let mut worst_margin = f64::INFINITY;
    let mut bound_ok = true;
    for k in 1..=9 {
        let kappa = k as f64 / 10.0;
        let (high, zero) = gen_adversarial_pair(kappa, 50, 1e-4).map_err(|e| anyhow::anyhow!("{e}"))?;
        let opt_high = solve_exact(&high, false, &SolveLimits::default()).unwrap().value;
        let opt_zero = solve_exact(&zero, false, &SolveLimits::default()).unwrap().value;
        let algs: Vec<DiscountSpec> = vec![
            DiscountSpec::ConstantOne,
            DiscountSpec::ClassicSmallBid,
            optimize_eta(OptimizeFamily::Exponential, kappa, false)
                .unwrap()
                .spec
                .unwrap(),
            DiscountSpec::Polynomial {
                coeffs: vec![0.0, 1.0],
            },
        ];
        for spec in &algs {
            let opts = RunOptions { flm: false, strict };
            let r_high = run_metaad_opts(&high, spec, opts).total_reward / opt_high;
            let r_zero = run_metaad_opts(&zero, spec, opts).total_reward / opt_zero;
            let min_ratio = r_high.min(r_zero);
            worst_margin = worst_margin.min(upper_bound(kappa) + 0.01 - min_ratio);
            if min_ratio > upper_bound(kappa) + 0.01 {
                bound_ok = false;
            }
        }
    }
    report(
        &mut checks,
        "upper-bound witness",
        bound_ok,
        format!("min ratios stay below 1-kappa+0.01 (tightest margin {worst_margin:.4})"),
    );

    // dual certification across algorithms and semantics
    let suite = verification_suite(seed, 200);
    let cert_failures: usize = suite
        .par_iter()
        .map(|(_, inst)| {
            let kappa = inst.bid_budget_ratio();
            let mut bad = 0usize;
            for flm in [false, true] {
                let opt = solve_exact(inst, flm, &SolveLimits::default()).unwrap();
                let specs = vec![
                    (DiscountSpec::ConstantOne, None),
                    {
                        let r = optimize_eta(OptimizeFamily::Exponential, kappa, flm).unwrap();
                        (r.spec.clone().unwrap(), Some(r.eta))
                    },
                ];
                for (spec, closed_eta) in specs {
                    let trace = run_metaad_opts(inst, &spec, RunOptions { flm, strict });
                    let duals = construct_duals(inst, &spec, &trace, flm).unwrap();
                    if !check_dual_feasibility(inst, &duals).is_clean() {
                        bad += 1;
                    }
                    let eta = closed_eta.unwrap_or_else(|| {
                        let r = if flm {
                            eta_flm_general_auto(&spec, kappa)
                        } else {
                            eta_general_auto(&spec, kappa)
                        };
                        r.map(|r| r.eta).unwrap_or(0.0)
                    });
                    if !check_primal_dual_ratio(trace.total_reward, duals.dual_objective, eta)
                        .passed()
                    {
                        bad += 1;
                    }
                    if trace.total_reward < eta * opt.value - 1e-9 {
                        bad += 1;
                    }
                    if flm
                        && spec == DiscountSpec::ConstantOne
                        && trace.total_reward < 0.5 * opt.value - 1e-9
                    {
                        bad += 1;
                    }
                }
            }
            bad
        })
        .sum();
    report(
        &mut checks,
        "dual certification",
        cert_failures == 0,
        format!("{cert_failures} failures over 200 instances x algorithms x semantics"),
    );

    // ratio-curve invariants
    let mut curve_ok = true;
    let mut prev = f64::INFINITY;
    for i in 0..25 {
        let kappa = 0.96 * i as f64 / 24.0;
        let opt = optimize_eta(OptimizeFamily::Exponential, kappa, false).unwrap();
        let flm = optimize_eta(OptimizeFamily::Exponential, kappa, true).unwrap();
        if opt.eta > upper_bound(kappa) + 1e-9
            || opt.eta > prev + 1e-6
            || flm.eta < opt.eta - 1e-9
            || flm.eta < 0.5 - 1e-9
        {
            curve_ok = false;
        }
        prev = opt.eta;
        let quad_gap =
            (eta_quadratic(kappa).unwrap().eta - eta_poly(&[0.0, 1.0], kappa).unwrap().eta).abs();
        if quad_gap > 1e-9 {
            curve_ok = false;
        }
    }
    if eta_exponential_flm(0.0, 1.0, 0.77).unwrap().eta != 0.5 {
        curve_ok = false;
    }
    report(
        &mut checks,
        "ratio curves",
        curve_ok,
        "optimized curve monotone, below 1-kappa, dominated by its fractional variant".into(),
    );

    // learning-augmented robustness
    let lobm_suite: Vec<(String, Instance)> = suite.iter().take(50).cloned().collect();
    let mut pairs = Vec::new();
    for k in [2, 5, 8] {
        let kappa = k as f64 / 10.0;
        let (high, zero) = gen_adversarial_pair(kappa, 50, 1e-4).unwrap();
        pairs.push((format!("adv{k}h"), high));
        pairs.push((format!("adv{k}z"), zero));
    }
    let lobm_failures: usize = lobm_suite
        .par_iter()
        .chain(pairs.par_iter())
        .map(|(_, inst)| {
            let opt = solve_exact(inst, false, &SolveLimits::default()).unwrap().value;
            let kappa = inst.bid_budget_ratio();
            let mut bad = 0usize;
            for &lambda in &[0.3, 1.0] {
                let predictors = [
                    Predictor::AdversarialZero,
                    Predictor::AdversarialOne,
                    Predictor::Constant(0.5),
                    Predictor::ReferencePolicy { lambda1: lambda },
                ];
                for predictor in predictors {
                    match run_lobm(inst, 1.0, lambda, &predictor) {
                        Err(_) => bad += 1,
                        Ok((trace, state)) => {
                            let bound = eta_lobm(lambda, 1.0, kappa).map(|r| r.eta).unwrap_or(0.0);
                            if opt > 0.0 && trace.total_reward / opt < bound - 1e-6 {
                                bad += 1;
                            }
                            if matches!(predictor, Predictor::ReferencePolicy { .. })
                                && state.clamped_predictions > 0
                            {
                                bad += 1;
                            }
                        }
                    }
                }
            }
            bad
        })
        .sum();
    report(
        &mut checks,
        "learning-augmented robustness",
        lobm_failures == 0,
        format!("{lobm_failures} failures across predictors and slackness levels"),
    );

    let all = checks.iter().all(|c| c.pass);
    if all {
        println!("verify: PASS ({} checks)", checks.len());
    } else {
        let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name).collect();
        println!("verify: FAIL ({}): {}", failed.len(), failed.join(", "));
        for check in checks.iter().filter(|c| !c.pass) {
            eprintln!("  {}: {}", check.name, check.detail);
        }
    }
    Ok(all)
}
