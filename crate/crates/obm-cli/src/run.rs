//! `run`: execute algorithms over an instance set, solve or bound the
//! offline optimum, optionally certify every run's duals, and report.

use std::path::Path;
use std::time::Duration;

use anyhow::Result;
use rayon::prelude::*;

use obm::{
    check_dual_feasibility, check_primal_dual_ratio, construct_duals, dual_upper_bound,
    empirical_cr, run_metaad_opts, solve_exact, Instance, RunOptions, SolveLimits,
};

use crate::algs::AlgSpec;
use crate::common::{fmt, load_instances, write_csv};

pub struct RunArgs {
    pub instances: std::path::PathBuf,
    pub algs: Vec<AlgSpec>,
    pub flm: bool,
    pub certify: bool,
    pub strict: bool,
    pub max_nodes: Option<u64>,
    pub max_seconds: Option<u64>,
}

struct Row {
    instance_id: String,
    algorithm: String,
    spec: String,
    p: f64,
    opt: f64,
    opt_exact: bool,
    ratio: f64,
    cert_pass: Option<bool>,
    cert: Option<CertRow>,
}

struct CertRow {
    kappa: f64,
    d: f64,
    eta: f64,
    violations: usize,
    min_pd_gap: f64,
}

/// Returns false when any certification-class check failed (the process
/// exit code tracks this).
pub fn cmd_run(out_dir: &Path, args: &RunArgs) -> Result<bool> {
    let instances = load_instances(&args.instances)?;
    let limits = SolveLimits {
        max_nodes: args.max_nodes,
        max_time: args.max_seconds.map(Duration::from_secs),
    };

    let mut jobs: Vec<(usize, &(String, Instance), &AlgSpec)> = Vec::new();
    let mut idx = 0;
    for pair in &instances {
        for alg in &args.algs {
            jobs.push((idx, pair, alg));
            idx += 1;
        }
    }

    let mut rows: Vec<(usize, Row)> = jobs
        .par_iter()
        .map(|(idx, (id, inst), alg)| {
            let row = run_one(id, inst, alg, args, &limits);
            (*idx, row)
        })
        .collect();
    rows.sort_by_key(|(idx, _)| *idx);
    let rows: Vec<Row> = rows.into_iter().map(|(_, r)| r).collect();

    let mut all_pass = true;
    let header = [
        "instance_id",
        "algorithm",
        "spec",
        "flm",
        "P",
        "opt",
        "opt_kind",
        "ratio",
        "cert_pass",
    ];
    let mut out_rows: Vec<Vec<String>> = Vec::new();
    for row in &rows {
        if row.cert_pass == Some(false) {
            all_pass = false;
        }
        out_rows.push(vec![
            row.instance_id.clone(),
            row.algorithm.clone(),
            row.spec.clone(),
            args.flm.to_string(),
            fmt(row.p),
            fmt(row.opt),
            if row.opt_exact { "exact" } else { "bound" }.into(),
            fmt(row.ratio),
            row.cert_pass.map(|p| p.to_string()).unwrap_or_default(),
        ]);
    }

    // summary rows per algorithm: min/mean plus nearest-rank percentiles
    let mut algorithms: Vec<String> = rows.iter().map(|r| r.algorithm.clone()).collect();
    algorithms.dedup();
    algorithms.sort();
    algorithms.dedup();
    for algorithm in &algorithms {
        let (ps, opts): (Vec<f64>, Vec<f64>) = rows
            .iter()
            .filter(|r| &r.algorithm == algorithm && r.opt > 0.0)
            .map(|r| (r.p, r.opt))
            .unzip();
        if ps.is_empty() {
            continue;
        }
        let summary = empirical_cr(&ps, &opts).map_err(|e| anyhow::anyhow!("{e}"))?;
        let mut push = |metric: &str, value: f64| {
            out_rows.push(vec![
                format!("summary:{metric}"),
                algorithm.clone(),
                String::new(),
                args.flm.to_string(),
                String::new(),
                String::new(),
                String::new(),
                fmt(value),
                String::new(),
            ]);
        };
        push("min", summary.min);
        push("mean", summary.mean);
        for (p, v) in &summary.percentiles {
            push(&format!("p{p}"), *v);
        }
    }
    write_csv(out_dir, "results.csv", &header, &out_rows)?;

    if args.certify {
        let cert_header = [
            "instance_id",
            "algorithm",
            "spec",
            "kappa",
            "P",
            "D",
            "OPT",
            "eta",
            "dual_feasibility_violations",
            "min_primal_dual_gap",
        ];
        let cert_rows: Vec<Vec<String>> = rows
            .iter()
            .filter_map(|row| {
                row.cert.as_ref().map(|cert| {
                    vec![
                        row.instance_id.clone(),
                        row.algorithm.clone(),
                        row.spec.clone(),
                        fmt(cert.kappa),
                        fmt(row.p),
                        fmt(cert.d),
                        fmt(row.opt),
                        fmt(cert.eta),
                        cert.violations.to_string(),
                        fmt(cert.min_pd_gap),
                    ]
                })
            })
            .collect();
        write_csv(out_dir, "certification.csv", &cert_header, &cert_rows)?;
    }
    println!(
        "ran {} algorithm x instance pairs; certification {}",
        rows.len(),
        if !args.certify {
            "skipped".to_string()
        } else if all_pass {
            "clean".to_string()
        } else {
            "FAILED".to_string()
        }
    );
    Ok(all_pass)
}

fn run_one(id: &str, inst: &Instance, alg: &AlgSpec, args: &RunArgs, limits: &SolveLimits) -> Row {
    let kappa = inst.bid_budget_ratio();
    let (algorithm, spec, report) = alg
        .resolve(kappa, args.flm)
        .expect("algorithm resolution is validated at parse time");
    let trace = run_metaad_opts(
        inst,
        &spec,
        RunOptions {
            flm: args.flm,
            strict: args.strict,
        },
    );
    let opt = solve_exact(inst, args.flm, limits).expect("solver returns an incumbent");

    let duals = construct_duals(inst, &spec, &trace, args.flm).expect("trace was just produced");
    let feasibility = check_dual_feasibility(inst, &duals);

    // Exact optimum when the search finished; otherwise fall back to the
    // certified dual bound so the reported ratio stays a lower bound.
    let (opt_value, opt_exact) = if opt.exact {
        (opt.value, true)
    } else {
        let bound = dual_upper_bound(&duals, &feasibility).unwrap_or(opt.bound_used);
        (bound.max(opt.value), false)
    };
    let ratio = if opt_value > 0.0 {
        trace.total_reward / opt_value
    } else {
        1.0
    };

    let cert = if args.certify {
        let eta = report.eta;
        let min_pd_gap = match report.gamma {
            Some(gamma) => {
                let mut min_gap = f64::INFINITY;
                let mut p_t = 0.0;
                for t in 0..inst.v_count() {
                    p_t += trace.rewards[t];
                    min_gap = min_gap.min(p_t - duals.running_dual(inst, t) / gamma);
                }
                if min_gap == f64::INFINITY {
                    0.0
                } else {
                    min_gap
                }
            }
            None => trace.total_reward - eta * duals.dual_objective,
        };
        Some(CertRow {
            kappa,
            d: duals.dual_objective,
            eta,
            violations: feasibility.violations.len(),
            min_pd_gap,
        })
    } else {
        None
    };
    let cert_pass = args.certify.then(|| {
        feasibility.is_clean()
            && check_primal_dual_ratio(trace.total_reward, duals.dual_objective, report.eta)
                .passed()
    });
    Row {
        instance_id: id.to_string(),
        algorithm,
        spec: AlgSpec::spec_column(&spec),
        p: trace.total_reward,
        opt: opt_value,
        opt_exact,
        ratio,
        cert_pass,
        cert,
    }
}
