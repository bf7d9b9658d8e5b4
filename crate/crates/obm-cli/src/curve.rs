//! `curve`: competitive-ratio curves over a bid-budget-ratio grid.

use std::path::Path;

use anyhow::{bail, Result};
use obm::{
    eta_exponential, eta_exponential_flm, eta_lobm, eta_quadratic, optimize_eta, upper_bound,
    DiscountSpec, OptimizeFamily,
};

use crate::common::{fmt, write_csv};

pub struct CurveArgs {
    pub grid: (f64, f64, usize),
    pub flm: bool,
    pub lobm_lambdas: Vec<f64>,
    pub lobm_theta: f64,
}

/// Parse `a:b:n` into an inclusive grid description.
pub fn parse_grid(text: &str) -> Result<(f64, f64, usize)> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        bail!("grid must look like start:end:points, got {text:?}");
    }
    let start: f64 = parts[0].parse()?;
    let end: f64 = parts[1].parse()?;
    let points: usize = parts[2].parse()?;
    if points < 2 || !(0.0..=1.0).contains(&start) || !(start..1.0 + 1e-12).contains(&end) {
        bail!("grid {text:?} outside [0,1) or too few points");
    }
    Ok((start, end, points))
}

pub fn cmd_curve(out_dir: &Path, args: &CurveArgs) -> Result<()> {
    let (start, end, points) = args.grid;
    let header = [
        "kappa",
        "eta_opt",
        "theta_opt",
        "C_opt",
        "eta_quadratic",
        "eta_greedy",
        "upper_bound",
        "flm",
    ];
    let mut rows = Vec::with_capacity(points);
    let mut lobm_rows = Vec::new();
    for i in 0..points {
        let kappa = start + (end - start) * i as f64 / (points - 1) as f64;
        let opt = optimize_eta(OptimizeFamily::Exponential, kappa, args.flm)
            .map_err(|e| anyhow::anyhow!("{e}"))?;
        let (c_opt, theta_opt) = match &opt.spec {
            Some(DiscountSpec::Exponential { c, theta }) => (*c, *theta),
            _ => (0.0, 1.0),
        };
        let quad = if args.flm {
            optimize_eta(OptimizeFamily::Quadratic, kappa, true)
                .map_err(|e| anyhow::anyhow!("{e}"))?
                .eta
        } else {
            eta_quadratic(kappa).map_err(|e| anyhow::anyhow!("{e}"))?.eta
        };
        let greedy = if args.flm {
            eta_exponential_flm(0.0, 1.0, kappa)
        } else {
            eta_exponential(0.0, 1.0, kappa)
        }
        .map_err(|e| anyhow::anyhow!("{e}"))?
        .eta;
        rows.push(vec![
            fmt(kappa),
            fmt(opt.eta),
            fmt(theta_opt),
            fmt(c_opt),
            fmt(quad),
            fmt(greedy),
            fmt(upper_bound(kappa)),
            args.flm.to_string(),
        ]);
        for &lambda in &args.lobm_lambdas {
            let eta = eta_lobm(lambda, args.lobm_theta, kappa)
                .map_err(|e| anyhow::anyhow!("{e}"))?
                .eta;
            lobm_rows.push(vec![
                fmt(kappa),
                fmt(lambda),
                fmt(args.lobm_theta),
                fmt(eta),
            ]);
        }
    }
    write_csv(out_dir, "curve.csv", &header, &rows)?;
    if !lobm_rows.is_empty() {
        write_csv(
            out_dir,
            "lobm_curve.csv",
            &["kappa", "lambda", "theta", "eta_lobm"],
            &lobm_rows,
        )?;
    }
    println!("wrote {points} curve rows");
    Ok(())
}
