//! Command-line front door for the online-budgeted-matching toolkit:
//! instance generation, algorithm sweeps with dual certification,
//! ratio-curve emission, learning-augmented experiments, and the
//! invariant battery.

mod algs;
mod common;
mod curve;
mod gen;
mod lobm_cmd;
mod run;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use crate::algs::AlgSpec;

#[derive(Parser)]
#[command(name = "obm", about = "online budgeted matching experiment harness")]
struct Cli {
    /// Output directory for instance files and CSV reports.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Base seed for every pseudo-random choice; no wall-clock seeding.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for per-instance jobs (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    /// Disable numeric tolerances in budget-feasibility comparisons.
    #[arg(long, global = true)]
    strict: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate instance files plus a manifest with recomputed ratios.
    Gen(GenCli),
    /// Run algorithms over instances and report rewards, optima, ratios.
    Run(RunCli),
    /// Emit competitive-ratio curves over a kappa grid.
    Curve(CurveCli),
    /// Run the learning-augmented matcher across predictors.
    Lobm(LobmCli),
    /// Run the full invariant suite; exit code reflects the outcome.
    Verify,
}

#[derive(Args)]
struct GenCli {
    /// Emit the hard pair (shared prefix, high/absent final bid).
    #[arg(long)]
    adversarial: bool,
    #[arg(long, default_value_t = 0.5)]
    kappa: f64,
    /// Number of small rounds in the hard pair.
    #[arg(long, default_value_t = 50)]
    m: usize,
    #[arg(long, default_value_t = 1e-6)]
    eps: f64,
    /// Emit seeded random placement-style instances.
    #[arg(long)]
    random: bool,
    #[arg(long, default_value_t = 10)]
    count: usize,
    #[arg(long, default_value_t = 10)]
    u: usize,
    #[arg(long, default_value_t = 100)]
    v: usize,
    #[arg(long, default_value_t = 4.0)]
    degree: f64,
    #[arg(long, default_value_t = 20.0)]
    cap_lo: f64,
    #[arg(long, default_value_t = 40.0)]
    cap_hi: f64,
    #[arg(long, default_value_t = 1.0)]
    load_lo: f64,
    #[arg(long, default_value_t = 4.0)]
    load_hi: f64,
    #[arg(long, default_value_t = 0.08)]
    rate_lo: f64,
    #[arg(long, default_value_t = 0.12)]
    rate_hi: f64,
}

#[derive(Args)]
struct RunCli {
    /// Instance file or directory of *.json instances.
    #[arg(long)]
    instances: PathBuf,
    /// Algorithm, repeatable: greedy | metaad:classic | metaad:quadratic |
    /// metaad:opt | metaad:exponential:C=<f>,theta=<f> | metaad:poly:<c1>,<c2>,...
    #[arg(long = "alg", required = true)]
    algs: Vec<String>,
    /// Fractional-last-matching semantics.
    #[arg(long)]
    flm: bool,
    /// Construct and check duals per run; adds certification columns.
    #[arg(long)]
    certify: bool,
    /// Node cap for the exact solver before it reports a bound.
    #[arg(long)]
    max_nodes: Option<u64>,
    /// Time cap (seconds) for the exact solver per instance.
    #[arg(long)]
    max_seconds: Option<u64>,
}

#[derive(Args)]
struct CurveCli {
    /// Kappa grid start:end:points, end < 1.
    #[arg(long, default_value = "0:0.98:50")]
    grid: String,
    #[arg(long)]
    flm: bool,
    /// Emit learning-augmented bound curves for these slackness values.
    #[arg(long, value_delimiter = ',')]
    lobm_lambdas: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    lobm_theta: f64,
}

#[derive(Args)]
struct LobmCli {
    #[arg(long)]
    instances: PathBuf,
    /// Slackness values, repeatable or comma-separated.
    #[arg(long = "lambda", required = true, value_delimiter = ',')]
    lambdas: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    theta: f64,
    /// Predictor, repeatable: file:<path> | const:<v> | ref:<lambda1> | adv0 | adv1.
    #[arg(long = "predictor", required = true)]
    predictors: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<bool> {
    if cli.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.workers)
            .build_global()
            .ok();
    }
    match cli.command {
        Command::Gen(args) => {
            gen::cmd_gen(
                &cli.out,
                cli.seed,
                &gen::GenArgs {
                    adversarial: args.adversarial,
                    random: args.random,
                    kappa: args.kappa,
                    m: args.m,
                    eps: args.eps,
                    count: args.count,
                    u: args.u,
                    v: args.v,
                    degree: args.degree,
                    cap: (args.cap_lo, args.cap_hi),
                    load: (args.load_lo, args.load_hi),
                    rate: (args.rate_lo, args.rate_hi),
                },
            )?;
            Ok(true)
        }
        Command::Run(args) => {
            let algs = args
                .algs
                .iter()
                .map(|a| AlgSpec::parse(a))
                .collect::<Result<Vec<_>>>()?;
            run::cmd_run(
                &cli.out,
                &run::RunArgs {
                    instances: args.instances,
                    algs,
                    flm: args.flm,
                    certify: args.certify,
                    strict: cli.strict,
                    max_nodes: args.max_nodes,
                    max_seconds: args.max_seconds,
                },
            )
        }
        Command::Curve(args) => {
            curve::cmd_curve(
                &cli.out,
                &curve::CurveArgs {
                    grid: curve::parse_grid(&args.grid)?,
                    flm: args.flm,
                    lobm_lambdas: args.lobm_lambdas,
                    lobm_theta: args.lobm_theta,
                },
            )?;
            Ok(true)
        }
        Command::Lobm(args) => lobm_cmd::cmd_lobm(
            &cli.out,
            &lobm_cmd::LobmArgs {
                instances: args.instances,
                lambdas: args.lambdas,
                theta: args.theta,
                predictors: args.predictors,
            },
        ),
        Command::Verify => verify::cmd_verify(cli.seed, cli.strict),
    }
}
