//! Online budgeted matching with budget-aware discounted scoring.
//!
//! Arriving queries are matched to budget-constrained offline nodes to
//! maximize total accepted bid value. This crate bundles:
//!
//! * [`instance`] — the problem type, validation, the bid-budget ratio,
//!   adversarial and random generators, and the JSON file format;
//! * [`discount`] — discounting-function families with exact derivatives
//!   and antiderivatives;
//! * [`online`] — the online matching loop (with and without fractional
//!   last matching) producing full run traces;
//! * [`dual`] — dual variables constructed alongside a run, feasibility
//!   certification, and the ratio condition on discounting functions;
//! * [`ratio`] — competitive-ratio formulas: the general guarantee, the
//!   exponential/polynomial closed forms, the `1 - kappa` upper bound,
//!   the learning-augmented bound, and parameter optimization;
//! * [`lobm`] — the learning-augmented matcher that projects predictions
//!   onto the competitive solution space;
//! * [`offline`] — exact offline optima by branch and bound, weak-duality
//!   upper bounds, and empirical ratio summaries.

pub mod discount;
pub mod dual;
pub mod instance;
pub mod lobm;
pub mod numeric;
pub mod offline;
pub mod online;
pub mod ratio;

pub use discount::{DiscountError, DiscountSpec, SpecViolation};
pub use dual::{
    check_dual_feasibility, check_phi_condition, check_primal_dual_ratio, construct_duals,
    DualError, DualTrace, FeasibilityReport, PdRatioCheck, PhiConditionReport,
};
pub use instance::{
    gen_adversarial, gen_adversarial_pair, gen_random, AdversarialParams, Arrival, Instance,
    InstanceError, Meta, RandomParams, Tail, Violations,
};
pub use lobm::{
    delta, feasible_interval, project, run_lobm, LobmDuals, LobmError, LobmState, Predictor,
};
pub use offline::{
    dual_upper_bound, empirical_cr, solve_exact, CrSummary, OfflineError, OptResult, SolveLimits,
};
pub use online::{run_greedy, run_metaad, run_metaad_opts, score, RunOptions, RunTrace};
pub use ratio::{
    auto_order, delta_max, eta_exponential, eta_exponential_flm, eta_flm_general,
    eta_flm_general_auto, eta_general, eta_general_auto, eta_lobm, eta_poly, eta_quadratic,
    optimize_eta, upper_bound, OptimizeFamily, RatioError, RatioMethod, RatioReport,
};
