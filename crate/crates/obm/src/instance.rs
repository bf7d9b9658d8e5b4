//! Problem instances: budgets, sparse arrival bids, validation, the
//! bid-budget ratio, generators, and the JSON file format.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Binomial;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Sparse bids of one online arrival: offline-node index -> bid value.
/// Zero bids are represented by absence.
pub type Arrival = BTreeMap<usize, f64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InstanceError {
    #[error("budget of node {u} must be positive")]
    NegativeBudget { u: usize },
    #[error("arrival {t} bids on out-of-range node {u}")]
    OutOfRangeNodeIndex { u: usize, t: usize },
    #[error("bid ({u}, {t}) must be strictly positive")]
    NonPositiveBid { u: usize, t: usize },
    #[error("bid ({u}, {t}) exceeds the node budget (kappa > 1)")]
    KappaExceedsOne { u: usize, t: usize },
    #[error("omega {omega} exceeds kappa {kappa}: choose a larger round count")]
    OmegaExceedsKappa { omega: f64, kappa: f64 },
    #[error("invalid adversarial parameters: {0}")]
    InvalidAdversarialParams(String),
    #[error("invalid distribution parameters: {0}")]
    InvalidDistributionParams(String),
    #[error("parse error: {0}")]
    ParseError(String),
    #[error("io error: {0}")]
    Io(String),
}

/// All violations found while validating raw instance data.
#[derive(Debug, Clone, PartialEq)]
pub struct Violations(pub Vec<InstanceError>);

impl fmt::Display for Violations {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msgs: Vec<String> = self.0.iter().map(|e| e.to_string()).collect();
        write!(f, "{}", msgs.join("; "))
    }
}

impl std::error::Error for Violations {}

/// Optional provenance attached to an instance.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generator: Option<String>,
    /// Advisory only; the validator recomputes the actual ratio.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
}

impl Meta {
    fn is_empty(&self) -> bool {
        self.seed.is_none() && self.generator.is_none() && self.kappa.is_none()
    }
}

/// A validated online-budgeted-matching instance.
///
/// Invariants established by [`Instance::new`]: every budget is positive
/// and finite, every stored bid is strictly positive, bids never exceed
/// the owning node's budget, and every bid index is in range. Arrival
/// order is the online order. Instances are immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Instance {
    budgets: Vec<f64>,
    #[serde(serialize_with = "ser_arrivals")]
    arrivals: Vec<Arrival>,
    #[serde(skip_serializing_if = "Meta::is_empty", default)]
    meta: Meta,
}

impl Instance {
    /// Validate raw data and build an instance, or report every violation.
    pub fn new(budgets: Vec<f64>, arrivals: Vec<Arrival>, meta: Meta) -> Result<Self, Violations> {
        let mut errs = Vec::new();
        for (u, b) in budgets.iter().enumerate() {
            if !(*b > 0.0) || !b.is_finite() {
                errs.push(InstanceError::NegativeBudget { u });
            }
        }
        for (t, arrival) in arrivals.iter().enumerate() {
            for (&u, &w) in arrival {
                if u >= budgets.len() {
                    errs.push(InstanceError::OutOfRangeNodeIndex { u, t });
                    continue;
                }
                if !(w > 0.0) || !w.is_finite() {
                    errs.push(InstanceError::NonPositiveBid { u, t });
                } else if budgets[u] > 0.0 && w > budgets[u] {
                    errs.push(InstanceError::KappaExceedsOne { u, t });
                }
            }
        }
        if errs.is_empty() {
            Ok(Instance {
                budgets,
                arrivals,
                meta,
            })
        } else {
            Err(Violations(errs))
        }
    }

    pub fn budgets(&self) -> &[f64] {
        &self.budgets
    }

    pub fn arrivals(&self) -> &[Arrival] {
        &self.arrivals
    }

    pub fn meta(&self) -> &Meta {
        &self.meta
    }

    /// Number of offline nodes `U`.
    pub fn u_count(&self) -> usize {
        self.budgets.len()
    }

    /// Number of online rounds `V`.
    pub fn v_count(&self) -> usize {
        self.arrivals.len()
    }

    /// The bid-budget ratio: the maximum over stored bids of `w / B`.
    /// Zero for an instance with no bids. Always `<= 1` by construction.
    pub fn bid_budget_ratio(&self) -> f64 {
        let mut kappa = 0.0_f64;
        for arrival in &self.arrivals {
            for (&u, &w) in arrival {
                kappa = kappa.max(w / self.budgets[u]);
            }
        }
        kappa
    }

    /// Serialize to the JSON schema (pretty-printed, trailing newline).
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("instance serializes");
        s.push('\n');
        s
    }

    /// Parse and validate an instance from its JSON representation.
    pub fn from_json(text: &str) -> Result<Self, InstanceError> {
        let raw: RawInstance =
            serde_json::from_str(text).map_err(|e| InstanceError::ParseError(e.to_string()))?;
        let mut arrivals = Vec::with_capacity(raw.arrivals.len());
        for (t, arrival) in raw.arrivals.into_iter().enumerate() {
            let mut map = Arrival::new();
            for (key, w) in arrival {
                let u: usize = key.parse().map_err(|_| {
                    InstanceError::ParseError(format!(
                        "arrival {t}: key {key:?} is not a node index"
                    ))
                })?;
                map.insert(u, w);
            }
            arrivals.push(map);
        }
        Instance::new(raw.budgets, arrivals, raw.meta)
            .map_err(|v| InstanceError::ParseError(v.to_string()))
    }

    pub fn write_json(&self, path: &Path) -> Result<(), InstanceError> {
        std::fs::write(path, self.to_json()).map_err(|e| InstanceError::Io(e.to_string()))
    }

    pub fn read_json(path: &Path) -> Result<Self, InstanceError> {
        let text = std::fs::read_to_string(path).map_err(|e| InstanceError::Io(e.to_string()))?;
        Self::from_json(&text)
    }
}

fn ser_arrivals<S: serde::Serializer>(arrivals: &[Arrival], ser: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = ser.serialize_seq(Some(arrivals.len()))?;
    for arrival in arrivals {
        let map: BTreeMap<String, f64> = arrival
            .iter()
            .map(|(u, w)| (u.to_string(), *w))
            .collect();
        seq.serialize_element(&map)?;
    }
    seq.end()
}

#[derive(Deserialize)]
struct RawInstance {
    budgets: Vec<f64>,
    arrivals: Vec<BTreeMap<String, f64>>,
    #[serde(default)]
    meta: Meta,
}

/// Which final round the hard-pair generator emits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Tail {
    /// Final round carries a bid of `kappa`.
    HighTail,
    /// Final round carries no bid at all.
    ZeroTail,
}

/// Parameters of the single-node hard instance family: `m` small rounds of
/// bid `omega = (1 - kappa + epsilon) / m` against budget 1, then either a
/// final bid of `kappa` or nothing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdversarialParams {
    pub kappa: f64,
    pub m: usize,
    pub epsilon: f64,
    pub tail: Tail,
}

impl AdversarialParams {
    pub fn omega(&self) -> f64 {
        (1.0 - self.kappa + self.epsilon) / self.m as f64
    }
}

/// Generate one hard instance. The `HighTail`/`ZeroTail` pair with the same
/// `(kappa, m, epsilon)` shares its first `m` rounds and differs only in
/// the final one.
pub fn gen_adversarial(params: &AdversarialParams) -> Result<Instance, InstanceError> {
    if !(params.kappa > 0.0 && params.kappa <= 1.0) {
        return Err(InstanceError::InvalidAdversarialParams(format!(
            "kappa {} outside (0,1]",
            params.kappa
        )));
    }
    if params.m == 0 || !(params.epsilon > 0.0) {
        return Err(InstanceError::InvalidAdversarialParams(
            "m must be >= 1 and epsilon > 0".into(),
        ));
    }
    let omega = params.omega();
    if omega > params.kappa {
        return Err(InstanceError::OmegaExceedsKappa {
            omega,
            kappa: params.kappa,
        });
    }
    let mut arrivals: Vec<Arrival> = (0..params.m)
        .map(|_| BTreeMap::from([(0usize, omega)]))
        .collect();
    arrivals.push(match params.tail {
        Tail::HighTail => BTreeMap::from([(0usize, params.kappa)]),
        Tail::ZeroTail => BTreeMap::new(),
    });
    let meta = Meta {
        seed: None,
        generator: Some(format!(
            "adversarial:{}",
            if params.tail == Tail::HighTail { "high" } else { "zero" }
        )),
        kappa: Some(params.kappa),
    };
    Instance::new(vec![1.0], arrivals, meta).map_err(|v| InstanceError::ParseError(v.to_string()))
}

/// Both members of the hard pair, `(HighTail, ZeroTail)`.
pub fn gen_adversarial_pair(
    kappa: f64,
    m: usize,
    epsilon: f64,
) -> Result<(Instance, Instance), InstanceError> {
    let high = gen_adversarial(&AdversarialParams {
        kappa,
        m,
        epsilon,
        tail: Tail::HighTail,
    })?;
    let zero = gen_adversarial(&AdversarialParams {
        kappa,
        m,
        epsilon,
        tail: Tail::ZeroTail,
    })?;
    Ok((high, zero))
}

/// Parameters of the server-placement style random generator. Each server
/// `u` draws a per-unit rate `r_u` and a raw capacity `B'_u` (budget
/// `B_u = r_u B'_u`); each arrival draws a load `z_t` and a binomial number
/// of connections; connected pairs bid `w = r_u z_t`, clipped at `B_u`.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomParams {
    pub u_count: usize,
    pub v_count: usize,
    /// Mean degree `d_v`; each arrival connects to `Binomial(U, d_v / U)` servers.
    pub mean_degree: f64,
    pub capacity_range: (f64, f64),
    pub load_range: (f64, f64),
    pub rate_range: (f64, f64),
}

impl RandomParams {
    /// The recipe used throughout the experiment harness:
    /// 10 servers, 100 arrivals, capacities in [20,40], loads in [1,4],
    /// rates in [0.08,0.12].
    pub fn placement_default() -> Self {
        RandomParams {
            u_count: 10,
            v_count: 100,
            mean_degree: 4.0,
            capacity_range: (20.0, 40.0),
            load_range: (1.0, 4.0),
            rate_range: (0.08, 0.12),
        }
    }
}

/// Deterministically generate a random instance from `seed`.
pub fn gen_random(seed: u64, params: &RandomParams) -> Result<Instance, InstanceError> {
    let check_range = |name: &str, (lo, hi): (f64, f64)| {
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            Err(InstanceError::InvalidDistributionParams(format!(
                "{name} range [{lo}, {hi}]"
            )))
        } else {
            Ok(())
        }
    };
    check_range("capacity", params.capacity_range)?;
    check_range("load", params.load_range)?;
    check_range("rate", params.rate_range)?;
    if params.u_count == 0 {
        return Err(InstanceError::InvalidDistributionParams(
            "u_count must be >= 1".into(),
        ));
    }
    let p = params.mean_degree / params.u_count as f64;
    if !(0.0..=1.0).contains(&p) {
        return Err(InstanceError::InvalidDistributionParams(format!(
            "mean degree {} outside [0, U]",
            params.mean_degree
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unif = |range: (f64, f64)| {
        if range.0 == range.1 {
            Uniform::new_inclusive(range.0, range.1)
        } else {
            Uniform::new(range.0, range.1)
        }
    };
    let rate_dist = unif(params.rate_range);
    let cap_dist = unif(params.capacity_range);
    let load_dist = unif(params.load_range);
    let degree_dist = Binomial::new(params.u_count as u64, p)
        .map_err(|e| InstanceError::InvalidDistributionParams(e.to_string()))?;

    let rates: Vec<f64> = (0..params.u_count).map(|_| rate_dist.sample(&mut rng)).collect();
    let budgets: Vec<f64> = rates
        .iter()
        .map(|r| r * cap_dist.sample(&mut rng))
        .collect();

    let mut arrivals = Vec::with_capacity(params.v_count);
    for _ in 0..params.v_count {
        let load = load_dist.sample(&mut rng);
        let degree = degree_dist.sample(&mut rng) as usize;
        let chosen = rand::seq::index::sample(&mut rng, params.u_count, degree);
        let mut arrival = Arrival::new();
        for u in chosen {
            let w = (rates[u] * load).min(budgets[u]);
            arrival.insert(u, w);
        }
        arrivals.push(arrival);
    }
    let max_kappa =
        (params.load_range.1 * params.rate_range.1) / (params.capacity_range.0 * params.rate_range.0);
    let meta = Meta {
        seed: Some(seed),
        generator: Some("random".into()),
        kappa: Some(max_kappa.min(1.0)),
    };
    Instance::new(budgets, arrivals, meta).map_err(|v| InstanceError::ParseError(v.to_string()))
}
