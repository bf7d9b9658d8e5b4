//! Algorithm selection strings and the per-instance guarantee they carry.

use anyhow::{bail, Context, Result};
use obm::{
    eta_flm_general_auto, eta_general_auto, optimize_eta, DiscountSpec, OptimizeFamily,
    RatioReport,
};

/// One `--alg` entry. `OptimizedExp` re-tunes the exponential parameters
/// to each instance's bid-budget ratio.
#[derive(Debug, Clone, PartialEq)]
pub enum AlgSpec {
    Fixed { name: String, spec: DiscountSpec },
    OptimizedExp,
}

impl AlgSpec {
    /// Accepted forms: `greedy`, `metaad:classic`, `metaad:quadratic`,
    /// `metaad:opt`, `metaad:exponential:C=<f>,theta=<f>`,
    /// `metaad:poly:<c1>,<c2>,...`.
    pub fn parse(text: &str) -> Result<Self> {
        if text == "greedy" {
            return Ok(AlgSpec::Fixed {
                name: "greedy".into(),
                spec: DiscountSpec::ConstantOne,
            });
        }
        let Some(rest) = text.strip_prefix("metaad:") else {
            bail!("unknown algorithm {text:?}");
        };
        if rest == "classic" {
            return Ok(AlgSpec::Fixed {
                name: text.into(),
                spec: DiscountSpec::ClassicSmallBid,
            });
        }
        if rest == "quadratic" {
            return Ok(AlgSpec::Fixed {
                name: text.into(),
                spec: DiscountSpec::Polynomial {
                    coeffs: vec![0.0, 1.0],
                },
            });
        }
        if rest == "opt" {
            return Ok(AlgSpec::OptimizedExp);
        }
        if let Some(params) = rest.strip_prefix("exponential:") {
            let mut c = None;
            let mut theta = None;
            for part in params.split(',') {
                let (key, value) = part
                    .split_once('=')
                    .with_context(|| format!("expected key=value in {part:?}"))?;
                let value: f64 = value.parse().with_context(|| format!("bad value {value:?}"))?;
                match key {
                    "C" | "c" => c = Some(value),
                    "theta" => theta = Some(value),
                    other => bail!("unknown exponential parameter {other:?}"),
                }
            }
            let spec = DiscountSpec::Exponential {
                c: c.context("missing C")?,
                theta: theta.context("missing theta")?,
            };
            return Ok(AlgSpec::Fixed {
                name: text.into(),
                spec,
            });
        }
        if let Some(list) = rest.strip_prefix("poly:") {
            let coeffs: Vec<f64> = list
                .split(',')
                .map(|v| v.parse().with_context(|| format!("bad coefficient {v:?}")))
                .collect::<Result<_>>()?;
            return Ok(AlgSpec::Fixed {
                name: text.into(),
                spec: DiscountSpec::Polynomial { coeffs },
            });
        }
        bail!("unknown algorithm {text:?}")
    }

    /// Resolve to a concrete discounting function and its guarantee at
    /// this instance's bid-budget ratio.
    pub fn resolve(&self, kappa: f64, flm: bool) -> Result<(String, DiscountSpec, RatioReport)> {
        match self {
            AlgSpec::OptimizedExp => {
                let report = optimize_eta(OptimizeFamily::Exponential, kappa, flm)
                    .map_err(|e| anyhow::anyhow!("{e}"))?;
                let spec = report.spec.clone().expect("optimizer returns its argmax");
                Ok(("metaad:opt".into(), spec, report))
            }
            AlgSpec::Fixed { name, spec } => {
                let report = if flm {
                    eta_flm_general_auto(spec, kappa)
                } else {
                    eta_general_auto(spec, kappa)
                }
                .map_err(|e| anyhow::anyhow!("{e}"))?;
                Ok((name.clone(), spec.clone(), report))
            }
        }
    }

    /// Stable serialization of the resolved spec for report columns.
    pub fn spec_column(spec: &DiscountSpec) -> String {
        match spec {
            DiscountSpec::ConstantOne => "constant_one".into(),
            DiscountSpec::ClassicSmallBid => "classic_small_bid".into(),
            DiscountSpec::Exponential { c, theta } => format!("exponential(C={c:.6},theta={theta:.6})"),
            DiscountSpec::Polynomial { coeffs } => {
                let list: Vec<String> = coeffs.iter().map(|c| format!("{c:.6}")).collect();
                format!("polynomial({})", list.join(";"))
            }
        }
    }
}
