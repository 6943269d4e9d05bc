//! Capacity-linked model families and policy selectors used by sweeps and the
//! command line.

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use ehpower::dist::{EnergyModel, SystemParams};
use ehpower::mdp::MdpSolution;
use ehpower::policy::{solve_bernoulli_kkt, PolicySpec};

/// An arrival-model family whose parameters scale with the battery capacity,
/// so one family describes a whole capacity sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelFamily {
    /// Full-recharge Bernoulli arrivals: amplitude equals the capacity.
    Bernoulli { p: f64 },
    /// Uniform arrivals on `[0, bbar]`.
    Uniform,
    /// Exponential arrivals with mean `mean_frac * bbar`.
    Exponential { mean_frac: f64 },
}

impl ModelFamily {
    pub fn instantiate(&self, bbar: f64) -> anyhow::Result<EnergyModel> {
        let model = match *self {
            ModelFamily::Bernoulli { p } => EnergyModel::bernoulli(p, bbar)?,
            ModelFamily::Uniform => EnergyModel::uniform(0.0, bbar)?,
            ModelFamily::Exponential { mean_frac } => {
                EnergyModel::exponential(mean_frac * bbar)?
            }
        };
        Ok(model)
    }

    pub fn label(&self) -> String {
        match self {
            ModelFamily::Bernoulli { p } => format!("bernoulli(p={p})"),
            ModelFamily::Uniform => "uniform".into(),
            ModelFamily::Exponential { mean_frac } => format!("exp(mean={mean_frac}*bbar)"),
        }
    }
}

/// A policy selector that is resolved against a concrete model and capacity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicyKind {
    /// Fixed Fraction; `q = None` infers `mu/bbar` from the model.
    FixedFraction {
        #[serde(default)]
        q: Option<f64>,
    },
    Greedy,
    /// Constant policy at the clipped mean.
    Constant,
    /// Optimal allocation for full-recharge Bernoulli arrivals.
    BernoulliOptimal,
    /// Action table loaded from a solver output file.
    Tabular { path: String },
}

impl PolicyKind {
    pub fn label(&self) -> &'static str {
        match self {
            PolicyKind::FixedFraction { .. } => "ff",
            PolicyKind::Greedy => "greedy",
            PolicyKind::Constant => "const",
            PolicyKind::BernoulliOptimal => "bopt",
            PolicyKind::Tabular { .. } => "tabular",
        }
    }

    pub fn build(
        &self,
        model: &EnergyModel,
        params: &SystemParams,
    ) -> anyhow::Result<PolicySpec> {
        let spec = match self {
            PolicyKind::FixedFraction { q: Some(q) } => PolicySpec::fixed_fraction(*q)?,
            PolicyKind::FixedFraction { q: None } => {
                PolicySpec::fixed_fraction_for(model, params)?
            }
            PolicyKind::Greedy => PolicySpec::Greedy,
            PolicyKind::Constant => PolicySpec::constant_for(model, params)?,
            PolicyKind::BernoulliOptimal => match *model {
                EnergyModel::Bernoulli { p, amplitude }
                    if amplitude >= params.bbar() && p > 0.0 =>
                {
                    PolicySpec::BernoulliOptimal(solve_bernoulli_kkt(p, params)?)
                }
                _ => bail!(
                    "the optimal-Bernoulli policy needs Bernoulli arrivals with p > 0 \
                     and a full-recharge amplitude"
                ),
            },
            PolicyKind::Tabular { path } => {
                let solution = MdpSolution::read_from(std::path::Path::new(path))
                    .with_context(|| format!("loading solution `{path}`"))?;
                if (solution.bbar - params.bbar()).abs() > 1e-9 * params.bbar().max(1.0) {
                    bail!(
                        "solution `{path}` was solved for capacity {}, not {}",
                        solution.bbar,
                        params.bbar()
                    );
                }
                solution.tabular_policy()?
            }
        };
        Ok(spec)
    }
}

/// Parse the CLI policy grammar: `ff`, `ff:q=0.2`, `greedy`, `const`, `bopt`
/// or `tabular:<path>`.
pub fn parse_policy_kind(text: &str) -> anyhow::Result<PolicyKind> {
    let kind = match text {
        "ff" => PolicyKind::FixedFraction { q: None },
        "greedy" => PolicyKind::Greedy,
        "const" => PolicyKind::Constant,
        "bopt" => PolicyKind::BernoulliOptimal,
        _ => {
            if let Some(rest) = text.strip_prefix("ff:") {
                let q = rest
                    .strip_prefix("q=")
                    .with_context(|| format!("expected `ff:q=<value>`, got `{text}`"))?
                    .parse::<f64>()
                    .with_context(|| format!("bad fraction in `{text}`"))?;
                PolicyKind::FixedFraction { q: Some(q) }
            } else if let Some(path) = text.strip_prefix("tabular:") {
                PolicyKind::Tabular { path: path.into() }
            } else {
                bail!(
                    "unknown policy `{text}` (expected ff, ff:q=..., greedy, const, bopt \
                     or tabular:<path>)"
                );
            }
        }
    };
    Ok(kind)
}
