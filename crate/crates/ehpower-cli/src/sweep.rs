//! Capacity sweeps: evaluate a set of policies over a grid of battery sizes
//! against the optimal throughput.

use anyhow::Context;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use ehpower::analytic::{bernoulli_optimal_throughput, upper_bound};
use ehpower::dist::SystemParams;
use ehpower::mdp::MdpConfig;
use ehpower::policy::solve_bernoulli_kkt;
use ehpower::sim::{run, SimConfig};

use crate::family::{ModelFamily, PolicyKind};
use crate::report::SweepRow;

/// Monte Carlo settings for each sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimSettings {
    pub horizon: u64,
    pub runs: u64,
    pub seed: u64,
}

/// Serializable mirror of the solver configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MdpSettings {
    pub n_states: usize,
    pub n_actions: usize,
    pub span_tol: f64,
    pub max_iters: usize,
    pub arrival_atoms: usize,
}

impl Default for MdpSettings {
    fn default() -> Self {
        let d = MdpConfig::default();
        MdpSettings {
            n_states: d.n_states,
            n_actions: d.n_actions,
            span_tol: d.span_tol,
            max_iters: d.max_iters,
            arrival_atoms: d.arrival_atoms,
        }
    }
}

impl From<MdpSettings> for MdpConfig {
    fn from(s: MdpSettings) -> Self {
        MdpConfig {
            n_states: s.n_states,
            n_actions: s.n_actions,
            span_tol: s.span_tol,
            max_iters: s.max_iters,
            arrival_atoms: s.arrival_atoms,
        }
    }
}

/// A full sweep description; the JSON config file mirrors this structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub family: ModelFamily,
    pub bbar_grid: Vec<f64>,
    pub gamma: f64,
    pub policies: Vec<PolicyKind>,
    pub sim: SimSettings,
    /// Obtain the optimal throughput from the dynamic-programming solver.
    /// When false, the closed form is used for full-recharge Bernoulli
    /// families and other families get no optimum column.
    #[serde(default)]
    pub include_mdp_optimal: bool,
    /// Solver resolution for `include_mdp_optimal`; defaults to the solver's
    /// own defaults.
    #[serde(default)]
    pub mdp: Option<MdpSettings>,
}

impl SweepSpec {
    fn validate(&self) -> anyhow::Result<()> {
        anyhow::ensure!(!self.bbar_grid.is_empty(), "empty capacity grid");
        anyhow::ensure!(
            self.bbar_grid.iter().all(|b| b.is_finite() && *b > 0.0),
            "capacities must be positive"
        );
        anyhow::ensure!(
            self.bbar_grid.windows(2).all(|w| w[0] < w[1]),
            "capacity grid must be strictly increasing"
        );
        anyhow::ensure!(self.gamma > 0.0, "gamma must be positive");
        anyhow::ensure!(!self.policies.is_empty(), "no policies to sweep");
        anyhow::ensure!(
            self.sim.horizon >= 1 && self.sim.runs >= 1,
            "horizon and runs must be at least 1"
        );
        Ok(())
    }
}

/// Logarithmically spaced grid from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2 && lo > 0.0 && hi > lo);
    let ratio = hi / lo;
    (0..n)
        .map(|i| lo * ratio.powf(i as f64 / (n - 1) as f64))
        .collect()
}

pub const PRESET_NAMES: [&str; 5] = ["fig3", "fig4", "fig5", "fig6", "fig7"];

/// Named sweep presets over a 25-point log grid of capacities in
/// `[0.1, 1000]` at `gamma = 1`, comparing the Fixed Fraction, greedy and
/// constant policies. `fig3`/`fig4`/`fig5` use Bernoulli arrivals with
/// `p = 0.1/0.5/0.9` and the closed-form optimum; `fig6` uses uniform and
/// `fig7` exponential (mean `0.1*bbar`) arrivals with a solver-based optimum
/// at a lighter resolution.
pub fn preset(name: &str) -> Option<SweepSpec> {
    let family = match name {
        "fig3" => ModelFamily::Bernoulli { p: 0.1 },
        "fig4" => ModelFamily::Bernoulli { p: 0.5 },
        "fig5" => ModelFamily::Bernoulli { p: 0.9 },
        "fig6" => ModelFamily::Uniform,
        "fig7" => ModelFamily::Exponential { mean_frac: 0.1 },
        _ => return None,
    };
    let solver_based = matches!(name, "fig6" | "fig7");
    Some(SweepSpec {
        family,
        bbar_grid: log_grid(0.1, 1000.0, 25),
        gamma: 1.0,
        policies: vec![
            PolicyKind::FixedFraction { q: None },
            PolicyKind::Greedy,
            PolicyKind::Constant,
        ],
        sim: SimSettings {
            horizon: 200_000,
            runs: 16,
            seed: 7,
        },
        include_mdp_optimal: solver_based,
        mdp: solver_based.then_some(MdpSettings {
            n_states: 128,
            n_actions: 64,
            span_tol: 1e-5,
            max_iters: 100_000,
            arrival_atoms: 32,
        }),
    })
}

/// Optimal-throughput reference for one capacity, or an error message to be
/// attached to that capacity's rows.
fn theta_for(spec: &SweepSpec, bbar: f64) -> Result<Option<f64>, String> {
    if spec.include_mdp_optimal {
        let cfg: MdpConfig = spec.mdp.unwrap_or_default().into();
        let model = spec.family.instantiate(bbar).map_err(|e| e.to_string())?;
        let params = SystemParams::new(bbar, spec.gamma).map_err(|e| e.to_string())?;
        return ehpower::mdp::solve(&model, &params, &cfg)
            .map(|sol| Some(sol.gain))
            .map_err(|e| e.to_string());
    }
    if let ModelFamily::Bernoulli { p } = spec.family {
        if p > 0.0 {
            let params = SystemParams::new(bbar, spec.gamma).map_err(|e| e.to_string())?;
            let alloc = solve_bernoulli_kkt(p, &params).map_err(|e| e.to_string())?;
            return Ok(Some(bernoulli_optimal_throughput(&alloc)));
        }
    }
    Ok(None)
}

fn row_for(
    spec: &SweepSpec,
    bbar: f64,
    kind: &PolicyKind,
    theta: &Result<Option<f64>, String>,
) -> SweepRow {
    let mut row = SweepRow {
        bbar,
        policy: kind.label().to_string(),
        throughput: None,
        std_error: None,
        theta_optimal: None,
        upper_bound: None,
        additive_gap: None,
        ratio: None,
        error: None,
    };
    let mut errors: Vec<String> = Vec::new();

    let sim_outcome = (|| -> anyhow::Result<(f64, f64, f64)> {
        let model = spec.family.instantiate(bbar)?;
        let params = SystemParams::new(bbar, spec.gamma)?;
        let mu = model.clipped_mean(bbar);
        let policy = kind.build(&model, &params)?;
        let cfg = SimConfig::new(spec.sim.horizon, spec.sim.runs, spec.sim.seed);
        let est = run(&policy, &model, &params, &cfg)?;
        row.throughput = Some(est.mean);
        row.std_error = Some(est.std_error);
        Ok((mu, est.mean, spec.gamma))
    })();

    match sim_outcome {
        Ok((mu, mean, gamma)) => {
            row.upper_bound = Some(upper_bound(mu, gamma));
            match theta {
                Ok(Some(theta)) => {
                    row.theta_optimal = Some(*theta);
                    row.additive_gap = Some(theta - mean);
                    if *theta > 1e-12 {
                        row.ratio = Some(mean / theta);
                    }
                }
                Ok(None) => {}
                Err(msg) => errors.push(format!("optimum: {msg}")),
            }
        }
        Err(e) => errors.push(e.to_string()),
    }

    if !errors.is_empty() {
        // semicolons keep the CSV single-line contract
        row.error = Some(errors.join("; ").replace(',', ";").replace('\n', " "));
    }
    row
}

/// Run a sweep. Rows come back in grid-then-policy order regardless of how
/// the points were scheduled; per-point failures land in the row's `error`
/// column instead of aborting the sweep.
pub fn run_sweep(spec: &SweepSpec) -> anyhow::Result<Vec<SweepRow>> {
    spec.validate().context("invalid sweep")?;
    let thetas: Vec<Result<Option<f64>, String>> = spec
        .bbar_grid
        .par_iter()
        .map(|&bbar| theta_for(spec, bbar))
        .collect();
    let jobs: Vec<(usize, usize)> = (0..spec.bbar_grid.len())
        .flat_map(|bi| (0..spec.policies.len()).map(move |pi| (bi, pi)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(bi, pi)| {
            row_for(
                spec,
                spec.bbar_grid[bi],
                &spec.policies[pi],
                &thetas[bi],
            )
        })
        .collect();
    Ok(rows)
}
