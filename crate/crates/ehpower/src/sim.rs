//! Discrete-time simulation of the battery recursion
//! `b_t = min(b_{t-1} - g_{t-1} + E_t, bbar)`.
//!
//! Slot timing: the initial battery is given (full by default) and no arrival
//! is drawn for slot 1; from slot 2 on, each slot's arrival is credited to the
//! battery before that slot's action. Per-slot rewards are
//! `0.5*log2(1 + gamma*g)` and the reported throughput is the per-slot
//! average.
//!
//! Trajectories use independent counter-keyed random streams, so results are
//! bitwise reproducible regardless of how many worker threads run them.

use rayon::prelude::*;

use crate::analytic::rate_bits;
use crate::dist::{trajectory_rng, DiscreteEmpirical, EnergyModel, SystemParams};
use crate::error::{Error, Result};
use crate::policy::{PolicyInstance, PolicySpec};

/// Simulation plan. `initial_battery = None` means "start full".
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub horizon: u64,
    pub runs: u64,
    pub seed: u64,
    pub initial_battery: Option<f64>,
}

impl SimConfig {
    pub fn new(horizon: u64, runs: u64, seed: u64) -> Self {
        SimConfig {
            horizon,
            runs,
            seed,
            initial_battery: None,
        }
    }
}

/// Monte Carlo throughput estimate with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct ThroughputEstimate {
    /// Mean over trajectories of the per-trajectory average rate (bits/slot).
    pub mean: f64,
    /// Standard error of `mean` across trajectories (zero for a single run).
    pub std_error: f64,
    pub horizon: u64,
    pub runs: u64,
    /// Average battery level at action time (diagnostic).
    pub mean_battery: f64,
    /// Overflow losses as a fraction of total arrived energy (diagnostic).
    pub energy_wasted_frac: f64,
}

/// One battery transition. Returns `min(battery - power + e_next, bbar)`,
/// clamped to be non-negative against rounding.
///
/// Emitting more than the battery holds (beyond a 1e-12 float allowance) is a
/// policy bug and is reported as an admissibility violation.
pub fn step(battery: f64, power: f64, e_next: f64, bbar: f64) -> Result<f64> {
    if power > battery + 1e-12 {
        return Err(Error::Admissibility { power, battery });
    }
    Ok((battery - power + e_next).min(bbar).max(0.0))
}

struct Trajectory {
    mean_rate: f64,
    battery_sum: f64,
    arrived: f64,
    wasted: f64,
}

fn run_trajectory(
    policy: &PolicySpec,
    model: &EnergyModel,
    params: &SystemParams,
    horizon: u64,
    initial_battery: f64,
    seed: u64,
    index: u64,
) -> Result<Trajectory> {
    let bbar = params.bbar();
    let gamma = params.gamma();
    let mut rng = trajectory_rng(seed, index);
    let mut inst = policy.instance(bbar)?;

    let mut battery = initial_battery;
    let mut rate_sum = 0.0;
    let mut battery_sum = battery;
    let mut arrived = 0.0;
    let mut wasted = 0.0;

    let mut power = inst.next_power(battery, false)?;
    rate_sum += rate_bits(gamma, power);

    for _ in 2..=horizon {
        let e = model.sample(&mut rng);
        arrived += e;
        let unclipped = battery - power + e;
        if unclipped > bbar {
            wasted += unclipped - bbar;
        }
        battery = step(battery, power, e, bbar)?;
        debug_assert!((0.0..=bbar).contains(&battery));
        power = inst.next_power(battery, e > 0.0)?;
        rate_sum += rate_bits(gamma, power);
        battery_sum += battery;
    }

    Ok(Trajectory {
        mean_rate: rate_sum / horizon as f64,
        battery_sum,
        arrived,
        wasted,
    })
}

/// Fixed-order pairwise sum; deterministic and more accurate than a left fold.
fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Estimate the long-run throughput of `policy` under `model` by simulating
/// `cfg.runs` independent trajectories of `cfg.horizon` slots.
///
/// The standard error is computed across trajectories (within-trajectory
/// rewards are dependent). Aggregation order is fixed, so the estimate is
/// identical no matter how trajectories are scheduled.
pub fn run(
    policy: &PolicySpec,
    model: &EnergyModel,
    params: &SystemParams,
    cfg: &SimConfig,
) -> Result<ThroughputEstimate> {
    if cfg.horizon < 1 || cfg.runs < 1 {
        return Err(Error::InvalidParameter(format!(
            "horizon and runs must be at least 1, got {} and {}",
            cfg.horizon, cfg.runs
        )));
    }
    let bbar = params.bbar();
    let initial = cfg.initial_battery.unwrap_or(bbar);
    if !(0.0..=bbar).contains(&initial) {
        return Err(Error::InvalidParameter(format!(
            "initial battery {initial} outside [0, {bbar}]"
        )));
    }

    let trajectories: Vec<Trajectory> = (0..cfg.runs)
        .into_par_iter()
        .map(|i| run_trajectory(policy, model, params, cfg.horizon, initial, cfg.seed, i))
        .collect::<Result<_>>()?;

    let means: Vec<f64> = trajectories.iter().map(|t| t.mean_rate).collect();
    let mean = pairwise_sum(&means) / cfg.runs as f64;
    let std_error = if cfg.runs > 1 {
        let sq: Vec<f64> = means.iter().map(|m| (m - mean) * (m - mean)).collect();
        (pairwise_sum(&sq) / ((cfg.runs - 1) as f64 * cfg.runs as f64)).sqrt()
    } else {
        0.0
    };

    let battery_sums: Vec<f64> = trajectories.iter().map(|t| t.battery_sum).collect();
    let arrived: Vec<f64> = trajectories.iter().map(|t| t.arrived).collect();
    let wasted: Vec<f64> = trajectories.iter().map(|t| t.wasted).collect();
    let total_arrived = pairwise_sum(&arrived);

    Ok(ThroughputEstimate {
        mean,
        std_error,
        horizon: cfg.horizon,
        runs: cfg.runs,
        mean_battery: pairwise_sum(&battery_sums) / (cfg.runs * cfg.horizon) as f64,
        energy_wasted_frac: if total_arrived > 0.0 {
            pairwise_sum(&wasted) / total_arrived
        } else {
            0.0
        },
    })
}

/// Exact n-horizon expected throughput for a finite-support arrival model,
/// computed by summing over every arrival sequence with its probability.
///
/// The tree has `|support|^(horizon-1)` leaves; requests beyond 1e7 are
/// refused.
pub fn enumerate_exact(
    policy: &PolicySpec,
    model: &DiscreteEmpirical,
    params: &SystemParams,
    horizon: u32,
    initial_battery: f64,
) -> Result<f64> {
    const LIMIT: f64 = 1e7;
    if horizon < 1 {
        return Err(Error::InvalidParameter("horizon must be at least 1".into()));
    }
    let bbar = params.bbar();
    if !(0.0..=bbar).contains(&initial_battery) {
        return Err(Error::InvalidParameter(format!(
            "initial battery {initial_battery} outside [0, {bbar}]"
        )));
    }
    let support = model.support();
    let paths = (support.len() as f64).powi(horizon as i32 - 1);
    if paths > LIMIT {
        return Err(Error::EnumerationTooLarge {
            paths,
            limit: LIMIT,
        });
    }

    struct Enumerator<'a> {
        support: &'a [(f64, f64)],
        bbar: f64,
        gamma: f64,
        acc: f64,
    }

    impl Enumerator<'_> {
        fn descend(
            &mut self,
            inst: &PolicyInstance<'_>,
            battery: f64,
            arrived: bool,
            slots_left: u32,
            weight: f64,
        ) -> Result<()> {
            let mut inst = inst.clone();
            let power = inst.next_power(battery, arrived)?;
            self.acc += weight * rate_bits(self.gamma, power);
            if slots_left > 1 {
                for i in 0..self.support.len() {
                    let (e, pr) = self.support[i];
                    let next = step(battery, power, e, self.bbar)?;
                    self.descend(&inst, next, e > 0.0, slots_left - 1, weight * pr)?;
                }
            }
            Ok(())
        }
    }

    let inst = policy.instance(bbar)?;
    let mut tree = Enumerator {
        support: &support,
        bbar,
        gamma: params.gamma(),
        acc: 0.0,
    };
    tree.descend(&inst, initial_battery, false, horizon, 1.0)?;
    Ok(tree.acc / horizon as f64)
}

/// Gap between starting full and starting empty, under common random numbers:
/// `|T(b1 = bbar) - T(b1 = 0)|` for one trajectory of `horizon` slots.
///
/// The shared stream couples the two runs, so the difference isolates the
/// initial transient; it vanishes as the horizon grows.
pub fn initial_state_sensitivity(
    policy: &PolicySpec,
    model: &EnergyModel,
    params: &SystemParams,
    horizon: u64,
    seed: u64,
) -> Result<f64> {
    let mut cfg = SimConfig::new(horizon, 1, seed);
    cfg.initial_battery = Some(params.bbar());
    let full = run(policy, model, params, &cfg)?;
    cfg.initial_battery = Some(0.0);
    let empty = run(policy, model, params, &cfg)?;
    Ok((full.mean - empty.mean).abs())
}
