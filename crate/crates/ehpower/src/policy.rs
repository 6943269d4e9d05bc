//! Online power-control policies.
//!
//! A policy maps the current battery level (and, for the optimal-under-
//! Bernoulli policy, the time since the last arrival) to a transmit power.
//! Every policy is admissible: it never emits more power than the battery
//! holds.
//!
//! `solve_bernoulli_kkt` computes the exact optimal allocation for Bernoulli
//! arrivals with full recharges: after each recharge the transmitter spends
//! `allocations[k]` in the k-th slot, a geometrically decaying water-filling
//! sequence that exhausts the battery over `n_tilde` slots.

use crate::dist::SystemParams;
use crate::error::{Error, Result};

/// Exact optimal allocation for Bernoulli(p) arrivals of amplitude `bbar`.
///
/// `allocations[i] = p(1-p)^i / (2*lambda_tilde) - 1/gamma` for the first
/// `n_tilde` slots after a recharge, zero afterwards. The sequence is strictly
/// decreasing, positive, and sums to `bbar`.
#[derive(Debug, Clone, PartialEq)]
pub struct BernoulliAllocation {
    n_tilde: usize,
    lambda_tilde: f64,
    allocations: Vec<f64>,
    p: f64,
    bbar: f64,
    gamma: f64,
}

impl BernoulliAllocation {
    #[inline]
    pub fn n_tilde(&self) -> usize {
        self.n_tilde
    }

    #[inline]
    pub fn lambda_tilde(&self) -> f64 {
        self.lambda_tilde
    }

    #[inline]
    pub fn allocations(&self) -> &[f64] {
        &self.allocations
    }

    #[inline]
    pub fn p(&self) -> f64 {
        self.p
    }

    #[inline]
    pub fn bbar(&self) -> f64 {
        self.bbar
    }

    #[inline]
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

/// Action table on a battery grid; queried by linear interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularPolicy {
    grid: Vec<f64>,
    actions: Vec<f64>,
}

impl TabularPolicy {
    pub fn new(grid: Vec<f64>, actions: Vec<f64>) -> Result<Self> {
        if grid.len() < 2 || grid.len() != actions.len() {
            return Err(Error::InvalidParameter(format!(
                "tabular policy needs matching grid/action lists of length >= 2, got {} and {}",
                grid.len(),
                actions.len()
            )));
        }
        if grid[0] < 0.0 || grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "tabular grid must be non-negative and strictly increasing".into(),
            ));
        }
        for (g, a) in grid.iter().zip(&actions) {
            if !(*a >= 0.0 && *a <= *g + 1e-9 * g.max(1.0)) {
                return Err(Error::InvalidParameter(format!(
                    "tabular action {a} outside [0, {g}]"
                )));
            }
        }
        Ok(TabularPolicy { grid, actions })
    }

    #[inline]
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    #[inline]
    pub fn actions(&self) -> &[f64] {
        &self.actions
    }

    fn interpolate(&self, battery: f64) -> f64 {
        lerp_on_grid(&self.grid, &self.actions, battery)
    }
}

/// Piecewise-linear lookup on a sorted grid, clamped at both ends.
pub(crate) fn lerp_on_grid(grid: &[f64], values: &[f64], x: f64) -> f64 {
    if x <= grid[0] {
        return values[0];
    }
    if x >= grid[grid.len() - 1] {
        return values[values.len() - 1];
    }
    let hi = grid.partition_point(|&g| g <= x);
    let lo = hi - 1;
    let f = (x - grid[lo]) / (grid[hi] - grid[lo]);
    values[lo] + f * (values[hi] - values[lo])
}

/// An online power-control policy.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicySpec {
    /// Spend fraction `q` of the battery each slot, `q = mu / bbar`.
    FixedFraction { q: f64 },
    /// Spend everything each slot.
    Greedy,
    /// Spend `mu` whenever the battery holds at least `mu`, else nothing.
    Constant { mu: f64 },
    /// Optimal policy for Bernoulli full-recharge arrivals.
    BernoulliOptimal(BernoulliAllocation),
    /// Interpolated action table, typically extracted from a solver run.
    Tabular(TabularPolicy),
}

impl PolicySpec {
    pub fn fixed_fraction(q: f64) -> Result<Self> {
        if !(q.is_finite() && q > 0.0 && q <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "fixed fraction must lie in (0, 1], got {q}"
            )));
        }
        Ok(PolicySpec::FixedFraction { q })
    }

    /// Fixed Fraction with `q = mu / bbar` inferred from the arrival model.
    pub fn fixed_fraction_for(
        model: &crate::dist::EnergyModel,
        params: &SystemParams,
    ) -> Result<Self> {
        let q = model.clipped_mean(params.bbar()) / params.bbar();
        if q <= 0.0 {
            return Err(Error::InvalidParameter(
                "fixed fraction needs a positive-mean arrival process".into(),
            ));
        }
        PolicySpec::fixed_fraction(q)
    }

    pub fn constant(mu: f64) -> Result<Self> {
        if !(mu.is_finite() && mu >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "constant power must be finite and non-negative, got {mu}"
            )));
        }
        Ok(PolicySpec::Constant { mu })
    }

    /// Constant policy at the clipped mean of the arrival model.
    pub fn constant_for(model: &crate::dist::EnergyModel, params: &SystemParams) -> Result<Self> {
        PolicySpec::constant(model.clipped_mean(params.bbar()))
    }

    pub fn tabular(grid: Vec<f64>, actions: Vec<f64>) -> Result<Self> {
        Ok(PolicySpec::Tabular(TabularPolicy::new(grid, actions)?))
    }

    /// Short label for reports.
    pub fn label(&self) -> &'static str {
        match self {
            PolicySpec::FixedFraction { .. } => "ff",
            PolicySpec::Greedy => "greedy",
            PolicySpec::Constant { .. } => "const",
            PolicySpec::BernoulliOptimal(_) => "bopt",
            PolicySpec::Tabular(_) => "tabular",
        }
    }

    /// Fresh per-trajectory instance. The trajectory is assumed to start at a
    /// recharge point (the conventional full initial battery).
    pub fn instance(&self, bbar: f64) -> Result<PolicyInstance<'_>> {
        match self {
            PolicySpec::Constant { mu } if *mu > bbar => {
                return Err(Error::InvalidParameter(format!(
                    "constant power {mu} exceeds battery capacity {bbar}"
                )));
            }
            PolicySpec::BernoulliOptimal(alloc)
                if (alloc.bbar - bbar).abs() > 1e-9 * bbar.max(1.0) =>
            {
                return Err(Error::InvalidParameter(format!(
                    "allocation was solved for capacity {}, not {bbar}",
                    alloc.bbar
                )));
            }
            _ => {}
        }
        Ok(PolicyInstance {
            spec: self,
            bbar,
            since_arrival: 0,
        })
    }
}

/// Per-trajectory policy state. Clone one instance per concurrent trajectory;
/// instances must not be shared.
#[derive(Debug, Clone)]
pub struct PolicyInstance<'a> {
    spec: &'a PolicySpec,
    bbar: f64,
    /// Slots elapsed since the last arrival (0 right after an arrival).
    since_arrival: u64,
}

impl PolicyInstance<'_> {
    /// Power for the current slot.
    ///
    /// `arrived_this_slot` is true when this slot's arrival was positive; the
    /// optimal-Bernoulli policy resets its countdown on it. Returns a power in
    /// `[0, battery]`.
    pub fn next_power(&mut self, battery: f64, arrived_this_slot: bool) -> Result<f64> {
        if !(battery >= 0.0 && battery <= self.bbar) {
            return Err(Error::PolicyState(format!(
                "battery level {battery} outside [0, {}]",
                self.bbar
            )));
        }
        let g = match self.spec {
            PolicySpec::FixedFraction { q } => q * battery,
            PolicySpec::Greedy => battery,
            PolicySpec::Constant { mu } => {
                if battery >= *mu {
                    *mu
                } else {
                    0.0
                }
            }
            PolicySpec::BernoulliOptimal(alloc) => {
                if arrived_this_slot {
                    self.since_arrival = 0;
                }
                let k = self.since_arrival as usize;
                self.since_arrival += 1;
                if k < alloc.n_tilde {
                    alloc.allocations[k].min(battery)
                } else {
                    0.0
                }
            }
            PolicySpec::Tabular(table) => table.interpolate(battery).clamp(0.0, battery),
        };
        debug_assert!(g >= 0.0 && g <= battery);
        Ok(g)
    }
}

/// Left side of the dual N-scan: `(1-p)^n * (1 + p*(gamma*bbar + n))`.
/// Strictly decreasing in `n`; the active slot count is the smallest positive
/// integer pushing it below one.
fn n_scan_value(p: f64, gamma_bbar: f64, n: u64) -> f64 {
    (1.0 - p).powi(n as i32) * (1.0 + p * (gamma_bbar + n as f64))
}

/// Solve the per-epoch allocation problem for Bernoulli(p) arrivals that fully
/// recharge the battery.
///
/// The number of active slots `n_tilde` is found by scanning integers from 1;
/// the dual multiplier and the allocations then follow in closed form. When
/// the scan boundary is an exact tie the marginal allocation is zero and is
/// dropped, so `allocations` holds only strictly positive entries.
pub fn solve_bernoulli_kkt(p: f64, params: &SystemParams) -> Result<BernoulliAllocation> {
    if !(p.is_finite() && p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "arrival probability must lie in (0, 1], got {p}"
        )));
    }
    let bbar = params.bbar();
    let gamma = params.gamma();
    let gamma_bbar = gamma * bbar;

    let mut n = 1u64;
    while n_scan_value(p, gamma_bbar, n) >= 1.0 {
        n += 1;
        if n > 100_000_000 {
            return Err(Error::InvalidParameter(format!(
                "allocation horizon scan did not terminate for p = {p}"
            )));
        }
    }

    let lambda_tilde = (1.0 - (1.0 - p).powi(n as i32)) / (2.0 * (bbar + n as f64 / gamma));
    let mut allocations: Vec<f64> = (0..n)
        .map(|i| p * (1.0 - p).powi(i as i32) / (2.0 * lambda_tilde) - 1.0 / gamma)
        .collect();

    // At an exact scan-boundary tie the last allocation is zero up to
    // cancellation noise; keep only the positive entries.
    let tiny = 1e-14 * (bbar + 1.0 / gamma);
    while allocations.last().is_some_and(|&e| e <= tiny) {
        allocations.pop();
    }
    debug_assert!(!allocations.is_empty());
    debug_assert!(allocations.windows(2).all(|w| w[0] > w[1]));

    Ok(BernoulliAllocation {
        n_tilde: allocations.len(),
        lambda_tilde,
        allocations,
        p,
        bbar,
        gamma,
    })
}

/// Check the first-order optimality system of an allocation.
///
/// Verifies, for the active slots, stationarity
/// `p(1-p)^(i-1) * gamma / (2*(1 + gamma*E_i)) = lambda_tilde` within `1e-8`;
/// for the next 50 inactive slots, non-negativity of the slack multiplier
/// `lambda_tilde - p(1-p)^(i-1) * gamma / 2 >= -1e-12`; and that the
/// allocations spend the whole battery within `1e-9`.
pub fn kkt_verify(alloc: &BernoulliAllocation) -> bool {
    let p = alloc.p;
    let gamma = alloc.gamma;
    let lam = alloc.lambda_tilde;

    let mut weight = p; // p(1-p)^(i-1)
    for &e in &alloc.allocations {
        let stationarity = weight * gamma / (2.0 * (1.0 + gamma * e));
        if (stationarity - lam).abs() > 1e-8 {
            return false;
        }
        weight *= 1.0 - p;
    }
    for _ in 0..50 {
        // complementary slackness multiplier for an inactive slot
        if lam - weight * gamma / 2.0 < -1e-12 {
            return false;
        }
        weight *= 1.0 - p;
    }
    let total: f64 = alloc.allocations.iter().sum();
    (total - alloc.bbar).abs() <= 1e-9
}
