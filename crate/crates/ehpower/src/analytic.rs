//! Closed-form throughputs and universal bounds.
//!
//! All rates are in bits per slot. The additive near-optimality constant is
//! `0.5 / ln 2` (about 0.7213) and is kept at full precision throughout; the
//! multiplicative factor is one half.

use crate::dist::{EnergyModel, SystemParams};
use crate::error::{Error, Result};
use crate::policy::BernoulliAllocation;

/// Additive gap constant, `0.5 / ln 2 ≈ 0.7213` bits.
pub const ADDITIVE_GAP_BITS: f64 = 0.5 / std::f64::consts::LN_2;

/// Instantaneous rate of transmitting at power `g`: `0.5*log2(1 + gamma*g)`.
#[inline]
pub fn rate_bits(gamma: f64, power: f64) -> f64 {
    0.5 * (1.0 + gamma * power).log2()
}

/// Upper bound on the optimal throughput of any i.i.d. arrival process with
/// clipped mean `mu`: `0.5*log2(1 + gamma*mu)`.
pub fn upper_bound(mu: f64, gamma: f64) -> f64 {
    debug_assert!(mu >= 0.0 && gamma > 0.0);
    rate_bits(gamma, mu)
}

/// Exact Fixed Fraction throughput under Bernoulli(p) full-recharge arrivals:
/// the epoch-average series
/// `sum_i p(1-p)^(i-1) * 0.5*log2(1 + gamma*bbar*p*(1-p)^(i-1))`.
///
/// The series is summed until the analytic tail bound (remaining weight times
/// the next, largest remaining term's rate) drops below `tail_tol`, so the
/// result is within `tail_tol` of the true value.
pub fn ff_bernoulli_exact(p: f64, params: &SystemParams, tail_tol: f64) -> f64 {
    assert!(
        p > 0.0 && p <= 1.0,
        "arrival probability must lie in (0, 1], got {p}"
    );
    assert!(tail_tol > 0.0);
    let gamma = params.gamma();
    let q = 1.0 - p;
    let mut total = 0.0;
    let mut weight = p; // p(1-p)^(i-1)
    let mut x = gamma * params.bbar() * p; // gamma*bbar*p*(1-p)^(i-1)
    let mut remaining = q; // (1-p)^i
    loop {
        total += weight * 0.5 * (1.0 + x).log2();
        x *= q;
        // rates are decreasing in i, so the tail is at most remaining * rate(i+1)
        if remaining * 0.5 * (1.0 + x).log2() < tail_tol {
            return total;
        }
        weight *= q;
        remaining *= q;
    }
}

/// Second term of the Bernoulli additive lower bound:
/// `((1-p)/(2p)) * log2(1/(1-p))`, with the `p -> 1` limit pinned to zero.
/// Its supremum over `p` is `ADDITIVE_GAP_BITS`, approached as `p -> 0`.
pub fn bernoulli_penalty(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p <= 1.0);
    if p == 1.0 {
        0.0
    } else {
        // log2(1/(1-p)) via ln_1p to avoid cancellation at small p
        (1.0 - p) / (2.0 * p) * (-(-p).ln_1p() / std::f64::consts::LN_2)
    }
}

/// Bernoulli form of the additive lower bound on the Fixed Fraction
/// throughput: `0.5*log2(1 + gamma*p*bbar) - bernoulli_penalty(p)`.
pub fn ff_additive_lower_bernoulli(p: f64, params: &SystemParams) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "arrival probability must lie in (0, 1], got {p}"
        )));
    }
    Ok(rate_bits(params.gamma(), params.bbar() * p) - bernoulli_penalty(p))
}

/// General additive lower bound for any i.i.d. process with clipped mean
/// `mu`: the upper bound minus `ADDITIVE_GAP_BITS`.
pub fn ff_additive_lower(mu: f64, gamma: f64) -> f64 {
    upper_bound(mu, gamma) - ADDITIVE_GAP_BITS
}

/// Multiplicative lower bound: half the upper bound.
pub fn ff_multiplicative_lower(mu: f64, gamma: f64) -> f64 {
    0.5 * upper_bound(mu, gamma)
}

/// Sharper Bernoulli-specific multiplicative bound:
/// `(1/(2-p)) * 0.5*log2(1 + gamma*p*bbar)`.
pub fn ff_multiplicative_lower_bernoulli(p: f64, params: &SystemParams) -> f64 {
    debug_assert!((0.0..=1.0).contains(&p));
    rate_bits(params.gamma(), params.bbar() * p) / (2.0 - p)
}

/// Epoch-average objective of an arbitrary allocation sequence under
/// Bernoulli(p) arrivals: `sum_i p(1-p)^(i-1) * 0.5*log2(1 + gamma*E_i)`.
pub fn bernoulli_epoch_objective(p: f64, gamma: f64, allocations: &[f64]) -> f64 {
    let mut weight = p;
    let mut total = 0.0;
    for &e in allocations {
        total += weight * rate_bits(gamma, e);
        weight *= 1.0 - p;
    }
    total
}

/// Optimal throughput under Bernoulli full-recharge arrivals: the epoch
/// objective of the KKT allocation (a finite sum, since allocations vanish
/// beyond the active slots).
pub fn bernoulli_optimal_throughput(alloc: &BernoulliAllocation) -> f64 {
    bernoulli_epoch_objective(alloc.p(), alloc.gamma(), alloc.allocations())
}

/// Greedy-policy throughput under Bernoulli full-recharge arrivals:
/// `p * 0.5*log2(1 + gamma*bbar)`.
pub fn greedy_bernoulli_throughput(p: f64, params: &SystemParams) -> f64 {
    debug_assert!((0.0..=1.0).contains(&p));
    p * rate_bits(params.gamma(), params.bbar())
}

/// Bound summary for one arrival model. The last three fields are only
/// defined for Bernoulli arrivals whose amplitude recharges the battery in
/// full.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsReport {
    pub mu: f64,
    pub upper: f64,
    pub ff_additive_lower: f64,
    pub ff_multiplicative_lower: f64,
    pub ff_bernoulli_exact: Option<f64>,
    pub bernoulli_optimal: Option<f64>,
    pub greedy_bernoulli: Option<f64>,
}

/// Compute the bound summary for an arrival model.
///
/// For full-recharge Bernoulli arrivals the additive lower bound uses the
/// sharper Bernoulli form and the exact Bernoulli quantities are filled in;
/// otherwise the distribution-free forms are reported.
pub fn bounds_report(model: &EnergyModel, params: &SystemParams) -> Result<BoundsReport> {
    let mu = model.clipped_mean(params.bbar());
    if mu <= 0.0 {
        return Err(Error::InvalidParameter(
            "bounds need a positive-mean arrival process".into(),
        ));
    }
    let gamma = params.gamma();
    let upper = upper_bound(mu, gamma);
    let full_recharge_p = match *model {
        EnergyModel::Bernoulli { p, amplitude } if amplitude >= params.bbar() && p > 0.0 => {
            Some(p)
        }
        _ => None,
    };
    let report = match full_recharge_p {
        Some(p) => {
            let alloc = crate::policy::solve_bernoulli_kkt(p, params)?;
            BoundsReport {
                mu,
                upper,
                ff_additive_lower: ff_additive_lower_bernoulli(p, params)?,
                ff_multiplicative_lower: ff_multiplicative_lower(mu, gamma),
                ff_bernoulli_exact: Some(ff_bernoulli_exact(p, params, 1e-12)),
                bernoulli_optimal: Some(bernoulli_optimal_throughput(&alloc)),
                greedy_bernoulli: Some(greedy_bernoulli_throughput(p, params)),
            }
        }
        None => BoundsReport {
            mu,
            upper,
            ff_additive_lower: ff_additive_lower(mu, gamma),
            ff_multiplicative_lower: ff_multiplicative_lower(mu, gamma),
            ff_bernoulli_exact: None,
            bernoulli_optimal: None,
            greedy_bernoulli: None,
        },
    };
    Ok(report)
}
