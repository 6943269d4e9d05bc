//! Energy-arrival processes: i.i.d. models, clipped statistics, sampling and
//! mean-preserving quantization.
//!
//! All arrivals are non-negative. A battery of capacity `bbar` clips every
//! arrival to `min(e, bbar)`, so the quantity that drives throughput is the
//! clipped mean `mu = E[min(E_t, bbar)]`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Physical constants of the system: battery capacity and channel SNR
/// coefficient. Allocating power `g` yields rate `0.5*log2(1 + gamma*g)`
/// bits per slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    bbar: f64,
    gamma: f64,
}

impl SystemParams {
    pub fn new(bbar: f64, gamma: f64) -> Result<Self> {
        if !(bbar.is_finite() && bbar > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "battery capacity must be finite and positive, got {bbar}"
            )));
        }
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "channel coefficient must be finite and positive, got {gamma}"
            )));
        }
        Ok(SystemParams { bbar, gamma })
    }

    /// Battery capacity.
    #[inline]
    pub fn bbar(&self) -> f64 {
        self.bbar
    }

    /// SNR coefficient.
    #[inline]
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

/// A finite-support distribution over non-negative energy values.
///
/// Probabilities are in `[0,1]` and sum to one within `1e-12`. Zero-probability
/// atoms are allowed; callers that iterate the support usually skip them.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteEmpirical {
    values: Vec<f64>,
    probs: Vec<f64>,
}

impl DiscreteEmpirical {
    pub fn new(values: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.len() != probs.len() {
            return Err(Error::InvalidParameter(format!(
                "discrete support needs matching non-empty lists, got {} values and {} probabilities",
                values.len(),
                probs.len()
            )));
        }
        for &v in &values {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "energy values must be finite and non-negative, got {v}"
                )));
            }
        }
        let mut total = 0.0;
        for &p in &probs {
            if !(p.is_finite() && (0.0..=1.0).contains(&p)) {
                return Err(Error::InvalidParameter(format!(
                    "probabilities must lie in [0,1], got {p}"
                )));
            }
            total += p;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "probabilities must sum to 1 within 1e-12, got {total}"
            )));
        }
        Ok(DiscreteEmpirical { values, probs })
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// `(value, probability)` pairs, including zero-probability atoms.
    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values.iter().copied().zip(self.probs.iter().copied())
    }

    /// Atoms with strictly positive probability.
    pub fn support(&self) -> Vec<(f64, f64)> {
        self.iter().filter(|&(_, p)| p > 0.0).collect()
    }

    pub fn mean(&self) -> f64 {
        self.iter().map(|(v, p)| v * p).sum()
    }

    pub fn clipped_mean(&self, bbar: f64) -> f64 {
        self.iter().map(|(v, p)| v.min(bbar) * p).sum()
    }

    /// Inverse-CDF lookup for a uniform draw in `[0,1)`.
    fn quantile(&self, u: f64) -> f64 {
        let mut acc = 0.0;
        for (v, p) in self.iter() {
            acc += p;
            if u < acc {
                return v;
            }
        }
        // Rounding in the CDF walk can leave u >= acc at the end.
        *self.values.last().expect("non-empty support")
    }
}

/// An i.i.d. energy-arrival model.
///
/// `Bernoulli` arrivals deliver a full `amplitude` with probability `p` and
/// nothing otherwise; with `amplitude >= bbar` every arrival recharges the
/// battery completely. Models with zero mean (for example `Bernoulli` with
/// `p = 0`) are constructible and can be sampled, but throughput operations
/// that divide by the mean reject them.
#[derive(Debug, Clone, PartialEq)]
pub enum EnergyModel {
    Bernoulli { p: f64, amplitude: f64 },
    Uniform { lo: f64, hi: f64 },
    Exponential { mean: f64 },
    DiscreteEmpirical(DiscreteEmpirical),
}

impl EnergyModel {
    pub fn bernoulli(p: f64, amplitude: f64) -> Result<Self> {
        if !(p.is_finite() && (0.0..=1.0).contains(&p)) {
            return Err(Error::InvalidParameter(format!(
                "arrival probability must lie in [0,1], got {p}"
            )));
        }
        if !(amplitude.is_finite() && amplitude >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "arrival amplitude must be finite and non-negative, got {amplitude}"
            )));
        }
        Ok(EnergyModel::Bernoulli { p, amplitude })
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi) {
            return Err(Error::InvalidParameter(format!(
                "uniform support needs 0 <= lo <= hi, got [{lo}, {hi}]"
            )));
        }
        Ok(EnergyModel::Uniform { lo, hi })
    }

    pub fn exponential(mean: f64) -> Result<Self> {
        if !(mean.is_finite() && mean > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "exponential mean must be finite and positive, got {mean}"
            )));
        }
        Ok(EnergyModel::Exponential { mean })
    }

    pub fn discrete(values: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        Ok(EnergyModel::DiscreteEmpirical(DiscreteEmpirical::new(
            values, probs,
        )?))
    }

    /// Raw (unclipped) mean arrival rate.
    pub fn mean(&self) -> f64 {
        match self {
            EnergyModel::Bernoulli { p, amplitude } => p * amplitude,
            EnergyModel::Uniform { lo, hi } => 0.5 * (lo + hi),
            EnergyModel::Exponential { mean } => *mean,
            EnergyModel::DiscreteEmpirical(d) => d.mean(),
        }
    }

    /// Clipped mean `mu = E[min(E_t, bbar)]`, in closed form per variant.
    pub fn clipped_mean(&self, bbar: f64) -> f64 {
        debug_assert!(bbar > 0.0);
        match *self {
            EnergyModel::Bernoulli { p, amplitude } => p * amplitude.min(bbar),
            EnergyModel::Uniform { lo, hi } => {
                if hi <= bbar {
                    0.5 * (lo + hi)
                } else if lo >= bbar {
                    bbar
                } else {
                    // continuous part on [lo, bbar) plus the clipped tail mass at bbar
                    (0.5 * (bbar * bbar - lo * lo) + bbar * (hi - bbar)) / (hi - lo)
                }
            }
            EnergyModel::Exponential { mean } => mean * (-(-bbar / mean).exp_m1()),
            EnergyModel::DiscreteEmpirical(ref d) => d.clipped_mean(bbar),
        }
    }

    /// One draw from the unclipped distribution.
    ///
    /// Every variant consumes exactly one uniform variate per draw, so two
    /// models sharing a stream stay aligned draw-for-draw.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.gen();
        match *self {
            EnergyModel::Bernoulli { p, amplitude } => {
                if u < p {
                    amplitude
                } else {
                    0.0
                }
            }
            EnergyModel::Uniform { lo, hi } => lo + u * (hi - lo),
            EnergyModel::Exponential { mean } => -mean * (-u).ln_1p(),
            EnergyModel::DiscreteEmpirical(ref d) => d.quantile(u),
        }
    }

    /// Quantize the clipped distribution `min(E_t, bbar)` onto at most
    /// `n_atoms` support points in `[0, bbar]`.
    ///
    /// The probability mass of each cell is placed at the cell's conditional
    /// mean, so the quantized distribution has exactly the clipped mean of the
    /// original. Empty cells are dropped.
    pub fn discretize(&self, bbar: f64, n_atoms: usize) -> Result<DiscreteEmpirical> {
        if n_atoms < 2 {
            return Err(Error::InvalidParameter(format!(
                "quantization needs at least 2 atoms, got {n_atoms}"
            )));
        }
        debug_assert!(bbar > 0.0);
        // Per-cell accumulators of (mass, mass * conditional-mean numerator).
        let mut mass = vec![0.0_f64; n_atoms];
        let mut moment = vec![0.0_f64; n_atoms];
        let width = bbar / n_atoms as f64;
        let cell_of = |x: f64| -> usize {
            // half-open cells [k*w, (k+1)*w), last cell closed at bbar
            ((x / width) as usize).min(n_atoms - 1)
        };
        let mut add_atom = |v: f64, p: f64| {
            let v = v.min(bbar);
            let k = cell_of(v);
            mass[k] += p;
            moment[k] += p * v;
        };

        match *self {
            EnergyModel::Bernoulli { p, amplitude } => {
                add_atom(0.0, 1.0 - p);
                add_atom(amplitude, p);
            }
            EnergyModel::DiscreteEmpirical(ref d) => {
                for (v, p) in d.iter() {
                    add_atom(v, p);
                }
            }
            EnergyModel::Uniform { lo, hi } => {
                if hi == lo {
                    add_atom(lo, 1.0);
                } else {
                    let density = 1.0 / (hi - lo);
                    let top = hi.min(bbar);
                    for k in 0..n_atoms {
                        let a = (k as f64 * width).max(lo);
                        let b = ((k + 1) as f64 * width).min(top);
                        if b > a {
                            mass[k] += (b - a) * density;
                            moment[k] += 0.5 * (b * b - a * a) * density;
                        }
                    }
                    if hi > bbar {
                        // clipped tail P(X >= bbar) collapses onto an atom at bbar
                        let p = (hi - bbar.max(lo)) * density;
                        mass[n_atoms - 1] += p;
                        moment[n_atoms - 1] += p * bbar;
                    }
                }
            }
            EnergyModel::Exponential { mean } => {
                for k in 0..n_atoms {
                    let a = k as f64 * width;
                    let b = ((k + 1) as f64 * width).min(bbar);
                    let ea = (-a / mean).exp();
                    let eb = (-b / mean).exp();
                    mass[k] += ea - eb;
                    moment[k] += (a + mean) * ea - (b + mean) * eb;
                }
                // tail beyond bbar is an atom at bbar
                let tail = (-bbar / mean).exp();
                mass[n_atoms - 1] += tail;
                moment[n_atoms - 1] += tail * bbar;
            }
        }

        let mut values = Vec::new();
        let mut probs = Vec::new();
        for k in 0..n_atoms {
            if mass[k] > 0.0 {
                values.push((moment[k] / mass[k]).clamp(0.0, bbar));
                probs.push(mass[k]);
            }
        }
        DiscreteEmpirical::new(values, probs)
    }
}

/// Independent, reproducible random stream for one trajectory.
///
/// Streams are keyed by `(seed, trajectory index)`, so parallel simulations
/// produce bitwise-identical results regardless of scheduling.
pub fn trajectory_rng(seed: u64, trajectory: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trajectory);
    rng
}

/// Parse the CLI model grammar.
///
/// Forms: `bernoulli:p=0.1[,amp=10]`, `uniform:lo=0,hi=10`, `exp:mean=1`,
/// `discrete:v=0|1|2,p=0.5|0.3|0.2`. A Bernoulli without `amp` defaults to
/// amplitude `bbar` (a full recharge per arrival).
pub fn parse_energy_model(text: &str, bbar: f64) -> Result<EnergyModel> {
    let bad = |msg: String| Error::InvalidParameter(msg);
    let (head, rest) = text
        .split_once(':')
        .ok_or_else(|| bad(format!("distribution `{text}` is missing `:`")))?;
    let mut fields = std::collections::HashMap::new();
    for part in rest.split(',') {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| bad(format!("expected key=value, got `{part}`")))?;
        fields.insert(k.trim(), v.trim());
    }
    let num = |key: &str| -> Result<f64> {
        fields
            .get(key)
            .ok_or_else(|| bad(format!("distribution `{head}` is missing `{key}=`")))?
            .parse::<f64>()
            .map_err(|e| bad(format!("bad number for `{key}`: {e}")))
    };
    let list = |key: &str| -> Result<Vec<f64>> {
        fields
            .get(key)
            .ok_or_else(|| bad(format!("distribution `{head}` is missing `{key}=`")))?
            .split('|')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| bad(format!("bad number in `{key}` list: {e}")))
            })
            .collect()
    };
    match head {
        "bernoulli" => {
            let p = num("p")?;
            let amp = if fields.contains_key("amp") {
                num("amp")?
            } else {
                bbar
            };
            EnergyModel::bernoulli(p, amp)
        }
        "uniform" => EnergyModel::uniform(num("lo")?, num("hi")?),
        "exp" => EnergyModel::exponential(num("mean")?),
        "discrete" => EnergyModel::discrete(list("v")?, list("p")?),
        other => Err(bad(format!(
            "unknown distribution `{other}` (expected bernoulli, uniform, exp or discrete)"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn clipped_mean_bernoulli_full_recharge() {
        let m = EnergyModel::bernoulli(0.1, 10.0).unwrap();
        assert_eq!(m.clipped_mean(10.0), 1.0);
    }

    #[test]
    fn clipped_mean_bernoulli_overshooting_amplitude_clips() {
        let m = EnergyModel::bernoulli(0.5, 20.0).unwrap();
        assert_eq!(m.clipped_mean(10.0), 5.0);
    }

    #[test]
    fn clipped_mean_uniform_no_clipping() {
        let m = EnergyModel::uniform(0.0, 4.0).unwrap();
        assert_eq!(m.clipped_mean(4.0), 2.0);
    }

    #[test]
    fn clipped_mean_uniform_partial_clip() {
        // E[min(U(0,10), 4)] = (4^2/2 + 4*6)/10 = 3.2
        let m = EnergyModel::uniform(0.0, 10.0).unwrap();
        assert_close(m.clipped_mean(4.0), 3.2, 1e-15);
        // E[min(U(2,6), 5)] = ((25-4)/2 + 5*1)/4 = 3.875
        let m = EnergyModel::uniform(2.0, 6.0).unwrap();
        assert_close(m.clipped_mean(5.0), 3.875, 1e-15);
        // support entirely above the battery
        let m = EnergyModel::uniform(7.0, 9.0).unwrap();
        assert_eq!(m.clipped_mean(5.0), 5.0);
    }

    #[test]
    fn clipped_mean_exponential_closed_form() {
        // m*(1 - e^{-bbar/m}); at bbar = 50, m = 1 this is 1 within 1e-9
        let m = EnergyModel::exponential(1.0).unwrap();
        assert_close(m.clipped_mean(50.0), 1.0, 1e-9);
        assert_close(m.clipped_mean(2.0), 1.0 - (-2.0_f64).exp(), 1e-15);
    }

    #[test]
    fn clipped_mean_exponential_matches_monte_carlo() {
        let m = EnergyModel::exponential(1.0).unwrap();
        let mut rng = trajectory_rng(17, 0);
        let n = 10_000_000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..n {
            let x = m.sample(&mut rng).min(50.0);
            sum += x;
            sumsq += x * x;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        let se = (var / n as f64).sqrt();
        assert!(
            (mean - m.clipped_mean(50.0)).abs() <= 3.0 * se,
            "MC mean {mean} vs closed form {} (3se = {})",
            m.clipped_mean(50.0),
            3.0 * se
        );
    }

    #[test]
    fn clipped_mean_discrete() {
        let m = EnergyModel::discrete(vec![0.0, 1.0, 20.0], vec![0.5, 0.3, 0.2]).unwrap();
        assert_close(m.clipped_mean(10.0), 0.3 + 0.2 * 10.0, 1e-15);
    }

    #[test]
    fn clipped_mean_bounded_by_capacity() {
        let models = [
            EnergyModel::bernoulli(0.7, 100.0).unwrap(),
            EnergyModel::uniform(0.0, 30.0).unwrap(),
            EnergyModel::exponential(8.0).unwrap(),
            EnergyModel::discrete(vec![0.0, 5.0, 50.0], vec![0.2, 0.3, 0.5]).unwrap(),
        ];
        for m in &models {
            for bbar in [0.1, 1.0, 10.0] {
                let mu = m.clipped_mean(bbar);
                assert!((0.0..=bbar).contains(&mu), "mu {mu} outside [0, {bbar}]");
            }
        }
    }

    #[test]
    fn sample_degenerate_bernoulli() {
        let always = EnergyModel::bernoulli(1.0, 5.0).unwrap();
        let never = EnergyModel::bernoulli(0.0, 5.0).unwrap();
        let mut rng = trajectory_rng(3, 0);
        for _ in 0..1000 {
            assert_eq!(always.sample(&mut rng), 5.0);
            assert_eq!(never.sample(&mut rng), 0.0);
        }
    }

    #[test]
    fn sample_uniform_mean_clt() {
        let m = EnergyModel::uniform(0.0, 1.0).unwrap();
        let mut rng = trajectory_rng(99, 4);
        let n = 1_000_000;
        let mean: f64 = (0..n).map(|_| m.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.002, "uniform mean {mean}");
    }

    #[test]
    fn sample_streams_are_reproducible_and_distinct() {
        let m = EnergyModel::exponential(2.0).unwrap();
        let draw = |seed, traj| {
            let mut rng = trajectory_rng(seed, traj);
            (0..64).map(|_| m.sample(&mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(42, 7), draw(42, 7));
        assert_ne!(draw(42, 7), draw(42, 8));
        assert_ne!(draw(42, 7), draw(43, 7));
    }

    #[test]
    fn samples_are_non_negative() {
        let models = [
            EnergyModel::bernoulli(0.3, 2.0).unwrap(),
            EnergyModel::uniform(0.0, 3.0).unwrap(),
            EnergyModel::exponential(0.5).unwrap(),
            EnergyModel::discrete(vec![0.0, 1.0], vec![0.5, 0.5]).unwrap(),
        ];
        let mut rng = trajectory_rng(1, 1);
        for m in &models {
            for _ in 0..10_000 {
                assert!(m.sample(&mut rng) >= 0.0);
            }
        }
    }

    #[test]
    fn discretize_bernoulli_is_exact_two_point() {
        let m = EnergyModel::bernoulli(0.3, 10.0).unwrap();
        for n_atoms in [2, 5, 64] {
            let d = m.discretize(10.0, n_atoms).unwrap();
            assert_eq!(d.values(), &[0.0, 10.0]);
            assert_eq!(d.probs(), &[0.7, 0.3]);
        }
    }

    #[test]
    fn discretize_uniform_two_cells() {
        let m = EnergyModel::uniform(0.0, 4.0).unwrap();
        let d = m.discretize(4.0, 2).unwrap();
        assert_eq!(d.probs(), &[0.5, 0.5]);
        assert_close(d.values()[0], 1.0, 1e-12);
        assert_close(d.values()[1], 3.0, 1e-12);
    }

    #[test]
    fn discretize_exponential_preserves_clipped_mean() {
        let m = EnergyModel::exponential(0.1).unwrap();
        let d = m.discretize(1.0, 64).unwrap();
        assert_close(d.mean(), 0.1 * (1.0 - (-10.0_f64).exp()), 1e-9);
    }

    #[test]
    fn discretize_preserves_mean_across_variants() {
        let models = [
            EnergyModel::bernoulli(0.4, 15.0).unwrap(),
            EnergyModel::uniform(0.0, 10.0).unwrap(),
            EnergyModel::uniform(3.0, 20.0).unwrap(),
            EnergyModel::exponential(2.5).unwrap(),
            EnergyModel::discrete(vec![0.0, 2.0, 7.0, 40.0], vec![0.1, 0.4, 0.3, 0.2]).unwrap(),
        ];
        for m in &models {
            for bbar in [1.0, 10.0] {
                for n_atoms in [2, 3, 7, 64] {
                    let d = m.discretize(bbar, n_atoms).unwrap();
                    assert_close(d.mean(), m.clipped_mean(bbar), 1e-9);
                    assert!(d.values().iter().all(|&v| (0.0..=bbar).contains(&v)));
                }
            }
        }
    }

    #[test]
    fn discretize_rejects_single_atom() {
        let m = EnergyModel::uniform(0.0, 1.0).unwrap();
        assert!(matches!(
            m.discretize(1.0, 1),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn constructors_reject_bad_parameters() {
        assert!(EnergyModel::bernoulli(1.5, 1.0).is_err());
        assert!(EnergyModel::bernoulli(0.5, -1.0).is_err());
        assert!(EnergyModel::uniform(3.0, 2.0).is_err());
        assert!(EnergyModel::uniform(-1.0, 2.0).is_err());
        assert!(EnergyModel::exponential(0.0).is_err());
        assert!(EnergyModel::discrete(vec![1.0], vec![0.5]).is_err());
        assert!(EnergyModel::discrete(vec![1.0, 2.0], vec![0.6, 0.6]).is_err());
        assert!(EnergyModel::discrete(vec![-1.0, 2.0], vec![0.5, 0.5]).is_err());
        assert!(SystemParams::new(0.0, 1.0).is_err());
        assert!(SystemParams::new(1.0, -2.0).is_err());
    }

    #[test]
    fn parse_grammar_forms() {
        let m = parse_energy_model("bernoulli:p=0.1", 10.0).unwrap();
        assert_eq!(
            m,
            EnergyModel::Bernoulli {
                p: 0.1,
                amplitude: 10.0
            }
        );
        let m = parse_energy_model("bernoulli:p=0.1,amp=3", 10.0).unwrap();
        assert_eq!(
            m,
            EnergyModel::Bernoulli {
                p: 0.1,
                amplitude: 3.0
            }
        );
        let m = parse_energy_model("uniform:lo=0,hi=10", 5.0).unwrap();
        assert_eq!(m, EnergyModel::Uniform { lo: 0.0, hi: 10.0 });
        let m = parse_energy_model("exp:mean=1", 5.0).unwrap();
        assert_eq!(m, EnergyModel::Exponential { mean: 1.0 });
        let m = parse_energy_model("discrete:v=0|1|2,p=0.5|0.3|0.2", 5.0).unwrap();
        assert_eq!(m.mean(), 0.3 + 0.4);
    }

    #[test]
    fn parse_rejects_malformed_strings() {
        assert!(parse_energy_model("bernoulli", 1.0).is_err());
        assert!(parse_energy_model("bernoulli:q=0.1", 1.0).is_err());
        assert!(parse_energy_model("gauss:mean=1", 1.0).is_err());
        assert!(parse_energy_model("uniform:lo=0,hi=abc", 1.0).is_err());
        assert!(parse_energy_model("discrete:v=0|1,p=0.5", 1.0).is_err());
    }
}
