//! Exact-enumeration stress of the worst-case property: under the Fixed
//! Fraction policy, among all finite arrival distributions with the same
//! clipped mean, the full-recharge Bernoulli one yields the lowest n-horizon
//! throughput, at every horizon and every initial battery level. The value
//! under Bernoulli arrivals is also non-decreasing and concave in the initial
//! level.

use ehpower::dist::{trajectory_rng, DiscreteEmpirical, SystemParams};
use ehpower::policy::PolicySpec;
use ehpower::sim::enumerate_exact;
use rand::Rng;

fn random_distribution(rng: &mut impl Rng, bbar: f64) -> DiscreteEmpirical {
    loop {
        let n = 2 + (rng.gen::<f64>() * 2.0) as usize; // 2 or 3 atoms
        let values: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * bbar).collect();
        let mut probs: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() + 0.05).collect();
        let total: f64 = probs.iter().sum();
        for p in &mut probs[..n - 1] {
            *p /= total;
        }
        probs[n - 1] = 1.0 - probs[..n - 1].iter().sum::<f64>();
        let d = DiscreteEmpirical::new(values, probs).unwrap();
        if d.clipped_mean(bbar) > 1e-3 * bbar {
            return d;
        }
    }
}

#[test]
fn bernoulli_minimizes_fixed_fraction_throughput() {
    let mut rng = trajectory_rng(71, 0);
    for trial in 0..40 {
        let bbar = [0.5, 1.0, 4.0][trial % 3];
        let gamma = [0.3, 1.0, 8.0][(trial / 3) % 3];
        let pr = SystemParams::new(bbar, gamma).unwrap();
        let general = random_distribution(&mut rng, bbar);
        let q = general.clipped_mean(bbar) / bbar;
        let policy = PolicySpec::fixed_fraction(q).unwrap();
        let bernoulli = DiscreteEmpirical::new(vec![0.0, bbar], vec![1.0 - q, q]).unwrap();
        for horizon in 1..=5u32 {
            for xi in 0..5 {
                let x = bbar * xi as f64 / 4.0;
                let tg = enumerate_exact(&policy, &general, &pr, horizon, x).unwrap();
                let tb = enumerate_exact(&policy, &bernoulli, &pr, horizon, x).unwrap();
                assert!(
                    tg >= tb - 1e-12,
                    "trial {trial} (bbar={bbar}, gamma={gamma}, q={q:.4}): general {tg} \
                     below Bernoulli {tb} at horizon {horizon}, x={x}"
                );
            }
        }
    }
}

#[test]
fn bernoulli_value_is_monotone_and_concave_in_initial_level() {
    let mut rng = trajectory_rng(72, 0);
    for trial in 0..12 {
        let bbar = [0.5, 2.0][trial % 2];
        let gamma = [0.5, 1.0, 5.0][trial % 3];
        let q = 0.05 + 0.95 * rng.gen::<f64>();
        let pr = SystemParams::new(bbar, gamma).unwrap();
        let policy = PolicySpec::fixed_fraction(q).unwrap();
        let bernoulli = DiscreteEmpirical::new(vec![0.0, bbar], vec![1.0 - q, q]).unwrap();
        for horizon in 1..=5u32 {
            let values: Vec<f64> = (0..17)
                .map(|i| {
                    let x = bbar * i as f64 / 16.0;
                    enumerate_exact(&policy, &bernoulli, &pr, horizon, x).unwrap()
                })
                .collect();
            for w in values.windows(2) {
                assert!(w[1] - w[0] >= -1e-10, "trial {trial}: value not monotone");
            }
            for w in values.windows(3) {
                assert!(
                    (w[2] - w[1]) - (w[1] - w[0]) <= 1e-10,
                    "trial {trial}: value not concave"
                );
            }
        }
    }
}
