//! Entropy gain from removing duplicates, and the minibatch-variance factor
//! caused by duplicated samples.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{FacError, Result};

/// `(lambda + 1) ln(lambda + 1) / m`: entropy gained when a buffer of `m`
/// samples holding `lambda` extra copies of one sample is made duplicate-free.
pub fn entropy_delta_closed_form(m: usize, lambda: usize) -> Result<f64> {
    if m <= 2 {
        return Err(FacError::Domain(format!("need m > 2, got {m}")));
    }
    if lambda >= m {
        return Err(FacError::Domain(format!("need lambda < m, got lambda={lambda}, m={m}")));
    }
    let k = lambda as f64 + 1.0;
    Ok(k * k.ln() / m as f64)
}

/// Shannon entropy in nats, with `0 ln 0 = 0`.
pub fn entropy_brute_force(mass: &[f64]) -> Result<f64> {
    if let Some(p) = mass.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
        return Err(FacError::NotADistribution(format!("bad probability {p}")));
    }
    let total: f64 = mass.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(FacError::NotADistribution(format!("masses sum to {total}")));
    }
    Ok(-mass
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum::<f64>())
}

/// Theoretical variance inflation `(b + zeta^2 + zeta) / b`.
pub fn variance_factor(b: usize, zeta: usize) -> f64 {
    let (b, z) = (b as f64, zeta as f64);
    (b + z * z + z) / b
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceRatio {
    pub measured: f64,
    pub theoretical: f64,
    pub var_duplicated: f64,
    pub var_distinct: f64,
}

/// Monte-Carlo estimate of how much `zeta` duplicates inflate the variance of a
/// minibatch-mean gradient.
///
/// Per-sample gradients are unit-variance scalars. Each trial draws one batch
/// where a single draw fills `zeta + 1` slots, and one batch of `b` distinct
/// draws; the variances of the two batch means are compared over all trials.
pub fn variance_ratio_experiment(b: usize, zeta: usize, trials: usize, seed: u64) -> Result<VarianceRatio> {
    if zeta >= b {
        return Err(FacError::Domain(format!("need zeta < b, got zeta={zeta}, b={b}")));
    }
    if trials < 2 {
        return Err(FacError::Domain("need at least two trials".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bf = b as f64;
    let mut dup = Welford::default();
    let mut distinct = Welford::default();
    for _ in 0..trials {
        let repeated: f64 = StandardNormal.sample(&mut rng);
        let mut sum = repeated * (zeta as f64 + 1.0);
        for _ in 0..b - zeta - 1 {
            let g: f64 = StandardNormal.sample(&mut rng);
            sum += g;
        }
        dup.push(sum / bf);

        let sum: f64 = (0..b).map(|_| -> f64 { StandardNormal.sample(&mut rng) }).sum();
        distinct.push(sum / bf);
    }
    let (vd, vi) = (dup.variance(), distinct.variance());
    Ok(VarianceRatio {
        measured: vd / vi,
        theoretical: variance_factor(b, zeta),
        var_duplicated: vd,
        var_distinct: vi,
    })
}

#[derive(Default)]
struct Welford {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    fn variance(&self) -> f64 {
        self.m2 / (self.n - 1.0)
    }
}
