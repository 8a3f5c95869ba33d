use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution as _, StandardNormal};

use crate::error::{Error, Result};

/// Lower clamp for sampled depths, in meters.
pub const MIN_DEPTH: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Distribution {
    Uniform,
    Gaussian,
    Laplace,
    Beta,
}

impl Distribution {
    pub const ALL: [Distribution; 4] = [
        Distribution::Uniform,
        Distribution::Gaussian,
        Distribution::Laplace,
        Distribution::Beta,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Distribution::Uniform => "uniform",
            Distribution::Gaussian => "gaussian",
            Distribution::Laplace => "laplace",
            Distribution::Beta => "beta",
        }
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Distribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown distribution {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerConfig {
    pub count: usize,
    /// Perturbation scale in meters, normally the object diameter.
    pub beta: f64,
    pub distribution: Distribution,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            count: 64,
            beta: 0.1,
            distribution: Distribution::Uniform,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.count == 0 || !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "sampler needs count >= 1 and beta > 0, got {} and {}",
                self.count, self.beta
            )));
        }
        Ok(())
    }

    /// Same configuration with a seed derived from `(seed, frame)`.
    pub fn for_frame(&self, frame: usize) -> Self {
        let mut z = self.seed ^ (frame as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        // splitmix64 finalizer
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        Self {
            seed: z ^ (z >> 31),
            ..*self
        }
    }
}

/// `count` depths around `d`. Index 0 is `d` itself. Uniform offsets are
/// spread as a randomly shifted lattice over `[−β, β]` (each offset is still
/// marginally uniform, but the spacing never exceeds `2β/(count−1)`); the
/// other distributions draw independent offsets scaled by `β`.
pub fn sample_depths(d: f64, cfg: &SamplerConfig) -> Vec<f64> {
    let n = cfg.count.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::with_capacity(n);
    out.push(d);
    let m = n - 1;
    match cfg.distribution {
        Distribution::Uniform => {
            let shift: f64 = rng.random();
            let width = 2.0 / m as f64;
            out.extend((0..m).map(|k| d + cfg.beta * (-1.0 + (k as f64 + shift) * width)));
        }
        Distribution::Gaussian => {
            out.extend((0..m).map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                d + cfg.beta * z
            }));
        }
        Distribution::Laplace => {
            out.extend((0..m).map(|_| {
                let u: f64 = rng.random::<f64>() - 0.5;
                d - cfg.beta * u.signum() * (1.0 - 2.0 * u.abs()).ln()
            }));
        }
        Distribution::Beta => {
            let beta = Beta::new(2.0, 2.0).unwrap();
            out.extend((0..m).map(|_| d + cfg.beta * (2.0 * beta.sample(&mut rng) - 1.0)));
        }
    }
    for x in &mut out[1..] {
        *x = x.max(MIN_DEPTH);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(distribution: Distribution, count: usize, seed: u64) -> SamplerConfig {
        SamplerConfig {
            count,
            beta: 0.2,
            distribution,
            seed,
        }
    }

    #[test]
    fn anchor_only() {
        for dist in Distribution::ALL {
            assert_eq!(sample_depths(1.3, &cfg(dist, 1, 5)), vec![1.3]);
        }
    }

    #[test]
    fn anchor_is_exact_and_deterministic() {
        for dist in Distribution::ALL {
            let a = sample_depths(0.9, &cfg(dist, 64, 11));
            assert_eq!(a.len(), 64);
            assert_eq!(a[0], 0.9);
            assert_eq!(a, sample_depths(0.9, &cfg(dist, 64, 11)));
            assert_ne!(a, sample_depths(0.9, &cfg(dist, 64, 12)));
        }
    }

    #[test]
    fn uniform_bounded_with_fine_spacing() {
        for seed in 0..200 {
            let mut s = sample_depths(1.0, &cfg(Distribution::Uniform, 64, seed));
            assert!(s.iter().all(|&x| (0.8..=1.2).contains(&x)));
            s.sort_by(f64::total_cmp);
            let max_gap = s.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
            assert!(max_gap <= 0.4 / 63.0 + 1e-12);
        }
    }

    #[test]
    fn gaussian_moments() {
        let c = cfg(Distribution::Gaussian, 100_001, 3);
        let s = sample_depths(5.0, &c);
        let n = s.len() as f64;
        let mean = s.iter().sum::<f64>() / n;
        let sd = (s.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!((mean - 5.0).abs() < 0.01 * c.beta);
        assert!((sd / c.beta - 1.0).abs() < 0.05);
    }

    #[test]
    fn unbounded_distributions_leave_the_interval() {
        for dist in [Distribution::Gaussian, Distribution::Laplace] {
            let s = sample_depths(5.0, &cfg(dist, 10_000, 1));
            assert!(s.iter().any(|&x| (x - 5.0).abs() > 0.2));
        }
        let s = sample_depths(5.0, &cfg(Distribution::Beta, 10_000, 1));
        assert!(s.iter().all(|&x| (x - 5.0).abs() <= 0.2));
    }

    #[test]
    fn clamped_above_min_depth() {
        let s = sample_depths(0.01, &cfg(Distribution::Gaussian, 500, 2));
        assert!(s.iter().all(|&x| x >= MIN_DEPTH));
    }

    #[test]
    fn names_round_trip() {
        for d in Distribution::ALL {
            assert_eq!(d.name().parse::<Distribution>().unwrap(), d);
        }
        assert!("cauchy".parse::<Distribution>().is_err());
    }

    #[test]
    fn frame_seeds_differ() {
        let c = SamplerConfig::default();
        assert_ne!(c.for_frame(1).seed, c.for_frame(2).seed);
        assert_eq!(c.for_frame(7), c.for_frame(7));
    }
}
