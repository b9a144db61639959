use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::GenError;

/// Error magnitudes of the toy generator.
///
/// Every operation adds a fresh perturbation whose norm is exactly the
/// corresponding epsilon. With `jitter == false` all perturbations point along
/// the fixed unit diagonal, so deviation norms add up exactly; with
/// `jitter == true` each one points in a uniformly random direction drawn from
/// a stream derived from `(seed, segment, stage, frame)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub eps_plan: f64,
    pub eps_fill: f64,
    pub eps_step: f64,
    pub gamma: f64,
    pub eps_codec: f64,
    pub jitter: bool,
    pub seed: u64,
}

impl NoiseModel {
    /// Every epsilon set to `eps`, `gamma = 1`, deterministic directions.
    pub fn uniform(eps: f64) -> Self {
        Self { eps_plan: eps, eps_fill: eps, eps_step: eps, gamma: 1.0, eps_codec: eps, jitter: false, seed: 0 }
    }

    pub fn zero() -> Self {
        Self::uniform(0.0)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_jitter(mut self, jitter: bool) -> Self {
        self.jitter = jitter;
        self
    }

    pub fn validate(&self) -> Result<(), GenError> {
        let named = [
            ("eps_plan", self.eps_plan),
            ("eps_fill", self.eps_fill),
            ("eps_step", self.eps_step),
            ("eps_codec", self.eps_codec),
        ];
        for (name, value) in named {
            if !value.is_finite() || value < 0.0 {
                return Err(GenError::InvalidNoise(format!("{name} must be finite and non-negative, got {value}")));
            }
        }
        if !self.gamma.is_finite() || self.gamma < 1.0 {
            return Err(GenError::InvalidNoise(format!("gamma must be finite and >= 1, got {}", self.gamma)));
        }
        Ok(())
    }

    pub(crate) fn perturbation(&self, dim: usize, key: StreamKey, eps: f64) -> Vec<f64> {
        if eps == 0.0 {
            return vec![0.0; dim];
        }
        if !self.jitter {
            let component = eps / (dim as f64).sqrt();
            return vec![component; dim];
        }
        let mut rng = key.rng(self.seed);
        loop {
            let raw: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1e-12 {
                return raw.into_iter().map(|v| eps * v / norm).collect();
            }
        }
    }
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self::uniform(0.01)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub(crate) enum Stage {
    Plan = 1,
    FillFirst = 2,
    FillSecond = 3,
    Codec = 4,
    Step = 5,
}

/// Identifies one independent random stream; results never depend on the
/// order in which streams are consumed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub(crate) struct StreamKey {
    pub segment: usize,
    pub stage: Stage,
    pub frame: usize,
}

impl StreamKey {
    pub fn new(segment: usize, stage: Stage, frame: usize) -> Self {
        Self { segment, stage, frame }
    }

    fn rng(&self, seed: u64) -> ChaCha8Rng {
        let mut h = splitmix64(seed);
        for part in [self.segment as u64, self.stage as u64, self.frame as u64] {
            h = splitmix64(h ^ part.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        }
        ChaCha8Rng::seed_from_u64(h)
    }
}

pub(crate) fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for the `index`-th independent replicate of a run seeded with `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03))
}
