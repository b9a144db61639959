use std::f64::consts::PI;

/// Shape of the reference trajectory every generated frame is measured against.
#[derive(Debug, Clone, PartialEq)]
pub enum Trajectory {
    /// Component `k` is `sin(w_k t + p_k) + 0.3 cos(0.5 w_k t)`; frequencies are
    /// pairwise distinct so the vector never stalls.
    MultiSine,
    /// Every component equals `slope * t`.
    Linear { slope: f64 },
    /// A static scene.
    Constant { value: f64 },
}

/// Deterministic reference trajectory over the global timeline.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    dim: usize,
    trajectory: Trajectory,
}

impl GroundTruth {
    pub const DEFAULT_DIM: usize = 8;

    pub fn multi_sine(dim: usize) -> Self {
        assert!(dim > 0, "latent dimensionality must be positive");
        Self { dim, trajectory: Trajectory::MultiSine }
    }

    pub fn linear(dim: usize, slope: f64) -> Self {
        assert!(dim > 0, "latent dimensionality must be positive");
        Self { dim, trajectory: Trajectory::Linear { slope } }
    }

    pub fn constant(dim: usize, value: f64) -> Self {
        assert!(dim > 0, "latent dimensionality must be positive");
        Self { dim, trajectory: Trajectory::Constant { value } }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.trajectory
    }

    pub fn at(&self, position: usize) -> Vec<f64> {
        let t = position as f64;
        match self.trajectory {
            Trajectory::MultiSine => (0..self.dim)
                .map(|k| {
                    let k = k as f64;
                    let w = 0.05 + 0.023 * k;
                    let phase = 0.9 * k + PI / 7.0;
                    (w * t + phase).sin() + 0.3 * (0.5 * w * t).cos()
                })
                .collect(),
            Trajectory::Linear { slope } => vec![slope * t; self.dim],
            Trajectory::Constant { value } => vec![value; self.dim],
        }
    }
}

impl Default for GroundTruth {
    fn default() -> Self {
        Self::multi_sine(Self::DEFAULT_DIM)
    }
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
