//! Zero-mean oracle noise and the counter-based random streams that drive it.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NoiseModel {
    #[default]
    None,
    /// Isotropic gaussian with total variance `E‖U‖² = sigma²`.
    Gaussian { sigma: f64 },
    /// Uniform on the ball of radius `k`, so `‖U‖ <= k` surely.
    BoundedUniform { k: f64 },
}

impl NoiseModel {
    pub fn validated(self) -> Result<Self> {
        match self {
            NoiseModel::Gaussian { sigma } if !(sigma >= 0.0 && sigma.is_finite()) => {
                Err(Error::invalid("sigma", format!("must be >= 0, got {sigma}")))
            }
            NoiseModel::BoundedUniform { k } if !(k >= 0.0 && k.is_finite()) => {
                Err(Error::invalid("k", format!("must be >= 0, got {k}")))
            }
            m => Ok(m),
        }
    }

    /// Upper bound on `E‖U‖²`.
    pub fn variance_bound(&self, dim: usize) -> f64 {
        match *self {
            NoiseModel::None => 0.0,
            NoiseModel::Gaussian { sigma } => sigma * sigma,
            NoiseModel::BoundedUniform { k } => k * k * dim as f64 / (dim as f64 + 2.0),
        }
    }

    pub fn is_none(&self) -> bool {
        match *self {
            NoiseModel::None => true,
            NoiseModel::Gaussian { sigma } => sigma == 0.0,
            NoiseModel::BoundedUniform { k } => k == 0.0,
        }
    }
}

/// A deterministic random stream. Streams for Monte Carlo run `i` are derived
/// from `(seed, i)` via ChaCha's stream counter, so results do not depend on
/// execution order.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    model: NoiseModel,
    rng: ChaCha8Rng,
}

impl NoiseStream {
    pub fn new(model: NoiseModel, seed: u64) -> Self {
        Self::derived(model, seed, 0)
    }

    pub fn derived(model: NoiseModel, seed: u64, run_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(run_index);
        Self { model, rng }
    }

    pub fn model(&self) -> NoiseModel {
        self.model
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// One noise vector from this stream's model.
    pub fn draw(&mut self, dim: usize) -> DVector<f64> {
        let model = self.model;
        self.draw_from(model, dim)
    }

    pub fn draw_from(&mut self, model: NoiseModel, dim: usize) -> DVector<f64> {
        match model {
            NoiseModel::None => DVector::zeros(dim),
            NoiseModel::Gaussian { sigma } => {
                let per_coord = sigma / (dim as f64).sqrt();
                DVector::from_fn(dim, |_, _| {
                    let g: f64 = StandardNormal.sample(&mut self.rng);
                    per_coord * g
                })
            }
            NoiseModel::BoundedUniform { k } => {
                let dir = self.unit_vector(dim);
                let u: f64 = self.rng.random();
                dir * (k * u.powf(1.0 / dim as f64))
            }
        }
    }

    /// Uniform direction on the unit sphere.
    pub fn unit_vector(&mut self, dim: usize) -> DVector<f64> {
        loop {
            let v = DVector::from_fn(dim, |_, _| {
                let s: f64 = StandardNormal.sample(&mut self.rng);
                s
            });
            let n = v.norm();
            if n > 1e-300 {
                return v / n;
            }
        }
    }

    /// Uniform point in the ball `‖v‖ <= radius`.
    pub fn in_ball(&mut self, dim: usize, radius: f64) -> DVector<f64> {
        let dir = self.unit_vector(dim);
        let u: f64 = self.rng.random();
        dir * (radius * u.powf(1.0 / dim as f64))
    }

    pub fn index_below(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }
}
