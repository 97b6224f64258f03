use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::StepOutcome;
use crate::noise::NoiseStream;
use crate::point::Point;
use crate::problems::{sfo_query, Problem};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamParams {
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_stabilizer")]
    pub stabilizer: f64,
}

fn default_beta1() -> f64 {
    0.9
}

fn default_beta2() -> f64 {
    0.999
}

fn default_stabilizer() -> f64 {
    1e-8
}

impl Default for AdamParams {
    fn default() -> Self {
        Self {
            beta1: default_beta1(),
            beta2: default_beta2(),
            stabilizer: default_stabilizer(),
        }
    }
}

/// First and second moment accumulators plus the update counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamMoments {
    pub first: DVector<f64>,
    pub second: DVector<f64>,
    pub updates: u32,
}

impl AdamMoments {
    pub fn zeros(dim: usize) -> Self {
        Self {
            first: DVector::zeros(dim),
            second: DVector::zeros(dim),
            updates: 0,
        }
    }

    /// Folds in one signal and returns the bias-corrected direction.
    fn update(&mut self, g: &DVector<f64>, p: &AdamParams) -> DVector<f64> {
        self.updates += 1;
        self.first = &self.first * p.beta1 + g * (1.0 - p.beta1);
        self.second = &self.second * p.beta2 + g.component_mul(g) * (1.0 - p.beta2);
        let c1 = 1.0 - p.beta1.powi(self.updates as i32);
        let c2 = 1.0 - p.beta2.powi(self.updates as i32);
        DVector::from_fn(g.len(), |i, _| {
            (self.first[i] / c1) / ((self.second[i] / c2).sqrt() + p.stabilizer)
        })
    }
}

/// Adam driven by the oracle signal, moving along `+V` for both players
/// (each player descends its own loss). With `extra`, an extrapolation step
/// from the current moments comes first and the update uses the signal at the
/// extrapolated point, as in ExtraAdam; both steps fold into the moments.
pub fn adam_step(
    problem: &dyn Problem,
    z: &Point,
    eta: f64,
    params: &AdamParams,
    stream: &mut NoiseStream,
    moments: &mut AdamMoments,
    extra: bool,
) -> StepOutcome {
    let first = sfo_query(problem, z, stream);
    let mut queries = first.queries_used;
    let dir = moments.update(&first.value, params);
    let dir = if extra {
        let lead = z.with_coords(z.coords() + &dir * eta);
        let second = sfo_query(problem, &lead, stream);
        queries += second.queries_used;
        moments.update(&second.value, params)
    } else {
        dir
    };
    StepOutcome {
        next: z.with_coords(z.coords() + &dir * eta),
        signal: dir,
        bias_estimate: None,
        queries_used: queries,
    }
}
