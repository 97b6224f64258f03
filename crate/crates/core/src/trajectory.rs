use serde::{Deserialize, Serialize};

use crate::point::Point;

/// Anything that is a time-stamped sequence of states: discrete trajectories
/// (stamped with effective time) and integrated flows.
pub trait SampledPath {
    fn times(&self) -> &[f64];
    fn states(&self) -> &[Point];

    fn len(&self) -> usize {
        self.times().len()
    }

    fn is_empty(&self) -> bool {
        self.times().is_empty()
    }
}

/// Recorded iterates of a Robbins-Monro run. Sample `i` holds iterate
/// `z_{n_i}` at effective time `τ_{n_i} = Σ_{k <= n_i} γ_k`; the initial point is
/// recorded as `n = 0`, `τ = 0`, with step value 0.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    indices: Vec<u64>,
    effective_times: Vec<f64>,
    step_values: Vec<f64>,
    iterates: Vec<Point>,
}

impl Trajectory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(cap: usize) -> Self {
        Self {
            indices: Vec::with_capacity(cap),
            effective_times: Vec::with_capacity(cap),
            step_values: Vec::with_capacity(cap),
            iterates: Vec::with_capacity(cap),
        }
    }

    /// Appends a sample. Effective times must be strictly increasing.
    pub fn push(&mut self, n: u64, tau: f64, gamma: f64, z: Point) {
        if let Some(&last) = self.effective_times.last() {
            assert!(tau > last, "effective times must increase ({tau} <= {last})");
        }
        self.indices.push(n);
        self.effective_times.push(tau);
        self.step_values.push(gamma);
        self.iterates.push(z);
    }

    pub fn indices(&self) -> &[u64] {
        &self.indices
    }

    pub fn effective_times(&self) -> &[f64] {
        &self.effective_times
    }

    pub fn step_values(&self) -> &[f64] {
        &self.step_values
    }

    pub fn iterates(&self) -> &[Point] {
        &self.iterates
    }

    pub fn len(&self) -> usize {
        self.iterates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterates.is_empty()
    }

    pub fn last(&self) -> Option<&Point> {
        self.iterates.last()
    }

    pub fn first(&self) -> Option<&Point> {
        self.iterates.first()
    }
}

impl SampledPath for Trajectory {
    fn times(&self) -> &[f64] {
        &self.effective_times
    }

    fn states(&self) -> &[Point] {
        &self.iterates
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    #[should_panic(expected = "effective times must increase")]
    fn rejects_non_increasing_time() {
        let mut t = Trajectory::new();
        t.push(0, 0.0, 0.0, Point::xy(0.0, 0.0));
        t.push(1, 0.0, 0.1, Point::xy(0.0, 0.0));
    }

    #[test]
    fn sequences_stay_aligned() {
        let mut t = Trajectory::new();
        t.push(0, 0.0, 0.0, Point::xy(1.0, 0.0));
        t.push(1, 0.5, 0.5, Point::xy(1.0, 0.5));
        assert_eq!(t.len(), 2);
        assert_eq!(t.indices().len(), t.step_values().len());
        assert_eq!(t.last(), Some(&Point::xy(1.0, 0.5)));
    }
}
