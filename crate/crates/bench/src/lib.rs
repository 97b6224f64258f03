//! Shared fixtures for the benchmarks.

use rmlab_core::problems::{make_almost_bilinear, AlmostBilinear, PolynomialPerturbation};
use rmlab_core::StepSchedule;

pub fn quartic_game(epsilon: f64) -> AlmostBilinear {
    make_almost_bilinear(PolynomialPerturbation::default_quartic(epsilon))
}

pub fn harmonic(scale: f64) -> StepSchedule {
    StepSchedule::power(scale, 1.0).expect("positive scale")
}
