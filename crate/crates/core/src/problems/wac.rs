use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::Problem;
use crate::noise::{NoiseModel, NoiseStream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WacReport {
    pub radius: f64,
    pub samples: usize,
    /// `max ⟨V(z), z⟩` over the sampled shell.
    pub max_inner: f64,
    /// Sampled points with `⟨V(z), z⟩ > 0`.
    pub violating_points: Vec<Vec<f64>>,
}

impl WacReport {
    pub fn passes(&self) -> bool {
        self.max_inner <= 0.0
    }
}

/// Samples the shell `‖z‖ = radius` and reports the largest `⟨V(z), z⟩`.
/// Planar problems use equispaced angles; higher dimensions use a fixed-seed
/// uniform sample of the sphere.
pub fn check_wac(problem: &dyn Problem, radius: f64, samples: usize) -> WacReport {
    assert!(radius > 0.0 && samples >= 1);
    let d = problem.dim();
    let points: Vec<DVector<f64>> = if d == 2 {
        (0..samples)
            .map(|k| {
                let th = k as f64 * std::f64::consts::TAU / samples as f64;
                DVector::from_vec(vec![radius * th.cos(), radius * th.sin()])
            })
            .collect()
    } else {
        let mut s = NoiseStream::new(NoiseModel::None, 0x5eed);
        (0..samples).map(|_| s.unit_vector(d) * radius).collect()
    };

    let mut max_inner = f64::NEG_INFINITY;
    let mut violating_points = Vec::new();
    for z in &points {
        let inner = problem.field(z).dot(z);
        max_inner = max_inner.max(inner);
        if inner > 0.0 {
            violating_points.push(z.as_slice().to_vec());
        }
    }
    WacReport {
        radius,
        samples,
        max_inner,
        violating_points,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{make_almost_bilinear, make_bilinear, make_forsaken, PolynomialPerturbation};

    #[test]
    fn bilinear_is_exactly_neutral() {
        for r in [0.1, 10.0, 1e6] {
            let rep = check_wac(&make_bilinear(), r, 360);
            assert_eq!(rep.max_inner, 0.0);
            assert!(rep.passes());
        }
    }

    #[test]
    fn forsaken_is_inward_at_large_radius() {
        let rep = check_wac(&make_forsaken(), 10.0, 1000);
        assert!(rep.max_inner < 0.0);
        assert!(rep.violating_points.is_empty());
    }

    #[test]
    fn almost_bilinear_leaks_outward_near_the_x_axis() {
        // ⟨V, z⟩ = ε(y² - y⁴) peaks at ε/4 where y² = 1/2, on every shell.
        let eps = 0.01;
        let p = make_almost_bilinear(PolynomialPerturbation::default_quartic(eps));
        let rep = check_wac(&p, 10.0, 100_000);
        assert!(rep.max_inner > 0.0);
        assert!((rep.max_inner - eps / 4.0).abs() < 1e-5, "{}", rep.max_inner);
    }
}
