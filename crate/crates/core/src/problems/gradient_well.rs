use nalgebra::{DMatrix, DVector};

use super::Problem;
use crate::error::{Error, Result};

/// Pure descent `V = -∇g` with `g(z) = ¼‖z‖⁴ - ½ρ²‖z‖²` on the plane.
///
/// `g` is radial, so no objective `f` has `(-∇_x f, ∇_y f) = -∇g`; SPSA and
/// Hamiltonian descent are unsupported here.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientWell {
    radius: f64,
}

impl GradientWell {
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid("radius", format!("must be positive, got {radius}")));
        }
        Ok(Self { radius })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }
}

impl Default for GradientWell {
    fn default() -> Self {
        Self { radius: 1.0 }
    }
}

impl Problem for GradientWell {
    fn label(&self) -> &str {
        "gradient-well"
    }

    fn d1(&self) -> usize {
        1
    }

    fn d2(&self) -> usize {
        1
    }

    fn objective(&self, _z: &DVector<f64>) -> Option<f64> {
        None
    }

    fn field(&self, z: &DVector<f64>) -> DVector<f64> {
        let s = z.norm_squared() - self.radius * self.radius;
        z * (-s)
    }

    fn jacobian(&self, z: &DVector<f64>) -> DMatrix<f64> {
        let s = z.norm_squared() - self.radius * self.radius;
        let n = z.len();
        -(DMatrix::identity(n, n) * s + (z * z.transpose()) * 2.0)
    }

    fn is_gradient_system(&self) -> bool {
        true
    }

    fn potential(&self, z: &DVector<f64>) -> Option<f64> {
        let r2 = z.norm_squared();
        Some(0.25 * r2 * r2 - 0.5 * self.radius * self.radius * r2)
    }

    fn known_critical_points(&self) -> Vec<crate::point::Point> {
        vec![crate::point::Point::xy(0.0, 0.0)]
    }
}
