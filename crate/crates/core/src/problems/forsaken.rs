use nalgebra::{DMatrix, DVector};

use super::Problem;

const OFFSET: f64 = 0.5;

/// `ψ(t) = t²/4 - t⁴/2 + t⁶/6`.
fn psi(t: f64) -> f64 {
    let t2 = t * t;
    t2 / 4.0 - t2 * t2 / 2.0 + t2 * t2 * t2 / 6.0
}

fn psi_prime(t: f64) -> f64 {
    let t2 = t * t;
    t / 2.0 - 2.0 * t * t2 + t * t2 * t2
}

fn psi_second(t: f64) -> f64 {
    let t2 = t * t;
    0.5 - 6.0 * t2 + 5.0 * t2 * t2
}

/// The "forsaken solutions" game `f(x, y) = x(y - 0.5) + ψ(x) - ψ(y)` whose
/// field is
///
/// ```text
/// ẋ = -(y - 0.5) - x/2 + 2x³ - x⁵
/// ẏ =  x         - y/2 + 2y³ - y⁵
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Forsaken;

impl Forsaken {
    /// `½ d(r²)/dt = ⟨V(z), z⟩` in the closed form
    /// `0.5x - ½r² + 2r⁴ - r⁶ + x²y²(3r² - 4)`.
    pub fn radial_rate(x: f64, y: f64) -> f64 {
        let r2 = x * x + y * y;
        0.5 * x - 0.5 * r2 + 2.0 * r2 * r2 - r2 * r2 * r2 + x * x * y * y * (3.0 * r2 - 4.0)
    }
}

impl Problem for Forsaken {
    fn label(&self) -> &str {
        "forsaken"
    }

    fn d1(&self) -> usize {
        1
    }

    fn d2(&self) -> usize {
        1
    }

    fn objective(&self, z: &DVector<f64>) -> Option<f64> {
        let (x, y) = (z[0], z[1]);
        Some(x * (y - OFFSET) + psi(x) - psi(y))
    }

    fn field(&self, z: &DVector<f64>) -> DVector<f64> {
        let (x, y) = (z[0], z[1]);
        DVector::from_vec(vec![-(y - OFFSET) - psi_prime(x), x - psi_prime(y)])
    }

    fn jacobian(&self, z: &DVector<f64>) -> DMatrix<f64> {
        let (x, y) = (z[0], z[1]);
        DMatrix::from_row_slice(2, 2, &[-psi_second(x), -1.0, 1.0, -psi_second(y)])
    }

    fn hessian_objective(&self, z: &DVector<f64>) -> Option<DMatrix<f64>> {
        let (x, y) = (z[0], z[1]);
        Some(DMatrix::from_row_slice(2, 2, &[psi_second(x), 1.0, 1.0, -psi_second(y)]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::test_support::{assert_consistent, random_points};

    #[test]
    fn field_matches_stated_dynamics() {
        let v = Forsaken.field(&DVector::from_vec(vec![0.0, 0.5]));
        assert_eq!(v[0], 0.0);
        assert!((v[1] - (-0.03125)).abs() < 1e-15);
        for z in random_points(20, 2, 1.5, 3) {
            let (x, y) = (z[0], z[1]);
            let v = Forsaken.field(&z);
            let vx = -(y - 0.5) - 0.5 * x + 2.0 * x.powi(3) - x.powi(5);
            let vy = x - 0.5 * y + 2.0 * y.powi(3) - y.powi(5);
            assert!((v[0] - vx).abs() < 1e-13 && (v[1] - vy).abs() < 1e-13);
        }
    }

    #[test]
    fn radial_rate_closed_form_matches_inner_product() {
        for z in random_points(100, 2, 2.0, 11) {
            let direct = Forsaken.field(&z).dot(&z);
            assert!((direct - Forsaken::radial_rate(z[0], z[1])).abs() < 1e-12);
        }
    }

    #[test]
    fn radial_rate_on_inner_circle_is_half_x_plus_14_27() {
        let r = (4.0f64 / 3.0).sqrt();
        for k in 0..64 {
            let th = k as f64 * std::f64::consts::TAU / 64.0;
            let (x, y) = (r * th.cos(), r * th.sin());
            let expected = 0.5 * x + 14.0 / 27.0;
            // the closed form on r² = 4/3 only drops the x²y² term when 3r² = 4
            assert!((Forsaken::radial_rate(x, y) - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn radial_rate_at_unit_diagonal_is_positive() {
        // r² = 2 at (1, 1): 0.5 - 1 + 8 - 8 + 2 = 1.5
        assert!((Forsaken::radial_rate(1.0, 1.0) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn derivatives_agree_with_finite_differences() {
        assert_consistent(&Forsaken, 1.5);
    }
}
