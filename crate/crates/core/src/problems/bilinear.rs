use nalgebra::{DMatrix, DVector};

use super::Problem;
use crate::point::Point;

/// `f(x, y) = xy`, field `V(x, y) = (-y, x)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Bilinear;

impl Problem for Bilinear {
    fn label(&self) -> &str {
        "bilinear"
    }

    fn d1(&self) -> usize {
        1
    }

    fn d2(&self) -> usize {
        1
    }

    fn objective(&self, z: &DVector<f64>) -> Option<f64> {
        Some(z[0] * z[1])
    }

    fn field(&self, z: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(vec![-z[1], z[0]])
    }

    fn jacobian(&self, _z: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0])
    }

    fn hessian_objective(&self, _z: &DVector<f64>) -> Option<DMatrix<f64>> {
        Some(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]))
    }

    fn is_affine(&self) -> bool {
        true
    }

    fn known_critical_points(&self) -> Vec<Point> {
        vec![Point::xy(0.0, 0.0)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::test_support::{assert_consistent, random_points};

    #[test]
    fn field_values() {
        let p = Bilinear;
        assert_eq!(p.field(&DVector::from_vec(vec![1.0, 0.0])).as_slice(), &[0.0, 1.0]);
        assert_eq!(p.field(&DVector::zeros(2)).as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn field_is_orthogonal_to_position() {
        for z in random_points(50, 2, 100.0, 5) {
            assert_eq!(Bilinear.field(&z).dot(&z), 0.0);
        }
    }

    #[test]
    fn derivatives_agree_with_finite_differences() {
        assert_consistent(&Bilinear, 3.0);
    }
}
