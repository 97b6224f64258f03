use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::StepOutcome;
use crate::error::{Error, Result};
use crate::noise::NoiseStream;
use crate::point::Point;
use crate::problems::Problem;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SecondOrderKind {
    /// Descent on `½‖∇f‖²`.
    Hamiltonian,
    /// `(I - λ(J - Jᵀ)/2) V`.
    SymplecticAdjustment { lambda: f64 },
    /// `(I - λJ) V`.
    Consensus { lambda: f64 },
}

/// The driving field of a second-order scheme at `z`.
///
/// Hamiltonian descent follows `-∇(½‖∇f‖²) = -(∇²f)∇f`; the step written
/// with the field Jacobian in place of `∇²f` is a different vector and is not
/// used.
pub fn second_order_field(
    problem: &dyn Problem,
    z: &DVector<f64>,
    kind: SecondOrderKind,
) -> Result<DVector<f64>> {
    match kind {
        SecondOrderKind::Hamiltonian => {
            let h = problem.hessian_objective(z).ok_or_else(|| Error::Unsupported {
                problem: problem.label().to_string(),
                what: "Hamiltonian descent (no objective Hessian)",
            })?;
            Ok(-(h * problem.objective_gradient(z)))
        }
        SecondOrderKind::Consensus { lambda } => {
            let v = problem.field(z);
            let jv = problem.jacobian(z) * &v;
            Ok(v - jv * lambda)
        }
        SecondOrderKind::SymplecticAdjustment { lambda } => {
            let v = problem.field(z);
            let j = problem.jacobian(z);
            let antisym: DMatrix<f64> = (&j - j.transpose()) * 0.5;
            Ok(&v - antisym * &v * lambda)
        }
    }
}

/// One Robbins-Monro step along a second-order field. With a noisy stream,
/// each oracle product (the field and the Jacobian-vector product) gets its
/// own independent draw.
pub fn second_order_step(
    problem: &dyn Problem,
    z: &Point,
    gamma: f64,
    kind: SecondOrderKind,
    stream: &mut NoiseStream,
) -> Result<StepOutcome> {
    let mut signal = second_order_field(problem, z.coords(), kind)?;
    let queries = match kind {
        SecondOrderKind::Hamiltonian => 1,
        _ => 2,
    };
    if !stream.model().is_none() {
        match kind {
            SecondOrderKind::Hamiltonian => signal -= stream.draw(z.dim()),
            SecondOrderKind::Consensus { lambda } | SecondOrderKind::SymplecticAdjustment { lambda } => {
                signal += stream.draw(z.dim());
                signal -= stream.draw(z.dim()) * lambda;
            }
        }
    }
    Ok(StepOutcome {
        next: z.with_coords(z.coords() + &signal * gamma),
        signal,
        bias_estimate: None,
        queries_used: queries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{make_bilinear, make_forsaken, GradientWell};

    fn at(x: f64, y: f64) -> DVector<f64> {
        DVector::from_vec(vec![x, y])
    }

    #[test]
    fn bilinear_hamiltonian_descends_the_radius() {
        let v = second_order_field(&make_bilinear(), &at(1.0, 0.0), SecondOrderKind::Hamiltonian).unwrap();
        assert_eq!(v.as_slice(), &[-1.0, 0.0]);
    }

    #[test]
    fn bilinear_consensus_field() {
        let v = second_order_field(&make_bilinear(), &at(1.0, 0.0), SecondOrderKind::Consensus { lambda: 0.2 })
            .unwrap();
        assert!((v[0] - 0.2).abs() < 1e-15 && (v[1] - 1.0).abs() < 1e-15);
        // bilinear J is antisymmetric, so SGA coincides with ConO
        let s = second_order_field(
            &make_bilinear(),
            &at(1.0, 0.0),
            SecondOrderKind::SymplecticAdjustment { lambda: 0.2 },
        )
        .unwrap();
        assert!((s - v).norm() < 1e-15);
    }

    #[test]
    fn vanishes_at_critical_points() {
        let b = make_bilinear();
        for kind in [
            SecondOrderKind::Hamiltonian,
            SecondOrderKind::Consensus { lambda: 0.3 },
            SecondOrderKind::SymplecticAdjustment { lambda: 0.3 },
        ] {
            assert_eq!(second_order_field(&b, &at(0.0, 0.0), kind).unwrap().norm(), 0.0);
        }
    }

    #[test]
    fn hamiltonian_is_gradient_of_half_squared_norm() {
        let p = make_forsaken();
        let z = at(0.4, -0.9);
        let h = 1e-6;
        let lam = |w: &DVector<f64>| 0.5 * p.objective_gradient(w).norm_squared();
        let fd = DVector::from_fn(2, |i, _| {
            let mut a = z.clone();
            let mut b = z.clone();
            a[i] += h;
            b[i] -= h;
            -(lam(&a) - lam(&b)) / (2.0 * h)
        });
        let v = second_order_field(&p, &z, SecondOrderKind::Hamiltonian).unwrap();
        assert!((v - fd).norm() < 1e-6);
    }

    #[test]
    fn hamiltonian_needs_hessian() {
        let r = second_order_field(&GradientWell::default(), &at(0.5, 0.5), SecondOrderKind::Hamiltonian);
        assert!(matches!(r, Err(Error::Unsupported { .. })));
    }
}
