use nalgebra::{DMatrix, DVector};

use super::StepOutcome;
use crate::error::{Error, Result};
use crate::noise::NoiseStream;
use crate::point::Point;
use crate::problems::{sfo_query, spsa_query, Problem};

fn advance(z: &Point, gamma: f64, signal: &DVector<f64>) -> Point {
    z.with_coords(z.coords() + signal * gamma)
}

/// `z⁺ = z + γ·sfo(z)`.
pub fn sgda_step(
    problem: &dyn Problem,
    z: &Point,
    gamma: f64,
    stream: &mut NoiseStream,
) -> StepOutcome {
    let q = sfo_query(problem, z, stream);
    StepOutcome {
        next: advance(z, gamma, &q.value),
        bias_estimate: Some(DVector::zeros(z.dim())),
        queries_used: q.queries_used,
        signal: q.value,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PpmOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for PpmOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-12,
            max_iterations: 1000,
        }
    }
}

/// Implicit step `z⁺ = z + γ V(z⁺)`.
///
/// Affine fields are solved directly from `(I - γJ)(z⁺ - z) = γV(z)`. Other
/// fields use fixed-point iteration `w ← z + γV(w)`; the relaxation weight is
/// halved whenever the residual grows.
pub fn ppm_step(
    problem: &dyn Problem,
    z: &Point,
    gamma: f64,
    opts: PpmOptions,
) -> Result<StepOutcome> {
    let v0 = problem.field(z.coords());
    let residual_of = |w: &DVector<f64>| (w - z.coords() - problem.field(w) * gamma).norm();

    let (next, evaluations) = if problem.is_affine() {
        let n = z.dim();
        let m = DMatrix::identity(n, n) - problem.jacobian(z.coords()) * gamma;
        let dz = m
            .lu()
            .solve(&(&v0 * gamma))
            .ok_or_else(|| Error::invalid("gamma", "I - γJ is singular"))?;
        (z.coords() + dz, 1)
    } else {
        let mut w = z.coords() + &v0 * gamma;
        let mut residual = residual_of(&w);
        let mut relax = 1.0;
        let mut k = 0;
        while residual > opts.tolerance {
            if k == opts.max_iterations {
                return Err(Error::PpmNotConverged {
                    budget: opts.max_iterations,
                    tol: opts.tolerance,
                    residual,
                });
            }
            let target = z.coords() + problem.field(&w) * gamma;
            let candidate = &w * (1.0 - relax) + target * relax;
            let r = residual_of(&candidate);
            if r > residual && relax > 1e-3 {
                relax *= 0.5;
            } else {
                w = candidate;
                residual = r;
            }
            k += 1;
        }
        (w, k + 1)
    };

    // z⁺ = z + γV(w) agrees with the solved w up to the residual and keeps
    // the update exactly of the form z + γ·signal
    let signal = problem.field(&next);
    let bias = &signal - &v0;
    Ok(StepOutcome {
        next: z.with_coords(z.coords() + &signal * gamma),
        signal,
        bias_estimate: Some(bias),
        queries_used: evaluations,
    })
}

/// Extragradient: `lead = z + γ sfo(z)`, `z⁺ = z + γ sfo(lead)`.
pub fn seg_step(
    problem: &dyn Problem,
    z: &Point,
    gamma: f64,
    stream: &mut NoiseStream,
) -> StepOutcome {
    let first = sfo_query(problem, z, stream);
    let lead = advance(z, gamma, &first.value);
    let second = sfo_query(problem, &lead, stream);
    let bias = problem.field(lead.coords()) - problem.field(z.coords());
    StepOutcome {
        next: advance(z, gamma, &second.value),
        signal: second.value,
        bias_estimate: Some(bias),
        queries_used: first.queries_used + second.queries_used,
    }
}

/// Optimistic / past extragradient. `carried` holds the previous oracle
/// answer; when empty, one bootstrap query at `z` fills it.
pub fn peg_step(
    problem: &dyn Problem,
    z: &Point,
    gamma: f64,
    stream: &mut NoiseStream,
    carried: &mut Option<DVector<f64>>,
) -> StepOutcome {
    let mut queries = 0;
    let past = match carried.take() {
        Some(v) => v,
        None => {
            queries += 1;
            sfo_query(problem, z, stream).value
        }
    };
    let lead = advance(z, gamma, &past);
    let fresh = sfo_query(problem, &lead, stream);
    queries += fresh.queries_used;
    let bias = problem.field(lead.coords()) - problem.field(z.coords());
    let next = advance(z, gamma, &fresh.value);
    *carried = Some(fresh.value.clone());
    StepOutcome {
        next,
        signal: fresh.value,
        bias_estimate: Some(bias),
        queries_used: queries,
    }
}

/// `z⁺ = z + γ v` with `v` the zeroth-order estimate at sampling radius `δ`.
pub fn spsa_step(
    problem: &dyn Problem,
    z: &Point,
    gamma: f64,
    delta: f64,
    stream: &mut NoiseStream,
) -> Result<StepOutcome> {
    let q = spsa_query(problem, z, delta, stream)?;
    Ok(StepOutcome {
        next: advance(z, gamma, &q.value),
        bias_estimate: None,
        queries_used: q.queries_used,
        signal: q.value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::NoiseModel;
    use crate::problems::{make_bilinear, make_forsaken};

    fn quiet() -> NoiseStream {
        NoiseStream::new(NoiseModel::None, 0)
    }

    fn close(p: &Point, x: f64, y: f64, tol: f64) -> bool {
        (p[0] - x).abs() <= tol && (p[1] - y).abs() <= tol
    }

    #[test]
    fn sgda_bilinear_steps() {
        let b = make_bilinear();
        let out = sgda_step(&b, &Point::xy(1.0, 0.0), 0.1, &mut quiet());
        assert!(close(&out.next, 1.0, 0.1, 0.0));
        assert!((out.next.norm().powi(2) - 1.01).abs() < 1e-15);
        let out = sgda_step(&b, &Point::xy(1.0, 1.0), 0.1, &mut quiet());
        assert!(close(&out.next, 0.9, 1.1, 1e-15));
        assert_eq!(out.queries_used, 1);
    }

    #[test]
    fn ppm_bilinear_step_solves_linear_system() {
        let out = ppm_step(&make_bilinear(), &Point::xy(1.0, 0.0), 0.1, PpmOptions::default()).unwrap();
        assert!(close(&out.next, 1.0 / 1.01, 0.1 / 1.01, 1e-15));
        assert!((out.next.norm().powi(2) - 1.0 / 1.01).abs() < 1e-14);
    }

    #[test]
    fn ppm_fixed_point_meets_tolerance() {
        let p = make_forsaken();
        let z = Point::xy(0.3, 0.8);
        let out = ppm_step(&p, &z, 0.05, PpmOptions::default()).unwrap();
        let resid = out.next.coords() - z.coords() - p.field(out.next.coords()) * 0.05;
        assert!(resid.norm() <= 1e-12);
    }

    #[test]
    fn ppm_reports_budget_on_failure() {
        let p = make_forsaken();
        let opts = PpmOptions {
            tolerance: 1e-12,
            max_iterations: 2,
        };
        match ppm_step(&p, &Point::xy(1.2, -1.1), 0.3, opts) {
            Err(Error::PpmNotConverged { budget, .. }) => assert_eq!(budget, 2),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn ppm_stays_near_forsaken_critical_point() {
        let p = make_forsaken();
        let mut z = Point::xy(0.046019, 0.477185);
        let start = z.clone();
        for _ in 0..20 {
            z = ppm_step(&p, &z, 0.01, PpmOptions::default()).unwrap().next;
        }
        assert!(z.distance(&start) < 1e-4);
    }

    #[test]
    fn seg_bilinear_step() {
        let out = seg_step(&make_bilinear(), &Point::xy(1.0, 0.0), 0.1, &mut quiet());
        assert!(close(&out.next, 0.99, 0.1, 1e-15));
        let r2 = out.next.norm().powi(2);
        assert!((r2 - (1.0 - 0.01 + 0.0001)).abs() < 1e-14);
        assert_eq!(out.queries_used, 2);
    }

    #[test]
    fn seg_bias_is_order_gamma() {
        let p = make_forsaken();
        let z = Point::xy(0.7, -0.4);
        let gamma = 0.01;
        let out = seg_step(&p, &z, gamma, &mut quiet());
        // Lipschitz bound of V on the segment [z, lead]
        let lead = z.coords() + p.field(z.coords()) * gamma;
        let l = (0..=10)
            .map(|i| {
                let w = z.coords() + (&lead - z.coords()) * (i as f64 / 10.0);
                p.jacobian(&w).norm()
            })
            .fold(0.0, f64::max);
        let bias = out.bias_estimate.unwrap().norm();
        assert!(bias <= gamma * l * p.field(z.coords()).norm() * (1.0 + 1e-9));
    }

    #[test]
    fn peg_bilinear_step_with_carried_signal() {
        let mut carried = Some(DVector::from_vec(vec![0.0, 1.0]));
        let out = peg_step(&make_bilinear(), &Point::xy(1.0, 0.0), 0.1, &mut quiet(), &mut carried);
        assert!(close(&out.next, 0.99, 0.1, 1e-15));
        assert_eq!(out.queries_used, 1);
        assert_eq!(carried.unwrap(), out.signal);
    }

    #[test]
    fn peg_bootstrap_costs_an_extra_query() {
        let mut carried = None;
        let out = peg_step(&make_bilinear(), &Point::xy(1.0, 0.0), 0.1, &mut quiet(), &mut carried);
        assert_eq!(out.queries_used, 2);
        let out = peg_step(&make_bilinear(), &out.next, 0.1, &mut quiet(), &mut carried);
        assert_eq!(out.queries_used, 1);
    }

    #[test]
    fn critical_points_are_fixed() {
        let b = make_bilinear();
        let o = Point::xy(0.0, 0.0);
        assert_eq!(sgda_step(&b, &o, 0.1, &mut quiet()).next, o);
        assert_eq!(seg_step(&b, &o, 0.1, &mut quiet()).next, o);
        assert_eq!(ppm_step(&b, &o, 0.1, PpmOptions::default()).unwrap().next, o);
        let mut carried = Some(DVector::zeros(2));
        assert_eq!(peg_step(&b, &o, 0.1, &mut quiet(), &mut carried).next, o);
    }

    #[test]
    fn spsa_step_average_direction() {
        let b = make_bilinear();
        let z = Point::xy(1.0, 1.0);
        let mut acc = DVector::zeros(2);
        for seed in 0..4 {
            let v = crate::problems::spsa_estimate_for_seed(&b, &z, 0.01, seed).unwrap();
            acc += v;
        }
        acc /= 4.0;
        assert!((acc[0] + 1.0).abs() < 1e-12 && (acc[1] - 1.0).abs() < 1e-12);
        let out = spsa_step(&b, &z, 0.1, 0.01, &mut quiet()).unwrap();
        assert!((out.next.coords() - z.coords() - &out.signal * 0.1).norm() == 0.0);
    }
}
