use nalgebra::DVector;

use super::{Scheme, StepOutcome};
use crate::error::Result;
use crate::noise::NoiseStream;
use crate::point::Point;
use crate::problems::Problem;
use crate::schedule::StepValue;

/// `z⁺ = α·(base step from z) + (1 - α)·z`, which is the base scheme run at
/// step `αγ`.
pub fn averaged_step(
    scheme: &mut Scheme,
    problem: &dyn Problem,
    z: &Point,
    step: StepValue,
    alpha: f64,
    stream: &mut NoiseStream,
) -> Result<StepOutcome> {
    let base = scheme.base_step(problem, z, step, stream)?;
    let next = base.next.coords() * alpha + z.coords() * (1.0 - alpha);
    Ok(StepOutcome {
        next: z.with_coords(next),
        ..base
    })
}

/// Bookkeeping of an alternating step.
#[derive(Debug, Clone, PartialEq)]
pub struct AlternatingParts {
    /// State after the min-block updates.
    pub x_plus: Point,
    /// For `(1, 1)`: the realized error of each block relative to the field
    /// at that block's evaluation point, i.e. `(v_x - V_x(x, y), v_y - V_y(x⁺, y))`.
    pub block_errors: Option<DVector<f64>>,
    /// `(0, V_y(x⁺, y) - V_y(x, y))`.
    pub correction: DVector<f64>,
}

fn splice(head_from: &DVector<f64>, tail_from: &DVector<f64>, d1: usize) -> DVector<f64> {
    let mut out = tail_from.clone();
    out.rows_mut(0, d1).copy_from(&head_from.rows(0, d1));
    out
}

/// `k1` updates of the min block with the max block frozen, then `k2`
/// updates of the max block at the new min block. Each block update runs the
/// base rule from the current joint state (fresh oracle draws) and keeps only
/// that block; the step `γ` is held for the whole macro-iteration.
pub fn alternating_step(
    scheme: &mut Scheme,
    problem: &dyn Problem,
    z: &Point,
    step: StepValue,
    k1: u32,
    k2: u32,
    stream: &mut NoiseStream,
) -> Result<(StepOutcome, AlternatingParts)> {
    let d1 = z.d1();
    let d = z.dim();
    let mut cur = z.clone();
    let mut queries = 0;
    let mut x_err = None;
    let mut x_bias = None;
    for _ in 0..k1 {
        let out = scheme.base_step(problem, &cur, step, stream)?;
        queries += out.queries_used;
        let v = problem.field(cur.coords());
        x_err = Some(&out.signal - &v);
        x_bias = out.bias_estimate;
        cur = cur.with_coords(splice(out.next.coords(), cur.coords(), d1));
    }
    let x_plus = cur.clone();
    let mut y_err = None;
    let mut y_bias = None;
    for _ in 0..k2 {
        let out = scheme.base_step(problem, &cur, step, stream)?;
        queries += out.queries_used;
        let v = problem.field(cur.coords());
        y_err = Some(&out.signal - &v);
        y_bias = out.bias_estimate;
        cur = cur.with_coords(splice(cur.coords(), out.next.coords(), d1));
    }

    let v_start = problem.field(z.coords());
    let v_mid = problem.field(x_plus.coords());
    let mut correction = DVector::zeros(d);
    correction
        .rows_mut(d1, d - d1)
        .copy_from(&(v_mid.rows(d1, d - d1) - v_start.rows(d1, d - d1)));

    let single = k1 == 1 && k2 == 1;
    let block_errors = match (single, x_err, y_err) {
        (true, Some(ex), Some(ey)) => Some(splice(&ex, &ey, d1)),
        _ => None,
    };
    let bias_estimate = match (single, x_bias, y_bias) {
        (true, Some(bx), Some(by)) => Some(splice(&bx, &by, d1) + &correction),
        _ => None,
    };

    let signal = (cur.coords() - z.coords()) / step.gamma;
    Ok((
        StepOutcome {
            next: cur,
            signal,
            bias_estimate,
            queries_used: queries,
        },
        AlternatingParts {
            x_plus,
            block_errors,
            correction,
        },
    ))
}
