//! Mean dynamics `ż = V(z)`, continuous-time interpolation of discrete runs,
//! and the deviation between the two.

mod apt;
mod interpolate;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

pub use apt::{apt_deviation, apt_deviation_with, AptOptions};
pub use interpolate::{interpolate, InterpolatedPath};

use crate::algorithms::DIVERGENCE_THRESHOLD;
use crate::error::{DivergenceReport, Error, Result};
use crate::point::Point;
use crate::problems::Problem;
use crate::trajectory::SampledPath;

/// Default fixed RK4 step.
pub const DEFAULT_H_INT: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    Rk4,
}

/// Samples of an integrated orbit `t ↦ Φ_t(z0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowPath {
    times: Vec<f64>,
    states: Vec<Point>,
    h_int: f64,
    method: Integrator,
}

impl FlowPath {
    pub fn h_int(&self) -> f64 {
        self.h_int
    }

    pub fn method(&self) -> Integrator {
        self.method
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().expect("flow paths are never empty")
    }

    pub fn last(&self) -> &Point {
        self.states.last().expect("flow paths are never empty")
    }

    /// Builds a path from externally produced samples (times must start at 0
    /// and increase).
    pub fn from_samples(times: Vec<f64>, states: Vec<Point>, h_int: f64) -> Result<Self> {
        if times.len() != states.len() || times.is_empty() {
            return Err(Error::invalid("samples", "times and states must be non-empty and equally long"));
        }
        if times[0] != 0.0 || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("times", "must start at 0 and strictly increase"));
        }
        Ok(Self {
            times,
            states,
            h_int,
            method: Integrator::Rk4,
        })
    }
}

impl SampledPath for FlowPath {
    fn times(&self) -> &[f64] {
        &self.times
    }

    fn states(&self) -> &[Point] {
        &self.states
    }
}

fn rk4_step(field: &impl Fn(&DVector<f64>) -> DVector<f64>, z: &DVector<f64>, h: f64) -> DVector<f64> {
    let k1 = field(z);
    let k2 = field(&(z + &k1 * (0.5 * h)));
    let k3 = field(&(z + &k2 * (0.5 * h)));
    let k4 = field(&(z + &k3 * h));
    z + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

fn check_finite(z: &DVector<f64>, step: u64) -> Result<()> {
    if z.iter().all(|c| c.abs() <= DIVERGENCE_THRESHOLD) {
        Ok(())
    } else {
        Err(Error::Diverged(DivergenceReport {
            iteration: step,
            coords: z.iter().copied().collect(),
            queries_used: 0,
        }))
    }
}

/// Advances `z` by `duration` (which may be negative) with fixed RK4 steps of
/// size at most `h`, the last one shortened. Returns the end state only.
pub fn advance(
    field: &impl Fn(&DVector<f64>) -> DVector<f64>,
    z: &DVector<f64>,
    duration: f64,
    h: f64,
) -> Result<DVector<f64>> {
    let mut cur = z.clone();
    if duration == 0.0 {
        return Ok(cur);
    }
    let sign = duration.signum();
    let span = duration.abs();
    let full = (span / h).floor() as u64;
    for k in 0..full {
        cur = rk4_step(field, &cur, sign * h);
        check_finite(&cur, k + 1)?;
    }
    let rest = span - full as f64 * h;
    if rest > h * 1e-9 {
        cur = rk4_step(field, &cur, sign * rest);
        check_finite(&cur, full + 1)?;
    }
    Ok(cur)
}

/// Integrates an arbitrary field on `[0, t_end]`, recording every
/// `record_every`-th step and always the endpoint.
pub fn integrate_field(
    field: impl Fn(&DVector<f64>) -> DVector<f64>,
    z0: &Point,
    t_end: f64,
    h_int: f64,
    record_every: usize,
) -> Result<FlowPath> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::invalid("T", format!("must be positive, got {t_end}")));
    }
    if !(h_int > 0.0 && h_int.is_finite()) {
        return Err(Error::invalid("h_int", format!("must be positive, got {h_int}")));
    }
    if record_every == 0 {
        return Err(Error::invalid("record_every", "must be >= 1"));
    }
    let full = (t_end / h_int).floor() as u64;
    let rest = t_end - full as f64 * h_int;
    let has_rest = rest > h_int * 1e-9;
    let cap = (full as usize / record_every + 2).min(1 << 24);
    let mut times = Vec::with_capacity(cap);
    let mut states = Vec::with_capacity(cap);
    times.push(0.0);
    states.push(z0.clone());

    let mut cur = z0.coords().clone();
    for k in 1..=full {
        cur = rk4_step(&field, &cur, h_int);
        check_finite(&cur, k)?;
        if k as usize % record_every == 0 || (k == full && !has_rest) {
            // k·h rather than a running sum keeps the clock free of drift
            times.push(if k == full && !has_rest { t_end } else { k as f64 * h_int });
            states.push(z0.with_coords(cur.clone()));
        }
    }
    if has_rest {
        cur = rk4_step(&field, &cur, rest);
        check_finite(&cur, full + 1)?;
        times.push(t_end);
        states.push(z0.with_coords(cur));
    }
    Ok(FlowPath {
        times,
        states,
        h_int,
        method: Integrator::Rk4,
    })
}

/// Classical RK4 solution of `ż = V(z)` on `[0, t_end]`, every step recorded.
pub fn integrate_flow(problem: &dyn Problem, z0: &Point, t_end: f64, h_int: f64) -> Result<FlowPath> {
    integrate_flow_strided(problem, z0, t_end, h_int, 1)
}

pub fn integrate_flow_strided(
    problem: &dyn Problem,
    z0: &Point,
    t_end: f64,
    h_int: f64,
    record_every: usize,
) -> Result<FlowPath> {
    if z0.dim() != problem.dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.dim(),
            got: z0.dim(),
        });
    }
    integrate_field(|z| problem.field(z), z0, t_end, h_int, record_every)
}

/// `Φ_t(z)` at the default step. `Φ_0` is the identity; negative `t` runs the
/// reversed field.
pub fn flow_from(problem: &dyn Problem, z: &Point, t: f64) -> Result<Point> {
    flow_from_with(problem, z, t, DEFAULT_H_INT)
}

pub fn flow_from_with(problem: &dyn Problem, z: &Point, t: f64, h_int: f64) -> Result<Point> {
    if t == 0.0 {
        return Ok(z.clone());
    }
    let end = advance(&|w: &DVector<f64>| problem.field(w), z.coords(), t, h_int)?;
    Ok(z.with_coords(end))
}

/// `Φ_t(z0)` read off a recorded flow: starts from the last recorded sample at
/// or before `t` and integrates the remainder, continuing past the end if
/// needed.
pub fn flow_from_path(problem: &dyn Problem, path: &FlowPath, t: f64) -> Result<Point> {
    if t < 0.0 {
        return Err(Error::OutOfRange {
            t,
            start: 0.0,
            end: path.end_time(),
        });
    }
    let i = path.times.partition_point(|&s| s <= t) - 1;
    let base = &path.states[i];
    let rest = t - path.times[i];
    if rest == 0.0 {
        return Ok(base.clone());
    }
    flow_from_with(problem, base, rest, path.h_int)
}
