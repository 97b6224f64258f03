use crate::error::{Error, Result};
use crate::point::Point;
use crate::trajectory::SampledPath;

/// Piecewise-affine reading of a sampled path in its own time coordinate.
#[derive(Debug, Clone, Copy)]
pub struct InterpolatedPath<'a, P: SampledPath + ?Sized> {
    path: &'a P,
}

impl<'a, P: SampledPath + ?Sized> InterpolatedPath<'a, P> {
    pub fn new(path: &'a P) -> Self {
        Self { path }
    }

    pub fn start(&self) -> f64 {
        self.path.times().first().copied().unwrap_or(f64::NAN)
    }

    pub fn end(&self) -> f64 {
        self.path.times().last().copied().unwrap_or(f64::NAN)
    }

    pub fn at(&self, t: f64) -> Result<Point> {
        let times = self.path.times();
        if times.is_empty() || !(t >= times[0] && t <= times[times.len() - 1]) {
            return Err(Error::OutOfRange {
                t,
                start: self.start(),
                end: self.end(),
            });
        }
        // first knot strictly after t
        let j = times.partition_point(|&s| s <= t);
        let i = j - 1;
        let states = self.path.states();
        if times[i] == t || j == times.len() {
            return Ok(states[i].clone());
        }
        Ok(blend(&states[i], &states[j], (t - times[i]) / (times[j] - times[i])))
    }
}

pub(crate) fn blend(a: &Point, b: &Point, s: f64) -> Point {
    a.with_coords(a.coords() + (b.coords() - a.coords()) * s)
}

/// `X(t)`: the affine blend of the two samples bracketing `t`.
pub fn interpolate<P: SampledPath + ?Sized>(path: &P, t: f64) -> Result<Point> {
    InterpolatedPath::new(path).at(t)
}
