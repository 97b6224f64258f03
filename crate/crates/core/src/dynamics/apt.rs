use nalgebra::DVector;

use super::interpolate::InterpolatedPath;
use super::{advance, DEFAULT_H_INT};
use crate::error::{Error, Result};
use crate::problems::Problem;
use crate::trajectory::SampledPath;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AptOptions {
    /// Largest RK4 substep between grid points.
    pub h_int: f64,
    /// Cap on the number of grid points; the grid is coarsened beyond it.
    pub max_grid_points: usize,
}

impl Default for AptOptions {
    fn default() -> Self {
        Self {
            h_int: DEFAULT_H_INT,
            max_grid_points: 2_000_000,
        }
    }
}

/// `sup_{0 <= h <= T} ‖X(t + h) - Φ_h(X(t))‖` over a grid of `h` whose spacing
/// is the smallest sample spacing of the path inside the window.
pub fn apt_deviation<P: SampledPath + ?Sized>(path: &P, problem: &dyn Problem, t: f64, window: f64) -> Result<f64> {
    apt_deviation_with(path, problem, t, window, AptOptions::default())
}

pub fn apt_deviation_with<P: SampledPath + ?Sized>(
    path: &P,
    problem: &dyn Problem,
    t: f64,
    window: f64,
    opts: AptOptions,
) -> Result<f64> {
    if !(window > 0.0) {
        return Err(Error::invalid("window", format!("must be positive, got {window}")));
    }
    let x = InterpolatedPath::new(path);
    let (start, end) = (x.start(), x.end());
    if !(t >= start && t + window <= end) {
        return Err(Error::OutOfRange {
            t: if t < start { t } else { t + window },
            start,
            end,
        });
    }

    let times = path.times();
    let lo = times.partition_point(|&s| s < t);
    let hi = times.partition_point(|&s| s <= t + window);
    let mut grid = window;
    for i in lo.saturating_sub(1)..hi.min(times.len() - 1) {
        grid = grid.min(times[i + 1] - times[i]);
    }
    // the slack keeps float noise in the spacings from adding a grid point
    let mut points = ((window / grid) * (1.0 - 1e-9)).ceil().max(1.0) as usize;
    if points > opts.max_grid_points {
        points = opts.max_grid_points;
    }
    let grid = window / points as f64;
    let substeps = (grid / opts.h_int).ceil().max(1.0);
    let sub = grid / substeps;

    let field = |w: &DVector<f64>| problem.field(w);
    let origin = x.at(t)?;
    let mut flow = origin.coords().clone();
    let mut worst = 0.0f64;
    for k in 1..=points {
        flow = advance(&field, &flow, grid, sub)?;
        let h = if k == points { window } else { k as f64 * grid };
        let xt = x.at((t + h).min(end))?;
        worst = worst.max((xt.coords() - &flow).norm());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::{run, RunOptions, Scheme, SchemeKind, SchemeSpec};
    use crate::dynamics::integrate_flow;
    use crate::noise::{NoiseModel, NoiseStream};
    use crate::point::Point;
    use crate::problems::{make_bilinear, make_forsaken};
    use crate::schedule::StepSchedule;

    #[test]
    fn exact_flow_has_no_deviation() {
        let f = make_forsaken();
        let p = integrate_flow(&f, &Point::xy(1.3, 0.0), 12.0, 1e-3).unwrap();
        for t in [0.0, 2.5, 6.0] {
            let d = apt_deviation(&p, &f, t, 5.0).unwrap();
            assert!((0.0..=1e-6).contains(&d), "{t}: {d}");
        }
    }

    #[test]
    fn constant_step_sgda_stays_off_the_flow() {
        let b = make_bilinear();
        let mut s = Scheme::new(SchemeSpec::plain(SchemeKind::Sgda)).unwrap();
        let mut stream = NoiseStream::new(NoiseModel::None, 0);
        let sched = StepSchedule::constant(0.1).unwrap();
        let out = run(&mut s, &b, &Point::xy(1.0, 0.0), &sched, &mut stream, RunOptions::new(400, 1)).unwrap();
        for t in [0.0, 10.0, 20.0, 30.0] {
            let d = apt_deviation(&out.trajectory, &b, t, 5.0).unwrap();
            assert!(d > 0.01, "{t}: {d}");
        }
    }

    #[test]
    fn window_must_fit() {
        let b = make_bilinear();
        let p = integrate_flow(&b, &Point::xy(1.0, 0.0), 3.0, 1e-3).unwrap();
        assert!(matches!(apt_deviation(&p, &b, 1.0, 5.0), Err(Error::OutOfRange { .. })));
        assert!(apt_deviation(&p, &b, 1.0, 0.0).is_err());
    }
}
