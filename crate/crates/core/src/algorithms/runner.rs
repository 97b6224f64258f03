use serde::{Deserialize, Serialize};

use super::Scheme;
use crate::error::{DivergenceReport, Error, Result};
use crate::noise::NoiseStream;
use crate::point::Point;
use crate::problems::Problem;
use crate::schedule::StepSchedule;
use crate::trajectory::Trajectory;

/// Any coordinate beyond this magnitude aborts a run.
pub const DIVERGENCE_THRESHOLD: f64 = 1e15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub horizon: u64,
    pub record_every: u64,
}

impl RunOptions {
    pub fn new(horizon: u64, record_every: u64) -> Self {
        Self {
            horizon,
            record_every,
        }
    }
}

/// Aggregates of a run that do not need the recorded samples.
#[derive(Debug, Clone, PartialEq)]
pub struct RunStats {
    pub final_point: Point,
    pub final_time: f64,
    /// `max_n ‖z_n‖`, the boundedness witness.
    pub max_norm: f64,
    pub queries_total: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub trajectory: Trajectory,
    pub stats: RunStats,
}

/// Runs `horizon` iterations and hands every iterate to `observer` as
/// `(n, τ_n, γ_n, z_n)`, starting with `(0, 0, 0, z_0)`.
pub fn run_observed(
    scheme: &mut Scheme,
    problem: &dyn Problem,
    z0: &Point,
    schedule: &StepSchedule,
    stream: &mut NoiseStream,
    horizon: u64,
    mut observer: impl FnMut(u64, f64, f64, &Point),
) -> Result<RunStats> {
    if horizon == 0 {
        return Err(Error::invalid("horizon", "must be >= 1"));
    }
    if z0.dim() != problem.dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.dim(),
            got: z0.dim(),
        });
    }
    schedule.check_horizon(horizon)?;

    let mut z = z0.clone();
    let mut tau = 0.0;
    let mut max_norm = z.norm();
    let mut queries_total = 0u64;
    observer(0, 0.0, 0.0, &z);
    for n in 1..=horizon {
        let step = schedule.value(n);
        let out = scheme.step(problem, &z, step, stream)?;
        z = out.next;
        queries_total += out.queries_used as u64;
        if z.coords().iter().any(|c| !(c.abs() <= DIVERGENCE_THRESHOLD)) {
            return Err(Error::Diverged(DivergenceReport {
                iteration: n,
                coords: z.to_vec(),
                queries_used: queries_total,
            }));
        }
        tau += step.gamma;
        max_norm = max_norm.max(z.norm());
        observer(n, tau, step.gamma, &z);
    }
    Ok(RunStats {
        final_point: z,
        final_time: tau,
        max_norm,
        queries_total,
    })
}

/// Runs the scheme and records every `record_every`-th iterate (plus the
/// initial and final ones).
pub fn run(
    scheme: &mut Scheme,
    problem: &dyn Problem,
    z0: &Point,
    schedule: &StepSchedule,
    stream: &mut NoiseStream,
    opts: RunOptions,
) -> Result<RunSummary> {
    if opts.record_every == 0 {
        return Err(Error::invalid("record_every", "must be >= 1"));
    }
    let cap = (opts.horizon / opts.record_every + 2).min(1 << 22) as usize;
    let mut trajectory = Trajectory::with_capacity(cap);
    let stats = run_observed(scheme, problem, z0, schedule, stream, opts.horizon, |n, tau, gamma, z| {
        if n % opts.record_every == 0 || n == opts.horizon {
            trajectory.push(n, tau, gamma, z.clone());
        }
    })?;
    Ok(RunSummary { trajectory, stats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::{SchemeKind, SchemeSpec};
    use crate::noise::NoiseModel;
    use crate::problems::{make_bilinear, make_forsaken};

    fn plain(kind: SchemeKind) -> Scheme {
        Scheme::new(SchemeSpec::plain(kind)).unwrap()
    }

    #[test]
    fn sgda_bilinear_product_formula() {
        let gamma: f64 = 0.01;
        let sched = StepSchedule::constant(gamma).unwrap();
        let mut stream = NoiseStream::new(NoiseModel::None, 0);
        let out = run(
            &mut plain(SchemeKind::Sgda),
            &make_bilinear(),
            &Point::xy(1.0, 0.0),
            &sched,
            &mut stream,
            RunOptions::new(1000, 1),
        )
        .unwrap();
        let r2 = out.stats.final_point.norm().powi(2);
        let expected = (1.0 + gamma * gamma).powi(1000);
        assert!(((r2 - expected) / expected).abs() < 1e-9);
        assert!((expected - 1.1052).abs() < 1e-4);
        assert_eq!(out.trajectory.len(), 1001);
        assert_eq!(out.stats.queries_total, 1000);
    }

    #[test]
    fn seg_bilinear_product_formula() {
        let gamma: f64 = 0.01;
        let sched = StepSchedule::constant(gamma).unwrap();
        let mut stream = NoiseStream::new(NoiseModel::None, 0);
        let out = run(
            &mut plain(SchemeKind::Seg),
            &make_bilinear(),
            &Point::xy(1.0, 0.0),
            &sched,
            &mut stream,
            RunOptions::new(1000, 10),
        )
        .unwrap();
        let r2 = out.stats.final_point.norm().powi(2);
        let expected = (1.0 - gamma.powi(2) + gamma.powi(4)).powi(1000);
        assert!(((r2 - expected) / expected).abs() < 1e-9);
        assert_eq!(out.stats.queries_total, 2000);
        assert_eq!(out.trajectory.len(), 101);
    }

    #[test]
    fn effective_time_increments_are_the_steps() {
        let sched = StepSchedule::power(0.2, 1.0).unwrap();
        let mut stream = NoiseStream::new(NoiseModel::Gaussian { sigma: 0.1 }, 3);
        let out = run(
            &mut plain(SchemeKind::Sgda),
            &make_forsaken(),
            &Point::xy(1.3, 0.0),
            &sched,
            &mut stream,
            RunOptions::new(500, 1),
        )
        .unwrap();
        let t = out.trajectory.effective_times();
        for n in 1..t.len() {
            let gamma = 0.2 / n as f64;
            assert!((t[n] - t[n - 1] - gamma).abs() <= 1e-14 * t[n].max(1.0));
            assert_eq!(out.trajectory.step_values()[n], gamma);
        }
    }

    #[test]
    fn critical_point_trajectory_is_constant() {
        let sched = StepSchedule::constant(0.1).unwrap();
        let o = Point::xy(0.0, 0.0);
        for kind in [SchemeKind::Sgda, SchemeKind::Seg, SchemeKind::Peg, SchemeKind::Ppm] {
            let mut stream = NoiseStream::new(NoiseModel::None, 0);
            let out = run(&mut plain(kind), &make_bilinear(), &o, &sched, &mut stream, RunOptions::new(50, 1))
                .unwrap();
            assert!(out.trajectory.iterates().iter().all(|p| *p == o), "{kind:?}");
        }
    }

    #[test]
    fn divergence_names_the_iteration() {
        // γ = 2 SGDA on bilinear multiplies ‖z‖² by 5 each step
        let sched = StepSchedule::constant(2.0).unwrap();
        let mut stream = NoiseStream::new(NoiseModel::None, 0);
        let err = run(
            &mut plain(SchemeKind::Sgda),
            &make_bilinear(),
            &Point::xy(1.0, 0.0),
            &sched,
            &mut stream,
            RunOptions::new(1000, 1),
        )
        .unwrap_err();
        match err {
            Error::Diverged(rep) => {
                // |coord| <= ‖z‖ = 5^{n/2}; the threshold 1e15 is crossed near n = 43
                assert!(rep.iteration > 30 && rep.iteration < 50, "{}", rep.iteration);
                assert_eq!(rep.queries_used, rep.iteration);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn same_seed_same_trajectory() {
        let sched = StepSchedule::power(0.5, 1.0).unwrap();
        let go = || {
            let mut stream = NoiseStream::new(NoiseModel::Gaussian { sigma: 0.1 }, 99);
            run(
                &mut plain(SchemeKind::Seg),
                &make_forsaken(),
                &Point::xy(1.3, 0.0),
                &sched,
                &mut stream,
                RunOptions::new(2000, 7),
            )
            .unwrap()
        };
        assert_eq!(go(), go());
    }
}
