use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::algorithms::{run_observed, Scheme, SchemeSpec};
use crate::error::{Error, Result};
use crate::noise::{NoiseModel, NoiseStream};
use crate::point::Point;
use crate::problems::{Problem, ProblemSpec};
use crate::schedule::StepSchedule;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TargetSet {
    Point { center: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    Annulus { center: Vec<f64>, inner: f64, outer: f64 },
}

impl TargetSet {
    pub fn distance(&self, z: &Point) -> f64 {
        let from = |c: &[f64]| {
            z.coords()
                .iter()
                .zip(c)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt()
        };
        match self {
            TargetSet::Point { center } => from(center),
            TargetSet::Ball { center, radius } => (from(center) - radius).max(0.0),
            TargetSet::Annulus { center, inner, outer } => {
                let r = from(center);
                (inner - r).max(r - outer).max(0.0)
            }
        }
    }

    fn center(&self) -> &[f64] {
        match self {
            TargetSet::Point { center } | TargetSet::Ball { center, .. } | TargetSet::Annulus { center, .. } => {
                center
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitSampler {
    Fixed { point: Vec<f64> },
    /// Uniform in the ball.
    Ball { center: Vec<f64>, radius: f64 },
}

impl InitSampler {
    fn dim(&self) -> usize {
        match self {
            InitSampler::Fixed { point } => point.len(),
            InitSampler::Ball { center, .. } => center.len(),
        }
    }

    pub fn sample(&self, problem: &dyn Problem, stream: &mut NoiseStream) -> Result<Point> {
        match self {
            InitSampler::Fixed { point } => problem.point(point.clone()),
            InitSampler::Ball { center, radius } => {
                let off = stream.in_ball(center.len(), *radius);
                problem.point(center.iter().zip(off.iter()).map(|(c, o)| c + o).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloConfig {
    pub problem: ProblemSpec,
    pub scheme: SchemeSpec,
    pub schedule: StepSchedule,
    pub noise: NoiseModel,
    pub init: InitSampler,
    pub runs: usize,
    pub horizon: u64,
    pub target: TargetSet,
    pub threshold: f64,
    pub seed: u64,
}

impl MonteCarloConfig {
    /// Hex SHA-256 of the canonical JSON form.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub runs: usize,
    pub target: TargetSet,
    pub threshold: f64,
    pub fraction_converged: f64,
    pub converged: usize,
    pub diverged: usize,
    /// Per run, in run order; `None` for diverged runs.
    pub terminal_distances: Vec<Option<f64>>,
    /// Per run, the closest approach to the target over the whole run.
    pub closest_approach: Vec<Option<f64>>,
    pub fingerprint: String,
}

#[derive(Debug, Clone, Copy)]
struct RunOutcome {
    terminal: Option<f64>,
    closest: Option<f64>,
}

fn one_run(problem: &dyn Problem, cfg: &MonteCarloConfig, index: u64) -> Result<RunOutcome> {
    let mut stream = NoiseStream::derived(cfg.noise, cfg.seed, index);
    let z0 = cfg.init.sample(problem, &mut stream)?;
    let mut scheme = Scheme::new(cfg.scheme)?;
    // the last 1% of iterates, at least one
    let tail_from = cfg.horizon - (cfg.horizon / 100).max(1) + 1;
    let mut terminal = f64::INFINITY;
    let mut closest = f64::INFINITY;
    let res = run_observed(&mut scheme, problem, &z0, &cfg.schedule, &mut stream, cfg.horizon, |n, _, _, z| {
        let d = cfg.target.distance(z);
        closest = closest.min(d);
        if n >= tail_from {
            terminal = terminal.min(d);
        }
    });
    match res {
        Ok(_) => Ok(RunOutcome {
            terminal: Some(terminal),
            closest: Some(closest),
        }),
        Err(Error::Diverged(_)) => Ok(RunOutcome {
            terminal: None,
            closest: None,
        }),
        Err(e) => Err(e),
    }
}

/// Independent runs in parallel, one derived noise stream per run index; the
/// report is assembled in run order, so it depends only on the config.
pub fn monte_carlo(cfg: &MonteCarloConfig) -> Result<MonteCarloReport> {
    if cfg.runs == 0 {
        return Err(Error::invalid("runs", "must be >= 1"));
    }
    if cfg.horizon == 0 {
        return Err(Error::invalid("horizon", "must be >= 1"));
    }
    if !(cfg.threshold >= 0.0) {
        return Err(Error::invalid("threshold", "must be >= 0"));
    }
    let problem = cfg.problem.build()?;
    for got in [cfg.init.dim(), cfg.target.center().len()] {
        if got != problem.dim() {
            return Err(Error::DimensionMismatch {
                expected: problem.dim(),
                got,
            });
        }
    }
    Scheme::new(cfg.scheme)?;
    cfg.schedule.check_horizon(cfg.horizon)?;

    let outcomes = (0..cfg.runs as u64)
        .into_par_iter()
        .map(|i| one_run(problem.as_ref(), cfg, i))
        .collect::<Result<Vec<_>>>()?;
    let converged = outcomes
        .iter()
        .filter(|o| o.terminal.is_some_and(|d| d <= cfg.threshold))
        .count();
    let diverged = outcomes.iter().filter(|o| o.terminal.is_none()).count();
    Ok(MonteCarloReport {
        runs: cfg.runs,
        target: cfg.target.clone(),
        threshold: cfg.threshold,
        fraction_converged: converged as f64 / cfg.runs as f64,
        converged,
        diverged,
        terminal_distances: outcomes.iter().map(|o| o.terminal).collect(),
        closest_approach: outcomes.iter().map(|o| o.closest).collect(),
        fingerprint: cfg.fingerprint(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::SchemeKind;

    fn seg_bilinear() -> MonteCarloConfig {
        MonteCarloConfig {
            problem: ProblemSpec::Bilinear,
            scheme: SchemeSpec::plain(SchemeKind::Seg),
            schedule: StepSchedule::constant(0.05).unwrap(),
            noise: NoiseModel::None,
            init: InitSampler::Ball {
                center: vec![0.0, 0.0],
                radius: 1.0,
            },
            runs: 10,
            horizon: 20_000,
            target: TargetSet::Point { center: vec![0.0, 0.0] },
            threshold: 1e-3,
            seed: 5,
        }
    }

    #[test]
    fn noiseless_seg_contracts_every_run() {
        let r = monte_carlo(&seg_bilinear()).unwrap();
        assert_eq!(r.fraction_converged, 1.0);
        assert_eq!(r.terminal_distances.len(), 10);
    }

    #[test]
    fn deterministic_given_config() {
        let cfg = MonteCarloConfig {
            noise: NoiseModel::Gaussian { sigma: 0.1 },
            horizon: 2000,
            ..seg_bilinear()
        };
        let a = monte_carlo(&cfg).unwrap();
        let b = monte_carlo(&cfg).unwrap();
        assert_eq!(a, b);
        let other = monte_carlo(&MonteCarloConfig { seed: 6, ..cfg }).unwrap();
        assert_ne!(a.terminal_distances, other.terminal_distances);
        assert_ne!(a.fingerprint, other.fingerprint);
    }

    #[test]
    fn divergent_runs_never_count() {
        let cfg = MonteCarloConfig {
            scheme: SchemeSpec::plain(SchemeKind::Sgda),
            schedule: StepSchedule::constant(2.0).unwrap(),
            init: InitSampler::Fixed { point: vec![1.0, 0.0] },
            runs: 3,
            horizon: 500,
            threshold: f64::MAX,
            ..seg_bilinear()
        };
        let r = monte_carlo(&cfg).unwrap();
        assert_eq!(r.diverged, 3);
        assert_eq!(r.fraction_converged, 0.0);
    }

    #[test]
    fn target_distances() {
        let z = Point::xy(3.0, 4.0);
        assert_eq!(TargetSet::Point { center: vec![0.0, 0.0] }.distance(&z), 5.0);
        assert_eq!(
            TargetSet::Ball {
                center: vec![0.0, 0.0],
                radius: 1.0
            }
            .distance(&z),
            4.0
        );
        let ann = TargetSet::Annulus {
            center: vec![0.0, 0.0],
            inner: 4.0,
            outer: 6.0,
        };
        assert_eq!(ann.distance(&z), 0.0);
        assert_eq!(ann.distance(&Point::xy(1.0, 0.0)), 3.0);
    }
}
