//! Phase portraits: direction field, trajectories and annotations.

use std::path::PathBuf;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use rmlab_core::analysis::{
    detect_cycle, find_critical_points, predict_cycle_radius, Classification, CycleOptions, SearchBox,
};
use rmlab_core::dynamics::{advance, integrate_flow_strided, DEFAULT_H_INT};
use rmlab_core::problems::PolynomialPerturbation;
use rmlab_core::{NoiseModel, Problem, ProblemSpec, SampledPath};

use crate::config::{Invalid, ScheduleConfig, SchemeConfig, Validate};
use crate::runs::{record, time_average, RunRequest};
use crate::svg::{self, Circle, Marker, MarkerKind, Panel, Polyline};

/// Most vertices drawn per curve.
const MAX_VERTICES: usize = 4000;

fn default_grid() -> usize {
    20
}

fn yes() -> bool {
    true
}

fn default_output() -> PathBuf {
    "portrait.svg".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CurveSpec {
    Run {
        scheme: SchemeConfig,
        schedule: ScheduleConfig,
        #[serde(default)]
        noise: NoiseModel,
        z0: Vec<f64>,
        horizon: u64,
        #[serde(default)]
        seed: u64,
        /// Also draw the step-weighted running average.
        #[serde(default)]
        average: bool,
    },
    Flow {
        z0: Vec<f64>,
        t_end: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PanelSpec {
    pub title: String,
    #[serde(default)]
    pub curves: Vec<CurveSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortraitSpec {
    pub title: String,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    pub problem: ProblemSpec,
    /// `[[x_min, x_max], [y_min, y_max]]`.
    pub bounds: [[f64; 2]; 2],
    /// Streamline seeds per axis.
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default = "yes")]
    pub critical_points: bool,
    /// Dashed circle at the radius predicted from the perturbation
    /// (almost-bilinear only).
    #[serde(default = "yes")]
    pub predicted_cycle: bool,
    /// Draw the last period of every detected cycle in white.
    #[serde(default = "yes")]
    pub annotate_cycles: bool,
    #[serde(default)]
    pub panels: Vec<PanelSpec>,
}

impl Validate for PortraitSpec {
    type Output = PortraitSpec;

    fn validate(self) -> Result<PortraitSpec, Invalid> {
        let [[xa, xb], [ya, yb]] = self.bounds;
        if !(xa < xb && ya < yb) || ![xa, xb, ya, yb].iter().all(|v| v.is_finite()) {
            return Err(Invalid::new("bounds", "need x_min < x_max and y_min < y_max"));
        }
        if ((xb - xa) - (yb - ya)).abs() > 1e-12 * (xb - xa) {
            return Err(Invalid::new("bounds", "panels are square; use equal x and y spans"));
        }
        let problem = self.problem.build().map_err(|e| Invalid::new("problem", e.to_string()))?;
        if problem.dim() != 2 {
            return Err(Invalid::new("problem", "portraits need a planar problem"));
        }
        if self.grid == 0 || self.grid > 200 {
            return Err(Invalid::new("grid", "must lie in 1..=200"));
        }
        for (i, panel) in self.panels.iter().enumerate() {
            for (j, c) in panel.curves.iter().enumerate() {
                let at = |f: &str| format!("panels.{i}.curves.{j}.{f}");
                let z0 = match c {
                    CurveSpec::Run {
                        scheme,
                        schedule,
                        noise,
                        z0,
                        horizon,
                        ..
                    } => {
                        scheme.to_spec()?;
                        let s = schedule.to_schedule()?;
                        noise.validated().map_err(|e| Invalid::new(at("noise"), e.to_string()))?;
                        if *horizon == 0 {
                            return Err(Invalid::new(at("horizon"), "must be >= 1"));
                        }
                        s.check_horizon(*horizon)
                            .map_err(|e| Invalid::new(at("horizon"), e.to_string()))?;
                        z0
                    }
                    CurveSpec::Flow { z0, t_end } => {
                        if !(*t_end > 0.0 && t_end.is_finite()) {
                            return Err(Invalid::new(at("t_end"), "must be positive"));
                        }
                        z0
                    }
                };
                if z0.len() != 2 || !z0.iter().all(|v| v.is_finite()) {
                    return Err(Invalid::new(at("z0"), "expected two finite coordinates"));
                }
            }
        }
        Ok(self)
    }
}

/// Short unit-speed RK4 segments of the direction field from a grid of seeds.
pub fn streamlines(problem: &dyn Problem, bounds: [[f64; 2]; 2], grid: usize) -> Vec<Vec<[f64; 2]>> {
    let [[xa, xb], [ya, yb]] = bounds;
    let cell = (xb - xa) / grid as f64;
    let length = 0.7 * cell;
    let steps = 6;
    let dir = |z: &DVector<f64>| {
        let v = problem.field(z);
        let n = v.norm();
        if n > 0.0 && n.is_finite() {
            v / n
        } else {
            DVector::zeros(2)
        }
    };
    let mut out = Vec::with_capacity(grid * grid);
    for i in 0..grid {
        for j in 0..grid {
            let mut z = DVector::from_vec(vec![
                xa + (i as f64 + 0.5) * cell,
                ya + (j as f64 + 0.5) * (yb - ya) / grid as f64,
            ]);
            let mut line = vec![[z[0], z[1]]];
            for _ in 0..steps {
                match advance(&dir, &z, length / steps as f64, length / steps as f64) {
                    Ok(next) => z = next,
                    Err(_) => break,
                }
                line.push([z[0], z[1]]);
            }
            out.push(line);
        }
    }
    out
}

pub fn critical_markers(problem: &dyn Problem, bounds: [[f64; 2]; 2]) -> Vec<Marker> {
    let search = match SearchBox::new(bounds.iter().map(|b| (b[0], b[1])).collect()) {
        Ok(s) => s,
        Err(_) => return Vec::new(),
    };
    let scan = match find_critical_points(problem, &search, 21) {
        Ok(s) => s,
        Err(_) => return Vec::new(),
    };
    scan.points
        .iter()
        .map(|cp| Marker {
            at: [cp.location[0], cp.location[1]],
            kind: match cp.classification {
                Classification::Stable => MarkerKind::Stable,
                Classification::Unstable => MarkerKind::Unstable,
                Classification::Center => MarkerKind::Center,
            },
        })
        .collect()
}

pub fn predicted_circle(spec: &ProblemSpec) -> Option<Circle> {
    let ProblemSpec::AlmostBilinear {
        epsilon,
        coefficients,
    } = spec
    else {
        return None;
    };
    let pert = PolynomialPerturbation::from_coefficient_map(coefficients, *epsilon).ok()?;
    let radius = predict_cycle_radius(&pert).root()?;
    Some(Circle {
        center: [0.0, 0.0],
        radius,
        color: svg::ICT,
        dashed: true,
    })
}

/// Every `k`-th point so that at most `max` remain; the last point is kept.
pub fn thin(points: Vec<[f64; 2]>, max: usize) -> Vec<[f64; 2]> {
    if points.len() <= max {
        return points;
    }
    let k = points.len().div_ceil(max);
    let last = *points.last().expect("non-empty");
    let mut out: Vec<_> = points.into_iter().step_by(k).collect();
    if out.last() != Some(&last) {
        out.push(last);
    }
    out
}

pub fn path_points<P: SampledPath + ?Sized>(path: &P) -> Vec<[f64; 2]> {
    path.states().iter().map(|z| [z[0], z[1]]).collect()
}

/// The last period of a detected cycle, as a closed white curve.
pub fn cycle_annotation<P: SampledPath + ?Sized>(path: &P, opts: CycleOptions) -> Option<Polyline> {
    let c = detect_cycle(path, opts);
    let c = c.cycle()?;
    let times = path.times();
    let end = times[times.len() - 1];
    let from = times.partition_point(|&t| t < end - c.period);
    let points = path.states()[from..].iter().map(|z| [z[0], z[1]]).collect();
    Some(Polyline {
        points: thin(points, MAX_VERTICES),
        color: svg::ICT,
        width: 2.4,
        dashed: false,
    })
}

pub fn curve(points: Vec<[f64; 2]>, color: &'static str) -> Polyline {
    Polyline {
        points: thin(points, MAX_VERTICES),
        color,
        width: 1.2,
        dashed: false,
    }
}

/// A panel carrying the problem-level layers (field, critical points,
/// predicted cycle).
pub fn base_panel(spec: &PortraitSpec, problem: &dyn Problem, title: &str) -> Panel {
    let mut panel = Panel::new(title, spec.bounds);
    panel.streamlines = streamlines(problem, spec.bounds, spec.grid);
    if spec.predicted_cycle {
        panel.circles.extend(predicted_circle(&spec.problem));
    }
    if spec.critical_points {
        panel.markers = critical_markers(problem, spec.bounds);
    }
    panel
}

pub struct Rendered {
    pub svg: String,
    /// Curves whose run diverged: `(panel, curve, iteration)`.
    pub diverged: Vec<(usize, usize, u64)>,
}

pub fn render(spec: &PortraitSpec) -> anyhow::Result<Rendered> {
    let problem = spec.problem.build()?;
    let problem = problem.as_ref();
    let mut diverged = Vec::new();
    let mut panels = Vec::new();
    if spec.panels.is_empty() {
        panels.push(base_panel(spec, problem, &spec.title));
    }
    for (pi, ps) in spec.panels.iter().enumerate() {
        let mut panel = base_panel(spec, problem, &ps.title);
        let mut annotations = Vec::new();
        for (ci, c) in ps.curves.iter().enumerate() {
            match c {
                CurveSpec::Run {
                    scheme,
                    schedule,
                    noise,
                    z0,
                    horizon,
                    seed,
                    average,
                } => {
                    let schedule = schedule.to_schedule().map_err(|e| anyhow::anyhow!("{}: {}", e.field, e.message))?;
                    let every = (horizon / 20_000).max(1);
                    let rec = record(RunRequest {
                        problem,
                        scheme: scheme.to_spec().map_err(|e| anyhow::anyhow!("{}: {}", e.field, e.message))?,
                        schedule: &schedule,
                        noise: *noise,
                        z0: problem.point(z0.clone())?,
                        horizon: *horizon,
                        record_every: every,
                        seed: *seed,
                        watch: None,
                    })?;
                    if let Err(rep) = &rec.outcome {
                        diverged.push((pi, ci, rep.iteration));
                    }
                    panel.curves.push(curve(path_points(&rec.trajectory), svg::TRAJECTORY));
                    if *average {
                        panel.curves.push(curve(time_average(&rec.trajectory), svg::AVERAGE));
                    }
                    if spec.annotate_cycles && rec.outcome.is_ok() {
                        annotations.extend(cycle_annotation(&rec.trajectory, CycleOptions::stochastic()));
                    }
                }
                CurveSpec::Flow { z0, t_end } => {
                    let stride = ((t_end / DEFAULT_H_INT) as usize / 20_000).max(1);
                    let flow = integrate_flow_strided(problem, &problem.point(z0.clone())?, *t_end, DEFAULT_H_INT, stride)?;
                    panel.curves.push(curve(path_points(&flow), svg::FLOW));
                    if spec.annotate_cycles {
                        annotations.extend(cycle_annotation(&flow, CycleOptions::flow()));
                    }
                }
            }
        }
        panel.curves.extend(annotations);
        panels.push(panel);
    }
    Ok(Rendered {
        svg: svg::render(&spec.title, &panels),
        diverged,
    })
}
