//! Bundled experiments. Each one writes its artifacts under
//! `<out_dir>/<name>/`, prints one PASS/FAIL line per check and a
//! `report.json` with the checks and the effective config.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use anyhow::{bail, Context as _};
use serde::{Deserialize, Serialize};

use rmlab_core::analysis::{
    abelian_integral, detect_cycle, find_critical_points, monte_carlo, predict_cycle_radius, tail_mean_radius,
    Classification, CriticalPoint, CycleOptions, CycleStability, InitSampler, MonteCarloConfig, SearchBox,
    TargetSet,
};
use rmlab_core::dynamics::{integrate_flow_strided, FlowPath, DEFAULT_H_INT};
use rmlab_core::io::{to_json_pretty, write_path_csv, write_trajectory_csv};
use rmlab_core::problems::PolynomialPerturbation;
use rmlab_core::{NoiseModel, Problem, ProblemSpec, SampledPath};

use crate::commands::{Ctx, Status};
use crate::config::{self, Invalid, ScheduleConfig, SchemeConfig, Validate};
use crate::portrait::{critical_markers, curve, cycle_annotation, path_points, predicted_circle, streamlines};
use crate::runs::{record, time_average, Recorded, RunRequest};
use crate::svg::{self, Panel};

pub const NAMES: &[&str] = &[
    "fig1",
    "fig2a",
    "fig2b",
    "app-constant-step",
    "app-second-order",
    "app-adaptive",
    "thm3-avoidance",
    "thm4-attraction",
    "lemma-abelian",
];

pub fn bundled(name: &str) -> Option<&'static str> {
    Some(match name {
        "fig1" => include_str!("../configs/fig1.toml"),
        "fig2a" => include_str!("../configs/fig2a.toml"),
        "fig2b" => include_str!("../configs/fig2b.toml"),
        "app-constant-step" => include_str!("../configs/app-constant-step.toml"),
        "app-second-order" => include_str!("../configs/app-second-order.toml"),
        "app-adaptive" => include_str!("../configs/app-adaptive.toml"),
        "thm3-avoidance" => include_str!("../configs/thm3-avoidance.toml"),
        "thm4-attraction" => include_str!("../configs/thm4-attraction.toml"),
        "lemma-abelian" => include_str!("../configs/lemma-abelian.toml"),
        _ => return None,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
struct Report {
    experiment: String,
    seed: Option<u64>,
    passed: bool,
    checks: Vec<Check>,
    config: serde_json::Value,
}

#[derive(Default)]
struct Checks(Vec<Check>);

impl Checks {
    fn add(&mut self, name: impl Into<String>, pass: bool, detail: impl Into<String>) {
        self.0.push(Check {
            name: name.into(),
            pass,
            detail: detail.into(),
        });
    }
}

/// Runs one bundled experiment, or all of them for `all`.
pub fn reproduce(ctx: &Ctx, name: &str) -> anyhow::Result<Status> {
    if name == "all" {
        let mut status = Status::Ok;
        for n in NAMES {
            if reproduce(ctx, n)? == Status::ChecksFailed {
                status = Status::ChecksFailed;
            }
        }
        return Ok(status);
    }
    let Some(text) = bundled(name) else {
        bail!("unknown experiment `{name}`; expected one of: {}, all", NAMES.join(", "));
    };
    let sub = Ctx {
        out_dir: ctx.out_dir.join(name),
        seed: ctx.seed,
        quiet: ctx.quiet,
    };
    let source = format!("<bundled {name}.toml>");
    let (seed, config, checks) = match name {
        "fig1" => run_fig1(&sub, config::load_str::<Fig1>(text, &source)?)?,
        "fig2a" => run_fig2a(&sub, config::load_str::<Fig2a>(text, &source)?)?,
        "fig2b" => run_fig2b(&sub, config::load_str::<Fig2b>(text, &source)?)?,
        "app-constant-step" => run_constant_step(&sub, config::load_str::<ConstantStep>(text, &source)?)?,
        "app-second-order" => run_second_order(&sub, config::load_str::<SecondOrder>(text, &source)?)?,
        "app-adaptive" => run_adaptive(&sub, config::load_str::<Adaptive>(text, &source)?)?,
        "thm3-avoidance" | "thm4-attraction" => run_basin(&sub, config::load_str::<Basin>(text, &source)?)?,
        "lemma-abelian" => run_abelian(&sub, config::load_str::<Abelian>(text, &source)?)?,
        _ => unreachable!("every bundled name is dispatched"),
    };
    let checks = checks.0;
    for c in &checks {
        println!("{} {name}/{}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let passed = checks.iter().all(|c| c.pass);
    let report = Report {
        experiment: name.to_string(),
        seed,
        passed,
        checks,
        config,
    };
    sub.write(Path::new("report.json"), to_json_pretty(&report).as_bytes())?;
    Ok(if passed { Status::Ok } else { Status::ChecksFailed })
}

type Outcome = (Option<u64>, serde_json::Value, Checks);

fn one() -> u64 {
    1
}

fn default_grid() -> usize {
    20
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum Trend {
    Increasing,
    Decreasing,
}

/// One recorded run inside an experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunEntry {
    label: String,
    scheme: SchemeConfig,
    schedule: ScheduleConfig,
    #[serde(default)]
    noise: NoiseModel,
    z0: Vec<f64>,
    horizon: u64,
    #[serde(default = "one")]
    record_every: u64,
    /// The radius must move strictly in this direction at every sample.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    radius_trend: Option<Trend>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    final_radius_band: Option<[f64; 2]>,
}

impl RunEntry {
    fn check(&self, field: &str, dim: usize) -> Result<(), Invalid> {
        let sub = |f: &str| format!("{field}.{f}");
        self.scheme.to_spec().map_err(|e| Invalid::new(sub(&e.field), e.message))?;
        let schedule = self
            .schedule
            .to_schedule()
            .map_err(|e| Invalid::new(sub(&e.field), e.message))?;
        self.noise
            .validated()
            .map_err(|e| Invalid::new(sub("noise"), e.to_string()))?;
        if self.z0.len() != dim {
            return Err(Invalid::new(sub("z0"), format!("expected {dim} coordinates, got {}", self.z0.len())));
        }
        if self.horizon == 0 {
            return Err(Invalid::new(sub("horizon"), "must be >= 1"));
        }
        schedule
            .check_horizon(self.horizon)
            .map_err(|e| Invalid::new(sub("horizon"), e.to_string()))?;
        if self.record_every == 0 {
            return Err(Invalid::new(sub("record_every"), "must be >= 1"));
        }
        Ok(())
    }

    fn execute(&self, problem: &dyn Problem, seed: u64, watch: Option<&TargetSet>) -> anyhow::Result<Recorded> {
        let schedule = self.schedule.to_schedule().map_err(invalid)?;
        record(RunRequest {
            problem,
            scheme: self.scheme.to_spec().map_err(invalid)?,
            schedule: &schedule,
            noise: self.noise,
            z0: problem.point(self.z0.clone())?,
            horizon: self.horizon,
            record_every: self.record_every,
            seed,
            watch,
        })
    }
}

fn invalid(e: Invalid) -> anyhow::Error {
    anyhow::anyhow!("{}: {}", e.field, e.message)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FlowEntry {
    z0: Vec<f64>,
    t_end: f64,
    #[serde(default = "one_stride")]
    record_every: usize,
}

fn one_stride() -> usize {
    1
}

impl FlowEntry {
    fn check(&self, field: &str, dim: usize) -> Result<(), Invalid> {
        if self.z0.len() != dim {
            return Err(Invalid::new(format!("{field}.z0"), format!("expected {dim} coordinates")));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Invalid::new(format!("{field}.t_end"), "must be positive"));
        }
        if self.record_every == 0 {
            return Err(Invalid::new(format!("{field}.record_every"), "must be >= 1"));
        }
        Ok(())
    }

    fn integrate(&self, problem: &dyn Problem) -> anyhow::Result<FlowPath> {
        Ok(integrate_flow_strided(
            problem,
            &problem.point(self.z0.clone())?,
            self.t_end,
            DEFAULT_H_INT,
            self.record_every,
        )?)
    }
}

fn planar(field: &str, spec: &ProblemSpec) -> Result<(), Invalid> {
    let p = spec.build().map_err(|e| Invalid::new(field, e.to_string()))?;
    if p.dim() != 2 {
        return Err(Invalid::new(field, "experiments are planar"));
    }
    Ok(())
}

fn fraction(field: &str, v: f64) -> Result<(), Invalid> {
    if v > 0.0 && v <= 1.0 {
        Ok(())
    } else {
        Err(Invalid::new(field, "must lie in (0, 1]"))
    }
}

fn json<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("configs serialize")
}

fn write_run(ctx: &Ctx, label: &str, rec: &Recorded) -> anyhow::Result<()> {
    let mut buf = Vec::new();
    write_trajectory_csv(&mut buf, &rec.trajectory)?;
    ctx.write(Path::new(&format!("{label}.csv")), &buf)?;
    Ok(())
}

fn write_flow(ctx: &Ctx, label: &str, path: &FlowPath) -> anyhow::Result<()> {
    let mut buf = Vec::new();
    write_path_csv(&mut buf, path)?;
    ctx.write(Path::new(&format!("{label}.csv")), &buf)?;
    Ok(())
}

fn write_svg(ctx: &Ctx, title: &str, panels: &[Panel]) -> anyhow::Result<()> {
    ctx.write(Path::new("portrait.svg"), svg::render(title, panels).as_bytes())?;
    Ok(())
}

fn field_panel(title: &str, problem: &dyn Problem, spec: &ProblemSpec, bounds: [[f64; 2]; 2], grid: usize) -> Panel {
    let mut panel = Panel::new(title, bounds);
    panel.streamlines = streamlines(problem, bounds, grid);
    panel.circles.extend(predicted_circle(spec));
    panel.markers = critical_markers(problem, bounds);
    panel
}

fn diverged_note(rec: &Recorded) -> String {
    match &rec.outcome {
        Ok(_) => String::new(),
        Err(rep) => format!(" (diverged at iteration {})", rep.iteration),
    }
}

/// Smallest distance to `center` over the last `fraction` of the samples.
fn terminal_distance(rec: &Recorded, center: &[f64], fraction: f64) -> Option<f64> {
    if rec.outcome.is_err() {
        return None;
    }
    let states = rec.trajectory.states();
    let k = ((states.len() as f64 * fraction).ceil() as usize).clamp(1, states.len());
    let target = TargetSet::Point {
        center: center.to_vec(),
    };
    states[states.len() - k..]
        .iter()
        .map(|z| target.distance(z))
        .min_by(f64::total_cmp)
}

fn nearest_critical(problem: &dyn Problem, near: &[f64]) -> anyhow::Result<Option<CriticalPoint>> {
    let scan = find_critical_points(problem, &SearchBox::square(2, 2.0)?, 21)?;
    Ok(scan
        .points
        .into_iter()
        .min_by(|a, b| a.distance_to(near).total_cmp(&b.distance_to(near))))
}

fn predicted_radius(spec: &ProblemSpec) -> Option<f64> {
    let ProblemSpec::AlmostBilinear {
        epsilon,
        coefficients,
    } = spec
    else {
        return None;
    };
    let pert = PolynomialPerturbation::from_coefficient_map(coefficients, *epsilon).ok()?;
    predict_cycle_radius(&pert).root()
}

fn seed_of(ctx: &Ctx, configured: u64) -> u64 {
    ctx.seed.unwrap_or(configured)
}

// ---------------------------------------------------------------- fig1

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Fig1 {
    problem: ProblemSpec,
    #[serde(default)]
    seed: u64,
    bounds: [[f64; 2]; 2],
    #[serde(default = "default_grid")]
    grid: usize,
    flow: FlowEntry,
    flow_radius_tol: f64,
    runs: Vec<RunEntry>,
}

impl Validate for Fig1 {
    type Output = Self;

    fn validate(self) -> Result<Self, Invalid> {
        planar("problem", &self.problem)?;
        self.flow.check("flow", 2)?;
        for (i, r) in self.runs.iter().enumerate() {
            r.check(&format!("runs.{i}"), 2)?;
        }
        Ok(self)
    }
}

fn radius_trend(rec: &Recorded, trend: Trend) -> (bool, String) {
    let r: Vec<f64> = rec.trajectory.states().iter().map(|z| z.norm()).collect();
    let ok = rec.outcome.is_ok()
        && r.windows(2).all(|w| match trend {
            Trend::Increasing => w[1] > w[0],
            Trend::Decreasing => w[1] < w[0],
        });
    let first = r.first().copied().unwrap_or(f64::NAN);
    let last = r.last().copied().unwrap_or(f64::NAN);
    (
        ok,
        format!(
            "radius {first:.6} -> {last:.6} over {} samples, strictly {}{}",
            r.len(),
            match trend {
                Trend::Increasing => "increasing",
                Trend::Decreasing => "decreasing",
            },
            diverged_note(rec)
        ),
    )
}

fn run_fig1(ctx: &Ctx, cfg: Fig1) -> anyhow::Result<Outcome> {
    let seed = seed_of(ctx, cfg.seed);
    let problem = cfg.problem.build()?;
    let problem = problem.as_ref();
    let mut checks = Checks::default();

    let flow = cfg.flow.integrate(problem)?;
    write_flow(ctx, "flow", &flow)?;
    let r0 = flow.states()[0].norm();
    let drift = flow.states().iter().map(|z| (z.norm() - r0).abs()).fold(0.0, f64::max);
    checks.add(
        "flow-radius-constant",
        drift <= cfg.flow_radius_tol,
        format!("max |r(t) - r(0)| = {drift:.3e} up to t = {} (tol {:e})", flow.end_time(), cfg.flow_radius_tol),
    );

    let mut run_panels = Vec::new();
    for r in &cfg.runs {
        let rec = r.execute(problem, seed, None)?;
        write_run(ctx, &r.label, &rec)?;
        if let Some(trend) = r.radius_trend {
            let (ok, detail) = radius_trend(&rec, trend);
            checks.add(format!("{}-radius", r.label), ok, detail);
        }
        let mut panel = field_panel(&r.label.to_uppercase(), problem, &cfg.problem, cfg.bounds, cfg.grid);
        panel.curves.push(curve(path_points(&rec.trajectory), svg::TRAJECTORY));
        run_panels.push(panel);
    }
    let mut flow_panel = field_panel("mean dynamics", problem, &cfg.problem, cfg.bounds, cfg.grid);
    flow_panel.curves.push(curve(path_points(&flow), svg::FLOW));
    let mut panels = Vec::new();
    let mut rest = run_panels.into_iter();
    panels.extend(rest.next());
    panels.push(flow_panel);
    panels.extend(rest);
    write_svg(ctx, "bilinear game: discrete schemes and mean dynamics", &panels)?;
    Ok((Some(seed), json(&cfg), checks))
}

// ---------------------------------------------------------------- fig2a

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Fig2a {
    problem: ProblemSpec,
    #[serde(default)]
    seed: u64,
    bounds: [[f64; 2]; 2],
    #[serde(default = "default_grid")]
    grid: usize,
    flow_tol: f64,
    run_tol: f64,
    final_window: f64,
    portrait_inits: Vec<Vec<f64>>,
    flow: FlowEntry,
    runs: Vec<RunEntry>,
}

impl Validate for Fig2a {
    type Output = Self;

    fn validate(self) -> Result<Self, Invalid> {
        planar("problem", &self.problem)?;
        if predicted_radius(&self.problem).is_none() {
            return Err(Invalid::new("problem", "needs an almost-bilinear game with a predicted cycle"));
        }
        fraction("final_window", self.final_window)?;
        self.flow.check("flow", 2)?;
        for (i, r) in self.runs.iter().enumerate() {
            r.check(&format!("runs.{i}"), 2)?;
        }
        for (i, z) in self.portrait_inits.iter().enumerate() {
            if z.len() != 2 {
                return Err(Invalid::new(format!("portrait_inits.{i}"), "expected 2 coordinates"));
            }
        }
        Ok(self)
    }
}

fn run_fig2a(ctx: &Ctx, cfg: Fig2a) -> anyhow::Result<Outcome> {
    let seed = seed_of(ctx, cfg.seed);
    let problem = cfg.problem.build()?;
    let problem = problem.as_ref();
    let target = predicted_radius(&cfg.problem).expect("validated");
    let mut checks = Checks::default();

    let flow = cfg.flow.integrate(problem)?;
    write_flow(ctx, "flow", &flow)?;
    let det = detect_cycle(&flow, CycleOptions::flow());
    match det.cycle() {
        Some(c) => checks.add(
            "flow-cycle",
            c.stability == CycleStability::Attracting && (c.radius_mean - target).abs() <= cfg.flow_tol,
            format!(
                "mean radius {:.4}, {:?}, predicted {target:.4} (tol {})",
                c.radius_mean, c.stability, cfg.flow_tol
            ),
        ),
        None => checks.add("flow-cycle", false, format!("no cycle: {det:?}")),
    }

    let mut run_panel = field_panel("noiseless runs", problem, &cfg.problem, cfg.bounds, cfg.grid);
    for r in &cfg.runs {
        let rec = r.execute(problem, seed, None)?;
        write_run(ctx, &r.label, &rec)?;
        let radius = rec
            .outcome
            .is_ok()
            .then(|| tail_mean_radius(&rec.trajectory, cfg.final_window))
            .flatten();
        match radius {
            Some(rv) => checks.add(
                format!("{}-final-radius", r.label),
                (rv - target).abs() <= cfg.run_tol,
                format!("final-window mean radius {rv:.4}, predicted {target:.4} (tol {})", cfg.run_tol),
            ),
            None => checks.add(format!("{}-final-radius", r.label), false, format!("no radius{}", diverged_note(&rec))),
        }
        run_panel.curves.push(curve(path_points(&rec.trajectory), svg::TRAJECTORY));
    }

    let mut flow_panel = field_panel("mean dynamics", problem, &cfg.problem, cfg.bounds, cfg.grid);
    for z in &cfg.portrait_inits {
        let path = FlowEntry {
            z0: z.clone(),
            t_end: cfg.flow.t_end,
            record_every: cfg.flow.record_every,
        }
        .integrate(problem)?;
        flow_panel.curves.push(curve(path_points(&path), svg::FLOW));
    }
    flow_panel.curves.extend(cycle_annotation(&flow, CycleOptions::flow()));
    write_svg(ctx, "almost-bilinear game", &[run_panel, flow_panel])?;
    Ok((Some(seed), json(&cfg), checks))
}

// ---------------------------------------------------------------- fig2b

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Fig2b {
    problem: ProblemSpec,
    #[serde(default)]
    seed: u64,
    bounds: [[f64; 2]; 2],
    #[serde(default = "default_grid")]
    grid: usize,
    cycle_band: [f64; 2],
    stable_near: [f64; 2],
    stable_tol: f64,
    shield_radius: f64,
    flow: FlowEntry,
    runs: Vec<RunEntry>,
}

impl Validate for Fig2b {
    type Output = Self;

    fn validate(self) -> Result<Self, Invalid> {
        planar("problem", &self.problem)?;
        if !(self.cycle_band[0] < self.cycle_band[1]) {
            return Err(Invalid::new("cycle_band", "expected [low, high] with low < high"));
        }
        self.flow.check("flow", 2)?;
        for (i, r) in self.runs.iter().enumerate() {
            r.check(&format!("runs.{i}"), 2)?;
        }
        Ok(self)
    }
}

fn run_fig2b(ctx: &Ctx, cfg: Fig2b) -> anyhow::Result<Outcome> {
    let seed = seed_of(ctx, cfg.seed);
    let problem = cfg.problem.build()?;
    let problem = problem.as_ref();
    let mut checks = Checks::default();

    let flow = cfg.flow.integrate(problem)?;
    write_flow(ctx, "flow", &flow)?;
    let [lo, hi] = cfg.cycle_band;
    let det = detect_cycle(&flow, CycleOptions::flow());
    match det.cycle() {
        Some(c) => checks.add(
            "flow-cycle-band",
            c.radius_min >= lo && c.radius_max <= hi,
            format!(
                "cycle radius in [{:.4}, {:.4}], mean {:.4}, band [{lo}, {hi}]",
                c.radius_min, c.radius_max, c.radius_mean
            ),
        ),
        None => checks.add("flow-cycle-band", false, format!("no cycle: {det:?}")),
    }

    let nearest = nearest_critical(problem, &cfg.stable_near)?;
    let center = match &nearest {
        Some(c) => {
            let d = c.distance_to(&cfg.stable_near);
            checks.add(
                "forsaken-point-stable",
                c.classification == Classification::Stable && d <= cfg.stable_tol,
                format!(
                    "critical point ({:.6}, {:.6}) at distance {d:.4} from ({}, {}), {:?}, max Re {:.4}",
                    c.location[0],
                    c.location[1],
                    cfg.stable_near[0],
                    cfg.stable_near[1],
                    c.classification,
                    c.max_real_part()
                ),
            );
            c.location.clone()
        }
        None => {
            checks.add("forsaken-point-stable", false, "no critical point found");
            cfg.stable_near.to_vec()
        }
    };

    let watch = TargetSet::Point { center: center.clone() };
    let mut panel = field_panel("noisy runs", problem, &cfg.problem, cfg.bounds, cfg.grid);
    let mut avg_panel = field_panel("time averages and mean dynamics", problem, &cfg.problem, cfg.bounds, cfg.grid);
    for r in &cfg.runs {
        let rec = r.execute(problem, seed, Some(&watch))?;
        write_run(ctx, &r.label, &rec)?;
        let closest = if rec.outcome.is_ok() { rec.closest.unwrap_or(0.0) } else { 0.0 };
        checks.add(
            format!("{}-shielded", r.label),
            closest > cfg.shield_radius,
            format!(
                "closest approach to ({:.4}, {:.4}) is {closest:.4} (must exceed {}){}",
                center[0],
                center[1],
                cfg.shield_radius,
                diverged_note(&rec)
            ),
        );
        if let Some([blo, bhi]) = r.final_radius_band {
            let last = rec.trajectory.last().map_or(f64::NAN, |z| z.norm());
            checks.add(
                format!("{}-final-radius", r.label),
                rec.outcome.is_ok() && last >= blo && last <= bhi,
                format!("final radius {last:.4}, band [{blo}, {bhi}]{}", diverged_note(&rec)),
            );
        }
        panel.curves.push(curve(path_points(&rec.trajectory), svg::TRAJECTORY));
        avg_panel.curves.push(curve(time_average(&rec.trajectory), svg::AVERAGE));
    }
    avg_panel.curves.push(curve(path_points(&flow), svg::FLOW));
    avg_panel.curves.extend(cycle_annotation(&flow, CycleOptions::flow()));
    write_svg(ctx, "forsaken solutions", &[panel, avg_panel])?;
    Ok((Some(seed), json(&cfg), checks))
}

// ---------------------------------------------------------------- constant step

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstantPanel {
    problem: ProblemSpec,
    bounds: [[f64; 2]; 2],
    run: RunEntry,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstantStep {
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_grid")]
    grid: usize,
    tail_fraction: f64,
    tol: f64,
    flow_t_end: f64,
    panels: Vec<ConstantPanel>,
}

impl Validate for ConstantStep {
    type Output = Self;

    fn validate(self) -> Result<Self, Invalid> {
        fraction("tail_fraction", self.tail_fraction)?;
        if !(self.flow_t_end > 0.0) {
            return Err(Invalid::new("flow_t_end", "must be positive"));
        }
        for (i, p) in self.panels.iter().enumerate() {
            planar(&format!("panels.{i}.problem"), &p.problem)?;
            p.run.check(&format!("panels.{i}.run"), 2)?;
        }
        Ok(self)
    }
}

fn run_constant_step(ctx: &Ctx, cfg: ConstantStep) -> anyhow::Result<Outcome> {
    let seed = seed_of(ctx, cfg.seed);
    let mut checks = Checks::default();
    let mut panels = Vec::new();
    for p in &cfg.panels {
        let problem = p.problem.build()?;
        let problem = problem.as_ref();
        let flow = FlowEntry {
            z0: p.run.z0.clone(),
            t_end: cfg.flow_t_end,
            record_every: 10,
        }
        .integrate(problem)?;
        let flow_radius = detect_cycle(&flow, CycleOptions::flow()).cycle().map(|c| c.radius_mean);
        let rec = p.run.execute(problem, seed, None)?;
        write_run(ctx, &p.run.label, &rec)?;
        let run_radius = rec
            .outcome
            .is_ok()
            .then(|| tail_mean_radius(&rec.trajectory, cfg.tail_fraction))
            .flatten();
        let name = format!("{}-near-flow-cycle", p.run.label);
        match (flow_radius, run_radius) {
            (Some(f), Some(r)) => checks.add(
                name,
                (r - f).abs() <= cfg.tol,
                format!("tail mean radius {r:.4}, flow cycle mean radius {f:.4} (tol {})", cfg.tol),
            ),
            (None, _) => checks.add(name, false, "the flow from the same start has no cycle"),
            (_, None) => checks.add(name, false, format!("no tail radius{}", diverged_note(&rec))),
        }
        let mut panel = field_panel(&p.run.label, problem, &p.problem, p.bounds, cfg.grid);
        panel.curves.push(curve(path_points(&rec.trajectory), svg::TRAJECTORY));
        panel.curves.extend(cycle_annotation(&flow, CycleOptions::flow()));
        panels.push(panel);
    }
    write_svg(ctx, "constant step size", &panels)?;
    Ok((Some(seed), json(&cfg), checks))
}

// ---------------------------------------------------------------- second order

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SecondOrder {
    problem: ProblemSpec,
    #[serde(default)]
    seed: u64,
    bounds: [[f64; 2]; 2],
    #[serde(default = "default_grid")]
    grid: usize,
    tail_fraction: f64,
    min_distance: f64,
    runs: Vec<RunEntry>,
}

impl Validate for SecondOrder {
    type Output = Self;

    fn validate(self) -> Result<Self, Invalid> {
        planar("problem", &self.problem)?;
        fraction("tail_fraction", self.tail_fraction)?;
        for (i, r) in self.runs.iter().enumerate() {
            r.check(&format!("runs.{i}"), 2)?;
        }
        Ok(self)
    }
}

fn run_second_order(ctx: &Ctx, cfg: SecondOrder) -> anyhow::Result<Outcome> {
    let seed = seed_of(ctx, cfg.seed);
    let problem = cfg.problem.build()?;
    let problem = problem.as_ref();
    let mut checks = Checks::default();
    let scan = find_critical_points(problem, &SearchBox::square(2, 2.0)?, 21)?;
    let mut panels = Vec::new();
    for r in &cfg.runs {
        let rec = r.execute(problem, seed, None)?;
        write_run(ctx, &r.label, &rec)?;
        let det = detect_cycle(&rec.trajectory, CycleOptions::stochastic());
        checks.add(
            format!("{}-cycles", r.label),
            rec.outcome.is_ok() && det.is_cycle(),
            match det.cycle() {
                Some(c) => format!("cycle with mean radius {:.4}, period {:.3}", c.radius_mean, c.period),
                None => format!("no cycle{}", diverged_note(&rec)),
            },
        );
        let closest = scan
            .points
            .iter()
            .filter_map(|cp| terminal_distance(&rec, &cp.location, cfg.tail_fraction).map(|d| (d, cp)))
            .min_by(|a, b| a.0.total_cmp(&b.0));
        match closest {
            Some((d, cp)) => checks.add(
                format!("{}-misses-critical-point", r.label),
                d > cfg.min_distance,
                format!(
                    "terminal distance {d:.4} to ({:.4}, {:.4}) (must exceed {})",
                    cp.location[0], cp.location[1], cfg.min_distance
                ),
            ),
            None => checks.add(
                format!("{}-misses-critical-point", r.label),
                false,
                format!("no terminal distance{}", diverged_note(&rec)),
            ),
        }
        let mut panel = field_panel(&r.label.to_uppercase(), problem, &cfg.problem, cfg.bounds, cfg.grid);
        panel.curves.push(curve(path_points(&rec.trajectory), svg::TRAJECTORY));
        panel
            .curves
            .extend(cycle_annotation(&rec.trajectory, CycleOptions::stochastic()));
        panels.push(panel);
    }
    write_svg(ctx, "second-order schemes on the forsaken game", &panels)?;
    Ok((Some(seed), json(&cfg), checks))
}

// ---------------------------------------------------------------- adaptive

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AdaptivePanel {
    problem: ProblemSpec,
    bounds: [[f64; 2]; 2],
    runs: Vec<RunEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Adaptive {
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_grid")]
    grid: usize,
    tail_fraction: f64,
    shrink_margin: f64,
    origin_tol: f64,
    avoid_tol: f64,
    panels: Vec<AdaptivePanel>,
}

impl Validate for Adaptive {
    type Output = Self;

    fn validate(self) -> Result<Self, Invalid> {
        fraction("tail_fraction", self.tail_fraction)?;
        for (i, p) in self.panels.iter().enumerate() {
            planar(&format!("panels.{i}.problem"), &p.problem)?;
            if !matches!(p.problem, ProblemSpec::AlmostBilinear { .. } | ProblemSpec::Forsaken) {
                return Err(Invalid::new(
                    format!("panels.{i}.problem"),
                    "expected almost-bilinear or forsaken",
                ));
            }
            for (j, r) in p.runs.iter().enumerate() {
                r.check(&format!("panels.{i}.runs.{j}"), 2)?;
            }
        }
        Ok(self)
    }
}

fn run_adaptive(ctx: &Ctx, cfg: Adaptive) -> anyhow::Result<Outcome> {
    let seed = seed_of(ctx, cfg.seed);
    let mut checks = Checks::default();
    let mut panels = Vec::new();
    for p in &cfg.panels {
        let problem = p.problem.build()?;
        let problem = problem.as_ref();
        let forsaken_point = match p.problem {
            ProblemSpec::Forsaken => nearest_critical(problem, &[0.0, 0.49])?,
            _ => None,
        };
        let mut panel = field_panel(problem.label(), problem, &p.problem, p.bounds, cfg.grid);
        for r in &p.runs {
            let rec = r.execute(problem, seed, None)?;
            write_run(ctx, &r.label, &rec)?;
            match (&p.problem, &forsaken_point) {
                (ProblemSpec::Forsaken, Some(cp)) => {
                    let d = terminal_distance(&rec, &cp.location, cfg.tail_fraction);
                    checks.add(
                        format!("{}-misses-forsaken-point", r.label),
                        d.is_some_and(|d| d > cfg.avoid_tol),
                        format!(
                            "terminal distance {} to ({:.4}, {:.4}) (must exceed {}){}",
                            d.map_or("n/a".into(), |d| format!("{d:.4}")),
                            cp.location[0],
                            cp.location[1],
                            cfg.avoid_tol,
                            diverged_note(&rec)
                        ),
                    );
                }
                (ProblemSpec::Forsaken, None) => {
                    checks.add(format!("{}-misses-forsaken-point", r.label), false, "no critical point found")
                }
                (spec, _) => {
                    let h = predicted_radius(spec);
                    let tail = rec
                        .outcome
                        .is_ok()
                        .then(|| tail_mean_radius(&rec.trajectory, cfg.tail_fraction))
                        .flatten();
                    match (h, tail) {
                        (Some(h), Some(t)) => checks.add(
                            format!("{}-cycle-shrinks", r.label),
                            t < h - cfg.shrink_margin,
                            format!("tail mean radius {t:.4} vs predicted {h:.4} (margin {})", cfg.shrink_margin),
                        ),
                        _ => checks.add(
                            format!("{}-cycle-shrinks", r.label),
                            false,
                            format!("no tail radius or prediction{}", diverged_note(&rec)),
                        ),
                    }
                    let d = terminal_distance(&rec, &[0.0, 0.0], cfg.tail_fraction);
                    checks.add(
                        format!("{}-reaches-origin", r.label),
                        d.is_some_and(|d| d <= cfg.origin_tol),
                        format!(
                            "terminal distance to (0, 0) {} (tol {}){}",
                            d.map_or("n/a".into(), |d| format!("{d:.4}")),
                            cfg.origin_tol,
                            diverged_note(&rec)
                        ),
                    );
                }
            }
            panel.curves.push(curve(path_points(&rec.trajectory), svg::TRAJECTORY));
        }
        panels.push(panel);
    }
    write_svg(ctx, "adaptive methods", &panels)?;
    Ok((Some(seed), json(&cfg), checks))
}

// ---------------------------------------------------------------- basins

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Basin {
    problem: ProblemSpec,
    scheme: SchemeConfig,
    schedule: ScheduleConfig,
    #[serde(default)]
    noise: NoiseModel,
    #[serde(default)]
    seed: u64,
    runs: usize,
    horizon: u64,
    /// Explicit center; exclusive with `center_near`.
    center: Option<Vec<f64>>,
    /// Use the critical point nearest to this location.
    center_near: Option<Vec<f64>>,
    init_radius: f64,
    threshold: f64,
    max_fraction: Option<f64>,
    min_fraction: Option<f64>,
}

impl Validate for Basin {
    type Output = Self;

    fn validate(self) -> Result<Self, Invalid> {
        planar("problem", &self.problem)?;
        self.scheme.to_spec()?;
        self.schedule.to_schedule()?;
        self.noise
            .validated()
            .map_err(|e| Invalid::new("noise", e.to_string()))?;
        match (&self.center, &self.center_near) {
            (Some(c), None) | (None, Some(c)) if c.len() == 2 => {}
            (Some(_), None) => return Err(Invalid::new("center", "expected 2 coordinates")),
            (None, Some(_)) => return Err(Invalid::new("center_near", "expected 2 coordinates")),
            _ => return Err(Invalid::new("center", "set exactly one of `center` and `center_near`")),
        }
        if self.max_fraction.is_some() == self.min_fraction.is_some() {
            return Err(Invalid::new("max_fraction", "set exactly one of `max_fraction` and `min_fraction`"));
        }
        if self.runs == 0 {
            return Err(Invalid::new("runs", "must be >= 1"));
        }
        if self.horizon == 0 {
            return Err(Invalid::new("horizon", "must be >= 1"));
        }
        if !(self.init_radius >= 0.0) {
            return Err(Invalid::new("init_radius", "must be >= 0"));
        }
        if !(self.threshold >= 0.0) {
            return Err(Invalid::new("threshold", "must be >= 0"));
        }
        Ok(self)
    }
}

fn run_basin(ctx: &Ctx, cfg: Basin) -> anyhow::Result<Outcome> {
    let seed = seed_of(ctx, cfg.seed);
    let mut checks = Checks::default();
    let center = match (&cfg.center, &cfg.center_near) {
        (Some(c), _) => c.clone(),
        (None, Some(near)) => {
            let problem = cfg.problem.build()?;
            let cp = nearest_critical(problem.as_ref(), near)?
                .with_context(|| format!("no critical point near ({}, {})", near[0], near[1]))?;
            cp.location
        }
        (None, None) => unreachable!("validated"),
    };
    let mc = MonteCarloConfig {
        problem: cfg.problem.clone(),
        scheme: cfg.scheme.to_spec().map_err(invalid)?,
        schedule: cfg.schedule.to_schedule().map_err(invalid)?,
        noise: cfg.noise,
        init: InitSampler::Ball {
            center: center.clone(),
            radius: cfg.init_radius,
        },
        runs: cfg.runs,
        horizon: cfg.horizon,
        target: TargetSet::Point { center: center.clone() },
        threshold: cfg.threshold,
        seed,
    };
    let report = monte_carlo(&mc)?;
    ctx.write(Path::new("montecarlo.json"), to_json_pretty(&report).as_bytes())?;
    let f = report.fraction_converged;
    let (pass, need) = match (cfg.max_fraction, cfg.min_fraction) {
        (Some(m), _) => (f <= m, format!("<= {m}")),
        (_, Some(m)) => (f >= m, format!(">= {m}")),
        _ => unreachable!("validated"),
    };
    checks.add(
        "fraction-near-center",
        pass,
        format!(
            "{} / {} runs end within {} of ({:.4}, {:.4}): fraction {f:.3} (need {need}), diverged {}",
            report.converged, report.runs, cfg.threshold, center[0], center[1], report.diverged
        ),
    );
    Ok((Some(seed), json(&cfg), checks))
}

// ---------------------------------------------------------------- abelian

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Abelian {
    coefficients: BTreeMap<String, f64>,
    expected_root: f64,
    root_tol: f64,
    oracle_tol: f64,
    oracle_points: usize,
    table_points: usize,
}

impl Validate for Abelian {
    type Output = (Self, PolynomialPerturbation);

    fn validate(self) -> Result<Self::Output, Invalid> {
        let pert = PolynomialPerturbation::from_coefficient_map(&self.coefficients, 1.0)
            .map_err(|e| Invalid::new("coefficients", e.to_string()))?;
        if self.oracle_points == 0 || self.table_points < 2 {
            return Err(Invalid::new("table_points", "need at least 2 table points and 1 oracle point"));
        }
        Ok((self, pert))
    }
}

/// Trapezoid rule for `-∮ φ'(y) dx` on the circle of radius `h`.
fn contour_integral(p: &PolynomialPerturbation, h: f64, nodes: usize) -> f64 {
    let dt = 2.0 * PI / nodes as f64;
    (0..nodes)
        .map(|k| {
            let s = (k as f64 * dt).sin();
            p.phi_prime(h * s) * h * s
        })
        .sum::<f64>()
        * dt
}

fn run_abelian(ctx: &Ctx, (cfg, pert): (Abelian, PolynomialPerturbation)) -> anyhow::Result<Outcome> {
    let mut checks = Checks::default();
    let prediction = predict_cycle_radius(&pert);
    match prediction.root() {
        Some(r) => checks.add(
            "root",
            (r - cfg.expected_root).abs() <= cfg.root_tol,
            format!("h* = {r:.12}, expected {:.12} (tol {:e})", cfg.expected_root, cfg.root_tol),
        ),
        None => checks.add("root", false, format!("no root: {prediction:?}")),
    }

    let hi = 2.0 * cfg.expected_root;
    let mut worst = 0.0f64;
    for i in 1..=cfg.oracle_points {
        let h = hi * i as f64 / cfg.oracle_points as f64;
        let closed = abelian_integral(&pert, h);
        let numeric = contour_integral(&pert, h, 4096);
        worst = worst.max((closed - numeric).abs() / (1.0 + closed.abs()));
    }
    checks.add(
        "closed-form-vs-contour",
        worst <= cfg.oracle_tol,
        format!(
            "max relative gap {worst:.3e} over {} radii in (0, {hi:.4}] (tol {:e})",
            cfg.oracle_points, cfg.oracle_tol
        ),
    );

    let mut table = String::from("h,I\n");
    for i in 0..cfg.table_points {
        let h = hi * (i as f64 + 1.0) / cfg.table_points as f64;
        table.push_str(&format!("{h:.16e},{:.16e}\n", abelian_integral(&pert, h)));
    }
    ctx.write(Path::new("abelian.csv"), table.as_bytes())?;
    Ok((None, json(&cfg), checks))
}
