use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _};
use serde::Serialize;

use rmlab_core::analysis::{
    abelian_integral, detect_cycle, find_critical_points, monte_carlo, predict_cycle_radius, CycleOptions,
    CyclePrediction, SearchBox,
};
use rmlab_core::dynamics::{apt_deviation_with, integrate_flow_strided, AptOptions};
use rmlab_core::io::{parse_trajectory_csv, to_json_pretty, write_path_csv, write_trajectory_csv, SimulationSummary};
use rmlab_core::problems::PolynomialPerturbation;
use rmlab_core::{DivergenceReport, Error, ProblemSpec};

use crate::config::{self, ExperimentConfig, FlowConfig, MonteCarloFile};
use crate::portrait::{self, PortraitSpec};
use crate::runs::{record, RunRequest};

/// Settings shared by every subcommand.
pub struct Ctx {
    pub out_dir: PathBuf,
    pub seed: Option<u64>,
    pub quiet: bool,
}

impl Ctx {
    pub fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    pub fn path(&self, name: &Path) -> PathBuf {
        self.out_dir.join(name)
    }

    pub fn write(&self, name: &Path, bytes: &[u8]) -> anyhow::Result<PathBuf> {
        let path = self.path(name);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.say(format!("wrote {}", path.display()));
        Ok(path)
    }
}

/// What a finished command reports back to `main`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    ChecksFailed,
}

pub fn diverged_error(rep: DivergenceReport) -> anyhow::Error {
    Error::Diverged(rep).into()
}

pub fn simulate(ctx: &Ctx, config: &Path) -> anyhow::Result<Status> {
    let exp = config::load::<ExperimentConfig>(config)?;
    let seed = ctx.seed.unwrap_or(exp.raw.seed);
    let problem = exp.raw.problem.build()?;
    let mut init_stream = rmlab_core::NoiseStream::new(exp.raw.noise, seed);
    let z0 = exp.init.sample(problem.as_ref(), &mut init_stream)?;
    let rec = record(RunRequest {
        problem: problem.as_ref(),
        scheme: exp.scheme,
        schedule: &exp.schedule,
        noise: exp.raw.noise,
        z0: z0.clone(),
        horizon: exp.raw.horizon,
        record_every: exp.raw.record_every,
        seed,
        watch: None,
    })?;

    if let Some(csv) = &exp.raw.outputs.csv {
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &rec.trajectory)?;
        ctx.write(csv, &buf)?;
    }
    let last = rec.trajectory.last().cloned().unwrap_or_else(|| z0.clone());
    let summary = match &rec.outcome {
        Ok(stats) => SimulationSummary {
            problem: problem.label().to_string(),
            scheme: exp.scheme.kind.name().to_string(),
            iterations: exp.raw.horizon,
            initial_point: z0.to_vec(),
            final_point: stats.final_point.to_vec(),
            final_radius: stats.final_point.norm(),
            final_time: stats.final_time,
            max_norm: stats.max_norm,
            diverged: false,
            diverged_at: None,
            queries_total: stats.queries_total,
            seed,
        },
        Err(rep) => SimulationSummary {
            problem: problem.label().to_string(),
            scheme: exp.scheme.kind.name().to_string(),
            iterations: rep.iteration,
            initial_point: z0.to_vec(),
            final_point: rep.coords.clone(),
            final_radius: rep.coords.iter().map(|c| c * c).sum::<f64>().sqrt(),
            final_time: rec.trajectory.effective_times().last().copied().unwrap_or(0.0),
            max_norm: f64::INFINITY,
            diverged: true,
            diverged_at: Some(rep.iteration),
            queries_total: rep.queries_used,
            seed,
        },
    };
    if let Some(json) = &exp.raw.outputs.json {
        // serde_json writes non-finite floats as null
        ctx.write(json, to_json_pretty(&summary).as_bytes())?;
    }
    match rec.outcome {
        Ok(_) => {
            ctx.say(format!(
                "final point ({}) radius {:.6} after {} iterations, effective time {:.4}",
                last.to_vec().iter().map(|c| format!("{c:.6}")).collect::<Vec<_>>().join(", "),
                summary.final_radius,
                summary.iterations,
                summary.final_time
            ));
            Ok(Status::Ok)
        }
        Err(rep) => Err(diverged_error(rep)),
    }
}

pub fn flow(ctx: &Ctx, config: &Path) -> anyhow::Result<Status> {
    let cfg = config::load::<FlowConfig>(config)?;
    let problem = cfg.problem.build()?;
    let z0 = problem.point(cfg.z0.clone())?;
    let path = integrate_flow_strided(problem.as_ref(), &z0, cfg.t_end, cfg.h_int, cfg.record_every)?;
    if let Some(csv) = &cfg.outputs.csv {
        let mut buf = Vec::new();
        write_path_csv(&mut buf, &path)?;
        ctx.write(csv, &buf)?;
    }
    let last = path.last();
    #[derive(Serialize)]
    struct FlowSummary {
        problem: String,
        initial_point: Vec<f64>,
        final_point: Vec<f64>,
        final_radius: f64,
        t_end: f64,
        h_int: f64,
        samples: usize,
    }
    let summary = FlowSummary {
        problem: problem.label().to_string(),
        initial_point: cfg.z0.clone(),
        final_point: last.to_vec(),
        final_radius: last.norm(),
        t_end: path.end_time(),
        h_int: cfg.h_int,
        samples: rmlab_core::SampledPath::len(&path),
    };
    if let Some(json) = &cfg.outputs.json {
        ctx.write(json, to_json_pretty(&summary).as_bytes())?;
    }
    ctx.say(format!("flow reached t = {} at radius {:.6}", summary.t_end, summary.final_radius));
    Ok(Status::Ok)
}

/// Coefficients of `φ` given as `--a<k>` flags.
pub fn abelian(coefficients: &BTreeMap<u32, f64>, h: Option<f64>) -> anyhow::Result<Status> {
    if coefficients.is_empty() {
        bail!("give at least one coefficient, e.g. --a2 0.5 --a4 -0.25");
    }
    let terms: Vec<(u32, f64)> = coefficients.iter().map(|(k, v)| (*k, *v)).collect();
    let pert = PolynomialPerturbation::from_terms(&terms, 1.0)?;
    let prediction = predict_cycle_radius(&pert);
    let (lo, hi) = match prediction.root() {
        Some(r) => (r / 10.0, r * 10.0),
        None => (1e-2, 1e1),
    };
    println!("{:>14}  {:>22}", "h", "I(h)");
    for i in 0..20 {
        let hv = lo * (hi / lo).powf(i as f64 / 19.0);
        println!("{hv:>14.6e}  {:>22.12e}", abelian_integral(&pert, hv));
    }
    if let Some(hv) = h {
        if !(hv > 0.0 && hv.is_finite()) {
            bail!("--h must be positive");
        }
        println!("I({hv}) = {:.12e}", abelian_integral(&pert, hv));
    }
    match &prediction {
        CyclePrediction::Radii { roots } => {
            println!("h* = {:.9}", roots[0]);
            if roots.len() > 1 {
                let rest: Vec<String> = roots[1..].iter().map(|r| format!("{r:.9}")).collect();
                println!("further roots: {}", rest.join(", "));
            }
        }
        CyclePrediction::NoPositiveRoot => println!("no positive root"),
        CyclePrediction::IdenticallyZero => println!("I identically zero"),
    }
    Ok(Status::Ok)
}

/// Builds a problem from command-line flags.
pub fn problem_from_flags(
    label: &str,
    epsilon: Option<f64>,
    coef: &[String],
    radius: Option<f64>,
) -> anyhow::Result<ProblemSpec> {
    let spec = match label {
        "bilinear" => ProblemSpec::Bilinear,
        "forsaken" => ProblemSpec::Forsaken,
        "gradient-well" => ProblemSpec::GradientWell {
            radius: radius.unwrap_or(1.0),
        },
        "almost-bilinear" => {
            let epsilon = epsilon.context("--epsilon is required for almost-bilinear")?;
            let coefficients = if coef.is_empty() {
                PolynomialPerturbation::default_quartic(0.0).coefficient_map()
            } else {
                let mut m = BTreeMap::new();
                for c in coef {
                    let (k, v) = c
                        .split_once('=')
                        .with_context(|| format!("--coef expects DEGREE=VALUE, got `{c}`"))?;
                    let v: f64 = v.parse().with_context(|| format!("--coef value in `{c}`"))?;
                    m.insert(k.trim().to_string(), v);
                }
                m
            };
            ProblemSpec::AlmostBilinear {
                epsilon,
                coefficients,
            }
        }
        other => bail!("unknown problem `{other}`; expected one of {}", ProblemSpec::LABELS.join(", ")),
    };
    spec.build()?;
    Ok(spec)
}

pub enum CycleSource<'a> {
    Csv(&'a Path),
    Flow(&'a Path),
}

pub fn cycle(ctx: &Ctx, source: CycleSource<'_>, stochastic: bool, burn_in: Option<f64>) -> anyhow::Result<Status> {
    let mut opts = if stochastic {
        CycleOptions::stochastic()
    } else {
        CycleOptions::flow()
    };
    if let Some(b) = burn_in {
        if !(0.0..1.0).contains(&b) {
            bail!("--burn-in must lie in [0, 1)");
        }
        opts.burn_in = b;
    }
    let detection = match source {
        CycleSource::Csv(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let table = parse_trajectory_csv(&text).with_context(|| p.display().to_string())?;
            detect_cycle(&table, opts)
        }
        CycleSource::Flow(p) => {
            let cfg = config::load::<FlowConfig>(p)?;
            let problem = cfg.problem.build()?;
            let path = integrate_flow_strided(
                problem.as_ref(),
                &problem.point(cfg.z0.clone())?,
                cfg.t_end,
                cfg.h_int,
                cfg.record_every,
            )?;
            detect_cycle(&path, opts)
        }
    };
    ctx.say(if detection.is_cycle() { "cycle detected" } else { "no cycle" });
    println!("{}", to_json_pretty(&detection));
    Ok(Status::Ok)
}

pub fn critical(spec: &ProblemSpec, half_width: f64, grid: usize) -> anyhow::Result<Status> {
    let problem = spec.build()?;
    let search = SearchBox::square(problem.dim(), half_width)?;
    let scan = find_critical_points(problem.as_ref(), &search, grid)?;
    println!("{}", to_json_pretty(&scan));
    Ok(Status::Ok)
}

pub fn apt_check(
    spec: &ProblemSpec,
    csv: &Path,
    times: &[f64],
    window: f64,
    h_int: Option<f64>,
) -> anyhow::Result<Status> {
    let problem = spec.build()?;
    let text = std::fs::read_to_string(csv).with_context(|| format!("reading {}", csv.display()))?;
    let table = parse_trajectory_csv(&text).with_context(|| csv.display().to_string())?;
    let mut opts = AptOptions::default();
    if let Some(h) = h_int {
        opts.h_int = h;
    }
    #[derive(Serialize)]
    struct Row {
        t: f64,
        window: f64,
        deviation: f64,
    }
    let mut rows = Vec::new();
    for &t in times {
        let deviation = apt_deviation_with(&table, problem.as_ref(), t, window, opts)?;
        rows.push(Row { t, window, deviation });
    }
    println!("{}", to_json_pretty(&rows));
    Ok(Status::Ok)
}

pub fn montecarlo(ctx: &Ctx, config: &Path) -> anyhow::Result<Status> {
    let (mut cfg, report_path) = config::load::<MonteCarloFile>(config)?;
    if let Some(s) = ctx.seed {
        cfg.seed = s;
    }
    let report = monte_carlo(&cfg)?;
    ctx.write(&report_path, to_json_pretty(&report).as_bytes())?;
    ctx.say(format!(
        "{} / {} runs within {} of the target (fraction {:.4}), {} diverged",
        report.converged, report.runs, report.threshold, report.fraction_converged, report.diverged
    ));
    Ok(Status::Ok)
}

pub fn portrait(ctx: &Ctx, config: &Path) -> anyhow::Result<Status> {
    let spec = config::load::<PortraitSpec>(config)?;
    let out = portrait::render(&spec)?;
    ctx.write(&spec.output, out.svg.as_bytes())?;
    for (p, c, n) in &out.diverged {
        ctx.say(format!("panel {p}, curve {c}: run diverged at iteration {n}; drawn up to there"));
    }
    Ok(Status::Ok)
}
