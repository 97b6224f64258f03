//! TOML experiment files. Every file is parsed and validated before any
//! computation starts; diagnostics carry the line and the dotted field path.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use rmlab_core::algorithms::{AdamParams, SchemeKind, SchemeSpec, Wrapper};
use rmlab_core::analysis::{InitSampler, MonteCarloConfig, TargetSet};
use rmlab_core::{NoiseModel, ProblemSpec, StepSchedule};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub source: String,
    pub line: Option<usize>,
    pub field: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.source)?;
        if let Some(line) = self.line {
            write!(f, ":{line}")?;
        }
        if let Some(field) = &self.field {
            write!(f, ": field `{field}`")?;
        }
        write!(f, ": {}", self.message)
    }
}

impl std::error::Error for ConfigError {}

/// A field-level problem found after deserialization.
#[derive(Debug, Clone, PartialEq)]
pub struct Invalid {
    pub field: String,
    pub message: String,
}

impl Invalid {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of the value at a dotted path, falling back to the closest enclosing
/// table that is present.
fn locate(text: &str, field: &str) -> Option<usize> {
    let doc = toml::de::DeTable::parse(text).ok()?;
    let mut keys = field.split('.');
    let mut node = doc.get_ref().get(keys.next()?)?;
    let mut found = node.span().start;
    for key in keys {
        let next = if let Ok(i) = key.parse::<usize>() {
            node.get_ref().get(i)
        } else {
            node.get_ref().get(key)
        };
        match next {
            Some(v) => {
                found = v.span().start;
                node = v;
            }
            None => break,
        }
    }
    Some(line_of(text, found))
}

/// Parses `text` into `T`, reporting serde failures with line and field.
pub fn parse_toml<T: DeserializeOwned>(text: &str, source: &str) -> Result<T, ConfigError> {
    let de = toml::de::Deserializer::parse(text).map_err(|e| ConfigError {
        source: source.to_string(),
        line: e.span().map(|s| line_of(text, s.start)),
        field: None,
        message: e.message().trim().to_string(),
    })?;
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let field = (path != ".").then_some(path);
        let line = inner
            .span()
            .map(|s| line_of(text, s.start))
            .or_else(|| field.as_deref().and_then(|f| locate(text, f)));
        ConfigError {
            source: source.to_string(),
            line,
            field,
            message: inner.message().trim().to_string(),
        }
    })
}

/// Reads, parses and validates a config file.
pub fn load<T: DeserializeOwned + Validate>(path: &Path) -> Result<T::Output, ConfigError> {
    let source = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
        source: source.clone(),
        line: None,
        field: None,
        message: format!("cannot read: {e}"),
    })?;
    load_str::<T>(&text, &source)
}

pub fn load_str<T: DeserializeOwned + Validate>(text: &str, source: &str) -> Result<T::Output, ConfigError> {
    let raw: T = parse_toml(text, source)?;
    raw.validate().map_err(|bad| ConfigError {
        source: source.to_string(),
        line: locate(text, &bad.field),
        field: Some(bad.field),
        message: bad.message,
    })
}

/// Turns a deserialized file into the checked form used by the commands.
pub trait Validate {
    type Output;
    fn validate(self) -> Result<Self::Output, Invalid>;
}

fn core_err(field: &str) -> impl Fn(rmlab_core::Error) -> Invalid + '_ {
    move |e| Invalid::new(field, e.to_string())
}

fn check_problem(spec: &ProblemSpec) -> Result<usize, Invalid> {
    spec.build().map(|p| p.dim()).map_err(core_err("problem"))
}

fn check_point(field: &str, point: &[f64], dim: usize) -> Result<(), Invalid> {
    if point.len() != dim {
        return Err(Invalid::new(field, format!("expected {dim} coordinates, got {}", point.len())));
    }
    if point.iter().any(|c| !c.is_finite()) {
        return Err(Invalid::new(field, "coordinates must be finite"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeName {
    Sgda,
    Ppm,
    Seg,
    Peg,
    Spsa,
    Hd,
    Sga,
    Cono,
    Adam,
    ExtraAdam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    pub name: SchemeName,
    /// Gradient-penalty weight for `sga` and `cono`.
    pub lambda: Option<f64>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub stabilizer: Option<f64>,
    /// Averaging weight `α` of the averaged wrapper.
    pub averaged: Option<f64>,
    /// `[k1, k2]` of the alternating wrapper.
    pub alternating: Option<[u32; 2]>,
}

impl SchemeConfig {
    #[cfg(test)]
    pub fn plain(name: SchemeName) -> Self {
        Self {
            name,
            lambda: None,
            beta1: None,
            beta2: None,
            stabilizer: None,
            averaged: None,
            alternating: None,
        }
    }

    pub fn to_spec(&self) -> Result<SchemeSpec, Invalid> {
        let adam_fields = self.beta1.is_some() || self.beta2.is_some() || self.stabilizer.is_some();
        let is_adam = matches!(self.name, SchemeName::Adam | SchemeName::ExtraAdam);
        if adam_fields && !is_adam {
            return Err(Invalid::new("scheme.beta1", "beta1/beta2/stabilizer apply to adam and extra-adam only"));
        }
        let wants_lambda = matches!(self.name, SchemeName::Sga | SchemeName::Cono);
        if self.lambda.is_some() && !wants_lambda {
            return Err(Invalid::new("scheme.lambda", "lambda applies to sga and cono only"));
        }
        let lambda = || {
            self.lambda
                .ok_or_else(|| Invalid::new("scheme.lambda", "required for sga and cono"))
        };
        let adam = || {
            let d = AdamParams::default();
            AdamParams {
                beta1: self.beta1.unwrap_or(d.beta1),
                beta2: self.beta2.unwrap_or(d.beta2),
                stabilizer: self.stabilizer.unwrap_or(d.stabilizer),
            }
        };
        let kind = match self.name {
            SchemeName::Sgda => SchemeKind::Sgda,
            SchemeName::Ppm => SchemeKind::Ppm,
            SchemeName::Seg => SchemeKind::Seg,
            SchemeName::Peg => SchemeKind::Peg,
            SchemeName::Spsa => SchemeKind::Spsa,
            SchemeName::Hd => SchemeKind::Hd,
            SchemeName::Sga => SchemeKind::Sga { lambda: lambda()? },
            SchemeName::Cono => SchemeKind::Cono { lambda: lambda()? },
            SchemeName::Adam => SchemeKind::Adam(adam()),
            SchemeName::ExtraAdam => SchemeKind::ExtraAdam(adam()),
        };
        let wrapper = match (self.averaged, self.alternating) {
            (Some(_), Some(_)) => {
                return Err(Invalid::new("scheme.alternating", "choose one of `averaged` and `alternating`"))
            }
            (Some(a), None) => Some(Wrapper::Averaged(a)),
            (None, Some(k)) => Some(Wrapper::Alternating(k)),
            (None, None) => None,
        };
        let spec = SchemeSpec { kind, wrapper };
        spec.validate().map_err(|e| {
            let field = match &e {
                rmlab_core::Error::InvalidParameter { name, .. } => match *name {
                    "alpha" => "scheme.averaged".to_string(),
                    "alternating" => "scheme.alternating".to_string(),
                    other => format!("scheme.{other}"),
                },
                _ => "scheme".to_string(),
            };
            Invalid::new(field, e.to_string())
        })?;
        Ok(spec)
    }
}

/// `γ_n = scale / n^exponent`, a constant, or an explicit sequence, plus an
/// optional sampling radius `δ_n = delta_scale / n^delta_exponent`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub scale: Option<f64>,
    pub exponent: Option<f64>,
    pub constant: Option<f64>,
    pub sequence: Option<Vec<f64>>,
    pub delta_scale: Option<f64>,
    pub delta_exponent: Option<f64>,
}

impl ScheduleConfig {
    pub fn to_schedule(&self) -> Result<StepSchedule, Invalid> {
        let power = self.scale.is_some() || self.exponent.is_some();
        let chosen = [power, self.constant.is_some(), self.sequence.is_some()]
            .iter()
            .filter(|b| **b)
            .count();
        if chosen != 1 {
            return Err(Invalid::new(
                "schedule",
                "set exactly one of `scale`+`exponent`, `constant` or `sequence`",
            ));
        }
        let base = if power {
            let scale = self.scale.ok_or_else(|| Invalid::new("schedule.scale", "missing"))?;
            let exponent = self
                .exponent
                .ok_or_else(|| Invalid::new("schedule.exponent", "missing"))?;
            StepSchedule::power(scale, exponent).map_err(core_err("schedule.scale"))?
        } else if let Some(g) = self.constant {
            StepSchedule::constant(g).map_err(core_err("schedule.constant"))?
        } else {
            let v = self.sequence.clone().unwrap_or_default();
            StepSchedule::sequence(v).map_err(core_err("schedule.sequence"))?
        };
        match (self.delta_scale, self.delta_exponent) {
            (None, None) => Ok(base),
            (Some(s), Some(e)) => base.with_sampling_radius(s, e).map_err(core_err("schedule.delta_scale")),
            _ => Err(Invalid::new(
                "schedule.delta_scale",
                "`delta_scale` and `delta_exponent` go together",
            )),
        }
    }
}

fn one() -> u64 {
    1
}

/// Output file names, relative to the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Outputs {
    pub csv: Option<PathBuf>,
    pub json: Option<PathBuf>,
    pub svg: Option<PathBuf>,
}

impl Default for Outputs {
    fn default() -> Self {
        Self {
            csv: Some("trajectory.csv".into()),
            json: Some("summary.json".into()),
            svg: None,
        }
    }
}

/// A `simulate` config with every key present; commented lines show the
/// alternatives. Printed by `rmlab reference-config`.
pub const REFERENCE_CONFIG: &str = r#"# exactly one of z0 and init
z0 = [1.5, 0.0]
# init = { kind = "ball", center = [0.0, 0.0], radius = 0.05 }
horizon = 100000
record_every = 1
seed = 0

# problem: bilinear | almost-bilinear | forsaken | gradient-well
[problem]
label = "almost-bilinear"
epsilon = 0.01
# phi(y) = sum of coefficient * y^degree; this is the default
coefficients = { 2 = 0.5, 4 = -0.25 }
# label = "gradient-well"
# radius = 1.0

# name: sgda | ppm | seg | peg | spsa | hd | sga | cono | adam | extra-adam
[scheme]
name = "seg"
# lambda = 0.2          # sga, cono (required there)
# beta1 = 0.9           # adam, extra-adam
# beta2 = 0.999         # adam, extra-adam
# stabilizer = 1e-8     # adam, extra-adam
# averaged = 0.5        # averaged wrapper weight in (0, 1]
# alternating = [1, 1]  # alternating wrapper: min steps, max steps

# exactly one of scale + exponent (gamma_n = scale / n^exponent), constant,
# or sequence; spsa also needs delta_scale + delta_exponent
[schedule]
scale = 0.5
exponent = 1.0
# constant = 0.01
# sequence = [0.1, 0.05, 0.025]
# delta_scale = 0.1
# delta_exponent = 0.25

# kind: none | gaussian (sigma) | bounded-uniform (k)
[noise]
kind = "gaussian"
sigma = 0.01

[outputs]
csv = "trajectory.csv"
json = "summary.json"

"#;

/// The reference config, ready to print.
pub fn reference_config() -> &'static str {
    REFERENCE_CONFIG
}

/// Config of `simulate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub scheme: SchemeConfig,
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub noise: NoiseModel,
    /// Initial point; exclusive with `init`.
    pub z0: Option<Vec<f64>>,
    pub init: Option<InitSampler>,
    pub horizon: u64,
    #[serde(default = "one")]
    pub record_every: u64,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default)]
    pub seed: u64,
}

/// `ExperimentConfig` after validation.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub raw: ExperimentConfig,
    pub scheme: SchemeSpec,
    pub schedule: StepSchedule,
    pub init: InitSampler,
}

impl Validate for ExperimentConfig {
    type Output = Experiment;

    fn validate(self) -> Result<Experiment, Invalid> {
        let dim = check_problem(&self.problem)?;
        let scheme = self.scheme.to_spec()?;
        let schedule = self.schedule.to_schedule()?;
        self.noise.validated().map_err(core_err("noise"))?;
        if self.horizon == 0 {
            return Err(Invalid::new("horizon", "must be >= 1"));
        }
        schedule.check_horizon(self.horizon).map_err(core_err("horizon"))?;
        if self.record_every == 0 {
            return Err(Invalid::new("record_every", "must be >= 1"));
        }
        if matches!(scheme.kind, SchemeKind::Spsa) && schedule.sampling_radius().is_none() {
            return Err(Invalid::new("schedule.delta_scale", "spsa needs a sampling radius"));
        }
        let init = match (&self.z0, &self.init) {
            (Some(z), None) => {
                check_point("z0", z, dim)?;
                InitSampler::Fixed { point: z.clone() }
            }
            (None, Some(sampler)) => {
                check_sampler(sampler, dim)?;
                sampler.clone()
            }
            _ => return Err(Invalid::new("z0", "set exactly one of `z0` and `init`")),
        };
        Ok(Experiment {
            raw: self,
            scheme,
            schedule,
            init,
        })
    }
}

fn check_sampler(sampler: &InitSampler, dim: usize) -> Result<(), Invalid> {
    match sampler {
        InitSampler::Fixed { point } => check_point("init.point", point, dim),
        InitSampler::Ball { center, radius } => {
            check_point("init.center", center, dim)?;
            if !(*radius >= 0.0 && radius.is_finite()) {
                return Err(Invalid::new("init.radius", "must be >= 0"));
            }
            Ok(())
        }
    }
}

fn default_h_int() -> f64 {
    rmlab_core::dynamics::DEFAULT_H_INT
}

fn default_stride() -> usize {
    10
}

/// Config of `flow`: integrate `ż = V(z)` from `z0` up to `t_end`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    pub problem: ProblemSpec,
    pub z0: Vec<f64>,
    pub t_end: f64,
    #[serde(default = "default_h_int")]
    pub h_int: f64,
    /// Keep every k-th integrator step.
    #[serde(default = "default_stride")]
    pub record_every: usize,
    #[serde(default)]
    pub outputs: Outputs,
}

impl Validate for FlowConfig {
    type Output = FlowConfig;

    fn validate(self) -> Result<FlowConfig, Invalid> {
        let dim = check_problem(&self.problem)?;
        check_point("z0", &self.z0, dim)?;
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Invalid::new("t_end", "must be positive"));
        }
        if !(self.h_int > 0.0 && self.h_int <= self.t_end) {
            return Err(Invalid::new("h_int", "must lie in (0, t_end]"));
        }
        if self.record_every == 0 {
            return Err(Invalid::new("record_every", "must be >= 1"));
        }
        Ok(self)
    }
}

/// Config of `montecarlo`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloFile {
    pub problem: ProblemSpec,
    pub scheme: SchemeConfig,
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub noise: NoiseModel,
    pub init: InitSampler,
    pub runs: usize,
    pub horizon: u64,
    pub target: TargetSet,
    pub threshold: f64,
    #[serde(default)]
    pub seed: u64,
    /// Report file, relative to the output directory.
    #[serde(default = "default_report")]
    pub report: PathBuf,
}

fn default_report() -> PathBuf {
    "montecarlo.json".into()
}

impl Validate for MonteCarloFile {
    type Output = (MonteCarloConfig, PathBuf);

    fn validate(self) -> Result<Self::Output, Invalid> {
        let dim = check_problem(&self.problem)?;
        let scheme = self.scheme.to_spec()?;
        let schedule = self.schedule.to_schedule()?;
        self.noise.validated().map_err(core_err("noise"))?;
        check_sampler(&self.init, dim)?;
        let center = match &self.target {
            TargetSet::Point { center } | TargetSet::Ball { center, .. } | TargetSet::Annulus { center, .. } => {
                center
            }
        };
        check_point("target.center", center, dim)?;
        if self.runs == 0 {
            return Err(Invalid::new("runs", "must be >= 1"));
        }
        if self.horizon == 0 {
            return Err(Invalid::new("horizon", "must be >= 1"));
        }
        if !(self.threshold >= 0.0) {
            return Err(Invalid::new("threshold", "must be >= 0"));
        }
        let cfg = MonteCarloConfig {
            problem: self.problem,
            scheme,
            schedule,
            noise: self.noise,
            init: self.init,
            runs: self.runs,
            horizon: self.horizon,
            target: self.target,
            threshold: self.threshold,
            seed: self.seed,
        };
        Ok((cfg, self.report))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_config_validates() {
        let exp = load_str::<ExperimentConfig>(REFERENCE_CONFIG, "reference").unwrap();
        assert_eq!(exp.raw.horizon, 100_000);
        assert_eq!(exp.raw.outputs, Outputs::default());
    }

    const GOOD: &str = r#"
seed = 3
horizon = 100
z0 = [1.0, 0.0]

[problem]
label = "bilinear"

[scheme]
name = "seg"

[schedule]
constant = 0.1
"#;

    #[test]
    fn minimal_experiment_parses() {
        let e = load_str::<ExperimentConfig>(GOOD, "good.toml").unwrap();
        assert_eq!(e.scheme, SchemeSpec::plain(SchemeKind::Seg));
        assert_eq!(e.raw.record_every, 1);
        assert_eq!(e.raw.outputs, Outputs::default());
    }

    #[test]
    fn unknown_scheme_names_the_field_and_line() {
        let text = GOOD.replace("\"seg\"", "\"sgdaa\"");
        let err = load_str::<ExperimentConfig>(&text, "bad.toml").unwrap_err();
        assert_eq!(err.field.as_deref(), Some("scheme.name"));
        assert_eq!(err.line, Some(10));
        assert!(err.message.contains("sgdaa"), "{err}");
        assert!(err.to_string().starts_with("bad.toml:10: field `scheme.name`"), "{err}");
    }

    #[test]
    fn unknown_key_is_rejected() {
        let text = GOOD.replace("constant = 0.1", "constant = 0.1\nconstnat = 2.0");
        let err = load_str::<ExperimentConfig>(&text, "x").unwrap_err();
        assert!(err.message.contains("constnat"), "{err}");
        assert_eq!(err.line, Some(14));
    }

    #[test]
    fn validation_errors_point_at_the_value() {
        let text = GOOD.replace("horizon = 100", "horizon = 0");
        let err = load_str::<ExperimentConfig>(&text, "x").unwrap_err();
        assert_eq!((err.field.as_deref(), err.line), (Some("horizon"), Some(3)));

        let text = GOOD.replace("name = \"seg\"", "name = \"sga\"");
        let err = load_str::<ExperimentConfig>(&text, "x").unwrap_err();
        assert_eq!(err.field.as_deref(), Some("scheme.lambda"));
        assert_eq!(err.line, Some(9), "falls back to the [scheme] table");

        let text = GOOD.replace("z0 = [1.0, 0.0]", "z0 = [1.0]");
        let err = load_str::<ExperimentConfig>(&text, "x").unwrap_err();
        assert_eq!(err.field.as_deref(), Some("z0"));
    }

    #[test]
    fn syntax_errors_carry_a_line() {
        let err = parse_toml::<ExperimentConfig>("horizon = \n", "x").unwrap_err();
        assert_eq!(err.line, Some(1));
    }

    #[test]
    fn schedule_forms_are_exclusive() {
        let s = ScheduleConfig {
            constant: Some(0.1),
            scale: Some(1.0),
            exponent: Some(1.0),
            ..Default::default()
        };
        assert_eq!(s.to_schedule().unwrap_err().field, "schedule");
        let s = ScheduleConfig {
            scale: Some(0.5),
            exponent: Some(1.0),
            delta_scale: Some(0.1),
            delta_exponent: Some(0.25),
            ..Default::default()
        };
        assert!(s.to_schedule().unwrap().sampling_radius().is_some());
    }

    #[test]
    fn wrappers_and_parameters() {
        let mut s = SchemeConfig::plain(SchemeName::Peg);
        s.averaged = Some(0.5);
        assert_eq!(s.to_spec().unwrap(), SchemeSpec::averaged(SchemeKind::Peg, 0.5));
        s.averaged = Some(1.5);
        assert_eq!(s.to_spec().unwrap_err().field, "scheme.averaged");
        let mut s = SchemeConfig::plain(SchemeName::Sgda);
        s.beta1 = Some(0.5);
        assert!(s.to_spec().is_err());
    }
}
