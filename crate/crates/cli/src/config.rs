//! Experiment configuration: presets, config files and `key=value` overrides,
//! merged in that order and validated once.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use shiftmor::fom::{check_subcharacteristic, Scheme, SolverConfig};
use shiftmor::profiles::{Flux, InitialCondition};
use shiftmor::reference::{FvConfig, FvOrder, RiccatiParams};
use toml::{Table, Value};

use crate::presets;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("unknown preset `{0}` (available: {1})")]
    UnknownPreset(String, String),
    #[error("malformed override `{0}`: expected key=value")]
    Override(String),
    #[error("missing required field `{0}`")]
    Missing(&'static str),
    #[error("invalid value for `{field}`: {message}")]
    Invalid { field: &'static str, message: String },
}

type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    #[default]
    Relaxation,
    Riccati,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FluxKind {
    Linear,
    Burgers,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKind {
    #[default]
    SemiImplicit,
    Explicit,
}

/// Source of the reduced basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BasisKind {
    #[default]
    Pod,
    /// All-zero columns: the degenerate one-function basis.
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    Sine,
    ShiftedSine,
    GaussBump,
    Step { a: f64 },
    Combined { a: f64 },
}

impl InitialSpec {
    pub fn build(&self) -> InitialCondition {
        match *self {
            Self::Sine => InitialCondition::Sine,
            Self::ShiftedSine => InitialCondition::ShiftedSine,
            Self::GaussBump => InitialCondition::GaussBump,
            Self::Step { a } => InitialCondition::Step { a },
            Self::Combined { a } => InitialCondition::Combined { a },
        }
    }
}

/// Config as written: every key optional, unknown keys rejected.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub preset: Option<String>,
    pub model: Option<Model>,
    pub flux: Option<FluxKind>,
    /// Advection speed of the linear flux.
    pub speed: Option<f64>,
    pub lambda: Option<f64>,
    pub epsilon: Option<f64>,
    pub rho: Option<f64>,
    pub dt: Option<f64>,
    pub scheme: Option<SchemeKind>,
    pub n: Option<usize>,
    pub t_end: Option<f64>,
    pub rank: Option<usize>,
    pub basis: Option<BasisKind>,
    pub snapshot_stride: Option<usize>,
    pub training: Option<Vec<String>>,
    pub fv_cells: Option<usize>,
    pub fv_order: Option<u8>,
    pub samples: Option<usize>,
    pub times: Option<Vec<f64>>,
    pub gamma: Option<f64>,
    pub delta: Option<f64>,
    pub allow_subcharacteristic_violation: Option<bool>,
    pub output_dir: Option<PathBuf>,
    pub initial_condition: Option<InitialSpec>,
}

/// Fully resolved configuration. Serializes to the echo embedded in reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub model: Model,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flux: Option<FluxKind>,
    pub speed: f64,
    pub lambda: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    pub dt: f64,
    pub scheme: SchemeKind,
    pub n: usize,
    pub t_end: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
    pub basis: BasisKind,
    pub snapshot_stride: usize,
    pub training: Vec<String>,
    pub fv_cells: usize,
    pub fv_order: u8,
    pub samples: usize,
    pub times: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    pub allow_subcharacteristic_violation: bool,
    pub output_dir: PathBuf,
    pub initial_condition: InitialSpec,
}

/// Where configuration comes from, lowest precedence first.
#[derive(Debug, Clone, Default)]
pub struct Sources<'a> {
    pub preset: Option<&'a str>,
    pub file: Option<&'a Path>,
    pub overrides: &'a [String],
    pub output_dir: Option<&'a Path>,
}

pub fn load(src: &Sources<'_>) -> Result<ExperimentConfig> {
    let mut file_table = Table::new();
    let mut file_preset = None;
    if let Some(path) = src.file {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Read { path: path.display().to_string(), source })?;
        let parse_err = |e: toml::de::Error| ConfigError::Parse { path: path.display().to_string(), message: e.to_string() };
        // Typed parse first so unknown keys and bad values are reported with their line.
        let raw: RawConfig = toml::from_str(&text).map_err(parse_err)?;
        file_preset = raw.preset;
        file_table = text.parse::<Table>().map_err(parse_err)?;
    }

    let preset_name = src.preset.map(str::to_owned).or(file_preset);
    let mut merged = match &preset_name {
        Some(name) => preset_table(name)?,
        None => Table::new(),
    };
    merge(&mut merged, file_table);
    for ov in src.overrides {
        merge(&mut merged, parse_override(ov)?);
    }
    merged.remove("preset");

    let raw: RawConfig = merged.try_into().map_err(|e: toml::de::Error| ConfigError::Parse {
        path: "merged configuration".into(),
        message: e.message().to_owned(),
    })?;
    let mut cfg = resolve(raw, preset_name.unwrap_or_else(|| "custom".into()))?;
    if let Some(dir) = src.output_dir {
        cfg.output_dir = dir.to_owned();
    }
    Ok(cfg)
}

/// Raw table of a built-in preset.
pub fn preset_table(name: &str) -> Result<Table> {
    let preset = presets::find(name)
        .ok_or_else(|| ConfigError::UnknownPreset(name.to_owned(), presets::names().join(", ")))?;
    preset
        .text
        .parse::<Table>()
        .map_err(|e| ConfigError::Parse { path: format!("preset {name}"), message: e.to_string() })
}

/// Loads a preset by name with no further changes.
pub fn load_preset(name: &str) -> Result<ExperimentConfig> {
    load(&Sources { preset: Some(name), ..Default::default() })
}

fn parse_override(ov: &str) -> Result<Table> {
    let (key, value) = ov.split_once('=').ok_or_else(|| ConfigError::Override(ov.to_owned()))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(ConfigError::Override(ov.to_owned()));
    }
    if let Ok(t) = format!("{key} = {}", value.trim()).parse::<Table>() {
        return Ok(t);
    }
    // Bare words are taken as strings.
    let mut value = Value::String(value.trim().to_owned());
    for part in key.rsplit('.') {
        let mut t = Table::new();
        t.insert(part.trim().to_owned(), value);
        value = Value::Table(t);
    }
    match value {
        Value::Table(t) => Ok(t),
        _ => unreachable!(),
    }
}

/// Recursive merge; a new `kind` replaces the whole initial-condition table.
fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) if !o.contains_key("kind") => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn invalid(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field, message: message.into() }
}

fn positive(field: &'static str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(invalid(field, format!("{v} must be positive")))
    }
}

fn resolve(raw: RawConfig, name: String) -> Result<ExperimentConfig> {
    let model = raw.model.unwrap_or_default();
    let n = raw.n.ok_or(ConfigError::Missing("n"))?;
    if n < 2 {
        return Err(invalid("n", "at least two basis functions are required"));
    }
    let lambda = positive("lambda", raw.lambda.ok_or(ConfigError::Missing("lambda"))?)?;
    let t_end = positive("t_end", raw.t_end.ok_or(ConfigError::Missing("t_end"))?)?;
    let initial_condition = raw.initial_condition.ok_or(ConfigError::Missing("initial_condition"))?;
    let speed = raw.speed.unwrap_or(1.0);

    let (flux, epsilon, rho, dt, gamma, delta) = match model {
        Model::Relaxation => {
            let flux = raw.flux.ok_or(ConfigError::Missing("flux"))?;
            let eps = positive("epsilon", raw.epsilon.ok_or(ConfigError::Missing("epsilon"))?)?;
            let rho = raw.rho.unwrap_or(eps);
            if !(rho.is_finite() && rho >= 0.0) {
                return Err(invalid("rho", format!("{rho} must be non-negative")));
            }
            let dt = positive("dt", raw.dt.unwrap_or(0.5 * eps))?;
            (Some(flux), Some(eps), Some(rho), dt, None, None)
        }
        Model::Riccati => {
            let gamma = raw.gamma.ok_or(ConfigError::Missing("gamma"))?;
            let delta = raw.delta.ok_or(ConfigError::Missing("delta"))?;
            let dt = positive("dt", raw.dt.ok_or(ConfigError::Missing("dt"))?)?;
            (None, None, None, dt, Some(gamma), Some(delta))
        }
    };

    if let Some(r) = raw.rank {
        if r == 0 || r > n {
            return Err(invalid("rank", format!("{r} must lie in 1..={n}")));
        }
    }
    let snapshot_stride = raw.snapshot_stride.unwrap_or(10);
    if snapshot_stride == 0 {
        return Err(invalid("snapshot_stride", "must be positive"));
    }
    let fv_cells = raw.fv_cells.unwrap_or(2 * n);
    if fv_cells < 2 {
        return Err(invalid("fv_cells", "at least two cells are required"));
    }
    let fv_order = raw.fv_order.unwrap_or(2);
    if !(1..=2).contains(&fv_order) {
        return Err(invalid("fv_order", format!("{fv_order} is not 1 or 2")));
    }
    let samples = raw.samples.unwrap_or(fv_cells);
    if samples < 2 {
        return Err(invalid("samples", "at least two samples are required"));
    }
    let times = raw.times.unwrap_or_else(|| vec![0.0, t_end]);
    if let Some(t) = times.iter().find(|t| !(0.0..=t_end).contains(*t)) {
        return Err(invalid("times", format!("{t} lies outside [0, {t_end}]")));
    }

    let cfg = ExperimentConfig {
        name,
        model,
        flux,
        speed,
        lambda,
        epsilon,
        rho,
        dt,
        scheme: raw.scheme.unwrap_or_default(),
        n,
        t_end,
        rank: raw.rank,
        basis: raw.basis.unwrap_or_default(),
        snapshot_stride,
        training: raw.training.unwrap_or_default(),
        fv_cells,
        fv_order,
        samples,
        times,
        gamma,
        delta,
        allow_subcharacteristic_violation: raw.allow_subcharacteristic_violation.unwrap_or(false),
        output_dir: raw.output_dir.unwrap_or_else(|| PathBuf::from("out")),
        initial_condition,
    };
    cfg.check()?;
    Ok(cfg)
}

impl ExperimentConfig {
    fn check(&self) -> Result<()> {
        if self.model == Model::Riccati {
            if self.initial_condition != InitialSpec::GaussBump {
                return Err(invalid("initial_condition", "the Riccati model uses the compact gauss_bump datum"));
            }
            return Ok(());
        }
        let sc = self.solver_config();
        sc.validate().map_err(|e| invalid("solver", e.to_string()))?;
        let eps = sc.epsilon;
        if sc.dt > 0.5 * eps {
            log::warn!("dt = {} exceeds epsilon/2 = {}; the explicit scheme is unstable there", sc.dt, 0.5 * eps);
        }
        let report = check_subcharacteristic(&self.initial(), &self.flux(), self.lambda);
        if !report.pass && !self.allow_subcharacteristic_violation {
            return Err(invalid(
                "lambda",
                format!("{} is below max |f'(u0)| = {:.6}", self.lambda, report.max_speed),
            ));
        }
        Ok(())
    }

    pub fn initial(&self) -> InitialCondition {
        self.initial_condition.build()
    }

    pub fn flux(&self) -> Flux {
        match self.flux {
            Some(FluxKind::Linear) => Flux::linear(self.speed),
            Some(FluxKind::Burgers) => Flux::burgers(),
            None => Flux::zero(),
        }
    }

    /// Solver settings of the relaxation model.
    pub fn solver_config(&self) -> SolverConfig {
        let eps = self.epsilon.unwrap_or(f64::NAN);
        let mut sc = SolverConfig::new(self.n, self.lambda, eps);
        sc.rho = self.rho.unwrap_or(eps);
        sc.dt = self.dt;
        sc.scheme = match self.scheme {
            SchemeKind::SemiImplicit => Scheme::SemiImplicit,
            SchemeKind::Explicit => Scheme::Explicit,
        };
        sc.snapshot_stride = self.snapshot_stride;
        sc.allow_subcharacteristic_violation = self.allow_subcharacteristic_violation;
        // A run is sequential end to end so outputs do not depend on the thread pool.
        sc.execution = shiftmor::par::Execution::Sequential;
        sc
    }

    pub fn fv_config(&self) -> FvConfig {
        let mut fv = FvConfig::new(self.lambda, self.epsilon.unwrap_or(f64::NAN), self.fv_cells);
        fv.order = if self.fv_order == 1 { FvOrder::First } else { FvOrder::Second };
        fv
    }

    pub fn riccati(&self) -> Option<RiccatiParams> {
        match (self.gamma, self.delta) {
            (Some(gamma), Some(delta)) => Some(RiccatiParams { gamma, delta, lambda: self.lambda, w0: self.initial() }),
            _ => None,
        }
    }

    pub fn require_rank(&self) -> Result<usize> {
        self.rank.ok_or(ConfigError::Missing("rank"))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("resolved config is representable as TOML")
    }
}
