//! Experiment configuration files.
//!
//! A config is a JSON object; unknown fields are rejected and every error
//! names the offending field as a dotted path. Relative file paths are
//! resolved against the directory holding the config. A `manifest.json`
//! written by a previous run is accepted in place of a config.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use hts_sr_core::neuralnet::Activation;
use hts_sr_core::synthgen::Preset;
use hts_sr_core::trainer::default_lambda_grid;
use hts_sr_core::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Hierarchy JSON; defaults to the thirteen-node benchmark tree.
    #[serde(default)]
    pub hierarchy: Option<PathBuf>,
    pub data: DataSource,
    #[serde(default = "default_true")]
    pub standardize: bool,
    #[serde(default = "MethodName::all")]
    pub methods: Vec<MethodName>,
    #[serde(default)]
    pub baselines: BaselineConfig,
    #[serde(default)]
    pub lambda: LambdaConfig,
    #[serde(default)]
    pub train: TrainSection,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub epoch_trace: bool,
    #[serde(default = "default_true")]
    pub checkpoints: bool,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Preset { name: String, seed: u64 },
    Csv { path: PathBuf, train_len: Option<usize> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MethodName {
    #[serde(rename = "MA")]
    MovingAverage,
    #[serde(rename = "ES")]
    ExponentialSmoothing,
    #[serde(rename = "NN+BU")]
    NnBottomUp,
    #[serde(rename = "NN+MinT")]
    NnMint,
    #[serde(rename = "NN+SR")]
    NnStructured,
}

impl MethodName {
    pub const ALL: [MethodName; 5] = [
        MethodName::MovingAverage,
        MethodName::ExponentialSmoothing,
        MethodName::NnBottomUp,
        MethodName::NnMint,
        MethodName::NnStructured,
    ];

    fn all() -> Vec<Self> {
        Self::ALL.to_vec()
    }

    pub fn label(self) -> &'static str {
        match self {
            MethodName::MovingAverage => "MA",
            MethodName::ExponentialSmoothing => "ES",
            MethodName::NnBottomUp => "NN+BU",
            MethodName::NnMint => "NN+MinT",
            MethodName::NnStructured => "NN+SR",
        }
    }

    pub fn is_network(self) -> bool {
        !matches!(self, MethodName::MovingAverage | MethodName::ExponentialSmoothing)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineConfig {
    #[serde(default = "default_ma_grid")]
    pub ma_grid: Vec<usize>,
    #[serde(default = "default_es_grid")]
    pub es_grid: Vec<f64>,
}

fn default_ma_grid() -> Vec<usize> {
    (1..=24).collect()
}

fn default_es_grid() -> Vec<f64> {
    (0..=100).map(|k| k as f64 / 100.0).collect()
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            ma_grid: default_ma_grid(),
            es_grid: default_es_grid(),
        }
    }
}

/// Regularization weights for NN+SR: either given or chosen by hold-out
/// validation on the training period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum LambdaConfig {
    Fixed {
        lambda1: f64,
        lambda_m: f64,
    },
    Tune {
        #[serde(default = "default_lambda_grid")]
        grid1: Vec<f64>,
        #[serde(default = "default_lambda_grid")]
        grid_m: Vec<f64>,
        /// Network seed used for every validation fit.
        #[serde(default)]
        seed: u64,
    },
}

impl Default for LambdaConfig {
    fn default() -> Self {
        LambdaConfig::Tune {
            grid1: default_lambda_grid(),
            grid_m: default_lambda_grid(),
            seed: 0,
        }
    }
}

/// Missing fields take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub eta: f64,
    pub eps: f64,
    pub max_epochs: usize,
    pub activation: String,
    pub lag: usize,
    pub hidden: Option<usize>,
    pub bias: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        Self {
            eta: d.eta,
            eps: d.eps,
            max_epochs: d.max_epochs,
            activation: d.activation.name().into(),
            lag: d.lag,
            hidden: d.hidden,
            bias: d.bias,
        }
    }
}

impl TrainSection {
    /// Training settings with the seed left at zero.
    pub fn to_config(&self) -> Result<TrainConfig> {
        let activation: Activation = io::parse_activation(&self.activation)
            .ok_or_else(|| Error::config("train.activation", format!("unknown activation `{}`", self.activation)))?;
        let cfg = TrainConfig {
            eta: self.eta,
            eps: self.eps,
            max_epochs: self.max_epochs,
            activation,
            lag: self.lag,
            seed: 0,
            hidden: self.hidden,
            bias: self.bias,
        };
        cfg.validate().map_err(|e| Error::config("train", e.to_string()))?;
        if self.hidden == Some(0) {
            return Err(Error::config("train.hidden", "must be positive"));
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepMode {
    /// `(x, 0)`: root weight only.
    #[serde(rename = "x0")]
    Root,
    /// `(0, x)`: mid-level weights only.
    #[serde(rename = "0x")]
    Mid,
    /// `(x, x)`
    #[serde(rename = "xx")]
    Both,
}

impl SweepMode {
    pub const ALL: [SweepMode; 3] = [SweepMode::Root, SweepMode::Mid, SweepMode::Both];

    pub fn label(self) -> &'static str {
        match self {
            SweepMode::Root => "(x,0)",
            SweepMode::Mid => "(0,x)",
            SweepMode::Both => "(x,x)",
        }
    }

    pub fn weights(self, x: f64) -> (f64, f64) {
        match self {
            SweepMode::Root => (x, 0.0),
            SweepMode::Mid => (0.0, x),
            SweepMode::Both => (x, x),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "default_modes")]
    pub modes: Vec<SweepMode>,
    #[serde(default = "default_lambda_grid")]
    pub grid: Vec<f64>,
}

fn default_modes() -> Vec<SweepMode> {
    SweepMode::ALL.to_vec()
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            modes: default_modes(),
            grid: default_lambda_grid(),
        }
    }
}

/// Parses a config (or a previous run's manifest) from JSON text.
/// Relative paths are resolved against `base_dir`.
pub fn parse_config(text: &str, base_dir: &Path) -> Result<ExperimentConfig> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::config("(root)", e.to_string()))?;
    let (value, prefix) = match value.get("config") {
        Some(inner) if value.get("tool").is_some() => (inner.clone(), "config."),
        _ => (value, ""),
    };
    let mut cfg: ExperimentConfig = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let field = if path == "." { "(root)".to_string() } else { format!("{prefix}{path}") };
        Error::config(field, e.into_inner().to_string())
    })?;
    cfg.resolve_paths(base_dir);
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = io::read_to_string(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config(&text, base)
}

fn check_weights(field: &str, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::config(field, "grid is empty"));
    }
    if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::config(field, format!("weight {v} must be finite and >= 0")));
    }
    Ok(())
}

impl ExperimentConfig {
    fn resolve_paths(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(h) = self.hierarchy.as_mut() {
            join(h);
        }
        if let DataSource::Csv { path, .. } = &mut self.data {
            join(path);
        }
        if let Some(out) = self.output_dir.as_mut() {
            join(out);
        }
    }

    /// Checks everything that can be checked before any computation.
    pub fn validate(&self) -> Result<()> {
        if let Some(h) = &self.hierarchy {
            if !h.is_file() {
                return Err(Error::config("hierarchy", format!("{} does not exist", h.display())));
            }
        }
        match &self.data {
            DataSource::Preset { name, .. } => {
                if Preset::from_name(name).is_none() {
                    return Err(Error::config(
                        "data.preset.name",
                        format!("unknown preset `{name}` (expected NgtvC, WeakC or PstvC)"),
                    ));
                }
            }
            DataSource::Csv { path, .. } => {
                if !path.is_file() {
                    return Err(Error::config("data.csv.path", format!("{} does not exist", path.display())));
                }
            }
        }
        if self.methods.is_empty() {
            return Err(Error::config("methods", "no methods selected"));
        }
        let distinct: BTreeSet<_> = self.methods.iter().collect();
        if distinct.len() != self.methods.len() {
            return Err(Error::config("methods", "a method is listed twice"));
        }
        if self.baselines.ma_grid.is_empty() || self.baselines.ma_grid.contains(&0) {
            return Err(Error::config("baselines.ma_grid", "windows must be >= 1 and the grid non-empty"));
        }
        if self.baselines.es_grid.is_empty() || self.baselines.es_grid.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::config("baselines.es_grid", "alphas must lie in [0, 1] and the grid be non-empty"));
        }
        match &self.lambda {
            LambdaConfig::Fixed { lambda1, lambda_m } => {
                check_weights("lambda.fixed.lambda1", &[*lambda1])?;
                check_weights("lambda.fixed.lambda_m", &[*lambda_m])?;
            }
            LambdaConfig::Tune { grid1, grid_m, .. } => {
                check_weights("lambda.tune.grid1", grid1)?;
                check_weights("lambda.tune.grid_m", grid_m)?;
            }
        }
        self.train.to_config()?;
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "at least one seed is required"));
        }
        let distinct: BTreeSet<_> = self.seeds.iter().collect();
        if distinct.len() != self.seeds.len() {
            return Err(Error::config("seeds", "seeds must be distinct"));
        }
        if self.sweep.modes.is_empty() {
            return Err(Error::config("sweep.modes", "no sweep modes selected"));
        }
        check_weights("sweep.grid", &self.sweep.grid)?;
        if !self.sweep.grid.contains(&0.0) {
            return Err(Error::config("sweep.grid", "grid must contain 0"));
        }
        Ok(())
    }
}
