//! Experiment configuration: one JSON document plus `--set key=value`
//! overrides. Unknown keys are rejected at every level.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use sntk_core::{InitKind, StepPath};

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub model: ModelConfig,
    pub train: TrainSection,
    pub ntk: NtkConfig,
    pub bounds: BoundsConfig,
    pub output: OutputConfig,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    LinearTeacher,
    Orthonormal,
    Separated,
    Mnist,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub generator: Generator,
    pub paths: PathsConfig,
    pub params: DatasetParams,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self { generator: Generator::LinearTeacher, paths: PathsConfig::default(), params: DatasetParams::default() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    pub images: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetParams {
    pub d: usize,
    pub n: usize,
    pub min_sep: f64,
    pub max_tries: usize,
    /// MNIST: examples to keep.
    pub limit: usize,
    /// MNIST: digit mapped to `+1`.
    pub positive_class: u8,
}

impl Default for DatasetParams {
    fn default() -> Self {
        Self { d: 5, n: 32, min_sep: 0.5, max_tries: 10_000, limit: 1000, positive_class: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// Physical neuron count; must be even for the symmetric scheme.
    pub m: usize,
    #[serde(rename = "B")]
    pub bias: f64,
    pub init: InitKind,
    /// Start from this checkpoint instead of a fresh initialization.
    pub checkpoint: Option<PathBuf>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { m: 2048, bias: 0.0, init: InitKind::Symmetric, checkpoint: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub eta: f64,
    pub steps: usize,
    pub path: StepPath,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self { eta: 0.1, steps: 500, path: StepPath::Dense }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NtkMethod {
    Quadrature,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NtkConfig {
    pub method: NtkMethod,
    pub mc_samples: usize,
}

impl Default for NtkConfig {
    fn default() -> Self {
        Self { method: NtkMethod::Quadrature, mc_samples: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundsConfig {
    pub delta: f64,
    pub constants: BoundConstants,
    /// Sampled vectors for the restricted eigenvalue estimate.
    pub region_samples: usize,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        Self { delta: 0.05, constants: BoundConstants::default(), region_samples: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundConstants {
    pub flip: f64,
    pub initial_error: f64,
    /// Relative tolerance on `max_k ||e(k)|| / ||y||`.
    pub error_dynamics: f64,
    /// Allowed relative drift of the activation fraction.
    pub activation_drift: f64,
}

impl Default for BoundConstants {
    fn default() -> Self {
        Self { flip: 1.32, initial_error: 8.0, error_dynamics: 0.1, activation_drift: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("sntk-out"), formats: vec![Format::Csv, Format::Json] }
    }
}

impl OutputConfig {
    pub fn wants(&self, format: Format) -> bool {
        self.formats.contains(&format)
    }
}

impl ExperimentConfig {
    /// Reads `path` (or starts from defaults) and applies `overrides` in order.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut doc = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Io(format!("reading config {}: {e}", p.display())))?;
                serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => Value::Object(Map::new()),
        };
        for item in overrides {
            apply_override(&mut doc, item)?;
        }
        let cfg: Self = serde_json::from_value(doc).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        let p = &self.dataset.params;
        if p.d == 0 || p.n == 0 {
            return bad("dataset.params.d and dataset.params.n must be positive".into());
        }
        if self.model.m == 0 {
            return bad("model.m must be positive".into());
        }
        if self.model.init == InitKind::Symmetric && self.model.m % 2 == 1 {
            return bad(format!("model.m = {} must be even for symmetric init", self.model.m));
        }
        if !(self.model.bias >= 0.0) || !self.model.bias.is_finite() {
            return bad(format!("model.B must be finite and nonnegative, got {}", self.model.bias));
        }
        if !(self.train.eta >= 0.0) || !self.train.eta.is_finite() {
            return bad(format!("train.eta must be finite and nonnegative, got {}", self.train.eta));
        }
        if self.ntk.method == NtkMethod::MonteCarlo && self.ntk.mc_samples == 0 {
            return bad("ntk.mc_samples must be positive for the monte_carlo method".into());
        }
        if !(self.bounds.delta > 0.0 && self.bounds.delta < 1.0) {
            return bad(format!("bounds.delta must lie in (0, 1), got {}", self.bounds.delta));
        }
        if self.bounds.region_samples == 0 {
            return bad("bounds.region_samples must be positive".into());
        }
        if self.dataset.generator == Generator::Separated && !(self.dataset.params.min_sep > 0.0) {
            return bad("dataset.params.min_sep must be positive".into());
        }
        Ok(())
    }

    /// Neurons per half for the symmetric scheme, all of them otherwise.
    pub fn init_width(&self) -> usize {
        match self.model.init {
            InitKind::Symmetric => self.model.m / 2,
            InitKind::Standard => self.model.m,
        }
    }
}

/// `a.b.c=value`; the value is read as a JSON literal and falls back to a
/// plain string.
fn apply_override(doc: &mut Value, item: &str) -> Result<(), CliError> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{item}` is not of the form key=value")))?;
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(CliError::Config(format!("override `{item}` has an empty key segment")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_owned()));
    let mut node = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (k, part) in parts.iter().enumerate() {
        let map = match node {
            Value::Object(map) => map,
            _ => return Err(CliError::Config(format!("override `{key}`: `{}` is not an object", parts[..k].join(".")))),
        };
        if k + 1 == parts.len() {
            map.insert((*part).to_owned(), value);
            return Ok(());
        }
        node = map.entry((*part).to_owned()).or_insert_with(|| Value::Object(Map::new()));
    }
    unreachable!("key has at least one segment")
}
