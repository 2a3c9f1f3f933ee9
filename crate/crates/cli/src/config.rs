//! Run configuration: a versioned TOML file, then `--set key=value` overrides, then named flags.
//!
//! ```toml
//! schema_version = 1
//! seed = 7
//! output_dir = "runs"
//! precision = "f64"          # or "f32"
//! workers = 0                # 0 = one per logical core
//!
//! [dataset]
//! path = "data/wifi_localization.txt"   # default: <cache_dir>/wifi_localization.txt
//! url = "https://archive.ics.uci.edu/ml/machine-learning-databases/00422/wifi_localization.txt"
//! sha256 = ""                # pin a digest; empty = record on first fetch
//! cache_dir = "data"         # RSS_AUGMENT_CACHE overrides
//!
//! [classifier]
//! hidden = [64, 64, 32, 32, 16]
//! hidden_activation = { kind = "relu" }
//! epochs = 3
//! batch_size = 32
//! adam = { learning_rate = 0.001, beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8 }
//!
//! [gan]
//! latent_dim = 16
//! generator_hidden = [32, 32]
//! discriminator_hidden = [32, 16]
//! leaky_alpha = 0.2
//! disc_steps = 1
//! iterations = 3000
//! batch_size = 32
//! loss_variant = "saturating"    # or "non_saturating"
//!
//! [experiment]
//! repetitions = 20
//! interpretation = "totals"      # or "per_class"
//! table_fractions = [0.1, 1.0]
//! synthetic_counts = [0, 250, 500, 750, 1000]
//! sweep_step_percent = 5
//! real_fraction = 1.0            # single-run commands
//! ```

use std::path::{Path, PathBuf};

use rss_augment::classifier::ClassifierConfig;
use rss_augment::data::{DATASET_FILE_NAME, DEFAULT_DATASET_URL};
use rss_augment::experiments::{
    Interpretation, DEFAULT_REPETITIONS, TABLE_COUNTS, TABLE_FRACTIONS,
};
use rss_augment::gan::GanConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;
pub const CACHE_ENV: &str = "RSS_AUGMENT_CACHE";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    F32,
    F64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub path: Option<PathBuf>,
    pub url: String,
    pub sha256: Option<String>,
    pub cache_dir: PathBuf,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            path: None,
            url: DEFAULT_DATASET_URL.into(),
            sha256: None,
            cache_dir: PathBuf::from("data"),
        }
    }
}

impl DatasetConfig {
    /// Cache directory, honouring the environment override.
    pub fn cache_dir(&self) -> PathBuf {
        std::env::var_os(CACHE_ENV)
            .filter(|v| !v.is_empty())
            .map(PathBuf::from)
            .unwrap_or_else(|| self.cache_dir.clone())
    }

    pub fn resolved_path(&self) -> PathBuf {
        self.path
            .clone()
            .unwrap_or_else(|| self.cache_dir().join(DATASET_FILE_NAME))
    }

    pub fn pinned_sha256(&self) -> Option<&str> {
        self.sha256
            .as_deref()
            .map(str::trim)
            .filter(|s| !s.is_empty())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub repetitions: usize,
    pub interpretation: Interpretation,
    pub table_fractions: Vec<f64>,
    pub synthetic_counts: Vec<usize>,
    pub sweep_step_percent: u32,
    /// Real fraction used by the single-run commands (train-gan, train-classifier).
    pub real_fraction: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            repetitions: DEFAULT_REPETITIONS,
            interpretation: Interpretation::Totals,
            table_fractions: TABLE_FRACTIONS.to_vec(),
            synthetic_counts: TABLE_COUNTS.to_vec(),
            sweep_step_percent: 5,
            real_fraction: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub seed: Option<u64>,
    pub output_dir: PathBuf,
    pub precision: Precision,
    pub workers: usize,
    pub dataset: DatasetConfig,
    pub classifier: ClassifierConfig,
    pub gan: GanConfig,
    pub experiment: ExperimentConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed: None,
            output_dir: PathBuf::from("runs"),
            precision: Precision::F64,
            workers: 0,
            dataset: DatasetConfig::default(),
            classifier: ClassifierConfig::default(),
            gan: GanConfig::default(),
            experiment: ExperimentConfig::default(),
        }
    }
}

/// Parses `value` as a TOML value, falling back to a bare string.
fn parse_value(value: &str) -> toml::Value {
    format!("v = {value}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()))
}

/// Sets dotted `key` in `table`, creating intermediate tables.
pub fn set_path(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), CliError> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::usage(format!("malformed config key {key:?}")));
    }
    let mut cur = table;
    for part in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::usage(format!("config key {key:?}: {part} is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

pub struct ConfigBuilder {
    table: toml::Table,
}

impl ConfigBuilder {
    pub fn from_file(path: Option<&Path>) -> Result<Self, CliError> {
        let table = match path {
            None => toml::Table::new(),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| {
                    CliError::usage(format!("cannot read config {}: {e}", p.display()))
                })?;
                text.parse::<toml::Table>()
                    .map_err(|e| CliError::usage(format!("{}: {e}", p.display())))?
            }
        };
        Ok(Self { table })
    }

    /// `key=value` with a dotted key; the value is read as TOML (strings may be bare).
    pub fn set_assignment(&mut self, assignment: &str) -> Result<(), CliError> {
        let (key, value) = assignment.split_once('=').ok_or_else(|| {
            CliError::usage(format!("--set expects key=value, got {assignment:?}"))
        })?;
        set_path(&mut self.table, key.trim(), parse_value(value.trim()))
    }

    pub fn set(&mut self, key: &str, value: impl Into<toml::Value>) -> Result<(), CliError> {
        set_path(&mut self.table, key, value.into())
    }

    pub fn build(self) -> Result<RunConfig, CliError> {
        let cfg: RunConfig = toml::Value::Table(self.table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::usage(format!("invalid configuration: {e}")))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(CliError::usage(format!(
                "config schema_version {} is not supported (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        cfg.classifier.validate()?;
        cfg.gan.validate()?;
        let f = cfg.experiment.real_fraction;
        if !(f > 0.0 && f <= 1.0) {
            return Err(CliError::usage(format!("real_fraction {f} outside (0, 1]")));
        }
        Ok(cfg)
    }
}
