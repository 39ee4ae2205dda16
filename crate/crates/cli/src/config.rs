//! Flag / config-file / default resolution.
//!
//! Every subcommand has a flag struct whose fields are all optional and a
//! resolved config struct with the same field names and a `Default`. The
//! three layers are merged as flat JSON objects, flags over file over
//! defaults, and the merged object is deserialized into the resolved config.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use waka::{DataFormat, Dataset, DistanceMetric, SyntheticKind};

use crate::CliError;

pub fn resolve<C>(flags: &impl Serialize, file: Option<&Path>) -> Result<C, CliError>
where
    C: Serialize + DeserializeOwned + Default,
{
    let mut merged = as_object(serde_json::to_value(C::default())?)?;
    if let Some(path) = file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Runtime(format!("cannot read config {}: {e}", path.display())))?;
        let parsed: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("config {} is not valid JSON: {e}", path.display())))?;
        let Value::Object(entries) = parsed else {
            return Err(CliError::Usage(format!(
                "config {} must be a flat JSON object",
                path.display()
            )));
        };
        for (key, value) in entries {
            let key = key.replace('-', "_");
            if !merged.contains_key(&key) {
                return Err(CliError::Usage(format!("unknown config key `{key}`")));
            }
            merged.insert(key, value);
        }
    }
    for (key, value) in as_object(serde_json::to_value(flags)?)? {
        if !value.is_null() {
            merged.insert(key, value);
        }
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| CliError::Usage(format!("invalid configuration: {e}")))
}

fn as_object(v: Value) -> Result<Map<String, Value>, CliError> {
    match v {
        Value::Object(m) => Ok(m),
        other => Err(CliError::Runtime(format!("expected an object, got {other}"))),
    }
}

/// Where the points come from: a file, or a seeded generator.
#[derive(Args, Debug, Default, Serialize)]
pub struct DataFlags {
    /// Dataset file: CSV rows `label,f0,f1,...` or the raw binary format.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// `csv` or `raw-binary`; guessed from the extension when omitted.
    #[arg(long)]
    pub format: Option<String>,
    /// Generate the data instead: `two-moons` or `gaussian-blobs`.
    #[arg(long)]
    pub synthetic: Option<String>,
    /// Number of generated points.
    #[arg(long)]
    pub n: Option<usize>,
    /// Share of generated points in class 1.
    #[arg(long)]
    pub minority_fraction: Option<f64>,
    /// Generator noise level.
    #[arg(long)]
    pub noise: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct DataConfig {
    pub dataset: Option<PathBuf>,
    pub format: Option<String>,
    pub synthetic: Option<String>,
    pub n: usize,
    pub minority_fraction: f64,
    pub noise: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            dataset: None,
            format: None,
            synthetic: None,
            n: 2000,
            minority_fraction: 0.5,
            noise: 0.3,
        }
    }
}

impl DataConfig {
    /// Loads the file or generates the synthetic set with `seed`.
    pub fn load(&self, seed: u64) -> Result<Dataset, CliError> {
        match (&self.dataset, &self.synthetic) {
            (Some(path), None) => Ok(load_file(path, self.format.as_deref())?),
            (None, Some(kind)) => {
                let kind: SyntheticKind = kind.parse()?;
                Ok(waka::generate_synthetic(kind, self.n, self.minority_fraction, self.noise, seed)?)
            }
            (Some(_), Some(_)) => Err(CliError::Usage("give either --dataset or --synthetic, not both".into())),
            (None, None) => Err(CliError::Usage("one of --dataset or --synthetic is required".into())),
        }
    }
}

pub fn load_file(path: &Path, format: Option<&str>) -> Result<Dataset, CliError> {
    let format = match format {
        Some(f) => f.parse()?,
        None => DataFormat::from_path(path),
    };
    Ok(Dataset::load(path, format)?)
}

pub fn parse_metric(s: &str) -> Result<DistanceMetric, CliError> {
    Ok(s.parse()?)
}

/// Game seeds: the explicit list if given, else `games` seeds derived from
/// `seed`. Returns the resolved game count and seed list.
pub fn game_seeds(games: Option<usize>, seed: u64, seed_list: &Option<Vec<u64>>) -> Result<(usize, Vec<u64>), CliError> {
    match (games, seed_list) {
        (Some(g), Some(list)) if g != list.len() => Err(CliError::Usage(format!(
            "--games {g} disagrees with a seed list of {} entries",
            list.len()
        ))),
        (_, Some(list)) => Ok((list.len(), list.clone())),
        (g, None) => {
            let g = g.unwrap_or(waka::mia::GameConfig::DEFAULT_GAMES);
            Ok((g, waka::mia::derive_seeds(seed, g)))
        }
    }
}
