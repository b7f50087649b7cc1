//! Run configuration: preset defaults, then a flat dotted-key JSON file,
//! then command-line overrides.

use std::path::Path;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use zeroshot::dataset::SynthSpec;
use zeroshot::ect::EctConfig;
use zeroshot::model::TrainConfig;

use crate::UsageError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Feedback degree 0.01.
    ZslDefault,
    /// Feedback degree 0.005.
    Industrial,
}

impl Preset {
    fn train(self) -> TrainConfig {
        match self {
            Preset::ZslDefault => TrainConfig::default(),
            Preset::Industrial => TrainConfig::industrial(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub preset: Preset,
    pub train: TrainConfig,
    pub ect: EctConfig,
    pub synth: SynthSpec,
}

impl RunConfig {
    pub fn for_preset(preset: Preset) -> Self {
        RunConfig {
            preset,
            train: preset.train(),
            ect: EctConfig::default(),
            synth: SynthSpec::default(),
        }
    }

    /// Resolves the final configuration. `preset` on the command line wins
    /// over a `preset` key in the file; other file keys override the preset
    /// and `overrides` (dotted key, JSON value) override everything.
    pub fn resolve(file: Option<&Path>, preset: Option<Preset>, overrides: &[(String, Value)]) -> anyhow::Result<Self> {
        let entries = match file {
            Some(path) => read_flat(path)?,
            None => Map::new(),
        };
        let file_preset = match entries.get("preset") {
            Some(v) => Some(
                serde_json::from_value::<Preset>(v.clone())
                    .map_err(|e| UsageError(format!("config key 'preset': {e}")))?,
            ),
            None => None,
        };
        let preset = preset.or(file_preset).unwrap_or(Preset::ZslDefault);
        let mut tree = serde_json::to_value(RunConfig::for_preset(preset))?;
        for (key, value) in entries.iter().filter(|(k, _)| k.as_str() != "preset") {
            set_dotted(&mut tree, key, value.clone())?;
        }
        for (key, value) in overrides {
            set_dotted(&mut tree, key, value.clone())?;
        }
        let config: RunConfig =
            serde_json::from_value(tree).map_err(|e| UsageError(format!("invalid configuration: {e}")))?;
        config.train.validate().map_err(|e| UsageError(e.to_string()))?;
        config.ect.validate().map_err(|e| UsageError(e.to_string()))?;
        config.synth.validate().map_err(|e| UsageError(e.to_string()))?;
        Ok(config)
    }
}

fn read_flat(path: &Path) -> anyhow::Result<Map<String, Value>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| UsageError(format!("config {} is not valid JSON: {e}", path.display())))?;
    match value {
        Value::Object(map) => Ok(map),
        _ => bail!(UsageError(format!("config {} must be a JSON object", path.display()))),
    }
}

/// Sets `a.b.c` inside `tree`; every segment must already exist.
fn set_dotted(tree: &mut Value, key: &str, value: Value) -> anyhow::Result<()> {
    let mut node = tree;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| UsageError(format!("config key '{key}': '{}' is not a section", parts[..i].join("."))))?;
        let slot = obj
            .get_mut(*part)
            .ok_or_else(|| UsageError(format!("unknown config key '{key}'")))?;
        if i + 1 == parts.len() {
            if slot.is_object() {
                bail!(UsageError(format!("config key '{key}' names a section; set its fields instead")));
            }
            *slot = value;
            return Ok(());
        }
        node = slot;
    }
    unreachable!("split yields at least one segment")
}

/// `key=value` from `--set`; the value is parsed as JSON, falling back to a
/// plain string.
pub fn parse_assignment(s: &str) -> Result<(String, Value), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got '{s}'"))?;
    let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
    Ok((k.trim().to_string(), value))
}

pub fn digest(config: &RunConfig) -> anyhow::Result<String> {
    let text = serde_json::to_string(config).context("serializing configuration")?;
    Ok(crate::manifest::sha256_hex(text.as_bytes()))
}
