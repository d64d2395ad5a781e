//! Run configuration as one JSON object with flat dotted keys.
//!
//! Top-level keys configure training (`learning_rate`, `schedule.max_rate`,
//! `loss.lambda`, ...), `positions.*` the walk embedding and `eval.*` the
//! downstream protocol. `positions.seed` follows `seed` unless set.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use hgmae_core::eval::EvalConfig;
use hgmae_core::mp2vec::WalkConfig;
use hgmae_core::trainer::TrainConfig;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Failure, InStage, Result};

const STAGE: &str = "config";

pub type FlatConfig = BTreeMap<String, Value>;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub positions: WalkConfig,
    pub eval: EvalConfig,
}

fn flatten_into(prefix: &str, value: Value, out: &mut FlatConfig) {
    match value {
        Value::Object(map) if !map.is_empty() || prefix.is_empty() => {
            for (k, v) in map {
                let key = if prefix.is_empty() { k } else { format!("{prefix}.{k}") };
                flatten_into(&key, v, out);
            }
        }
        leaf => {
            out.insert(prefix.to_string(), leaf);
        }
    }
}

pub fn flatten(value: Value) -> FlatConfig {
    let mut out = FlatConfig::new();
    flatten_into("", value, &mut out);
    out
}

fn unflatten(flat: &FlatConfig) -> Value {
    let mut root = Map::new();
    for (key, v) in flat {
        let mut node = &mut root;
        let mut parts = key.split('.').peekable();
        while let Some(part) = parts.next() {
            if parts.peek().is_none() {
                node.insert(part.to_string(), v.clone());
            } else {
                node = node
                    .entry(part.to_string())
                    .or_insert_with(|| Value::Object(Map::new()))
                    .as_object_mut()
                    .expect("prefix of a leaf key is an object");
            }
        }
    }
    Value::Object(root)
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("config types serialize to JSON")
}

impl RunConfig {
    pub fn to_flat(&self) -> FlatConfig {
        let mut v = to_value(&self.train);
        let obj = v.as_object_mut().expect("train config is an object");
        obj.insert("positions".into(), to_value(&self.positions));
        obj.insert("eval".into(), to_value(&self.eval));
        flatten(v)
    }

    fn from_flat(flat: &FlatConfig) -> Result<Self> {
        let Value::Object(mut root) = unflatten(flat) else {
            unreachable!()
        };
        let positions = root.remove("positions").unwrap_or_else(|| Value::Object(Map::new()));
        let eval = root.remove("eval").unwrap_or_else(|| Value::Object(Map::new()));
        fn part<T: DeserializeOwned>(v: Value) -> Result<T> {
            serde_json::from_value(v).map_err(|e| Failure::config(STAGE, e))
        }
        Ok(RunConfig {
            train: part(Value::Object(root))?,
            positions: part(positions)?,
            eval: part(eval)?,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate().in_stage(STAGE)?;
        self.positions.validate().in_stage(STAGE)?;
        self.eval.validate().in_stage(STAGE)
    }
}

fn kind(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(n) if n.is_u64() => "non-negative integer",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

/// Whether `given` can replace `default` without changing the field's type.
fn compatible(default: &Value, given: &Value) -> bool {
    match default {
        // Optional counts default to null.
        Value::Null => given.is_null() || given.is_u64(),
        Value::Bool(_) => given.is_boolean(),
        Value::Number(n) if n.is_u64() && !n.is_f64() => given.is_u64(),
        Value::Number(_) => given.is_number(),
        Value::String(_) => given.is_string(),
        Value::Array(_) => given.is_array(),
        Value::Object(_) => given.is_object(),
    }
}

fn expected(default: &Value) -> &'static str {
    match default {
        Value::Null => "non-negative integer or null",
        other => kind(other),
    }
}

/// Parses `key=value`; the value is read as JSON, falling back to a string.
pub fn parse_override(text: &str) -> Result<(String, Value)> {
    let (key, raw) = text
        .split_once('=')
        .ok_or_else(|| Failure::config(STAGE, format!("override '{text}' is not of the form key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok((key.trim().to_string(), value))
}

/// Layered configuration: defaults, then `layers` in order, then the seed.
/// Unknown keys and type mismatches are errors naming the key.
pub fn resolve(layers: &[FlatConfig], seed: Option<u64>) -> Result<RunConfig> {
    let defaults = RunConfig::default().to_flat();
    let mut flat = defaults.clone();
    let mut walk_seed_set = false;
    for layer in layers {
        for (key, value) in layer {
            let Some(default) = defaults.get(key) else {
                return Err(Failure::config(STAGE, format!("unknown config key '{key}'")));
            };
            if !compatible(default, value) {
                return Err(Failure::config(
                    STAGE,
                    format!(
                        "config key '{key}': expected {}, got {}",
                        expected(default),
                        kind(value)
                    ),
                ));
            }
            walk_seed_set |= key == "positions.seed";
            flat.insert(key.clone(), value.clone());
        }
    }
    if let Some(seed) = seed {
        flat.insert("seed".into(), Value::from(seed));
    }
    if !walk_seed_set {
        let seed = flat["seed"].clone();
        flat.insert("positions.seed".into(), seed);
    }
    let cfg = RunConfig::from_flat(&flat)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Reads a JSON object from `path`, flattening any nesting.
pub fn read_config_file(path: &Path) -> Result<FlatConfig> {
    let text = fs::read_to_string(path).map_err(|e| Failure::config(STAGE, format!("{}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| Failure::config(STAGE, format!("{} line {}: {e}", path.display(), e.line())))?;
    if !value.is_object() {
        return Err(Failure::config(
            STAGE,
            format!("{}: expected a JSON object", path.display()),
        ));
    }
    Ok(flatten(value))
}

pub fn overrides_layer(overrides: &[String]) -> Result<FlatConfig> {
    overrides.iter().map(|o| parse_override(o)).collect()
}

/// `HGMAE_SEED` as a seed, if set.
pub fn env_seed() -> Result<Option<u64>> {
    match std::env::var("HGMAE_SEED") {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Failure::config(STAGE, format!("HGMAE_SEED '{s}' is not a non-negative integer"))),
        Err(_) => Ok(None),
    }
}

/// Artifact file names inside a run directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Artifacts {
    pub positions: String,
    pub checkpoint: String,
    pub embeddings: String,
    pub losses: String,
    pub report: String,
}

impl Default for Artifacts {
    fn default() -> Self {
        Artifacts {
            positions: "positions.csv".into(),
            checkpoint: "checkpoint.json".into(),
            embeddings: "embeddings.csv".into(),
            losses: "losses.csv".into(),
            report: "report.json".into(),
        }
    }
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Everything needed to reproduce a run: fully resolved settings, the
/// dataset location and the artifact names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub dataset: String,
    pub seed: u64,
    pub config: FlatConfig,
    pub artifacts: Artifacts,
}

impl RunManifest {
    pub fn new(dataset: &Path, cfg: &RunConfig) -> Self {
        let dataset = fs::canonicalize(dataset).unwrap_or_else(|_| dataset.to_path_buf());
        RunManifest {
            dataset: dataset.display().to_string(),
            seed: cfg.train.seed,
            config: cfg.to_flat(),
            artifacts: Artifacts::default(),
        }
    }

    /// The run configuration, re-validated.
    pub fn run_config(&self) -> Result<RunConfig> {
        let cfg = resolve(std::slice::from_ref(&self.config), None)?;
        if cfg.train.seed != self.seed {
            return Err(Failure::config(
                STAGE,
                format!(
                    "manifest seed {} disagrees with config seed {}",
                    self.seed, cfg.train.seed
                ),
            ));
        }
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Failure::config(STAGE, format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Failure::config(STAGE, format!("{} line {}: {e}", path.display(), e.line())))
    }
}
