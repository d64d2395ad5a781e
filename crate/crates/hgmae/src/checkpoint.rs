//! Versioned JSON checkpoints. Floats are written in shortest round-trip
//! form, so a save/load cycle is bit-exact.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use hgmae_core::encdec::{ModelDims, ModelParams};
use hgmae_core::rng::{stream_rng, Stream};
use hgmae_core::trainer::TrainConfig;
use hgmae_core::Matrix;
use serde::{Deserialize, Serialize};

use crate::artifacts::write_json;
use crate::error::{Failure, InStage, Result};

pub const FORMAT: &str = "hgmae-checkpoint";
pub const VERSION: u32 = 1;
const STAGE: &str = "checkpoint";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tensor {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub dims: ModelDims,
    /// Epoch whose parameters these are; `None` for untrained parameters.
    pub best_epoch: Option<usize>,
    pub config: TrainConfig,
    pub tensors: BTreeMap<String, Tensor>,
}

impl Checkpoint {
    pub fn new(params: &ModelParams, config: &TrainConfig, best_epoch: Option<usize>) -> Self {
        let tensors = params
            .entries()
            .into_iter()
            .map(|(name, m)| {
                let t = Tensor {
                    rows: m.rows(),
                    cols: m.cols(),
                    data: m.as_slice().to_vec(),
                };
                (name, t)
            })
            .collect();
        Checkpoint {
            format: FORMAT.into(),
            version: VERSION,
            dims: params.dims(),
            best_epoch,
            config: config.clone(),
            tensors,
        }
    }

    /// Rebuilds the parameters, checking every tensor name and shape.
    pub fn params(&self) -> Result<ModelParams> {
        if self.format != FORMAT {
            return Err(Failure::data(STAGE, format!("unexpected format '{}'", self.format)));
        }
        if self.version != VERSION {
            return Err(Failure::data(STAGE, format!("unsupported version {}", self.version)));
        }
        let mut params = ModelParams::init(&self.dims, &mut stream_rng(0, Stream::Init, 0)).in_stage(STAGE)?;
        let mut used = 0;
        for (name, slot) in params.entries_mut() {
            let t = self
                .tensors
                .get(&name)
                .ok_or_else(|| Failure::data(STAGE, format!("missing tensor '{name}'")))?;
            if (t.rows, t.cols) != slot.shape() {
                return Err(Failure::data(
                    STAGE,
                    format!(
                        "tensor '{name}' is {}x{}, expected {}x{}",
                        t.rows,
                        t.cols,
                        slot.rows(),
                        slot.cols()
                    ),
                ));
            }
            *slot = Matrix::from_vec(t.rows, t.cols, t.data.clone()).in_stage(STAGE)?;
            used += 1;
        }
        if used != self.tensors.len() {
            let known: Vec<String> = params.entries().into_iter().map(|(n, _)| n).collect();
            let extra = self
                .tensors
                .keys()
                .find(|k| !known.contains(k))
                .cloned()
                .unwrap_or_default();
            return Err(Failure::data(STAGE, format!("unexpected tensor '{extra}'")));
        }
        if !params.is_finite() {
            return Err(Failure::data(STAGE, "non-finite parameter"));
        }
        Ok(params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self, STAGE)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Failure::data(STAGE, format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Failure::data(STAGE, format!("{} line {}: {e}", path.display(), e.line())))
    }
}
