//! Grid over the leave-unchanged and random-replace fractions.

use hgmae_core::hetgraph::HeteroGraph;
use hgmae_core::trainer::{embed, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{InStage, Result};
use crate::pipeline::{classify, cluster, compute_positions, train, Log};

/// `0.0, 0.1, ..., 0.5`.
pub fn default_axis() -> Vec<f64> {
    (0..=5).map(|i| i as f64 / 10.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub p_u: f64,
    pub p_r: f64,
    pub epochs: usize,
    pub final_loss: f64,
    pub micro_f1: Option<f64>,
    pub nmi: Option<f64>,
}

/// Row `i` holds `p_u = p_u[i]`, column `j` holds `p_r = p_r[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub p_u: Vec<f64>,
    pub p_r: Vec<f64>,
    pub cells: Vec<Vec<SweepCell>>,
}

impl SweepGrid {
    pub fn shape(&self) -> (usize, usize) {
        (self.cells.len(), self.cells.first().map_or(0, Vec::len))
    }

    /// One CSV line per cell.
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut s = String::from("p_u,p_r,epochs,final_loss,micro_f1,nmi\n");
        for c in self.cells.iter().flatten() {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                c.p_u,
                c.p_r,
                c.epochs,
                c.final_loss,
                opt(c.micro_f1),
                opt(c.nmi)
            ));
        }
        s
    }
}

/// Trains once per grid point from shared positional features.
pub fn run_sweep(g: &HeteroGraph, cfg: &RunConfig, p_u: &[f64], p_r: &[f64], mut log: Log<'_>) -> Result<SweepGrid> {
    let positions = compute_positions(g, &cfg.positions)?;
    let mut cells = Vec::with_capacity(p_u.len());
    for &u in p_u {
        let mut row = Vec::with_capacity(p_r.len());
        for &r in p_r {
            let train_cfg = TrainConfig {
                p_u: u,
                p_r: r,
                ..cfg.train.clone()
            };
            train_cfg.validate().in_stage("sweep")?;
            let (data, fit) = train(g, positions.clone(), &train_cfg, None)?;
            let h = embed(&fit.params, &data.views, &data.attributes).in_stage("embed")?;
            let micro_f1 = classify(&h, g, &cfg.eval, train_cfg.seed)?.map(|c| c.micro_f1.mean);
            let nmi = cluster(&h, g, &cfg.eval, train_cfg.seed)?.map(|c| c.nmi.mean);
            let final_loss = fit.history.last().map_or(f64::NAN, |r| r.total);
            if let Some(f) = log.as_mut() {
                f(&format!("p_u {u:.1} p_r {r:.1}: micro-F1 {micro_f1:?} NMI {nmi:?}"));
            }
            row.push(SweepCell {
                p_u: u,
                p_r: r,
                epochs: fit.history.len(),
                final_loss,
                micro_f1,
                nmi,
            });
        }
        cells.push(row);
    }
    Ok(SweepGrid {
        p_u: p_u.to_vec(),
        p_r: p_r.to_vec(),
        cells,
    })
}
