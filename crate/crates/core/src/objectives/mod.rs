//! Masked edge reconstruction, target attribute restoration and positional
//! feature prediction losses, and their weighted sum.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::encdec::{
    decode_attributes, decode_edges, encode, linear, node_attention_layer, predict_positions, semantic_attention,
    ModelParams,
};
use crate::hetgraph::MetapathView;
use crate::masking::{apply_attribute_mask, remask_latent, AttributeMaskPlan, EdgeMask};
use crate::{Error, Matrix, Result};

/// `λ, μ, η` and the three SCE exponents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub lambda: f64,
    pub mu: f64,
    pub eta: f64,
    pub gamma_mer: f64,
    pub gamma_tar: f64,
    pub gamma_pfp: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda: 1.0,
            mu: 1.0,
            eta: 1.0,
            gamma_mer: 2.0,
            gamma_tar: 2.0,
            gamma_pfp: 2.0,
        }
    }
}

impl LossWeights {
    pub fn new(lambda: f64, mu: f64, eta: f64) -> Self {
        LossWeights {
            lambda,
            mu,
            eta,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, w) in [("lambda", self.lambda), ("mu", self.mu), ("eta", self.eta)] {
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::Parameter(format!("loss weight {name} must be >= 0, got {w}")));
            }
        }
        if self.lambda == 0.0 && self.mu == 0.0 && self.eta == 0.0 {
            return Err(Error::Config("at least one of lambda, mu, eta must be > 0".into()));
        }
        for (name, g) in [
            ("gamma_mer", self.gamma_mer),
            ("gamma_tar", self.gamma_tar),
            ("gamma_pfp", self.gamma_pfp),
        ] {
            if !(g >= 1.0) || !g.is_finite() {
                return Err(Error::Parameter(format!("{name} must be >= 1, got {g}")));
            }
        }
        Ok(())
    }
}

/// What the attribute reconstruction is compared against on masked rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TarTarget {
    /// The unmasked attribute rows.
    #[default]
    Original,
    /// The corrupted input rows (token, donor or unchanged).
    Literal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetapathLoss {
    pub metapath: String,
    pub loss: f64,
    pub alpha: f64,
}

/// Scalar values of one loss evaluation. Components whose weight is zero
/// are not evaluated and read 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub mer: f64,
    pub tar: f64,
    pub pfp: f64,
    pub total: f64,
    pub per_metapath: Vec<MetapathLoss>,
    /// Attribute mask rate used for this evaluation.
    pub p_a: f64,
    /// Compared rows dropped for zero norm, summed over components.
    pub excluded_rows: usize,
}

pub struct MerOutput {
    pub loss: Var,
    /// `1 × |Φ|` per-metapath losses.
    pub per_metapath: Var,
    /// `1 × |Φ|` loss-fusion weights.
    pub alphas: Var,
    pub excluded_rows: usize,
}

/// Edge reconstruction for every metapath: encode `X` under the masked
/// adjacency, decode, and compare with the unmasked adjacency over all rows.
pub fn mer_loss(
    tape: &mut Tape,
    params: &ModelParams<Var>,
    views: &[MetapathView],
    masks: &[EdgeMask],
    x: Var,
    gamma: f64,
) -> Result<MerOutput> {
    if views.is_empty() {
        return Err(Error::Config("edge reconstruction needs at least one metapath".into()));
    }
    if views.len() != masks.len() {
        return Err(Error::Config(format!(
            "{} metapath views but {} edge masks",
            views.len(),
            masks.len()
        )));
    }
    let n = tape.shape(x).0;
    // Singleton encodes share the projection of X.
    let projected = linear(tape, &params.type_projection, x)?;
    let all_rows: Vec<usize> = (0..n).collect();
    let mut h1s = Vec::with_capacity(views.len());
    let mut losses = Vec::with_capacity(views.len());
    let mut excluded_rows = 0;
    for (view, mask) in views.iter().zip(masks) {
        if view.adjacency.shape() != (n, n) || mask.masked.shape() != (n, n) {
            return Err(Error::shape("mer_loss", (n, n), mask.masked.shape()));
        }
        let h1 = node_attention_layer(tape, &params.encoder, projected, &mask.masked)?;
        let (_, rebuilt) = decode_edges(tape, params, &mask.masked, h1)?;
        let target = tape.constant(view.adjacency.to_matrix());
        let sce = tape.sce_rows(target, rebuilt, gamma, &all_rows)?;
        excluded_rows += sce.excluded;
        h1s.push(h1);
        losses.push(sce.loss);
    }
    let (alphas, _) = semantic_attention(tape, &params.loss_fusion, &h1s)?;
    let per_metapath = tape.concat_cols(&losses)?;
    let weighted = tape.mul(per_metapath, alphas)?;
    let loss = tape.sum(weighted);
    Ok(MerOutput {
        loss,
        per_metapath,
        alphas,
        excluded_rows,
    })
}

pub struct TarOutput {
    /// `None` when the attribute decoder was not run.
    pub loss: Option<Var>,
    /// Fused encoding of the corrupted attributes under all unmasked views.
    pub h3: Var,
    pub excluded_rows: usize,
}

/// Attribute restoration on the masked rows. With `decode == false` only
/// `H₃` is produced (for positional prediction alone).
#[allow(clippy::too_many_arguments)]
pub fn tar_loss(
    tape: &mut Tape,
    params: &ModelParams<Var>,
    views: &[MetapathView],
    x: &Matrix,
    plan: &AttributeMaskPlan,
    gamma: f64,
    target: TarTarget,
    decode: bool,
) -> Result<TarOutput> {
    let adjacencies: Vec<_> = views.iter().map(|v| &v.adjacency).collect();
    let x_tilde = apply_attribute_mask(tape, x, plan, params.mask_token)?;
    let h3 = encode(tape, params, &adjacencies, x_tilde)?.fused;
    if !decode {
        return Ok(TarOutput {
            loss: None,
            h3,
            excluded_rows: 0,
        });
    }
    if plan.masked.is_empty() {
        return Err(Error::Degenerate("attribute mask selected no rows".into()));
    }
    let h3_masked = remask_latent(tape, h3, &plan.masked, params.dm_token)?;
    let z = decode_attributes(tape, params, &adjacencies, h3_masked)?;
    let reference = match target {
        TarTarget::Original => tape.constant(x.clone()),
        TarTarget::Literal => x_tilde,
    };
    let sce = tape.sce_rows(reference, z, gamma, &plan.masked)?;
    Ok(TarOutput {
        loss: Some(sce.loss),
        h3,
        excluded_rows: sce.excluded,
    })
}

pub struct PfpOutput {
    pub loss: Var,
    pub excluded_rows: usize,
}

/// Positional feature prediction from `H₃` against the fixed `P`, all rows.
pub fn pfp_loss(
    tape: &mut Tape,
    params: &ModelParams<Var>,
    h3: Var,
    positions: &Matrix,
    gamma: f64,
) -> Result<PfpOutput> {
    let predicted = predict_positions(tape, params, h3)?;
    if tape.shape(predicted) != positions.shape() {
        return Err(Error::shape("pfp_loss", positions.shape(), tape.shape(predicted)));
    }
    let target = tape.constant(positions.clone());
    let rows: Vec<usize> = (0..positions.rows()).collect();
    let sce = tape.sce_rows(target, predicted, gamma, &rows)?;
    Ok(PfpOutput {
        loss: sce.loss,
        excluded_rows: sce.excluded,
    })
}

/// `λ·L_MER + μ·L_TAR + η·L_PFP`; absent components count as zero.
pub fn total_loss(
    tape: &mut Tape,
    mer: Option<Var>,
    tar: Option<Var>,
    pfp: Option<Var>,
    w: &LossWeights,
) -> Result<Var> {
    w.validate()?;
    let mut total: Option<Var> = None;
    for (part, weight) in [(mer, w.lambda), (tar, w.mu), (pfp, w.eta)] {
        let Some(part) = part else { continue };
        let term = tape.scale(part, weight);
        total = Some(match total {
            None => term,
            Some(acc) => tape.add(acc, term)?,
        });
    }
    total.ok_or_else(|| Error::Config("no loss component was evaluated".into()))
}

/// Everything one loss evaluation needs besides the parameters.
pub struct LossInputs<'a> {
    pub views: &'a [MetapathView],
    pub edge_masks: &'a [EdgeMask],
    pub attributes: &'a Matrix,
    pub plan: &'a AttributeMaskPlan,
    pub positions: &'a Matrix,
    pub weights: LossWeights,
    pub tar_target: TarTarget,
}

/// Evaluates every component with a non-zero weight on one tape and returns
/// the total loss variable with its report.
pub fn compute_losses(
    tape: &mut Tape,
    params: &ModelParams<Var>,
    inputs: &LossInputs<'_>,
) -> Result<(Var, LossReport)> {
    let w = &inputs.weights;
    w.validate()?;
    let mut excluded_rows = 0;

    let mer = if w.lambda > 0.0 {
        let x = tape.constant(inputs.attributes.clone());
        let out = mer_loss(tape, params, inputs.views, inputs.edge_masks, x, w.gamma_mer)?;
        excluded_rows += out.excluded_rows;
        Some(out)
    } else {
        None
    };

    let (tar, pfp) = if w.mu > 0.0 || w.eta > 0.0 {
        let out = tar_loss(
            tape,
            params,
            inputs.views,
            inputs.attributes,
            inputs.plan,
            w.gamma_tar,
            inputs.tar_target,
            w.mu > 0.0,
        )?;
        excluded_rows += out.excluded_rows;
        let pfp = if w.eta > 0.0 {
            let p = pfp_loss(tape, params, out.h3, inputs.positions, w.gamma_pfp)?;
            excluded_rows += p.excluded_rows;
            Some(p.loss)
        } else {
            None
        };
        (out.loss, pfp)
    } else {
        (None, None)
    };

    let total = total_loss(tape, mer.as_ref().map(|m| m.loss), tar, pfp, w)?;
    let scalar = |v: Option<Var>| v.map_or(0.0, |v| tape.value(v).item());
    let per_metapath = match &mer {
        Some(m) => {
            let (losses, alphas) = (tape.value(m.per_metapath), tape.value(m.alphas));
            inputs
                .views
                .iter()
                .enumerate()
                .map(|(k, v)| MetapathLoss {
                    metapath: v.metapath_name.clone(),
                    loss: losses.get(0, k),
                    alpha: alphas.get(0, k),
                })
                .collect()
        }
        None => Vec::new(),
    };
    let report = LossReport {
        mer: scalar(mer.as_ref().map(|m| m.loss)),
        tar: scalar(tar),
        pfp: scalar(pfp),
        total: tape.value(total).item(),
        per_metapath,
        p_a: inputs.plan.p_a,
        excluded_rows,
    };
    Ok((total, report))
}

#[cfg(test)]
mod tests;
