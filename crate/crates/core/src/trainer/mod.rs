//! Training loop: fresh masks each epoch, one Adam step on the total loss,
//! early stopping on the total loss, best parameters kept.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::autodiff::Tape;
use crate::encdec::{decode_edges, encode, ModelDims, ModelParams};
use crate::eval::{edge_auc, sample_non_edges};
use crate::hetgraph::{metapath_views, HeteroGraph, MetapathView};
use crate::masking::{mask_edges, plan_attribute_mask, AttributeMaskPlan, EdgeMask, MaskSchedule};
use crate::objectives::{compute_losses, LossInputs, LossReport, LossWeights, TarTarget};
use crate::rng::{stream_rng, Stream};
use crate::{Error, Matrix, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;
/// A loss counts as an improvement only when it beats the best by more than this.
pub const IMPROVEMENT_THRESHOLD: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// L2 coefficient added to every gradient.
    pub weight_decay: f64,
    pub max_epochs: usize,
    pub patience: usize,
    /// Fraction of metapath edges removed per epoch.
    pub p_e: f64,
    /// Leave-unchanged fraction of the masked attribute rows.
    pub p_u: f64,
    /// Replace fraction of the masked attribute rows.
    pub p_r: f64,
    pub schedule: MaskSchedule,
    pub loss: LossWeights,
    pub hidden: usize,
    pub heads: usize,
    pub semantic_dim: usize,
    pub tar_target: TarTarget,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 5e-4,
            weight_decay: 0.0,
            max_epochs: 300,
            patience: 10,
            p_e: 0.5,
            p_u: 0.1,
            p_r: 0.1,
            schedule: MaskSchedule::default(),
            loss: LossWeights::default(),
            hidden: 256,
            heads: 4,
            semantic_dim: 128,
            tar_target: TarTarget::Original,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if !(self.weight_decay >= 0.0) || !self.weight_decay.is_finite() {
            return Err(Error::Config(format!(
                "weight_decay must be >= 0, got {}",
                self.weight_decay
            )));
        }
        if self.patience == 0 {
            return Err(Error::Config("patience must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.p_e) {
            return Err(Error::Config(format!("p_e must be in [0, 1), got {}", self.p_e)));
        }
        if !(self.p_u >= 0.0) || !(self.p_r >= 0.0) || self.p_u + self.p_r > 1.0 {
            return Err(Error::Config(format!(
                "p_u ({}) and p_r ({}) must be >= 0 with sum <= 1",
                self.p_u, self.p_r
            )));
        }
        self.schedule.validate()?;
        self.loss.validate().map_err(|e| match e {
            Error::Parameter(m) => Error::Config(m),
            other => other,
        })?;
        if self.hidden == 0 || self.heads == 0 || self.semantic_dim == 0 {
            return Err(Error::Config("hidden, heads and semantic_dim must be >= 1".into()));
        }
        Ok(())
    }

    pub fn dims(&self, attr_dim: usize, position_dim: usize) -> ModelDims {
        ModelDims {
            attr_dim,
            hidden: self.hidden,
            heads: self.heads,
            semantic_dim: self.semantic_dim,
            position_dim,
        }
    }
}

/// Glorot-uniform weights, zero biases and tokens, from the `Init` stream.
pub fn init_params(cfg: &TrainConfig, attr_dim: usize, position_dim: usize) -> Result<ModelParams> {
    let mut rng = stream_rng(cfg.seed, Stream::Init, 0);
    ModelParams::init(&cfg.dims(attr_dim, position_dim), &mut rng)
}

/// Inputs that stay fixed for a whole run.
#[derive(Debug, Clone)]
pub struct TrainData {
    pub views: Vec<MetapathView>,
    pub attributes: Matrix,
    pub positions: Matrix,
}

impl TrainData {
    pub fn new(g: &HeteroGraph, positions: Matrix) -> Result<Self> {
        g.validate()?;
        let attributes = g.target_features()?.clone();
        if positions.rows() != attributes.rows() || positions.cols() == 0 {
            return Err(Error::Validation(format!(
                "positions are {}x{} but there are {} target nodes",
                positions.rows(),
                positions.cols(),
                attributes.rows()
            )));
        }
        Ok(TrainData {
            views: metapath_views(g)?,
            attributes,
            positions,
        })
    }

    pub fn node_count(&self) -> usize {
        self.attributes.rows()
    }
}

/// The random corruption used at one epoch.
#[derive(Debug, Clone)]
pub struct EpochMasks {
    pub edges: Vec<EdgeMask>,
    pub plan: AttributeMaskPlan,
}

/// Masks for `epoch`, each strategy from its own stream so they are
/// reproducible from `(seed, epoch)` alone.
pub fn draw_masks(data: &TrainData, cfg: &TrainConfig, epoch: usize) -> Result<EpochMasks> {
    let edges = data
        .views
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let mut rng = stream_rng(cfg.seed, Stream::EdgeMask, ((epoch as u64) << 16) | k as u64);
            mask_edges(v, cfg.p_e, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rng = stream_rng(cfg.seed, Stream::AttributeMask, epoch as u64);
    let p_a = cfg.schedule.rate(epoch as u64);
    let plan = plan_attribute_mask(data.node_count(), p_a, cfg.p_u, cfg.p_r, &mut rng)?;
    Ok(EpochMasks { edges, plan })
}

fn inputs<'a>(data: &'a TrainData, masks: &'a EpochMasks, cfg: &TrainConfig) -> LossInputs<'a> {
    LossInputs {
        views: &data.views,
        edge_masks: &masks.edges,
        attributes: &data.attributes,
        plan: &masks.plan,
        positions: &data.positions,
        weights: cfg.loss,
        tar_target: cfg.tar_target,
    }
}

/// Loss of `params` under the masks of `epoch`, without updating anything.
pub fn evaluate_loss(params: &ModelParams, data: &TrainData, cfg: &TrainConfig, epoch: usize) -> Result<LossReport> {
    let masks = draw_masks(data, cfg, epoch)?;
    let mut tape = Tape::new();
    let pv = params.bind_constant(&mut tape);
    Ok(compute_losses(&mut tape, &pv, &inputs(data, &masks, cfg))?.1)
}

/// Gradients of the total loss for `params` under `masks`.
pub fn loss_gradients(
    params: &ModelParams,
    data: &TrainData,
    masks: &EpochMasks,
    cfg: &TrainConfig,
) -> Result<(LossReport, ModelParams)> {
    let mut tape = Tape::new();
    let pv = params.bind(&mut tape);
    let (total, report) = compute_losses(&mut tape, &pv, &inputs(data, masks, cfg))?;
    if !report.total.is_finite() {
        return Ok((report, params.map(|_, m| Matrix::zeros(m.rows(), m.cols()))));
    }
    tape.backward(total)?;
    Ok((report, pv.map(|_, &v| tape.grad(v))))
}

/// Plateau detection on a stream of losses.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    pub patience: usize,
    pub best_loss: f64,
    pub best_epoch: Option<usize>,
    pub epochs_since_improvement: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best_loss: f64::INFINITY,
            best_epoch: None,
            epochs_since_improvement: 0,
        }
    }

    /// Records the loss of `epoch`; true when it is a new best.
    pub fn record(&mut self, epoch: usize, loss: f64) -> bool {
        if loss < self.best_loss - IMPROVEMENT_THRESHOLD {
            self.best_loss = loss;
            self.best_epoch = Some(epoch);
            self.epochs_since_improvement = 0;
            true
        } else {
            self.epochs_since_improvement += 1;
            false
        }
    }

    pub fn should_stop(&self) -> bool {
        self.epochs_since_improvement >= self.patience
    }
}

#[derive(Debug, Clone)]
pub struct TrainState {
    pub params: ModelParams,
    /// First-moment estimates, same layout as the parameters.
    pub moment1: ModelParams,
    pub moment2: ModelParams,
    /// Epochs completed so far (the next step uses this epoch's masks).
    pub epoch: usize,
    pub early: EarlyStopping,
    /// Parameters that produced the best loss.
    pub best_params: ModelParams,
    pub history: Vec<LossReport>,
}

impl TrainState {
    pub fn new(params: ModelParams, patience: usize) -> Self {
        let zeros = params.map(|_, m| Matrix::zeros(m.rows(), m.cols()));
        TrainState {
            best_params: params.clone(),
            params,
            moment1: zeros.clone(),
            moment2: zeros,
            epoch: 0,
            early: EarlyStopping::new(patience),
            history: Vec::new(),
        }
    }
}

/// One Adam step with L2 weight decay on every entry.
pub fn adam_update(state: &mut TrainState, grads: &ModelParams, lr: f64, weight_decay: f64) {
    let t = (state.epoch + 1) as i32;
    let c1 = 1.0 - libm::pow(ADAM_BETA1, t as f64);
    let c2 = 1.0 - libm::pow(ADAM_BETA2, t as f64);
    let params = state.params.entries_mut();
    let m1 = state.moment1.entries_mut();
    let m2 = state.moment2.entries_mut();
    for ((((_, p), (_, m)), (_, v)), (_, g)) in params.into_iter().zip(m1).zip(m2).zip(grads.entries()) {
        let p = p.as_mut_slice();
        let (m, v) = (m.as_mut_slice(), v.as_mut_slice());
        for i in 0..p.len() {
            let gi = g.as_slice()[i] + weight_decay * p[i];
            m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * gi;
            v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * gi * gi;
            let step = (m[i] / c1) / (libm::sqrt(v[i] / c2) + ADAM_EPS);
            p[i] -= lr * step;
        }
    }
}

/// Draws this epoch's masks, evaluates the loss, records it for early
/// stopping and takes one optimizer step.
pub fn train_step(state: &mut TrainState, data: &TrainData, cfg: &TrainConfig) -> Result<LossReport> {
    let masks = draw_masks(data, cfg, state.epoch)?;
    let (report, grads) = loss_gradients(&state.params, data, &masks, cfg)?;
    if !report.total.is_finite() {
        return Err(Error::Divergence {
            epoch: state.epoch,
            detail: format!(
                "total loss {} (mer {}, tar {}, pfp {})",
                report.total, report.mer, report.tar, report.pfp
            ),
        });
    }
    if state.early.record(state.epoch, report.total) {
        state.best_params = state.params.clone();
    }
    adam_update(state, &grads, cfg.learning_rate, cfg.weight_decay);
    if !state.params.is_finite() {
        return Err(Error::Divergence {
            epoch: state.epoch,
            detail: "parameters became non-finite after the update".into(),
        });
    }
    state.history.push(report.clone());
    state.epoch += 1;
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct FitResult {
    /// Parameters with the lowest logged total loss (initial ones if no epoch ran).
    pub params: ModelParams,
    pub history: Vec<LossReport>,
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
}

pub fn fit(data: &TrainData, cfg: &TrainConfig) -> Result<FitResult> {
    fit_with(data, cfg, |_, _| {})
}

/// [`fit`] with a callback after every epoch.
pub fn fit_with(data: &TrainData, cfg: &TrainConfig, mut observe: impl FnMut(usize, &LossReport)) -> Result<FitResult> {
    cfg.validate()?;
    let params = init_params(cfg, data.attributes.cols(), data.positions.cols())?;
    let mut state = TrainState::new(params, cfg.patience);
    let mut stopped_early = false;
    while state.epoch < cfg.max_epochs {
        let epoch = state.epoch;
        let report = train_step(&mut state, data, cfg)?;
        observe(epoch, &report);
        if state.early.should_stop() {
            stopped_early = true;
            break;
        }
    }
    Ok(FitResult {
        params: state.best_params,
        history: state.history,
        best_epoch: state.early.best_epoch,
        stopped_early,
    })
}

/// Unmasked inference: fused encoding of the attributes under every view.
pub fn embed(params: &ModelParams, views: &[MetapathView], attributes: &Matrix) -> Result<Matrix> {
    let mut tape = Tape::new();
    let pv = params.bind_constant(&mut tape);
    let x = tape.constant(attributes.clone());
    let adj: Vec<_> = views.iter().map(|v| &v.adjacency).collect();
    let out = encode(&mut tape, &pv, &adj, x)?;
    Ok(tape.value(out.fused).clone())
}

/// Reconstruction ranking for one view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRanking {
    pub metapath: String,
    pub held_out: usize,
    /// `None` when nothing was held out.
    pub auc: Option<f64>,
}

/// Holds out a fraction `p_e` of each view's edges, encodes and decodes
/// under the masked adjacencies, and ranks the held-out edges against an
/// equal number of non-edges by their `A'` score.
pub fn edge_ranking(params: &ModelParams, data: &TrainData, p_e: f64, seed: u64) -> Result<Vec<EdgeRanking>> {
    let masks = data
        .views
        .iter()
        .enumerate()
        .map(|(k, v)| mask_edges(v, p_e, &mut stream_rng(seed, Stream::EdgeMask, u64::MAX - k as u64)))
        .collect::<Result<Vec<_>>>()?;
    let mut tape = Tape::new();
    let pv = params.bind_constant(&mut tape);
    let x = tape.constant(data.attributes.clone());
    let adj: Vec<_> = masks.iter().map(|m| &m.masked).collect();
    let enc = encode(&mut tape, &pv, &adj, x)?;
    let mut out = Vec::with_capacity(masks.len());
    for (k, (mask, view)) in masks.iter().zip(&data.views).enumerate() {
        let (_, scores) = decode_edges(&mut tape, &pv, &mask.masked, enc.per_metapath[k])?;
        let mut rng = stream_rng(seed, Stream::NonEdges, k as u64);
        let negatives = sample_non_edges(&view.adjacency, mask.held_out.len(), &mut rng);
        out.push(EdgeRanking {
            metapath: view.metapath_name.clone(),
            held_out: mask.held_out.len(),
            auc: edge_auc(&mask.held_out, &negatives, tape.value(scores)),
        });
    }
    Ok(out)
}
