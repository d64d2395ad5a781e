//! Metapath-guided random walks and skip-gram with negative sampling.
//!
//! Walks start at target nodes and follow the metapath's relation steps
//! cyclically. The skip-gram model keeps a center and a context vector per
//! node over one global index space covering every node type; negatives for
//! a context node are drawn from the unigram^0.75 distribution over nodes of
//! the same type.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::autodiff::{dot, norm, sigmoid};
use crate::hetgraph::{HeteroGraph, Metapath};
use crate::rng::{stream_rng, Rng, Stream};
use crate::{Error, Matrix, Result};

/// Exponent applied to corpus frequencies for negative sampling.
pub const UNIGRAM_POWER: f64 = 0.75;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WalkConfig {
    pub walks_per_node: usize,
    /// Nodes per walk, including the start.
    pub walk_length: usize,
    pub window: usize,
    pub negatives: usize,
    pub dim: usize,
    pub epochs: usize,
    /// Initial SGD rate, decayed linearly towards zero over all pairs.
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig {
            walks_per_node: 10,
            walk_length: 20,
            window: 5,
            negatives: 5,
            dim: 64,
            epochs: 5,
            learning_rate: 0.025,
            seed: 0,
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("walks_per_node", self.walks_per_node),
            ("walk_length", self.walk_length),
            ("window", self.window),
            ("negatives", self.negatives),
            ("dim", self.dim),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("positions.{name} must be >= 1")));
        }
        if self.window >= self.walk_length {
            return Err(Error::Config(format!(
                "positions.window ({}) must be smaller than positions.walk_length ({})",
                self.window, self.walk_length
            )));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config(format!(
                "positions.learning_rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// Maps `(type, local index)` to one contiguous global index, types in
/// name order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeSpace {
    pub types: Vec<String>,
    offsets: Vec<usize>,
    counts: Vec<usize>,
}

impl NodeSpace {
    pub fn new(g: &HeteroGraph) -> Self {
        let mut offsets = Vec::with_capacity(g.node_counts.len());
        let mut counts = Vec::with_capacity(g.node_counts.len());
        let mut acc = 0;
        for &c in g.node_counts.values() {
            offsets.push(acc);
            counts.push(c);
            acc += c;
        }
        NodeSpace {
            types: g.node_counts.keys().cloned().collect(),
            offsets,
            counts,
        }
    }

    pub fn type_index(&self, name: &str) -> Option<usize> {
        self.types.iter().position(|t| t == name)
    }

    pub fn total(&self) -> usize {
        self.offsets
            .last()
            .map_or(0, |o| o + self.counts[self.counts.len() - 1])
    }

    pub fn count(&self, ty: usize) -> usize {
        self.counts[ty]
    }

    pub fn global(&self, ty: usize, node: usize) -> usize {
        self.offsets[ty] + node
    }

    pub fn type_of(&self, global: usize) -> usize {
        self.offsets.partition_point(|&o| o <= global) - 1
    }
}

/// A walk as `(type index, local node index)` pairs in a [`NodeSpace`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Walk {
    pub nodes: Vec<(usize, usize)>,
}

/// Per-step neighbour lists in traversal direction, deduplicated and sorted.
fn step_neighbors(g: &HeteroGraph, mp: &Metapath) -> Result<Vec<Vec<Vec<usize>>>> {
    mp.steps
        .iter()
        .map(|step| {
            let nf = g.node_counts[g.step_types(step)?.0];
            let mut lists = vec![Vec::new(); nf];
            for &(s, d) in &g.relations[&step.relation].edges {
                let (a, b) = if step.reversed { (d, s) } else { (s, d) };
                lists[a].push(b);
            }
            for l in &mut lists {
                l.sort_unstable();
                l.dedup();
            }
            Ok(lists)
        })
        .collect()
}

/// `walks_per_node` walks from every target node, each step choosing a
/// uniform neighbour under the next relation of the metapath (cyclically).
/// A walk stops early when the current node has no such neighbour.
pub fn generate_walks(
    g: &HeteroGraph,
    space: &NodeSpace,
    mp: &Metapath,
    cfg: &WalkConfig,
    rng: &mut Rng,
) -> Result<Vec<Walk>> {
    g.validate_metapath(mp)?;
    let types = g.type_sequence(mp)?;
    let type_ids: Vec<usize> = types
        .iter()
        .map(|t| {
            space
                .type_index(t)
                .ok_or_else(|| Error::Validation(format!("unknown node type '{t}'")))
        })
        .collect::<Result<_>>()?;
    let neighbors = step_neighbors(g, mp)?;
    let l = mp.steps.len();
    let mut walks = Vec::with_capacity(g.target_count() * cfg.walks_per_node);
    for start in 0..g.target_count() {
        for _ in 0..cfg.walks_per_node {
            let mut nodes = Vec::with_capacity(cfg.walk_length);
            nodes.push((type_ids[0], start));
            let mut current = start;
            for k in 0..cfg.walk_length.saturating_sub(1) {
                let options = &neighbors[k % l][current];
                let Some(&next) = options.choose(rng) else { break };
                current = next;
                nodes.push((type_ids[(k % l) + 1], current));
            }
            walks.push(Walk { nodes });
        }
    }
    Ok(walks)
}

/// Loss and gradients of one `(center, context, negatives)` sample:
/// `−log σ(u_c·v) − Σ_n log σ(−u_n·v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairGradient {
    pub loss: f64,
    pub center: Vec<f64>,
    pub context: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

/// `log σ(x)` without overflow.
fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -libm::log1p(libm::exp(-x))
    } else {
        x - libm::log1p(libm::exp(x))
    }
}

pub fn pair_gradient(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> PairGradient {
    let s = dot(context, center);
    let mut loss = -log_sigmoid(s);
    let g_pos = sigmoid(s) - 1.0;
    let mut g_center: Vec<f64> = context.iter().map(|u| g_pos * u).collect();
    let g_context: Vec<f64> = center.iter().map(|v| g_pos * v).collect();
    let mut g_negs = Vec::with_capacity(negatives.len());
    for &u in negatives {
        let s = dot(u, center);
        loss -= log_sigmoid(-s);
        let g = sigmoid(s);
        for (gc, &ui) in g_center.iter_mut().zip(u) {
            *gc += g * ui;
        }
        g_negs.push(center.iter().map(|v| g * v).collect());
    }
    PairGradient {
        loss,
        center: g_center,
        context: g_context,
        negatives: g_negs,
    }
}

/// Trained skip-gram vectors over a [`NodeSpace`].
#[derive(Debug, Clone, PartialEq)]
pub struct SkipGram {
    pub center: Matrix,
    pub context: Matrix,
    /// Mean sample loss per epoch.
    pub epoch_losses: Vec<f64>,
}

/// Initial vectors: centers uniform in `±0.5/d`, contexts zero.
pub fn init_skipgram(total: usize, dim: usize, rng: &mut Rng) -> SkipGram {
    let half = 0.5 / dim as f64;
    SkipGram {
        center: Matrix::from_fn(total, dim, |_, _| rng.gen_range(-half..half)),
        context: Matrix::zeros(total, dim),
        epoch_losses: Vec::new(),
    }
}

fn pair_count(walks: &[Walk], window: usize) -> usize {
    walks
        .iter()
        .map(|w| {
            let n = w.nodes.len();
            (0..n).map(|i| i.min(window) + (n - 1 - i).min(window)).sum::<usize>()
        })
        .sum()
}

/// Plain SGD over every `(center, context)` pair within `window` positions,
/// walks visited in a fresh random order each epoch.
pub fn train_skipgram(walks: &[Walk], space: &NodeSpace, cfg: &WalkConfig, rng: &mut Rng) -> Result<SkipGram> {
    let pairs_per_epoch = pair_count(walks, cfg.window);
    if pairs_per_epoch == 0 {
        return Err(Error::Data(
            "walk corpus has no node pairs (every walk has length < 2)".into(),
        ));
    }
    let mut model = init_skipgram(space.total(), cfg.dim, rng);

    // Unigram^0.75 per node type.
    let mut freq = vec![0usize; space.total()];
    for w in walks {
        for &(t, v) in &w.nodes {
            freq[space.global(t, v)] += 1;
        }
    }
    let samplers: Vec<Option<WeightedIndex<f64>>> = (0..space.types.len())
        .map(|t| {
            let weights: Vec<f64> = (0..space.count(t))
                .map(|v| libm::pow(freq[space.global(t, v)] as f64, UNIGRAM_POWER))
                .collect();
            WeightedIndex::new(weights).ok()
        })
        .collect();

    let total_pairs = (pairs_per_epoch * cfg.epochs) as f64;
    let mut seen = 0usize;
    let mut order: Vec<usize> = (0..walks.len()).collect();
    let dim = cfg.dim;
    let mut neg_ids = Vec::with_capacity(cfg.negatives);
    let mut grad_center = vec![0.0; dim];
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        let mut epoch_loss = 0.0;
        for &wi in &order {
            let nodes = &walks[wi].nodes;
            for (i, &(ti, vi)) in nodes.iter().enumerate() {
                let w = space.global(ti, vi);
                let lo = i.saturating_sub(cfg.window);
                let hi = (i + cfg.window).min(nodes.len() - 1);
                for (j, &(tc, vc)) in nodes.iter().enumerate().take(hi + 1).skip(lo) {
                    if j == i {
                        continue;
                    }
                    let c = space.global(tc, vc);
                    let lr = cfg.learning_rate * (1.0 - seen as f64 / total_pairs).max(1e-4);
                    seen += 1;
                    neg_ids.clear();
                    if let Some(s) = &samplers[tc] {
                        for _ in 0..cfg.negatives {
                            neg_ids.push(space.global(tc, s.sample(rng)));
                        }
                    }
                    epoch_loss += sgd_update(&mut model, w, c, &neg_ids, lr, &mut grad_center);
                }
            }
        }
        model.epoch_losses.push(epoch_loss / pairs_per_epoch as f64);
    }
    Ok(model)
}

/// One in-place step of [`pair_gradient`] with rate `lr`; returns the loss.
fn sgd_update(model: &mut SkipGram, w: usize, c: usize, negatives: &[usize], lr: f64, grad_center: &mut [f64]) -> f64 {
    grad_center.fill(0.0);
    let v = model.center.row(w).to_vec();
    let mut loss = 0.0;
    for (k, &u) in core::iter::once(&c).chain(negatives).enumerate() {
        let positive = k == 0;
        let s = dot(model.context.row(u), &v);
        let g = if positive {
            loss -= log_sigmoid(s);
            sigmoid(s) - 1.0
        } else {
            loss -= log_sigmoid(-s);
            sigmoid(s)
        };
        let ctx = model.context.row_mut(u);
        for ((gc, ui), vi) in grad_center.iter_mut().zip(ctx.iter_mut()).zip(&v) {
            *gc += g * *ui;
            *ui -= lr * g * vi;
        }
    }
    for (vi, gc) in model.center.row_mut(w).iter_mut().zip(grad_center.iter()) {
        *vi -= lr * gc;
    }
    loss
}

/// Walks over every metapath pooled into one corpus, skip-gram trained, and
/// the target nodes' center vectors scaled to unit norm. Nodes never seen in
/// any pair keep a zero row.
pub fn positional_features(g: &HeteroGraph, cfg: &WalkConfig) -> Result<Matrix> {
    cfg.validate()?;
    if g.metapaths.is_empty() {
        return Err(Error::Config("positional features need at least one metapath".into()));
    }
    let space = NodeSpace::new(g);
    let mut corpus = Vec::new();
    for (k, mp) in g.metapaths.iter().enumerate() {
        let mut rng = stream_rng(cfg.seed, Stream::Walks, k as u64);
        corpus.extend(generate_walks(g, &space, mp, cfg, &mut rng)?);
    }
    let mut rng = stream_rng(cfg.seed, Stream::SkipGram, 0);
    let model = train_skipgram(&corpus, &space, cfg, &mut rng)?;

    let target = space
        .type_index(&g.target_type)
        .ok_or_else(|| Error::Validation(format!("unknown target type '{}'", g.target_type)))?;
    let mut visited = vec![false; g.target_count()];
    for w in &corpus {
        if w.nodes.len() >= 2 {
            for &(t, v) in &w.nodes {
                if t == target {
                    visited[v] = true;
                }
            }
        }
    }
    let mut p = Matrix::zeros(g.target_count(), cfg.dim);
    for (v, &seen) in visited.iter().enumerate() {
        let row = model.center.row(space.global(target, v));
        let n = norm(row);
        if seen && n > 0.0 {
            for (dst, &x) in p.row_mut(v).iter_mut().zip(row) {
                *dst = x / n;
            }
        }
    }
    Ok(p)
}
