//! Attention encoder and the three decoders.
//!
//! The encoder projects target attributes to the hidden width, runs one
//! multi-head node-level attention layer per metapath adjacency and fuses the
//! per-metapath outputs with semantic-level attention. Decoders: an attention
//! layer followed by a sigmoid Gram matrix for edges, an attention layer per
//! view fused and projected back to attribute width for attributes, and a
//! one-hidden-layer MLP for positional features.
//!
//! Parameters are stored in [`ModelParams<T>`]. `T = Matrix` holds values;
//! binding onto a [`Tape`] yields `ModelParams<Var>` with the same layout.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::matrix::BinaryMatrix;
use crate::rng::Rng;
use crate::{Error, Matrix, Result};

/// Negative slope of the attention score nonlinearity.
pub const ATTENTION_SLOPE: f64 = 0.2;

/// Widths that fix every parameter shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub attr_dim: usize,
    pub hidden: usize,
    pub heads: usize,
    pub semantic_dim: usize,
    pub position_dim: usize,
}

impl ModelDims {
    pub fn validate(&self) -> Result<()> {
        if self.attr_dim == 0 || self.hidden == 0 || self.heads == 0 || self.semantic_dim == 0 || self.position_dim == 0
        {
            return Err(Error::Config(format!("all model widths must be >= 1: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Linear<T> {
    pub weight: T,
    pub bias: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionHead<T> {
    /// `d_in × d_out`
    pub weight: T,
    /// `d_out × 1`, scores the receiving node.
    pub att_dst: T,
    /// `d_out × 1`, scores the neighbour.
    pub att_src: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionLayer<T> {
    pub heads: Vec<AttentionHead<T>>,
}

/// `s = mean_i qᵀ tanh(W h_i + b)` per input, softmax over inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticAttention<T> {
    /// `d × d_s`
    pub weight: T,
    /// `1 × d_s`
    pub bias: T,
    /// `d_s × 1`
    pub query: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T = Matrix> {
    pub type_projection: Linear<T>,
    pub encoder: AttentionLayer<T>,
    pub encoder_fusion: SemanticAttention<T>,
    /// Weights the per-metapath edge reconstruction losses.
    pub loss_fusion: SemanticAttention<T>,
    pub edge_decoder: AttentionLayer<T>,
    pub attr_decoder: AttentionLayer<T>,
    pub attr_decoder_fusion: SemanticAttention<T>,
    pub attr_output: Linear<T>,
    pub mlp_hidden: Linear<T>,
    pub mlp_output: Linear<T>,
    /// Attribute mask token `x_[M]`, `1 × attr_dim`.
    pub mask_token: T,
    /// Latent mask token `h_[DM]`, `1 × hidden`.
    pub dm_token: T,
}

/// Parameter groups used for ablation bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamGroup {
    Encoder,
    LossFusion,
    EdgeDecoder,
    AttrDecoder,
    PositionDecoder,
}

impl ParamGroup {
    /// Group of a parameter by its entry name.
    pub fn of(name: &str) -> ParamGroup {
        let head = name.split('.').next().unwrap_or("");
        match head {
            "loss_fusion" => ParamGroup::LossFusion,
            "edge_decoder" => ParamGroup::EdgeDecoder,
            "attr_decoder" | "attr_decoder_fusion" | "attr_output" | "dm_token" => ParamGroup::AttrDecoder,
            "mlp_hidden" | "mlp_output" => ParamGroup::PositionDecoder,
            _ => ParamGroup::Encoder,
        }
    }
}

impl<T> Linear<T> {
    fn map<U>(&self, prefix: &str, f: &mut impl FnMut(&str, &T) -> U) -> Linear<U> {
        Linear {
            weight: f(&format!("{prefix}.weight"), &self.weight),
            bias: f(&format!("{prefix}.bias"), &self.bias),
        }
    }

    fn collect<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a T)>) {
        out.push((format!("{prefix}.weight"), &self.weight));
        out.push((format!("{prefix}.bias"), &self.bias));
    }

    fn collect_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut T)>) {
        out.push((format!("{prefix}.weight"), &mut self.weight));
        out.push((format!("{prefix}.bias"), &mut self.bias));
    }
}

impl<T> AttentionLayer<T> {
    fn map<U>(&self, prefix: &str, f: &mut impl FnMut(&str, &T) -> U) -> AttentionLayer<U> {
        AttentionLayer {
            heads: self
                .heads
                .iter()
                .enumerate()
                .map(|(k, h)| AttentionHead {
                    weight: f(&format!("{prefix}.head{k}.weight"), &h.weight),
                    att_dst: f(&format!("{prefix}.head{k}.att_dst"), &h.att_dst),
                    att_src: f(&format!("{prefix}.head{k}.att_src"), &h.att_src),
                })
                .collect(),
        }
    }

    fn collect<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a T)>) {
        for (k, h) in self.heads.iter().enumerate() {
            out.push((format!("{prefix}.head{k}.weight"), &h.weight));
            out.push((format!("{prefix}.head{k}.att_dst"), &h.att_dst));
            out.push((format!("{prefix}.head{k}.att_src"), &h.att_src));
        }
    }

    fn collect_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut T)>) {
        for (k, h) in self.heads.iter_mut().enumerate() {
            out.push((format!("{prefix}.head{k}.weight"), &mut h.weight));
            out.push((format!("{prefix}.head{k}.att_dst"), &mut h.att_dst));
            out.push((format!("{prefix}.head{k}.att_src"), &mut h.att_src));
        }
    }
}

impl<T> SemanticAttention<T> {
    fn map<U>(&self, prefix: &str, f: &mut impl FnMut(&str, &T) -> U) -> SemanticAttention<U> {
        SemanticAttention {
            weight: f(&format!("{prefix}.weight"), &self.weight),
            bias: f(&format!("{prefix}.bias"), &self.bias),
            query: f(&format!("{prefix}.query"), &self.query),
        }
    }

    fn collect<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a T)>) {
        out.push((format!("{prefix}.weight"), &self.weight));
        out.push((format!("{prefix}.bias"), &self.bias));
        out.push((format!("{prefix}.query"), &self.query));
    }

    fn collect_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut T)>) {
        out.push((format!("{prefix}.weight"), &mut self.weight));
        out.push((format!("{prefix}.bias"), &mut self.bias));
        out.push((format!("{prefix}.query"), &mut self.query));
    }
}

impl<T> ModelParams<T> {
    /// Structure-preserving map; `f` sees each entry's dotted name.
    pub fn map<U>(&self, mut f: impl FnMut(&str, &T) -> U) -> ModelParams<U> {
        let f = &mut f;
        ModelParams {
            type_projection: self.type_projection.map("type_projection", f),
            encoder: self.encoder.map("encoder", f),
            encoder_fusion: self.encoder_fusion.map("encoder_fusion", f),
            loss_fusion: self.loss_fusion.map("loss_fusion", f),
            edge_decoder: self.edge_decoder.map("edge_decoder", f),
            attr_decoder: self.attr_decoder.map("attr_decoder", f),
            attr_decoder_fusion: self.attr_decoder_fusion.map("attr_decoder_fusion", f),
            attr_output: self.attr_output.map("attr_output", f),
            mlp_hidden: self.mlp_hidden.map("mlp_hidden", f),
            mlp_output: self.mlp_output.map("mlp_output", f),
            mask_token: f("mask_token", &self.mask_token),
            dm_token: f("dm_token", &self.dm_token),
        }
    }

    /// Every entry with its dotted name, in a fixed order.
    pub fn entries(&self) -> Vec<(String, &T)> {
        let mut out = Vec::new();
        self.type_projection.collect("type_projection", &mut out);
        self.encoder.collect("encoder", &mut out);
        self.encoder_fusion.collect("encoder_fusion", &mut out);
        self.loss_fusion.collect("loss_fusion", &mut out);
        self.edge_decoder.collect("edge_decoder", &mut out);
        self.attr_decoder.collect("attr_decoder", &mut out);
        self.attr_decoder_fusion.collect("attr_decoder_fusion", &mut out);
        self.attr_output.collect("attr_output", &mut out);
        self.mlp_hidden.collect("mlp_hidden", &mut out);
        self.mlp_output.collect("mlp_output", &mut out);
        out.push(("mask_token".into(), &self.mask_token));
        out.push(("dm_token".into(), &self.dm_token));
        out
    }

    /// Same order as [`ModelParams::entries`].
    pub fn entries_mut(&mut self) -> Vec<(String, &mut T)> {
        let mut out = Vec::new();
        self.type_projection.collect_mut("type_projection", &mut out);
        self.encoder.collect_mut("encoder", &mut out);
        self.encoder_fusion.collect_mut("encoder_fusion", &mut out);
        self.loss_fusion.collect_mut("loss_fusion", &mut out);
        self.edge_decoder.collect_mut("edge_decoder", &mut out);
        self.attr_decoder.collect_mut("attr_decoder", &mut out);
        self.attr_decoder_fusion.collect_mut("attr_decoder_fusion", &mut out);
        self.attr_output.collect_mut("attr_output", &mut out);
        self.mlp_hidden.collect_mut("mlp_hidden", &mut out);
        self.mlp_output.collect_mut("mlp_output", &mut out);
        out.push(("mask_token".into(), &mut self.mask_token));
        out.push(("dm_token".into(), &mut self.dm_token));
        out
    }
}

/// Glorot-uniform matrix, bound `sqrt(6 / (fan_in + fan_out))`.
pub fn glorot(rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
    let bound = glorot_bound(rows, cols);
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-bound..=bound))
}

pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    libm::sqrt(6.0 / (fan_in + fan_out) as f64)
}

impl ModelParams<Matrix> {
    /// Glorot-uniform weights; biases and both mask tokens start at zero.
    pub fn init(dims: &ModelDims, rng: &mut Rng) -> Result<Self> {
        dims.validate()?;
        let ModelDims {
            attr_dim,
            hidden,
            heads,
            semantic_dim,
            position_dim,
        } = *dims;
        let dense = |i: usize, o: usize, rng: &mut Rng| Linear {
            weight: glorot(i, o, rng),
            bias: Matrix::zeros(1, o),
        };
        let type_projection = dense(attr_dim, hidden, rng);
        let layer = |rng: &mut Rng| AttentionLayer {
            heads: (0..heads)
                .map(|_| AttentionHead {
                    weight: glorot(hidden, hidden, rng),
                    att_dst: glorot(hidden, 1, rng),
                    att_src: glorot(hidden, 1, rng),
                })
                .collect(),
        };
        let semantic = |rng: &mut Rng| SemanticAttention {
            weight: glorot(hidden, semantic_dim, rng),
            bias: Matrix::zeros(1, semantic_dim),
            query: glorot(semantic_dim, 1, rng),
        };
        let encoder = layer(rng);
        let encoder_fusion = semantic(rng);
        let loss_fusion = semantic(rng);
        let edge_decoder = layer(rng);
        let attr_decoder = layer(rng);
        let attr_decoder_fusion = semantic(rng);
        let attr_output = dense(hidden, attr_dim, rng);
        let mlp_hidden = dense(hidden, hidden, rng);
        let mlp_output = dense(hidden, position_dim, rng);
        Ok(ModelParams {
            type_projection,
            encoder,
            encoder_fusion,
            loss_fusion,
            edge_decoder,
            attr_decoder,
            attr_decoder_fusion,
            attr_output,
            mlp_hidden,
            mlp_output,
            mask_token: Matrix::zeros(1, attr_dim),
            dm_token: Matrix::zeros(1, hidden),
        })
    }

    /// Records every entry on `tape` as a trainable leaf.
    pub fn bind(&self, tape: &mut Tape) -> ModelParams<Var> {
        self.map(|_, m| tape.param(m.clone()))
    }

    /// Records every entry as a constant (inference).
    pub fn bind_constant(&self, tape: &mut Tape) -> ModelParams<Var> {
        self.map(|_, m| tape.constant(m.clone()))
    }

    pub fn dims(&self) -> ModelDims {
        ModelDims {
            attr_dim: self.mask_token.cols(),
            hidden: self.dm_token.cols(),
            heads: self.encoder.heads.len(),
            semantic_dim: self.encoder_fusion.query.rows(),
            position_dim: self.mlp_output.bias.cols(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.entries().iter().all(|(_, m)| m.is_finite())
    }

    pub fn parameter_count(&self) -> usize {
        self.entries().iter().map(|(_, m)| m.len()).sum()
    }
}

/// Affine map `x W + b`.
pub fn linear(tape: &mut Tape, layer: &Linear<Var>, x: Var) -> Result<Var> {
    let xw = tape.matmul(x, layer.weight)?;
    tape.add_row(xw, layer.bias)
}

/// Multi-head attention over the set entries of `adjacency` (row `i`
/// attends to every `j` with `adjacency[i][j]`). Per head:
/// `e_ij = LeakyReLU(a_dstᵀ W x_i + a_srcᵀ W x_j)`, `α = softmax_j(e)`,
/// `h_i = ELU(Σ_j α_ij W x_j)`; heads are averaged.
pub fn node_attention_layer(
    tape: &mut Tape,
    layer: &AttentionLayer<Var>,
    x: Var,
    adjacency: &BinaryMatrix,
) -> Result<Var> {
    let n = tape.shape(x).0;
    if adjacency.shape() != (n, n) {
        return Err(Error::shape("node_attention_layer", tape.shape(x), adjacency.shape()));
    }
    if layer.heads.is_empty() {
        return Err(Error::Config("attention layer without heads".into()));
    }
    let mut acc: Option<Var> = None;
    for head in &layer.heads {
        let wx = tape.matmul(x, head.weight)?;
        let dst = tape.matmul(wx, head.att_dst)?;
        let src = tape.matmul(wx, head.att_src)?;
        let scores = tape.outer_sum(dst, src)?;
        let scores = tape.leaky_relu(scores, ATTENTION_SLOPE);
        let alpha = tape.softmax(scores, Some(adjacency))?;
        let agg = tape.matmul(alpha, wx)?;
        let h = tape.elu(agg);
        acc = Some(match acc {
            None => h,
            Some(prev) => tape.add(prev, h)?,
        });
    }
    let sum = acc.expect("at least one head");
    Ok(if layer.heads.len() == 1 {
        sum
    } else {
        tape.scale(sum, 1.0 / layer.heads.len() as f64)
    })
}

/// Semantic-level attention over equally shaped inputs. Returns the
/// `1 × |inputs|` weight row and the weighted sum of the inputs.
pub fn semantic_attention(tape: &mut Tape, sa: &SemanticAttention<Var>, inputs: &[Var]) -> Result<(Var, Var)> {
    let Some(&first) = inputs.first() else {
        return Err(Error::Config("semantic attention needs at least one input".into()));
    };
    let mut scores = Vec::with_capacity(inputs.len());
    for &h in inputs {
        if tape.shape(h) != tape.shape(first) {
            return Err(Error::shape("semantic_attention", tape.shape(first), tape.shape(h)));
        }
        let proj = tape.matmul(h, sa.weight)?;
        let proj = tape.add_row(proj, sa.bias)?;
        let act = tape.tanh(proj);
        let per_node = tape.matmul(act, sa.query)?;
        scores.push(tape.mean(per_node));
    }
    let row = tape.concat_cols(&scores)?;
    let weights = tape.softmax(row, None)?;
    let mut fused: Option<Var> = None;
    for (k, &h) in inputs.iter().enumerate() {
        let w = tape.element(weights, 0, k)?;
        let term = tape.scale_by(h, w)?;
        fused = Some(match fused {
            None => term,
            Some(prev) => tape.add(prev, term)?,
        });
    }
    Ok((weights, fused.expect("non-empty")))
}

/// Encoder output for a list of adjacencies.
#[derive(Debug, Clone)]
pub struct EncodedViews {
    /// One `N × d` embedding per adjacency, in input order.
    pub per_metapath: Vec<Var>,
    pub fused: Var,
    /// `1 × |views|` semantic weights.
    pub semantic_weights: Var,
}

/// Projects `x` to the hidden width, applies the shared node-level attention
/// layer under each adjacency and fuses the results.
pub fn encode(tape: &mut Tape, params: &ModelParams<Var>, views: &[&BinaryMatrix], x: Var) -> Result<EncodedViews> {
    let n = tape.shape(x).0;
    if views.is_empty() {
        return Err(Error::Config("encode needs at least one metapath view".into()));
    }
    if let Some(v) = views.iter().find(|v| v.shape() != (n, n)) {
        return Err(Error::shape("encode", tape.shape(x), v.shape()));
    }
    let projected = linear(tape, &params.type_projection, x)?;
    let per_metapath = views
        .iter()
        .map(|adj| node_attention_layer(tape, &params.encoder, projected, adj))
        .collect::<Result<Vec<_>>>()?;
    let (semantic_weights, fused) = semantic_attention(tape, &params.encoder_fusion, &per_metapath)?;
    Ok(EncodedViews {
        per_metapath,
        fused,
        semantic_weights,
    })
}

/// `(H₂, A′)` with `H₂` from the edge-decoder attention layer and
/// `A′ = σ(H₂ H₂ᵀ)` (inner products of node rows).
pub fn decode_edges(
    tape: &mut Tape,
    params: &ModelParams<Var>,
    adjacency: &BinaryMatrix,
    h1: Var,
) -> Result<(Var, Var)> {
    let h2 = node_attention_layer(tape, &params.edge_decoder, h1, adjacency)?;
    let gram = tape.matmul_nt(h2, h2)?;
    Ok((h2, tape.sigmoid(gram)))
}

/// Sigmoid of a Gram matrix, for callers that already hold `H₂`.
pub fn reconstruct_adjacency(tape: &mut Tape, h2: Var) -> Result<Var> {
    let gram = tape.matmul_nt(h2, h2)?;
    Ok(tape.sigmoid(gram))
}

/// `Z`: attribute-decoder attention per view, fused, projected to attribute width.
pub fn decode_attributes(
    tape: &mut Tape,
    params: &ModelParams<Var>,
    views: &[&BinaryMatrix],
    h3_masked: Var,
) -> Result<Var> {
    let n = tape.shape(h3_masked).0;
    if views.is_empty() {
        return Err(Error::Config("attribute decoder needs at least one view".into()));
    }
    if let Some(v) = views.iter().find(|v| v.shape() != (n, n)) {
        return Err(Error::shape("decode_attributes", tape.shape(h3_masked), v.shape()));
    }
    let per_view = views
        .iter()
        .map(|adj| node_attention_layer(tape, &params.attr_decoder, h3_masked, adj))
        .collect::<Result<Vec<_>>>()?;
    let (_, fused) = semantic_attention(tape, &params.attr_decoder_fusion, &per_view)?;
    linear(tape, &params.attr_output, fused)
}

/// `P′ = ELU(H₃ W₁ + b₁) W₂ + b₂`; consumes no adjacency.
pub fn predict_positions(tape: &mut Tape, params: &ModelParams<Var>, h3: Var) -> Result<Var> {
    let hidden = linear(tape, &params.mlp_hidden, h3)?;
    let hidden = tape.elu(hidden);
    linear(tape, &params.mlp_output, hidden)
}
