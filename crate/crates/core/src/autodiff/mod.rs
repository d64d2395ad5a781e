//! Tape-based reverse-mode differentiation over dense matrices.
//!
//! A [`Tape`] records every operation in creation order, which is already a
//! topological order, so [`Tape::backward`] is a single reverse sweep.
//! Handles ([`Var`]) are plain indices into the tape.

mod gradcheck;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

pub use gradcheck::{grad_check, grad_check_many, GradCheckReport};

use crate::matrix::{gemm, BinaryMatrix};
use crate::{Error, Matrix, Result};

/// Guard on the norm product in the cosine quotient of [`Tape::sce_rows`].
pub const SCE_EPS: f64 = 1e-12;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    /// `a · bᵀ`
    MatMulNt(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    /// Matrix plus a 1×cols row broadcast over rows.
    AddRow(Var, Var),
    Scale(Var, f64),
    /// Matrix times a 1×1 tensor.
    ScaleBy(Var, Var),
    /// `out[i][j] = s[i] + t[j]` for column vectors `s`, `t`.
    OuterSum(Var, Var),
    Elu(Var),
    LeakyRelu(Var, f64),
    Tanh(Var),
    Sigmoid(Var),
    Softmax(Var),
    Sce {
        x: Var,
        y: Var,
        gamma: f64,
        rows: Vec<usize>,
    },
    Sum(Var),
    Mean(Var),
    MeanRows(Var),
    ConcatCols(Vec<Var>),
    Element(Var, usize, usize),
    ReplaceRows {
        base: Var,
        token: Var,
        rows: Vec<usize>,
    },
}

#[derive(Debug)]
struct Node {
    value: Matrix,
    op: Op,
    requires_grad: bool,
}

/// Result of [`Tape::sce_rows`].
#[derive(Debug, Clone, Copy)]
pub struct SceOutput {
    pub loss: Var,
    /// Rows that took part in the mean.
    pub included: usize,
    /// Requested rows dropped because one side had zero norm.
    pub excluded: usize,
}

/// Computation trace plus the gradients of the last backward pass.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Matrix>>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Matrix, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Leaf excluded from differentiation.
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.rg(v)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::MatMul(a, b), rg))
    }

    /// `a · bᵀ`, e.g. the Gram matrix of embedding rows when `a == b`.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul_nt(self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::MatMulNt(a, b), rg))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::shape(op, self.shape(a), self.shape(b)));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let value = self.value(a).zip_map(self.value(b), |x, y| x + y);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let value = self.value(a).zip_map(self.value(b), |x, y| x - y);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::Sub(a, b), rg))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let value = self.value(a).zip_map(self.value(b), |x, y| x * y);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::Mul(a, b), rg))
    }

    /// Adds a `1×cols` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (r, c) = self.shape(a);
        if self.shape(row) != (1, c) {
            return Err(Error::shape("add_row", (r, c), self.shape(row)));
        }
        let mut value = self.value(a).clone();
        let bias = self.value(row).as_slice().to_vec();
        for i in 0..r {
            for (v, b) in value.row_mut(i).iter_mut().zip(&bias) {
                *v += b;
            }
        }
        let rg = self.rg(a) || self.rg(row);
        Ok(self.push(value, Op::AddRow(a, row), rg))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let value = self.value(a).map(|x| x * k);
        let rg = self.rg(a);
        self.push(value, Op::Scale(a, k), rg)
    }

    /// Multiplies `a` by the 1×1 tensor `s`.
    pub fn scale_by(&mut self, a: Var, s: Var) -> Result<Var> {
        if self.shape(s) != (1, 1) {
            return Err(Error::shape("scale_by", self.shape(a), self.shape(s)));
        }
        let k = self.value(s).item();
        let value = self.value(a).map(|x| x * k);
        let rg = self.rg(a) || self.rg(s);
        Ok(self.push(value, Op::ScaleBy(a, s), rg))
    }

    /// `out[i][j] = s[i] + t[j]` for column vectors `s` (n×1) and `t` (m×1).
    pub fn outer_sum(&mut self, s: Var, t: Var) -> Result<Var> {
        let (n, sc) = self.shape(s);
        let (m, tc) = self.shape(t);
        if sc != 1 || tc != 1 {
            return Err(Error::shape("outer_sum", (n, sc), (m, tc)));
        }
        let sv = self.value(s).as_slice();
        let tv = self.value(t).as_slice();
        let value = Matrix::from_fn(n, m, |i, j| sv[i] + tv[j]);
        let rg = self.rg(s) || self.rg(t);
        Ok(self.push(value, Op::OuterSum(s, t), rg))
    }

    pub fn elu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(elu);
        let rg = self.rg(a);
        self.push(value, Op::Elu(a), rg)
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        let value = self.value(a).map(|x| if x > 0.0 { x } else { slope * x });
        let rg = self.rg(a);
        self.push(value, Op::LeakyRelu(a, slope), rg)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).map(libm::tanh);
        let rg = self.rg(a);
        self.push(value, Op::Tanh(a), rg)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).map(sigmoid);
        let rg = self.rg(a);
        self.push(value, Op::Sigmoid(a), rg)
    }

    /// Row-wise softmax, optionally restricted to the set entries of `mask`.
    /// Masked entries come out as exactly zero.
    pub fn softmax(&mut self, a: Var, mask: Option<&BinaryMatrix>) -> Result<Var> {
        let x = self.value(a);
        if let Some(m) = mask {
            if m.shape() != x.shape() {
                return Err(Error::shape("softmax", x.shape(), m.shape()));
            }
        }
        let mut value = Matrix::zeros(x.rows(), x.cols());
        for i in 0..x.rows() {
            let keep = |j: usize| mask.is_none_or(|m| m.get(i, j));
            let row = x.row(i);
            let max = row
                .iter()
                .enumerate()
                .filter(|&(j, _)| keep(j))
                .fold(f64::NEG_INFINITY, |m, (_, &v)| m.max(v));
            if !(0..x.cols()).any(keep) {
                return Err(Error::Degenerate(format!("softmax row {i} is fully masked")));
            }
            let out = value.row_mut(i);
            let mut total = 0.0;
            for (j, (o, &v)) in out.iter_mut().zip(row).enumerate() {
                if keep(j) {
                    *o = libm::exp(v - max);
                    total += *o;
                }
            }
            for o in out.iter_mut() {
                *o /= total;
            }
        }
        let rg = self.rg(a);
        Ok(self.push(value, Op::Softmax(a), rg))
    }

    /// Scaled cosine error: mean over `rows` of `(1 − cos(x_v, y_v))^gamma`.
    ///
    /// Rows where either side has zero norm are dropped from the mean and
    /// reported in [`SceOutput::excluded`]. If nothing remains the call fails.
    pub fn sce_rows(&mut self, x: Var, y: Var, gamma: f64, rows: &[usize]) -> Result<SceOutput> {
        self.same_shape("sce_rows", x, y)?;
        if !(gamma >= 1.0) {
            return Err(Error::Parameter(format!("sce gamma must be >= 1, got {gamma}")));
        }
        let (xv, yv) = (self.value(x), self.value(y));
        let mut kept = Vec::with_capacity(rows.len());
        let mut total = 0.0;
        for &r in rows {
            if r >= xv.rows() {
                return Err(Error::Parameter(format!(
                    "sce row {r} out of range for {} rows",
                    xv.rows()
                )));
            }
            let (a, b) = (xv.row(r), yv.row(r));
            let (nx, ny) = (norm(a), norm(b));
            if nx == 0.0 || ny == 0.0 {
                continue;
            }
            let cos = dot(a, b) / (nx * ny).max(SCE_EPS);
            total += libm::pow((1.0 - cos).max(0.0), gamma);
            kept.push(r);
        }
        if kept.is_empty() {
            return Err(Error::Degenerate(format!(
                "all {} compared rows have zero norm",
                rows.len()
            )));
        }
        let included = kept.len();
        let value = Matrix::scalar(total / included as f64);
        let rg = self.rg(x) || self.rg(y);
        let loss = self.push(
            value,
            Op::Sce {
                x,
                y,
                gamma,
                rows: kept,
            },
            rg,
        );
        Ok(SceOutput {
            loss,
            included,
            excluded: rows.len() - included,
        })
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let value = Matrix::scalar(self.value(a).sum());
        let rg = self.rg(a);
        self.push(value, Op::Sum(a), rg)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let value = Matrix::scalar(v.sum() / v.len().max(1) as f64);
        let rg = self.rg(a);
        self.push(value, Op::Mean(a), rg)
    }

    /// Column means as a `1×cols` row.
    pub fn mean_rows(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let n = v.rows().max(1) as f64;
        let mut out = Matrix::zeros(1, v.cols());
        for row in v.iter_rows() {
            for (o, x) in out.as_mut_slice().iter_mut().zip(row) {
                *o += x;
            }
        }
        out.scale_assign(1.0 / n);
        let rg = self.rg(a);
        self.push(out, Op::MeanRows(a), rg)
    }

    /// Horizontal concatenation of equally tall tensors.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = parts.first().map_or(0, |&p| self.shape(p).0);
        for &p in parts {
            if self.shape(p).0 != rows {
                return Err(Error::shape("concat_cols", self.shape(parts[0]), self.shape(p)));
            }
        }
        let cols: usize = parts.iter().map(|&p| self.shape(p).1).sum();
        let mut value = Matrix::zeros(rows, cols);
        for r in 0..rows {
            let mut offset = 0;
            for &p in parts {
                let src = self.nodes[p.0].value.row(r);
                value.row_mut(r)[offset..offset + src.len()].copy_from_slice(src);
                offset += src.len();
            }
        }
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(value, Op::ConcatCols(parts.to_vec()), rg))
    }

    /// Single entry as a 1×1 tensor.
    pub fn element(&mut self, a: Var, r: usize, c: usize) -> Result<Var> {
        let (rows, cols) = self.shape(a);
        if r >= rows || c >= cols {
            return Err(Error::shape("element", (rows, cols), (r, c)));
        }
        let value = Matrix::scalar(self.value(a).get(r, c));
        let rg = self.rg(a);
        Ok(self.push(value, Op::Element(a, r, c), rg))
    }

    /// Copies `base` with each row in `rows` overwritten by the `1×cols`
    /// `token`. Gradient reaches the token from every replaced row and the
    /// base from every other row.
    pub fn replace_rows(&mut self, base: Var, rows: &[usize], token: Var) -> Result<Var> {
        let (n, c) = self.shape(base);
        if self.shape(token) != (1, c) {
            return Err(Error::shape("replace_rows", (n, c), self.shape(token)));
        }
        if let Some(&bad) = rows.iter().find(|&&r| r >= n) {
            return Err(Error::Parameter(format!("replace row {bad} out of range for {n} rows")));
        }
        let mut value = self.value(base).clone();
        let t = self.value(token).as_slice().to_vec();
        for &r in rows {
            value.row_mut(r).copy_from_slice(&t);
        }
        let rg = self.rg(base) || self.rg(token);
        Ok(self.push(
            value,
            Op::ReplaceRows {
                base,
                token,
                rows: rows.to_vec(),
            },
            rg,
        ))
    }

    /// Gradient of the last [`Tape::backward`] call with respect to `v`;
    /// zeros when no path connected `v` to the loss.
    pub fn grad(&self, v: Var) -> Matrix {
        match self.grads.get(v.0) {
            Some(Some(g)) => g.clone(),
            _ => {
                let (r, c) = self.shape(v);
                Matrix::zeros(r, c)
            }
        }
    }

    /// Reverse sweep from a scalar `loss`, summing contributions over all paths.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.shape(loss) != (1, 1) {
            return Err(Error::shape("backward", self.shape(loss), (1, 1)));
        }
        let mut grads: Vec<Option<Matrix>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Matrix::scalar(1.0));
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            if !self.nodes[idx].requires_grad {
                continue;
            }
            self.propagate(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        self.grads = grads;
        Ok(())
    }

    fn propagate(&self, idx: usize, g: &Matrix, grads: &mut [Option<Matrix>]) {
        let node = &self.nodes[idx];
        let val = |v: Var| &self.nodes[v.0].value;
        let mut acc = |v: Var, delta: Matrix| {
            if !self.nodes[v.0].requires_grad {
                return;
            }
            match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&delta),
                slot @ None => *slot = Some(delta),
            }
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.rg(*a) {
                    let mut ga = Matrix::zeros(val(*a).rows(), val(*a).cols());
                    gemm(g, false, val(*b), true, 0.0, &mut ga);
                    acc(*a, ga);
                }
                if self.rg(*b) {
                    let mut gb = Matrix::zeros(val(*b).rows(), val(*b).cols());
                    gemm(val(*a), true, g, false, 0.0, &mut gb);
                    acc(*b, gb);
                }
            }
            Op::MatMulNt(a, b) => {
                // out = a bᵀ: da = g b, db = gᵀ a
                if self.rg(*a) {
                    let mut ga = Matrix::zeros(val(*a).rows(), val(*a).cols());
                    gemm(g, false, val(*b), false, 0.0, &mut ga);
                    acc(*a, ga);
                }
                if self.rg(*b) {
                    let mut gb = Matrix::zeros(val(*b).rows(), val(*b).cols());
                    gemm(g, true, val(*a), false, 0.0, &mut gb);
                    acc(*b, gb);
                }
            }
            Op::Add(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.clone());
            }
            Op::Sub(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.map(|x| -x));
            }
            Op::Mul(a, b) => {
                if self.rg(*a) {
                    acc(*a, g.zip_map(val(*b), |x, y| x * y));
                }
                if self.rg(*b) {
                    acc(*b, g.zip_map(val(*a), |x, y| x * y));
                }
            }
            Op::AddRow(a, row) => {
                acc(*a, g.clone());
                if self.rg(*row) {
                    let mut gr = Matrix::zeros(1, g.cols());
                    for r in g.iter_rows() {
                        for (o, x) in gr.as_mut_slice().iter_mut().zip(r) {
                            *o += x;
                        }
                    }
                    acc(*row, gr);
                }
            }
            Op::Scale(a, k) => acc(*a, g.map(|x| x * k)),
            Op::ScaleBy(a, s) => {
                let k = val(*s).item();
                if self.rg(*a) {
                    acc(*a, g.map(|x| x * k));
                }
                if self.rg(*s) {
                    let d: f64 = dot(g.as_slice(), val(*a).as_slice());
                    acc(*s, Matrix::scalar(d));
                }
            }
            Op::OuterSum(s, t) => {
                if self.rg(*s) {
                    let gs: Vec<f64> = g.iter_rows().map(|r| r.iter().sum()).collect();
                    let n = gs.len();
                    acc(*s, Matrix::from_vec(n, 1, gs).expect("column"));
                }
                if self.rg(*t) {
                    let mut gt = Matrix::zeros(g.cols(), 1);
                    for r in g.iter_rows() {
                        for (o, x) in gt.as_mut_slice().iter_mut().zip(r) {
                            *o += x;
                        }
                    }
                    acc(*t, gt);
                }
            }
            Op::Elu(a) => {
                let y = &node.value;
                let gx = Matrix::from_fn(g.rows(), g.cols(), |r, c| {
                    let x = val(*a).get(r, c);
                    g.get(r, c) * if x > 0.0 { 1.0 } else { y.get(r, c) + 1.0 }
                });
                acc(*a, gx);
            }
            Op::LeakyRelu(a, slope) => {
                let gx = g.zip_map(val(*a), |gv, x| if x > 0.0 { gv } else { gv * slope });
                acc(*a, gx);
            }
            Op::Tanh(a) => acc(*a, g.zip_map(&node.value, |gv, y| gv * (1.0 - y * y))),
            Op::Sigmoid(a) => acc(*a, g.zip_map(&node.value, |gv, y| gv * y * (1.0 - y))),
            Op::Softmax(a) => {
                let y = &node.value;
                let mut gx = Matrix::zeros(y.rows(), y.cols());
                for i in 0..y.rows() {
                    let (yr, gr) = (y.row(i), g.row(i));
                    let inner = dot(yr, gr);
                    for ((o, &yv), &gv) in gx.row_mut(i).iter_mut().zip(yr).zip(gr) {
                        *o = yv * (gv - inner);
                    }
                }
                acc(*a, gx);
            }
            Op::Sce { x, y, gamma, rows } => {
                let scale = g.item() / rows.len() as f64;
                let (xv, yv) = (val(*x), val(*y));
                let mut gx = Matrix::zeros(xv.rows(), xv.cols());
                let mut gy = Matrix::zeros(yv.rows(), yv.cols());
                for &r in rows {
                    let (a, b) = (xv.row(r), yv.row(r));
                    let (na, nb) = (norm(a), norm(b));
                    let d = dot(a, b);
                    let denom = na * nb;
                    let one_minus = 1.0 - d / denom.max(SCE_EPS);
                    if one_minus <= 0.0 {
                        continue;
                    }
                    // d/dcos of (1 − cos)^γ
                    let dl_dcos = -gamma * libm::pow(one_minus, gamma - 1.0) * scale;
                    if denom >= SCE_EPS {
                        let cos = d / denom;
                        for (k, o) in gx.row_mut(r).iter_mut().enumerate() {
                            *o = dl_dcos * (b[k] / denom - cos * a[k] / (na * na));
                        }
                        for (k, o) in gy.row_mut(r).iter_mut().enumerate() {
                            *o = dl_dcos * (a[k] / denom - cos * b[k] / (nb * nb));
                        }
                    } else {
                        for (k, o) in gx.row_mut(r).iter_mut().enumerate() {
                            *o = dl_dcos * b[k] / SCE_EPS;
                        }
                        for (k, o) in gy.row_mut(r).iter_mut().enumerate() {
                            *o = dl_dcos * a[k] / SCE_EPS;
                        }
                    }
                }
                if self.rg(*x) {
                    acc(*x, gx);
                }
                if self.rg(*y) {
                    acc(*y, gy);
                }
            }
            Op::Sum(a) => {
                let (r, c) = val(*a).shape();
                acc(*a, Matrix::filled(r, c, g.item()));
            }
            Op::Mean(a) => {
                let (r, c) = val(*a).shape();
                acc(*a, Matrix::filled(r, c, g.item() / (r * c).max(1) as f64));
            }
            Op::MeanRows(a) => {
                let (r, c) = val(*a).shape();
                let inv = 1.0 / r.max(1) as f64;
                acc(*a, Matrix::from_fn(r, c, |_, j| g.get(0, j) * inv));
            }
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let (r, c) = val(p).shape();
                    if self.rg(p) {
                        acc(p, Matrix::from_fn(r, c, |i, j| g.get(i, offset + j)));
                    }
                    offset += c;
                }
            }
            Op::Element(a, r, c) => {
                let (rows, cols) = val(*a).shape();
                let mut ga = Matrix::zeros(rows, cols);
                ga.set(*r, *c, g.item());
                acc(*a, ga);
            }
            Op::ReplaceRows { base, token, rows } => {
                if self.rg(*token) {
                    let mut gt = Matrix::zeros(1, g.cols());
                    for &r in rows {
                        for (o, x) in gt.as_mut_slice().iter_mut().zip(g.row(r)) {
                            *o += x;
                        }
                    }
                    acc(*token, gt);
                }
                if self.rg(*base) {
                    let mut gb = g.clone();
                    for &r in rows {
                        gb.row_mut(r).iter_mut().for_each(|v| *v = 0.0);
                    }
                    acc(*base, gb);
                }
            }
        }
    }
}

pub fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        libm::expm1(x)
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}
