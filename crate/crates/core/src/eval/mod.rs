//! Downstream evaluation of frozen embeddings: logistic-regression probe,
//! k-means clustering, clustering agreement and edge ranking AUC.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::matrix::BinaryMatrix;
use crate::rng::{stream_rng, Rng, Stream};
use crate::{Error, Matrix, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub labels_per_class: usize,
    /// `None`: half of the nodes left after the training split.
    pub val_size: Option<usize>,
    /// `None`: every node left after training and validation.
    pub test_size: Option<usize>,
    /// Number of repetitions (splits and k-means seeds).
    pub seeds: usize,
    pub restarts: usize,
    /// Candidate L2 strengths for the probe, chosen on validation.
    pub l2_grid: Vec<f64>,
    pub probe_max_iter: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            labels_per_class: 20,
            val_size: None,
            test_size: None,
            seeds: 10,
            restarts: 10,
            l2_grid: vec![1e-3, 1e-2, 1e-1, 1.0],
            probe_max_iter: 2000,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.labels_per_class == 0 || self.seeds == 0 || self.restarts == 0 {
            return Err(Error::Config(
                "eval.labels_per_class, eval.seeds and eval.restarts must be >= 1".into(),
            ));
        }
        if self.l2_grid.is_empty() || self.l2_grid.iter().any(|&l| !(l >= 0.0) || !l.is_finite()) {
            return Err(Error::Config(
                "eval.l2_grid must be a non-empty list of values >= 0".into(),
            ));
        }
        if self.probe_max_iter == 0 {
            return Err(Error::Config("eval.probe_max_iter must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    pub labels_per_class: usize,
}

pub fn class_count(labels: &[usize]) -> usize {
    labels.iter().max().map_or(0, |&m| m + 1)
}

/// `labels_per_class` training nodes drawn per class, then validation and
/// test drawn uniformly from the rest. Each list is sorted.
pub fn make_splits(
    labels: &[usize],
    labels_per_class: usize,
    val_size: Option<usize>,
    test_size: Option<usize>,
    rng: &mut Rng,
) -> Result<Split> {
    let classes = class_count(labels);
    let mut train = Vec::with_capacity(classes * labels_per_class);
    let mut rest = Vec::new();
    for c in 0..classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        if members.len() < labels_per_class {
            return Err(Error::Protocol(format!(
                "class {c} has {} nodes, fewer than {labels_per_class} labels per class",
                members.len()
            )));
        }
        members.shuffle(rng);
        train.extend_from_slice(&members[..labels_per_class]);
        rest.extend_from_slice(&members[labels_per_class..]);
    }
    rest.sort_unstable();
    rest.shuffle(rng);
    let val_size = val_size.unwrap_or(rest.len() / 2);
    let test_size = test_size.unwrap_or(rest.len().saturating_sub(val_size));
    if val_size + test_size > rest.len() || val_size == 0 || test_size == 0 {
        return Err(Error::Protocol(format!(
            "{} training nodes leave {} for validation ({val_size}) and test ({test_size})",
            train.len(),
            rest.len()
        )));
    }
    let mut val = rest[..val_size].to_vec();
    let mut test = rest[val_size..val_size + test_size].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Ok(Split {
        train,
        val,
        test,
        labels_per_class,
    })
}

/// Multinomial logistic regression `softmax(x W + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    pub weight: Matrix,
    pub bias: Vec<f64>,
    /// Per-feature shift and scale fitted on the training rows.
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl LogisticModel {
    pub fn probabilities(&self, x: &Matrix) -> Matrix {
        let z = standardize(x, &self.mean, &self.scale);
        let mut logits = z.matmul(&self.weight).expect("probe width");
        for row in 0..logits.rows() {
            let r = logits.row_mut(row);
            for (v, b) in r.iter_mut().zip(&self.bias) {
                *v += b;
            }
            softmax_in_place(r);
        }
        logits
    }

    pub fn predict(&self, x: &Matrix) -> Vec<usize> {
        argmax_rows(&self.probabilities(x))
    }
}

fn softmax_in_place(r: &mut [f64]) {
    let max = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in r.iter_mut() {
        *v = libm::exp(*v - max);
        total += *v;
    }
    for v in r.iter_mut() {
        *v /= total;
    }
}

fn argmax_rows(m: &Matrix) -> Vec<usize> {
    m.iter_rows()
        .map(|r| {
            let mut best = 0;
            for (j, &v) in r.iter().enumerate() {
                if v > r[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

fn standardize(x: &Matrix, mean: &[f64], scale: &[f64]) -> Matrix {
    Matrix::from_fn(x.rows(), x.cols(), |i, j| (x.get(i, j) - mean[j]) / scale[j])
}

/// Full-batch accelerated gradient descent on mean cross-entropy plus
/// `l2/2 ·‖W‖²` (bias unpenalised), from zero, with step `1/L` for the
/// standard smoothness bound `L = ½·λmax(ZᵀZ/n) + l2`.
pub fn fit_logistic(x: &Matrix, labels: &[usize], classes: usize, l2: f64, max_iter: usize) -> Result<LogisticModel> {
    let n = x.rows();
    if n == 0 || labels.len() != n {
        return Err(Error::Protocol(format!("{} rows for {} labels", n, labels.len())));
    }
    let d = x.cols();
    let mut mean = vec![0.0; d];
    let mut scale = vec![0.0; d];
    for row in x.iter_rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v / n as f64;
        }
    }
    for row in x.iter_rows() {
        for ((s, m), v) in scale.iter_mut().zip(&mean).zip(row) {
            *s += (v - m) * (v - m) / n as f64;
        }
    }
    for s in &mut scale {
        *s = if *s > 1e-24 { libm::sqrt(*s) } else { 1.0 };
    }
    let z = standardize(x, &mean, &scale);
    // Frobenius norm bounds the top eigenvalue; bias column adds n.
    let frob: f64 = z.as_slice().iter().map(|v| v * v).sum::<f64>() + n as f64;
    let lipschitz = 0.5 * frob / n as f64 + l2;
    let step = 1.0 / lipschitz;

    let mut w = Matrix::zeros(d, classes);
    let mut b = vec![0.0; classes];
    let (mut w_prev, mut b_prev) = (w.clone(), b.clone());
    let mut t_prev = 1.0f64;
    for _ in 0..max_iter {
        let t = 0.5 * (1.0 + libm::sqrt(1.0 + 4.0 * t_prev * t_prev));
        let mom = (t_prev - 1.0) / t;
        let yw = w.zip_map(&w_prev, |a, p| a + mom * (a - p));
        let yb: Vec<f64> = b.iter().zip(&b_prev).map(|(a, p)| a + mom * (a - p)).collect();

        let mut probs = z.matmul(&yw)?;
        for i in 0..n {
            let r = probs.row_mut(i);
            for (v, bb) in r.iter_mut().zip(&yb) {
                *v += bb;
            }
            softmax_in_place(r);
            r[labels[i]] -= 1.0;
        }
        probs.scale_assign(1.0 / n as f64);
        let mut gw = z.matmul_tn(&probs)?;
        gw.add_assign(&yw.map(|v| l2 * v));
        let gb: Vec<f64> = (0..classes).map(|c| (0..n).map(|i| probs.get(i, c)).sum()).collect();

        w_prev = w;
        b_prev = b;
        w = yw.zip_map(&gw, |p, g| p - step * g);
        b = yb.iter().zip(&gb).map(|(p, g)| p - step * g).collect();
        t_prev = t;

        let gnorm = gw.as_slice().iter().chain(&gb).map(|g| g * g).sum::<f64>();
        if gnorm < 1e-16 {
            break;
        }
    }
    Ok(LogisticModel {
        weight: w,
        bias: b,
        mean,
        scale,
    })
}

pub fn micro_f1(pred: &[usize], truth: &[usize]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    pred.iter().zip(truth).filter(|(p, t)| p == t).count() as f64 / truth.len() as f64
}

/// Unweighted mean of per-class F1 over `classes` (0/0 counts as 0).
pub fn macro_f1(pred: &[usize], truth: &[usize], classes: usize) -> f64 {
    let mut total = 0.0;
    for c in 0..classes {
        let tp = pred.iter().zip(truth).filter(|&(&p, &t)| p == c && t == c).count() as f64;
        let fp = pred.iter().zip(truth).filter(|&(&p, &t)| p == c && t != c).count() as f64;
        let fn_ = pred.iter().zip(truth).filter(|&(&p, &t)| p != c && t == c).count() as f64;
        let denom = 2.0 * tp + fp + fn_;
        total += if denom > 0.0 { 2.0 * tp / denom } else { 0.0 };
    }
    total / classes.max(1) as f64
}

/// Ranking AUC (Mann-Whitney, ties count half). `None` unless both classes occur.
pub fn auc_score(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // Average 1-based rank of the tie block.
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            if positive[k] {
                rank_sum += rank;
            }
        }
        i = j + 1;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos * n_neg) as f64)
}

/// Mean one-vs-rest AUC over classes that have both positives and negatives.
pub fn macro_ovr_auc(probs: &Matrix, truth: &[usize]) -> Option<f64> {
    let mut total = 0.0;
    let mut used = 0;
    for c in 0..probs.cols() {
        let scores: Vec<f64> = (0..probs.rows()).map(|i| probs.get(i, c)).collect();
        let pos: Vec<bool> = truth.iter().map(|&t| t == c).collect();
        if let Some(a) = auc_score(&scores, &pos) {
            total += a;
            used += 1;
        }
    }
    (used > 0).then(|| total / used as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub auc: f64,
    /// L2 strength picked on the validation split.
    pub l2: f64,
    pub val_micro_f1: f64,
}

/// Fits the probe on `split.train` for each L2 candidate, keeps the best
/// validation Micro-F1 (first on ties) and scores the test split.
pub fn linear_probe(
    h: &Matrix,
    split: &Split,
    labels: &[usize],
    l2_grid: &[f64],
    max_iter: usize,
) -> Result<ClassificationReport> {
    if labels.len() != h.rows() {
        return Err(Error::Protocol(format!(
            "{} labels for {} embedding rows",
            labels.len(),
            h.rows()
        )));
    }
    let classes = class_count(labels);
    let train_labels: Vec<usize> = split.train.iter().map(|&i| labels[i]).collect();
    if train_labels.iter().collect::<BTreeSet<_>>().len() < 2 {
        return Err(Error::Protocol("training split holds a single class".into()));
    }
    if l2_grid.is_empty() {
        return Err(Error::Config("empty L2 grid".into()));
    }
    let (xtr, xval, xte) = (
        h.select_rows(&split.train),
        h.select_rows(&split.val),
        h.select_rows(&split.test),
    );
    let val_labels: Vec<usize> = split.val.iter().map(|&i| labels[i]).collect();
    let test_labels: Vec<usize> = split.test.iter().map(|&i| labels[i]).collect();

    let mut best: Option<(f64, f64, LogisticModel)> = None;
    for &l2 in l2_grid {
        let model = fit_logistic(&xtr, &train_labels, classes, l2, max_iter)?;
        let score = micro_f1(&model.predict(&xval), &val_labels);
        if best.as_ref().is_none_or(|(s, _, _)| score > *s) {
            best = Some((score, l2, model));
        }
    }
    let (val_micro_f1, l2, model) = best.expect("non-empty grid");
    let probs = model.probabilities(&xte);
    let pred = argmax_rows(&probs);
    Ok(ClassificationReport {
        micro_f1: micro_f1(&pred, &test_labels),
        macro_f1: macro_f1(&pred, &test_labels, classes),
        auc: macro_ovr_auc(&probs, &test_labels).unwrap_or(0.5),
        l2,
        val_micro_f1,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub assignment: Vec<usize>,
    pub centroids: Matrix,
    pub inertia: f64,
    /// Inertia after each Lloyd iteration of the winning restart.
    pub trace: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn kmeans_pp(h: &Matrix, k: usize, rng: &mut Rng) -> Matrix {
    let n = h.rows();
    let mut centers = Matrix::zeros(k, h.cols());
    let first = rng.gen_range(0..n);
    centers.row_mut(0).copy_from_slice(h.row(first));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(h.row(i), centers.row(0))).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.gen_range(0..n)
        };
        centers.row_mut(c).copy_from_slice(h.row(pick));
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(h.row(i), centers.row(c)));
        }
    }
    centers
}

fn assign(h: &Matrix, centers: &Matrix) -> (Vec<usize>, f64) {
    let mut inertia = 0.0;
    let assignment = h
        .iter_rows()
        .map(|row| {
            let mut best = (0, f64::INFINITY);
            for c in 0..centers.rows() {
                let d = sq_dist(row, centers.row(c));
                if d < best.1 {
                    best = (c, d);
                }
            }
            inertia += best.1;
            best.0
        })
        .collect();
    (assignment, inertia)
}

/// Lloyd iterations from k-means++ seeds; the lowest-inertia restart wins.
/// An emptied cluster is moved to the point farthest from its centroid.
pub fn kmeans_cluster(h: &Matrix, k: usize, restarts: usize, rng: &mut Rng) -> Result<KMeansResult> {
    let n = h.rows();
    if k == 0 || k > n {
        return Err(Error::Parameter(format!("k = {k} must be in [1, {n}]")));
    }
    if restarts == 0 {
        return Err(Error::Parameter("k-means needs at least one restart".into()));
    }
    let mut best: Option<KMeansResult> = None;
    for _ in 0..restarts {
        let mut centers = kmeans_pp(h, k, rng);
        let (mut assignment, mut inertia) = assign(h, &centers);
        let mut trace = vec![inertia];
        for _ in 0..300 {
            let mut sums = Matrix::zeros(k, h.cols());
            let mut counts = vec![0usize; k];
            for (i, &c) in assignment.iter().enumerate() {
                counts[c] += 1;
                for (s, v) in sums.row_mut(c).iter_mut().zip(h.row(i)) {
                    *s += v;
                }
            }
            for (c, &count) in counts.iter().enumerate() {
                if count > 0 {
                    for (dst, s) in centers.row_mut(c).iter_mut().zip(sums.row(c)) {
                        *dst = s / count as f64;
                    }
                }
            }
            for c in 0..k {
                if counts[c] == 0 {
                    let far = (0..n)
                        .max_by(|&a, &b| {
                            let da = sq_dist(h.row(a), centers.row(assignment[a]));
                            let db = sq_dist(h.row(b), centers.row(assignment[b]));
                            da.total_cmp(&db)
                        })
                        .expect("n >= 1");
                    let row = h.row(far).to_vec();
                    centers.row_mut(c).copy_from_slice(&row);
                    counts[assignment[far]] -= 1;
                    assignment[far] = c;
                    counts[c] = 1;
                }
            }
            let (next, next_inertia) = assign(h, &centers);
            let stable = next == assignment;
            assignment = next;
            inertia = next_inertia;
            trace.push(inertia);
            if stable {
                break;
            }
        }
        if best.as_ref().is_none_or(|b| inertia < b.inertia) {
            best = Some(KMeansResult {
                assignment,
                centroids: centers,
                inertia,
                trace,
            });
        }
    }
    Ok(best.expect("restarts >= 1"))
}

fn contingency(pred: &[usize], truth: &[usize]) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
    let (kp, kt) = (class_count(pred), class_count(truth));
    let mut table = vec![vec![0.0; kt]; kp];
    for (&p, &t) in pred.iter().zip(truth) {
        table[p][t] += 1.0;
    }
    let rows = table.iter().map(|r| r.iter().sum()).collect();
    let cols = (0..kt).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    (table, rows, cols)
}

fn entropy(counts: &[f64], n: f64) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| -(c / n) * libm::log(c / n))
        .sum()
}

fn comb2(x: f64) -> f64 {
    x * (x - 1.0) / 2.0
}

/// NMI with arithmetic-mean normalisation and the adjusted Rand index.
/// Two single-cluster partitions score (1, 1).
pub fn nmi_ari(pred: &[usize], truth: &[usize]) -> Result<(f64, f64)> {
    if pred.is_empty() || pred.len() != truth.len() {
        return Err(Error::Parameter(format!(
            "partitions must be non-empty and equally long ({} vs {})",
            pred.len(),
            truth.len()
        )));
    }
    let n = pred.len() as f64;
    let (table, a, b) = contingency(pred, truth);
    let (ha, hb) = (entropy(&a, n), entropy(&b, n));
    let mut mi = 0.0;
    for (i, row) in table.iter().enumerate() {
        for (j, &nij) in row.iter().enumerate() {
            if nij > 0.0 {
                mi += nij / n * libm::log(n * nij / (a[i] * b[j]));
            }
        }
    }
    let nmi = if ha == 0.0 && hb == 0.0 {
        1.0
    } else {
        (2.0 * mi / (ha + hb)).clamp(0.0, 1.0)
    };

    let index: f64 = table.iter().flatten().map(|&v| comb2(v)).sum();
    let sa: f64 = a.iter().map(|&v| comb2(v)).sum();
    let sb: f64 = b.iter().map(|&v| comb2(v)).sum();
    let expected = sa * sb / comb2(n).max(f64::MIN_POSITIVE);
    let max_index = 0.5 * (sa + sb);
    let ari = if max_index == expected {
        1.0
    } else {
        (index - expected) / (max_index - expected)
    };
    Ok((nmi, ari))
}

/// `count` distinct off-diagonal zero entries of `adjacency` (pairs with
/// `i < j` when it is symmetric), fewer if not enough exist.
pub fn sample_non_edges(adjacency: &BinaryMatrix, count: usize, rng: &mut Rng) -> Vec<(usize, usize)> {
    let n = adjacency.rows();
    let symmetric = adjacency.is_symmetric();
    let mut zeros: Vec<(usize, usize)> = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && !adjacency.get(i, j) && (!symmetric || i < j) {
                zeros.push((i, j));
            }
        }
    }
    if zeros.len() <= count {
        return zeros;
    }
    let mut picked: Vec<(usize, usize)> = rand::seq::index::sample(rng, zeros.len(), count)
        .into_iter()
        .map(|k| zeros[k])
        .collect();
    picked.sort_unstable();
    picked
}

/// AUC of `scores` with held-out edges as positives against non-edges.
/// `None` when either list is empty.
pub fn edge_auc(held_out: &[(usize, usize)], non_edges: &[(usize, usize)], scores: &Matrix) -> Option<f64> {
    if held_out.is_empty() || non_edges.is_empty() {
        return None;
    }
    let s: Vec<f64> = held_out
        .iter()
        .chain(non_edges)
        .map(|&(i, j)| scores.get(i, j))
        .collect();
    let pos: Vec<bool> = (0..s.len()).map(|k| k < held_out.len()).collect();
    auc_score(&s, &pos)
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, libm::sqrt(var))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let (mean, std) = mean_std(values);
        MeanStd { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationSummary {
    pub micro_f1: MeanStd,
    pub macro_f1: MeanStd,
    pub auc: MeanStd,
    pub runs: Vec<ClassificationReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringRun {
    pub nmi: f64,
    pub ari: f64,
    pub inertia: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringSummary {
    pub nmi: MeanStd,
    pub ari: MeanStd,
    pub k: usize,
    pub runs: Vec<ClusteringRun>,
}

/// Probe over `cfg.seeds` stratified splits, or over the given fixed split.
pub fn classification_protocol(
    h: &Matrix,
    labels: &[usize],
    fixed_split: Option<&Split>,
    cfg: &EvalConfig,
    seed: u64,
) -> Result<ClassificationSummary> {
    cfg.validate()?;
    let mut runs = Vec::new();
    match fixed_split {
        Some(split) => runs.push(linear_probe(h, split, labels, &cfg.l2_grid, cfg.probe_max_iter)?),
        None => {
            for s in 0..cfg.seeds {
                let mut rng = stream_rng(seed, Stream::Splits, s as u64);
                let split = make_splits(labels, cfg.labels_per_class, cfg.val_size, cfg.test_size, &mut rng)?;
                runs.push(linear_probe(h, &split, labels, &cfg.l2_grid, cfg.probe_max_iter)?);
            }
        }
    }
    let pick = |f: fn(&ClassificationReport) -> f64| MeanStd::of(&runs.iter().map(f).collect::<Vec<_>>());
    Ok(ClassificationSummary {
        micro_f1: pick(|r| r.micro_f1),
        macro_f1: pick(|r| r.macro_f1),
        auc: pick(|r| r.auc),
        runs,
    })
}

/// k-means with `k` = number of label classes, once per seed.
pub fn clustering_protocol(h: &Matrix, labels: &[usize], cfg: &EvalConfig, seed: u64) -> Result<ClusteringSummary> {
    cfg.validate()?;
    let k = class_count(labels);
    if k < 2 {
        return Err(Error::Protocol("clustering needs at least two classes".into()));
    }
    let mut runs = Vec::with_capacity(cfg.seeds);
    for s in 0..cfg.seeds {
        let mut rng = stream_rng(seed, Stream::KMeans, s as u64);
        let km = kmeans_cluster(h, k, cfg.restarts, &mut rng)?;
        let (nmi, ari) = nmi_ari(&km.assignment, labels)?;
        runs.push(ClusteringRun {
            nmi,
            ari,
            inertia: km.inertia,
        });
    }
    Ok(ClusteringSummary {
        nmi: MeanStd::of(&runs.iter().map(|r| r.nmi).collect::<Vec<_>>()),
        ari: MeanStd::of(&runs.iter().map(|r| r.ari).collect::<Vec<_>>()),
        k,
        runs,
    })
}
