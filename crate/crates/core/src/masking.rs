//! Stochastic corruption of the inputs: metapath edge masking, attribute
//! masking with a linearly increasing rate, leave-unchanged / replace, and
//! re-masking of latent rows before attribute decoding.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::hetgraph::MetapathView;
use crate::matrix::BinaryMatrix;
use crate::rng::Rng;
use crate::{Error, Matrix, Result};

/// Linear attribute-mask-rate schedule `min(min_rate + m·step, max_rate)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskSchedule {
    pub min_rate: f64,
    pub max_rate: f64,
    pub step: f64,
}

impl Default for MaskSchedule {
    fn default() -> Self {
        MaskSchedule {
            min_rate: 0.5,
            max_rate: 0.8,
            step: 0.005,
        }
    }
}

impl MaskSchedule {
    pub fn validate(&self) -> Result<()> {
        let in_unit = |v: f64| v > 0.0 && v <= 1.0;
        if !in_unit(self.min_rate) || !in_unit(self.max_rate) {
            return Err(Error::Parameter(format!(
                "mask rates must lie in (0, 1], got min {} max {}",
                self.min_rate, self.max_rate
            )));
        }
        if self.min_rate > self.max_rate {
            return Err(Error::Parameter(format!(
                "min mask rate {} exceeds max {}",
                self.min_rate, self.max_rate
            )));
        }
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(Error::Parameter(format!("mask step must be > 0, got {}", self.step)));
        }
        Ok(())
    }

    /// First epoch at which the cap is reached. The small slack keeps
    /// `(max − min)/step` from landing one epoch late through rounding.
    pub fn epochs_to_cap(&self) -> u64 {
        libm::ceil((self.max_rate - self.min_rate) / self.step - 1e-9).max(0.0) as u64
    }

    pub fn rate(&self, epoch: u64) -> f64 {
        if epoch >= self.epochs_to_cap() {
            return self.max_rate;
        }
        (self.min_rate + epoch as f64 * self.step).min(self.max_rate)
    }
}

pub fn schedule_rate(s: &MaskSchedule, epoch: u64) -> f64 {
    s.rate(epoch)
}

/// Result of masking one metapath view.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeMask {
    pub metapath_name: String,
    /// Keep mask `M`: false exactly at removed edge positions.
    pub keep: BinaryMatrix,
    /// `M ⊙ A`.
    pub masked: BinaryMatrix,
    /// Removed edges; one `(i, j)` with `i < j` per pair for symmetric views.
    pub held_out: Vec<(usize, usize)>,
}

/// Removes each off-diagonal edge independently with probability `p_e`.
/// Symmetric views are masked per unordered pair so the result stays
/// symmetric. Self-loops are never removed.
pub fn mask_edges(view: &MetapathView, p_e: f64, rng: &mut Rng) -> Result<EdgeMask> {
    if !(0.0..1.0).contains(&p_e) {
        return Err(Error::Parameter(format!("edge mask rate must be in [0, 1), got {p_e}")));
    }
    let a = &view.adjacency;
    let n = a.rows();
    let symmetric = a.is_symmetric();
    let mut keep = BinaryMatrix::full(n, n);
    let mut masked = a.clone();
    let mut held_out = Vec::new();
    for i in 0..n {
        let row = a.row(i);
        for (j, &edge) in row.iter().enumerate() {
            if i == j || !edge || (symmetric && j < i) {
                continue;
            }
            if rng.gen::<f64>() < p_e {
                keep.set(i, j, false);
                masked.set(i, j, false);
                if symmetric {
                    keep.set(j, i, false);
                    masked.set(j, i, false);
                }
                held_out.push((i, j));
            }
        }
    }
    Ok(EdgeMask {
        metapath_name: view.metapath_name.clone(),
        keep,
        masked,
        held_out,
    })
}

/// Which target rows are masked and how.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeMaskPlan {
    /// The masked set, ascending.
    pub masked: Vec<usize>,
    /// Rows that receive the learnable mask token.
    pub token_rows: Vec<usize>,
    /// Rows that keep their own attributes.
    pub unchanged_rows: Vec<usize>,
    /// `(row, donor)`: row takes the donor's original attributes.
    pub replaced_rows: Vec<(usize, usize)>,
    pub p_a: f64,
    pub p_u: f64,
    pub p_r: f64,
}

impl AttributeMaskPlan {
    /// Plan that masks nothing.
    pub fn empty() -> Self {
        AttributeMaskPlan {
            masked: Vec::new(),
            token_rows: Vec::new(),
            unchanged_rows: Vec::new(),
            replaced_rows: Vec::new(),
            p_a: 0.0,
            p_u: 0.0,
            p_r: 0.0,
        }
    }
}

/// Round half to even.
pub fn round_count(x: f64) -> usize {
    libm::rint(x).max(0.0) as usize
}

/// Partition sizes `(masked, unchanged, replaced, token)` for `n` target
/// nodes. Replaced rows are clipped so the three parts never exceed the
/// masked set.
pub fn plan_counts(n: usize, p_a: f64, p_u: f64, p_r: f64) -> (usize, usize, usize, usize) {
    let masked = round_count(p_a * n as f64).min(n);
    let unchanged = round_count(p_u * masked as f64).min(masked);
    let replaced = round_count(p_r * masked as f64).min(masked - unchanged);
    (masked, unchanged, replaced, masked - unchanged - replaced)
}

/// Samples the masked set uniformly without replacement and splits it into
/// unchanged, replaced and token rows.
pub fn plan_attribute_mask(n: usize, p_a: f64, p_u: f64, p_r: f64, rng: &mut Rng) -> Result<AttributeMaskPlan> {
    if !(p_a > 0.0 && p_a <= 1.0) {
        return Err(Error::Parameter(format!(
            "attribute mask rate must be in (0, 1], got {p_a}"
        )));
    }
    if !(p_u >= 0.0) || !(p_r >= 0.0) || p_u + p_r > 1.0 + 1e-12 {
        return Err(Error::Parameter(format!(
            "leave-unchanged {p_u} and replace {p_r} rates must be >= 0 with sum <= 1"
        )));
    }
    let (k, n_u, n_r, _) = plan_counts(n, p_a, p_u, p_r);
    if n_r > 0 && n < 2 {
        return Err(Error::Parameter("replacement needs at least two target nodes".into()));
    }
    let mut chosen = rand::seq::index::sample(rng, n, k).into_vec();
    chosen.shuffle(rng);
    let mut unchanged_rows = chosen[..n_u].to_vec();
    let mut replaced_rows: Vec<(usize, usize)> = chosen[n_u..n_u + n_r]
        .iter()
        .map(|&v| {
            let d = rng.gen_range(0..n - 1);
            (v, if d >= v { d + 1 } else { d })
        })
        .collect();
    let mut token_rows = chosen[n_u + n_r..].to_vec();
    chosen.sort_unstable();
    unchanged_rows.sort_unstable();
    replaced_rows.sort_unstable();
    token_rows.sort_unstable();
    Ok(AttributeMaskPlan {
        masked: chosen,
        token_rows,
        unchanged_rows,
        replaced_rows,
        p_a,
        p_u,
        p_r,
    })
}

/// `X̃`: token rows take the learnable token, replaced rows take their
/// donor's original row, every other row is `X` unchanged.
pub fn apply_attribute_mask(tape: &mut Tape, x: &Matrix, plan: &AttributeMaskPlan, mask_token: Var) -> Result<Var> {
    let n = x.rows();
    let oob = plan
        .token_rows
        .iter()
        .chain(&plan.unchanged_rows)
        .chain(plan.replaced_rows.iter().flat_map(|(a, b)| [a, b]))
        .find(|&&i| i >= n);
    if let Some(i) = oob {
        return Err(Error::Parameter(format!(
            "mask plan index {i} out of range for {n} rows"
        )));
    }
    if tape.shape(mask_token) != (1, x.cols()) {
        return Err(Error::shape("apply_attribute_mask", x.shape(), tape.shape(mask_token)));
    }
    let mut base = x.clone();
    for &(row, donor) in &plan.replaced_rows {
        base.row_mut(row).copy_from_slice(x.row(donor));
    }
    let base = tape.constant(base);
    if plan.token_rows.is_empty() {
        return Ok(base);
    }
    tape.replace_rows(base, &plan.token_rows, mask_token)
}

/// `H̃₃`: every masked row (whatever its sub-assignment) becomes the latent
/// mask token.
pub fn remask_latent(tape: &mut Tape, h3: Var, masked: &[usize], dm_token: Var) -> Result<Var> {
    if masked.is_empty() {
        return Ok(h3);
    }
    tape.replace_rows(h3, masked, dm_token)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Rng, Stream};
    use alloc::vec;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    fn rng(seed: u64) -> Rng {
        stream_rng(seed, Stream::AttributeMask, 0)
    }

    #[test]
    fn schedule_defaults() {
        let s = MaskSchedule::default();
        assert_eq!(s.rate(0), 0.5);
        assert!((s.rate(10) - 0.55).abs() < 1e-12);
        assert_eq!(s.rate(60), 0.8);
        assert_eq!(s.rate(1000), 0.8);
        assert_eq!(s.epochs_to_cap(), 60);
        assert!(MaskSchedule { min_rate: 0.9, ..s }.validate().is_err());
        assert!(MaskSchedule { step: 0.0, ..s }.validate().is_err());
    }

    proptest! {
        #[test]
        fn schedule_is_monotone_and_capped(min in 0.01f64..1.0, span in 0.0f64..0.5, step in 1e-4f64..0.1) {
            let s = MaskSchedule { min_rate: min, max_rate: (min + span).min(1.0), step };
            let mut prev = 0.0;
            for m in 0..400u64 {
                let r = s.rate(m);
                prop_assert!(r >= prev);
                prop_assert!(r <= s.max_rate);
                if m as f64 >= (s.max_rate - s.min_rate) / s.step {
                    prop_assert_eq!(r, s.max_rate);
                }
                prev = r;
            }
        }
    }

    fn ring_view(n: usize) -> MetapathView {
        MetapathView {
            metapath_name: "ring".into(),
            adjacency: BinaryMatrix::from_fn(n, n, |i, j| i == j || (i + 1) % n == j || (j + 1) % n == i),
        }
    }

    #[test]
    fn zero_rate_keeps_everything() {
        let v = ring_view(10);
        let m = mask_edges(&v, 0.0, &mut rng(1)).unwrap();
        assert_eq!(m.masked, v.adjacency);
        assert!(m.held_out.is_empty());
        assert!(matches!(mask_edges(&v, 1.0, &mut rng(1)), Err(Error::Parameter(_))));
    }

    #[test]
    fn symmetric_masking_stays_symmetric_and_keeps_loops() {
        let v = ring_view(50);
        for seed in 0..20 {
            let m = mask_edges(&v, 0.4, &mut rng(seed)).unwrap();
            assert!(m.masked.is_symmetric());
            for i in 0..50 {
                assert!(m.masked.get(i, i));
                for j in 0..50 {
                    assert_eq!(m.masked.get(i, j), m.keep.get(i, j) && v.adjacency.get(i, j));
                }
            }
            for &(i, j) in &m.held_out {
                assert!(i < j && v.adjacency.get(i, j) && !m.masked.get(i, j));
            }
        }
    }

    #[test]
    fn plan_counting_examples() {
        let p = plan_attribute_mask(100, 0.5, 0.0, 0.0, &mut rng(3)).unwrap();
        assert_eq!(p.masked.len(), 50);
        assert_eq!(p.token_rows, p.masked);
        let p = plan_attribute_mask(100, 0.5, 0.3, 0.1, &mut rng(3)).unwrap();
        assert_eq!(
            (p.unchanged_rows.len(), p.replaced_rows.len(), p.token_rows.len()),
            (15, 5, 30)
        );
        for &(row, donor) in &p.replaced_rows {
            assert_ne!(row, donor);
        }
        assert!(matches!(
            plan_attribute_mask(10, 0.5, 0.6, 0.5, &mut rng(3)),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn plan_partition_grid() {
        for a in 1..=10 {
            for u in 0..=10 {
                for r in 0..=(10 - u) {
                    let (p_a, p_u, p_r) = (a as f64 * 0.1, u as f64 * 0.1, r as f64 * 0.1);
                    let p = plan_attribute_mask(97, p_a, p_u, p_r, &mut rng(a * 100 + u * 10 + r)).unwrap();
                    let (k, n_u, n_r, n_t) = plan_counts(97, p_a, p_u, p_r);
                    assert_eq!(p.masked.len(), k);
                    assert_eq!(p.unchanged_rows.len(), n_u);
                    assert_eq!(p.replaced_rows.len(), n_r);
                    assert_eq!(p.token_rows.len(), n_t);
                    let mut union: Vec<usize> = p
                        .token_rows
                        .iter()
                        .chain(&p.unchanged_rows)
                        .copied()
                        .chain(p.replaced_rows.iter().map(|x| x.0))
                        .collect();
                    union.sort_unstable();
                    assert_eq!(union, p.masked, "parts must partition the masked set");
                }
            }
        }
    }

    #[test]
    fn apply_mask_examples() {
        let x = Matrix::from_fn(4, 3, |r, c| (r * 3 + c) as f64 + 1.0);
        let mut t = Tape::new();
        let tok = t.param(Matrix::zeros(1, 3));
        let out = apply_attribute_mask(&mut t, &x, &AttributeMaskPlan::empty(), tok).unwrap();
        assert_eq!(t.value(out), &x);

        let all = AttributeMaskPlan {
            masked: vec![0, 1, 2, 3],
            token_rows: vec![0, 1, 2, 3],
            ..AttributeMaskPlan::empty()
        };
        let out = apply_attribute_mask(&mut t, &x, &all, tok).unwrap();
        assert_eq!(t.value(out), &Matrix::zeros(4, 3));

        let swap = AttributeMaskPlan {
            masked: vec![0],
            replaced_rows: vec![(0, 2)],
            ..AttributeMaskPlan::empty()
        };
        let out = apply_attribute_mask(&mut t, &x, &swap, tok).unwrap();
        assert_eq!(t.value(out).row(0), x.row(2));
        assert_eq!(t.value(out).row(1), x.row(1));

        let bad = AttributeMaskPlan {
            masked: vec![9],
            token_rows: vec![9],
            ..AttributeMaskPlan::empty()
        };
        assert!(apply_attribute_mask(&mut t, &x, &bad, tok).is_err());
    }

    #[test]
    fn token_receives_gradient_from_every_token_row() {
        let x = Matrix::from_fn(5, 2, |r, c| r as f64 - c as f64);
        let mut t = Tape::new();
        let tok = t.param(Matrix::row_vector(&[0.5, -0.5]));
        let plan = plan_attribute_mask(5, 0.6, 0.0, 0.0, &mut rng(9)).unwrap();
        let out = apply_attribute_mask(&mut t, &x, &plan, tok).unwrap();
        let loss = t.sum(out);
        t.backward(loss).unwrap();
        assert_eq!(t.grad(tok).as_slice(), &[3.0, 3.0]);
    }

    #[test]
    fn remask_examples() {
        let h = Matrix::from_fn(3, 2, |r, c| (r + c) as f64 + 0.5);
        let mut t = Tape::new();
        let hv = t.param(h.clone());
        let dm = t.param(Matrix::row_vector(&[7.0, 8.0]));
        let same = remask_latent(&mut t, hv, &[], dm).unwrap();
        assert_eq!(t.value(same), &h);
        let zero_tok = t.param(Matrix::zeros(1, 2));
        let all = remask_latent(&mut t, hv, &[0, 1, 2], zero_tok).unwrap();
        assert_eq!(t.value(all), &Matrix::zeros(3, 2));
        let one = remask_latent(&mut t, hv, &[1], dm).unwrap();
        assert_eq!(t.value(one).row(1), &[7.0, 8.0]);
        assert_eq!(t.value(one).row(0), h.row(0));
    }

    proptest! {
        #[test]
        fn rows_outside_the_masked_set_are_bitwise_unchanged(
            seed in 0u64..1000, p_a in 0.05f64..1.0, p_u in 0.0f64..0.5, p_r in 0.0f64..0.5,
        ) {
            let x = Matrix::from_fn(23, 4, |r, c| libm::sin(r as f64 * 1.1 + c as f64 * 0.3));
            let plan = plan_attribute_mask(23, p_a, p_u, p_r, &mut rng(seed)).unwrap();
            let mut t = Tape::new();
            let tok = t.param(Matrix::filled(1, 4, 9.0));
            let out = apply_attribute_mask(&mut t, &x, &plan, tok).unwrap();
            for i in 0..23 {
                if plan.masked.binary_search(&i).is_err() || plan.unchanged_rows.contains(&i) {
                    let a: Vec<u64> = t.value(out).row(i).iter().map(|v| v.to_bits()).collect();
                    let b: Vec<u64> = x.row(i).iter().map(|v| v.to_bits()).collect();
                    prop_assert_eq!(a, b);
                }
            }
        }
    }
}
