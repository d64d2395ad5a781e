use super::*;
use crate::autodiff::grad_check_many;
use crate::encdec::{ModelDims, ParamGroup};
use crate::masking::{mask_edges, plan_attribute_mask};
use crate::matrix::BinaryMatrix;
use crate::rng::{stream_rng, Stream};
use alloc::vec;
use proptest::prelude::*;
use rand::Rng as _;

struct Fixture {
    params: ModelParams,
    views: Vec<MetapathView>,
    masks: Vec<EdgeMask>,
    x: Matrix,
    plan: AttributeMaskPlan,
    positions: Matrix,
}

fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = stream_rng(seed, Stream::Synthetic, 1);
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

fn view(name: &str, n: usize, f: impl Fn(usize, usize) -> bool) -> MetapathView {
    MetapathView {
        metapath_name: name.into(),
        adjacency: BinaryMatrix::from_fn(n, n, |i, j| i == j || f(i.min(j), i.max(j))),
    }
}

fn fixture(seed: u64, n: usize) -> Fixture {
    let dims = ModelDims {
        attr_dim: 3,
        hidden: 4,
        heads: 2,
        semantic_dim: 3,
        position_dim: 2,
    };
    let mut params = ModelParams::init(&dims, &mut stream_rng(seed, Stream::Init, 0)).unwrap();
    for (i, (_, m)) in params.entries_mut().into_iter().enumerate() {
        for (k, v) in m.as_mut_slice().iter_mut().enumerate() {
            if *v == 0.0 {
                *v = 0.2 * libm::cos((i * 17 + k) as f64);
            }
        }
    }
    let views = vec![
        view("A", n, |i, j| j - i == 1 || j - i == n - 1),
        view("B", n, |i, j| (i + j) % 3 == 0),
    ];
    let mut erng = stream_rng(seed, Stream::EdgeMask, 0);
    let masks = views.iter().map(|v| mask_edges(v, 0.3, &mut erng).unwrap()).collect();
    let plan = plan_attribute_mask(n, 0.5, 0.2, 0.2, &mut stream_rng(seed, Stream::AttributeMask, 0)).unwrap();
    Fixture {
        params,
        views,
        masks,
        x: random_matrix(n, 3, seed),
        plan,
        positions: random_matrix(n, 2, seed + 1),
    }
}

impl Fixture {
    fn inputs(&self, weights: LossWeights) -> LossInputs<'_> {
        LossInputs {
            views: &self.views,
            edge_masks: &self.masks,
            attributes: &self.x,
            plan: &self.plan,
            positions: &self.positions,
            weights,
            tar_target: TarTarget::Original,
        }
    }
}

fn sce_oracle(x: &Matrix, y: &Matrix, gamma: f64, rows: &[usize]) -> f64 {
    let mut total = 0.0;
    for &r in rows {
        let (a, b) = (x.row(r), y.row(r));
        let dot: f64 = a.iter().zip(b).map(|(p, q)| p * q).sum();
        let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        total += (1.0 - dot / (na * nb)).powf(gamma);
    }
    total / rows.len() as f64
}

#[test]
fn weights_validation() {
    assert!(LossWeights::default().validate().is_ok());
    assert!(matches!(
        LossWeights::new(0.0, 0.0, 0.0).validate(),
        Err(Error::Config(_))
    ));
    assert!(matches!(
        LossWeights::new(-1.0, 1.0, 1.0).validate(),
        Err(Error::Parameter(_))
    ));
    let w = LossWeights {
        gamma_tar: 0.5,
        ..LossWeights::default()
    };
    assert!(matches!(w.validate(), Err(Error::Parameter(_))));
}

#[test]
fn total_loss_examples() {
    let mut t = Tape::new();
    let (a, b, c) = (
        t.param(Matrix::scalar(0.2)),
        t.param(Matrix::scalar(0.3)),
        t.param(Matrix::scalar(0.5)),
    );
    let total = total_loss(&mut t, Some(a), Some(b), Some(c), &LossWeights::default()).unwrap();
    assert_eq!(t.value(total).item(), 0.2 + 0.3 + 0.5);
    let only_mer = total_loss(&mut t, Some(a), Some(b), Some(c), &LossWeights::new(1.0, 0.0, 0.0)).unwrap();
    assert_eq!(t.value(only_mer).item(), 0.2);
    assert!(matches!(
        total_loss(&mut t, Some(a), Some(b), Some(c), &LossWeights::new(0.0, 0.0, 0.0)),
        Err(Error::Config(_))
    ));
    assert!(matches!(
        total_loss(&mut t, Some(a), None, None, &LossWeights::new(1.0, -0.5, 0.0)),
        Err(Error::Parameter(_))
    ));
}

#[test]
fn single_metapath_mer_equals_its_loss() {
    let f = fixture(1, 6);
    let mut t = Tape::new();
    let pv = f.params.bind(&mut t);
    let x = t.constant(f.x.clone());
    let out = mer_loss(&mut t, &pv, &f.views[..1], &f.masks[..1], x, 2.0).unwrap();
    assert_eq!(t.value(out.alphas).as_slice(), &[1.0]);
    assert_eq!(t.value(out.loss).item(), t.value(out.per_metapath).get(0, 0));
}

#[test]
fn identical_metapaths_give_same_fused_loss() {
    let f = fixture(2, 6);
    let views = vec![f.views[0].clone(), f.views[0].clone()];
    let masks = vec![f.masks[0].clone(), f.masks[0].clone()];
    let mut t = Tape::new();
    let pv = f.params.bind(&mut t);
    let x = t.constant(f.x.clone());
    let out = mer_loss(&mut t, &pv, &views, &masks, x, 2.0).unwrap();
    let c = t.value(out.per_metapath).get(0, 0);
    assert!((t.value(out.loss).item() - c).abs() < 1e-15);
}

#[test]
fn mer_matches_direct_reconstruction_oracle() {
    let f = fixture(3, 7);
    let mut t = Tape::new();
    let pv = f.params.bind(&mut t);
    let x = t.constant(f.x.clone());
    let out = mer_loss(&mut t, &pv, &f.views, &f.masks, x, 2.0).unwrap();
    let rows: Vec<usize> = (0..7).collect();
    for (k, (v, m)) in f.views.iter().zip(&f.masks).enumerate() {
        let mut t2 = Tape::new();
        let pv2 = f.params.bind(&mut t2);
        let x2 = t2.constant(f.x.clone());
        let enc = encode(&mut t2, &pv2, &[&m.masked], x2).unwrap();
        let (_, rec) = decode_edges(&mut t2, &pv2, &m.masked, enc.fused).unwrap();
        let expect = sce_oracle(&v.adjacency.to_matrix(), t2.value(rec), 2.0, &rows);
        let got = t.value(out.per_metapath).get(0, k);
        assert!((got - expect).abs() < 1e-12, "{got} vs {expect}");
    }
}

#[test]
fn mer_requires_metapaths() {
    let f = fixture(3, 6);
    let mut t = Tape::new();
    let pv = f.params.bind(&mut t);
    let x = t.constant(f.x.clone());
    assert!(matches!(mer_loss(&mut t, &pv, &[], &[], x, 2.0), Err(Error::Config(_))));
}

#[test]
fn perfect_and_orthogonal_reconstruction() {
    let mut t = Tape::new();
    let a = BinaryMatrix::from_fn(3, 3, |i, j| i == j || i + j == 1).to_matrix();
    let mut scaled = a.clone();
    scaled.scale_assign(0.37);
    let (av, sv) = (t.constant(a), t.constant(scaled));
    let out = t.sce_rows(av, sv, 2.0, &[0, 1, 2]).unwrap();
    assert!(t.value(out.loss).item() < 1e-30);

    let x = t.constant(Matrix::from_rows(&[[1.0, 0.0]]));
    let z = t.constant(Matrix::from_rows(&[[0.0, 3.0]]));
    let out = t.sce_rows(x, z, 2.0, &[0]).unwrap();
    assert_eq!(t.value(out.loss).item(), 1.0);
}

#[test]
fn tar_matches_oracle_on_masked_rows() {
    let f = fixture(4, 8);
    let mut t = Tape::new();
    let pv = f.params.bind(&mut t);
    let out = tar_loss(&mut t, &pv, &f.views, &f.x, &f.plan, 2.0, TarTarget::Original, true).unwrap();
    let loss = t.value(out.loss.unwrap()).item();

    let mut t2 = Tape::new();
    let pv2 = f.params.bind(&mut t2);
    let adj: Vec<_> = f.views.iter().map(|v| &v.adjacency).collect();
    let xt = apply_attribute_mask(&mut t2, &f.x, &f.plan, pv2.mask_token).unwrap();
    let h3 = encode(&mut t2, &pv2, &adj, xt).unwrap().fused;
    assert_eq!(t.value(out.h3), t2.value(h3));
    let h3m = remask_latent(&mut t2, h3, &f.plan.masked, pv2.dm_token).unwrap();
    let z = decode_attributes(&mut t2, &pv2, &adj, h3m).unwrap();
    let expect = sce_oracle(&f.x, t2.value(z), 2.0, &f.plan.masked);
    assert!((loss - expect).abs() < 1e-12);
}

#[test]
fn tar_literal_target_compares_corrupted_rows() {
    let f = fixture(5, 8);
    let mut t = Tape::new();
    let pv = f.params.bind(&mut t);
    let out = tar_loss(&mut t, &pv, &f.views, &f.x, &f.plan, 2.0, TarTarget::Literal, true).unwrap();
    let mut t2 = Tape::new();
    let pv2 = f.params.bind(&mut t2);
    let adj: Vec<_> = f.views.iter().map(|v| &v.adjacency).collect();
    let xt = apply_attribute_mask(&mut t2, &f.x, &f.plan, pv2.mask_token).unwrap();
    let h3 = encode(&mut t2, &pv2, &adj, xt).unwrap().fused;
    let h3m = remask_latent(&mut t2, h3, &f.plan.masked, pv2.dm_token).unwrap();
    let z = decode_attributes(&mut t2, &pv2, &adj, h3m).unwrap();
    let expect = sce_oracle(t2.value(xt), t2.value(z), 2.0, &f.plan.masked);
    assert!((t.value(out.loss.unwrap()).item() - expect).abs() < 1e-12);
}

#[test]
fn tar_without_decoding_only_encodes() {
    let f = fixture(5, 8);
    let mut t = Tape::new();
    let pv = f.params.bind(&mut t);
    let out = tar_loss(&mut t, &pv, &f.views, &f.x, &f.plan, 2.0, TarTarget::Original, false).unwrap();
    assert!(out.loss.is_none());
    assert_eq!(t.shape(out.h3), (8, 4));
}

#[test]
fn tar_gradient_reaches_both_tokens() {
    let f = fixture(6, 8);
    assert!(!f.plan.token_rows.is_empty());
    let inputs = vec![f.params.mask_token.clone(), f.params.dm_token.clone()];
    let report = grad_check_many(
        |t, v| {
            let mut pv = f.params.bind(t);
            pv.mask_token = v[0];
            pv.dm_token = v[1];
            let out = tar_loss(t, &pv, &f.views, &f.x, &f.plan, 2.0, TarTarget::Original, true)?;
            Ok(out.loss.unwrap())
        },
        &inputs,
        1e-6,
    )
    .unwrap();
    assert!(report.passes(1e-4), "{report:?}");

    let mut t = Tape::new();
    let pv = f.params.bind(&mut t);
    let out = tar_loss(&mut t, &pv, &f.views, &f.x, &f.plan, 2.0, TarTarget::Original, true).unwrap();
    t.backward(out.loss.unwrap()).unwrap();
    assert!(t.grad(pv.mask_token).max_abs() > 0.0);
    assert!(t.grad(pv.dm_token).max_abs() > 0.0);
}

#[test]
fn pfp_examples() {
    let f = fixture(7, 6);
    let mut t = Tape::new();
    let pv = f.params.bind(&mut t);
    let h3 = t.constant(random_matrix(6, 4, 70));
    let out = pfp_loss(&mut t, &pv, h3, &f.positions, 2.0).unwrap();
    let predicted = predict_positions(&mut t, &pv, h3).unwrap();
    let expect = sce_oracle(&f.positions, t.value(predicted), 2.0, &[0, 1, 2, 3, 4, 5]);
    assert!((t.value(out.loss).item() - expect).abs() < 1e-14);

    // Zero hidden weights make P' the output bias; choose P = -bias.
    let mut p = f.params.clone();
    p.mlp_output.weight = Matrix::zeros(4, 2);
    p.mlp_output.bias = Matrix::row_vector(&[0.6, -0.8]);
    let target = Matrix::from_fn(6, 2, |_, c| if c == 0 { -0.6 } else { 0.8 });
    let mut t = Tape::new();
    let pv = p.bind(&mut t);
    let h3 = t.constant(random_matrix(6, 4, 71));
    let out = pfp_loss(&mut t, &pv, h3, &target, 1.0).unwrap();
    assert!((t.value(out.loss).item() - 2.0).abs() < 1e-15);
    let mut same = target.clone();
    same.scale_assign(-2.0);
    let out = pfp_loss(&mut t, &pv, h3, &same, 1.0).unwrap();
    assert!(t.value(out.loss).item().abs() < 1e-15);
}

#[test]
fn report_total_is_exact_weighted_sum() {
    let f = fixture(8, 8);
    let w = LossWeights::new(0.7, 1.3, 0.4);
    let mut t = Tape::new();
    let pv = f.params.bind(&mut t);
    let (total, r) = compute_losses(&mut t, &pv, &f.inputs(w)).unwrap();
    assert_eq!(r.total, t.value(total).item());
    assert_eq!(r.total, 0.7 * r.mer + 1.3 * r.tar + 0.4 * r.pfp);
    assert!(r.mer >= 0.0 && r.tar >= 0.0 && r.pfp >= 0.0);
    assert_eq!(r.per_metapath.len(), 2);
    let alpha_sum: f64 = r.per_metapath.iter().map(|m| m.alpha).sum();
    assert!((alpha_sum - 1.0).abs() < 1e-12);
    assert_eq!(r.p_a, 0.5);
}

#[test]
fn total_gradient_matches_finite_differences_for_every_tensor() {
    let f = fixture(9, 6);
    let inputs: Vec<Matrix> = f.params.entries().into_iter().map(|(_, m)| m.clone()).collect();
    let report = grad_check_many(
        |t, v| {
            let mut it = v.iter();
            let pv = f.params.map(|_, _| *it.next().unwrap());
            Ok(compute_losses(t, &pv, &f.inputs(LossWeights::default()))?.0)
        },
        &inputs,
        1e-5,
    )
    .unwrap();
    assert!(report.passes(1e-4), "{report:?}");

    // Every tensor, including both tokens and the loss-fusion set, is reached.
    let mut t = Tape::new();
    let pv = f.params.bind(&mut t);
    let (total, _) = compute_losses(&mut t, &pv, &f.inputs(LossWeights::default())).unwrap();
    t.backward(total).unwrap();
    for ((name, _), (_, var)) in f.params.entries().into_iter().zip(pv.entries()) {
        assert!(t.grad(*var).max_abs() > 0.0, "{name} has zero gradient");
    }
}

fn grads_by_group(f: &Fixture, w: LossWeights) -> Vec<(String, ParamGroup, f64)> {
    let mut t = Tape::new();
    let pv = f.params.bind(&mut t);
    let (total, _) = compute_losses(&mut t, &pv, &f.inputs(w)).unwrap();
    t.backward(total).unwrap();
    f.params
        .entries()
        .into_iter()
        .zip(pv.entries())
        .map(|((name, _), (_, var))| {
            let g = t.grad(*var).max_abs();
            (name.clone(), ParamGroup::of(&name), g)
        })
        .collect()
}

#[test]
fn ablation_isolates_decoders() {
    let f = fixture(10, 8);
    for (w, group) in [
        (LossWeights::new(0.0, 1.0, 1.0), ParamGroup::EdgeDecoder),
        (LossWeights::new(1.0, 0.0, 1.0), ParamGroup::AttrDecoder),
        (LossWeights::new(1.0, 1.0, 0.0), ParamGroup::PositionDecoder),
    ] {
        for (name, g, mag) in grads_by_group(&f, w) {
            if g == group {
                assert_eq!(mag, 0.0, "{name} under {w:?}");
            }
        }
    }
    for (name, g, mag) in grads_by_group(&f, LossWeights::new(0.0, 1.0, 1.0)) {
        if g == ParamGroup::LossFusion {
            assert_eq!(mag, 0.0, "{name}");
        }
    }
}

#[test]
fn mer_only_touches_mer_path() {
    let f = fixture(11, 8);
    for (name, g, mag) in grads_by_group(&f, LossWeights::new(1.0, 0.0, 0.0)) {
        let on_path = matches!(g, ParamGroup::EdgeDecoder | ParamGroup::LossFusion)
            || name.starts_with("encoder.")
            || name.starts_with("type_projection");
        if !on_path {
            assert_eq!(mag, 0.0, "{name}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mer_lies_in_convex_hull(seed in 0u64..500) {
        let f = fixture(seed, 7);
        let mut t = Tape::new();
        let pv = f.params.bind(&mut t);
        let x = t.constant(f.x.clone());
        let out = mer_loss(&mut t, &pv, &f.views, &f.masks, x, 2.0).unwrap();
        let per = t.value(out.per_metapath).as_slice().to_vec();
        let lo = per.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = per.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let l = t.value(out.loss).item();
        prop_assert!(l >= lo - 1e-15 && l <= hi + 1e-15);
        let a = t.value(out.alphas);
        prop_assert!((a.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn components_non_negative(seed in 0u64..500, lambda in 0.0f64..2.0, mu in 0.0f64..2.0, eta in 0.1f64..2.0) {
        let f = fixture(seed, 6);
        let mut t = Tape::new();
        let pv = f.params.bind(&mut t);
        let (_, r) = compute_losses(&mut t, &pv, &f.inputs(LossWeights::new(lambda, mu, eta))).unwrap();
        prop_assert!(r.mer >= 0.0 && r.tar >= 0.0 && r.pfp >= 0.0);
        prop_assert_eq!(r.total, lambda * r.mer + mu * r.tar + eta * r.pfp);
    }
}
