use std::collections::BTreeMap;

use hgmae::config::{flatten, resolve, RunManifest};
use hgmae::dataset::write_dataset;
use hgmae::pipeline::{classify, dataset_split, run_pipeline};
use hgmae_core::eval::EvalConfig;
use hgmae_core::hetgraph::{generate_synthetic, HeteroGraph, SyntheticSpec};
use hgmae_core::Matrix;
use serde_json::json;

fn graph() -> HeteroGraph {
    let spec = SyntheticSpec {
        community_size: 12,
        aux_per_community: 20,
        attr_dim: 6,
        ..SyntheticSpec::default()
    };
    generate_synthetic(&spec).unwrap()
}

#[test]
fn dataset_split_drives_a_single_probe() {
    let mut g = graph();
    let mut splits = BTreeMap::new();
    splits.insert("train".to_string(), vec![0, 1, 12, 13, 24, 25]);
    splits.insert("val".to_string(), vec![2, 14, 26]);
    splits.insert("test".to_string(), vec![3, 4, 15, 16, 27, 28]);
    g.splits = Some(splits);
    let split = dataset_split(&g).unwrap().unwrap();
    assert_eq!(split.labels_per_class, 2);
    let labels = g.labels.clone().unwrap();
    let h = Matrix::from_fn(36, 3, |i, j| if labels[i] == j { 1.0 } else { 0.0 });
    let summary = classify(&h, &g, &EvalConfig::default(), 0).unwrap().unwrap();
    assert_eq!(summary.runs.len(), 1);
    assert_eq!(summary.micro_f1.mean, 1.0);

    g.splits.as_mut().unwrap().remove("val");
    assert!(dataset_split(&g).unwrap_err().message.contains("'val'"));
}

#[test]
fn unlabeled_dataset_skips_label_metrics_with_notice() {
    let mut g = graph();
    g.labels = None;
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    write_dataset(&data, &g).unwrap();
    let layer = flatten(json!({"max_epochs": 2, "hidden": 8, "semantic_dim": 4, "positions": {"dim": 4, "epochs": 1}}));
    let cfg = resolve(&[layer], Some(1)).unwrap();
    let mut lines = Vec::new();
    let mut log = |l: &str| lines.push(l.to_string());
    let report = run_pipeline(&RunManifest::new(&data, &cfg), &tmp.path().join("run"), Some(&mut log)).unwrap();
    assert!(report.classification.is_none() && report.clustering.is_none());
    assert!(report.notices.iter().any(|n| n.contains("no labels")));
    assert!(report.edges.is_some());
    assert!(lines.iter().any(|l| l.starts_with("epoch")));
}

#[test]
fn zero_edge_mask_rate_reports_skipped_diagnostic() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    write_dataset(&data, &graph()).unwrap();
    let layer = flatten(json!({"p_e": 0.0, "max_epochs": 1, "hidden": 8, "semantic_dim": 4,
        "positions": {"dim": 4, "epochs": 1}, "eval": {"labels_per_class": 3, "seeds": 1}}));
    let cfg = resolve(&[layer], None).unwrap();
    let report = run_pipeline(&RunManifest::new(&data, &cfg), &tmp.path().join("run"), None).unwrap();
    assert!(report.edges.unwrap().iter().all(|e| e.auc.is_none()));
    assert_eq!(report.notices.len(), 2, "{:?}", report.notices);
}
