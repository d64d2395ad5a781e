use std::fs;

use hgmae::dataset::{load_dataset, parse_edges, parse_labels, parse_matrix, write_dataset};
use hgmae::Kind;
use hgmae_core::hetgraph::{generate_synthetic, SyntheticSpec};

fn small() -> hgmae_core::hetgraph::HeteroGraph {
    let spec = SyntheticSpec {
        community_size: 10,
        aux_per_community: 8,
        attr_dim: 5,
        ..SyntheticSpec::default()
    };
    generate_synthetic(&spec).unwrap()
}

#[test]
fn write_then_load_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let mut g = small();
    let mut splits = std::collections::BTreeMap::new();
    splits.insert("train".to_string(), vec![0, 10, 20]);
    splits.insert("val".to_string(), vec![1, 11]);
    splits.insert("test".to_string(), vec![2, 12, 22]);
    g.splits = Some(splits);
    write_dataset(dir.path(), &g).unwrap();
    assert_eq!(load_dataset(dir.path()).unwrap(), g);
}

#[test]
fn parsers_skip_comments_and_blank_lines() {
    assert_eq!(
        parse_edges("e.tsv", "# header\n0\t1\n\n2 3\n").unwrap(),
        [(0, 1), (2, 3)]
    );
    let m = parse_matrix("f.csv", "1,2.5\n# c\n-3,4e-2\n").unwrap();
    assert_eq!(m.shape(), (2, 2));
    assert_eq!(m.row(1), [-3.0, 0.04]);
    assert_eq!(parse_labels("l.tsv", "1\t0\n0\t2\n", 2).unwrap(), [2, 0]);
}

#[test]
fn parse_errors_name_file_and_line() {
    let cases = [
        parse_edges("edges/x.tsv", "0\t1\n0\n").unwrap_err(),
        parse_edges("edges/x.tsv", "0\t1\n\n1\t-2\n").unwrap_err(),
        parse_matrix("features/t.csv", "1,2\n3\n").unwrap_err(),
        parse_matrix("features/t.csv", "1,2\nnan,1\n").unwrap_err(),
        parse_labels("labels.tsv", "0\t1\n0\t1\n", 2).unwrap_err(),
    ];
    let lines = [2, 3, 2, 2, 2];
    for (err, line) in cases.iter().zip(lines) {
        assert_eq!(err.stage, "hetgraph");
        assert_eq!(err.kind, Kind::Data);
        assert!(err.message.contains(&format!("line {line}")), "{err}");
    }
    assert!(parse_labels("labels.tsv", "5\t1\n", 2)
        .unwrap_err()
        .message
        .contains("labels.tsv"));
    assert!(parse_labels("labels.tsv", "0\t1\n", 2)
        .unwrap_err()
        .message
        .contains("node 1"));
}

#[test]
fn out_of_range_indices_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), &small()).unwrap();
    let path = dir.path().join("edges/ta0.tsv");
    let mut text = fs::read_to_string(&path).unwrap();
    text.push_str("0\t999\n");
    fs::write(&path, text).unwrap();
    let err = load_dataset(dir.path()).unwrap_err();
    assert_eq!(err.stage, "hetgraph");
    assert!(err.message.contains("out of range"), "{err}");

    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), &small()).unwrap();
    fs::write(dir.path().join("splits.json"), r#"{"train": [0, 30]}"#).unwrap();
    let meta = fs::read_to_string(dir.path().join("meta.json")).unwrap();
    let meta = meta.replacen("\"labels\"", "\"splits\": \"splits.json\",\n  \"labels\"", 1);
    fs::write(dir.path().join("meta.json"), meta).unwrap();
    let err = load_dataset(dir.path()).unwrap_err();
    assert!(err.message.contains("30"), "{err}");
}

#[test]
fn meta_must_be_well_formed() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), &small()).unwrap();
    let meta = fs::read_to_string(dir.path().join("meta.json")).unwrap();
    fs::write(
        dir.path().join("meta.json"),
        meta.replacen("\"target_type\"", "\"target_typo\"", 1),
    )
    .unwrap();
    let err = load_dataset(dir.path()).unwrap_err();
    assert!(err.to_string().starts_with("hetgraph: meta.json"), "{err}");
    assert!(load_dataset(&dir.path().join("missing")).is_err());
}
