use std::io::Write;

use hgmae::config::{flatten, overrides_layer, parse_override, read_config_file, resolve, RunConfig, RunManifest};
use hgmae::Kind;
use serde_json::{json, Value};

fn layer(v: Value) -> hgmae::config::FlatConfig {
    flatten(v)
}

#[test]
fn empty_config_gives_defaults() {
    let cfg = resolve(&[layer(json!({}))], None).unwrap();
    assert_eq!(cfg, RunConfig::default());
    let t = &cfg.train;
    assert_eq!(t.learning_rate, 5e-4);
    assert_eq!(t.hidden, 256);
    assert_eq!((t.loss.gamma_mer, t.loss.gamma_tar, t.loss.gamma_pfp), (2.0, 2.0, 2.0));
    assert_eq!((t.loss.lambda, t.loss.mu, t.loss.eta), (1.0, 1.0, 1.0));
    assert_eq!(
        (t.schedule.min_rate, t.schedule.max_rate, t.schedule.step),
        (0.5, 0.8, 0.005)
    );
}

#[test]
fn override_shows_in_manifest() {
    let cfg = resolve(&[overrides_layer(&["p_e=0.3".into()]).unwrap()], None).unwrap();
    assert_eq!(cfg.train.p_e, 0.3);
    let m = RunManifest::new(std::path::Path::new("."), &cfg);
    assert_eq!(m.config["p_e"], json!(0.3));
    assert_eq!(m.run_config().unwrap(), cfg);
}

#[test]
fn unknown_key_is_named() {
    let err = resolve(&[layer(json!({"leraning_rate": 0.1}))], None).unwrap_err();
    assert_eq!(err.kind, Kind::Config);
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("'leraning_rate'"), "{err}");
    let err = resolve(&[layer(json!({"positions": {"walkz": 3}}))], None).unwrap_err();
    assert!(err.to_string().contains("'positions.walkz'"), "{err}");
}

#[test]
fn type_mismatch_names_expected_type() {
    for (v, expect) in [
        (json!({"hidden": 1.5}), "expected non-negative integer, got number"),
        (json!({"learning_rate": "fast"}), "expected number, got string"),
        (json!({"eval": {"l2_grid": 0.1}}), "expected array, got number"),
        (
            json!({"eval": {"val_size": -1}}),
            "expected non-negative integer or null, got number",
        ),
    ] {
        let err = resolve(&[layer(v)], None).unwrap_err();
        assert!(err.to_string().contains(expect), "{err}");
    }
}

#[test]
fn invalid_values_are_config_errors() {
    let err = resolve(&[layer(json!({"p_u": 0.7, "p_r": 0.6}))], None).unwrap_err();
    assert_eq!(err.kind, Kind::Config);
}

#[test]
fn later_layers_and_seed_take_precedence() {
    let file = layer(json!({"seed": 1, "hidden": 64, "max_epochs": 5}));
    let over = overrides_layer(&["hidden=32".into(), "seed=2".into()]).unwrap();
    let cfg = resolve(&[file.clone(), over.clone()], None).unwrap();
    assert_eq!((cfg.train.hidden, cfg.train.max_epochs, cfg.train.seed), (32, 5, 2));
    assert_eq!(cfg.positions.seed, 2);
    let cfg = resolve(&[file, over], Some(9)).unwrap();
    assert_eq!((cfg.train.seed, cfg.positions.seed), (9, 9));
    let pinned = resolve(&[layer(json!({"positions": {"seed": 4}}))], Some(9)).unwrap();
    assert_eq!((pinned.train.seed, pinned.positions.seed), (9, 4));
}

#[test]
fn overrides_parse_json_or_text() {
    assert_eq!(parse_override("a.b=3").unwrap(), ("a.b".into(), json!(3)));
    assert_eq!(parse_override("x=[1,2]").unwrap().1, json!([1, 2]));
    assert_eq!(parse_override("tar_target=literal").unwrap().1, json!("literal"));
    assert!(parse_override("novalue").is_err());
    let cfg = resolve(&[overrides_layer(&["tar_target=\"literal\"".into()]).unwrap()], None).unwrap();
    assert_eq!(serde_json::to_value(cfg.train.tar_target).unwrap(), json!("literal"));
}

#[test]
fn flat_round_trip_and_nested_files() {
    let cfg = resolve(&[layer(json!({"hidden": 16, "eval": {"seeds": 3}}))], Some(5)).unwrap();
    assert_eq!(resolve(&[cfg.to_flat()], None).unwrap(), cfg);

    let mut f = tempfile::NamedTempFile::new().unwrap();
    write!(f, r#"{{"loss": {{"lambda": 0.5}}, "schedule.step": 0.01}}"#).unwrap();
    let flat = read_config_file(f.path()).unwrap();
    let cfg = resolve(&[flat], None).unwrap();
    assert_eq!((cfg.train.loss.lambda, cfg.train.schedule.step), (0.5, 0.01));

    let mut bad = tempfile::NamedTempFile::new().unwrap();
    write!(bad, "[1, 2]").unwrap();
    assert_eq!(read_config_file(bad.path()).unwrap_err().kind, Kind::Config);
}

#[test]
fn manifest_rejects_seed_mismatch() {
    let cfg = resolve(&[], Some(3)).unwrap();
    let mut m = RunManifest::new(std::path::Path::new("."), &cfg);
    m.seed = 4;
    assert!(m.run_config().is_err());
}
