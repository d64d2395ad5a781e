//! Stage orchestration: positions, training, embedding, evaluation.

use std::path::Path;

use hgmae_core::encdec::ModelParams;
use hgmae_core::eval::{
    class_count, classification_protocol, clustering_protocol, ClassificationSummary, ClusteringSummary, EvalConfig,
    Split,
};
use hgmae_core::hetgraph::{metapath_views, HeteroGraph};
use hgmae_core::mp2vec::{positional_features, WalkConfig};
use hgmae_core::objectives::LossReport;
use hgmae_core::trainer::{edge_ranking, embed, fit_with, EdgeRanking, FitResult, TrainConfig, TrainData};
use hgmae_core::Matrix;
use serde::{Deserialize, Serialize};

use crate::artifacts::{losses_csv, read_matrix_csv, write_json, write_matrix_csv, write_text};
use crate::checkpoint::Checkpoint;
use crate::config::{FlatConfig, RunManifest, MANIFEST_FILE};
use crate::dataset::load_dataset;
use crate::error::{Failure, InStage, Result};

/// Where progress lines go; `None` keeps quiet.
pub type Log<'a> = Option<&'a mut dyn FnMut(&str)>;

fn say(log: &mut Log<'_>, line: &str) {
    if let Some(f) = log {
        f(line);
    }
}

pub fn compute_positions(g: &HeteroGraph, cfg: &WalkConfig) -> Result<Matrix> {
    positional_features(g, cfg).in_stage("positions")
}

/// Positions from `path` when given, otherwise computed. Row count must
/// match the target node count.
pub fn load_or_compute_positions(g: &HeteroGraph, cfg: &WalkConfig, path: Option<&Path>) -> Result<Matrix> {
    let p = match path {
        Some(path) => read_matrix_csv(path, "positions")?,
        None => compute_positions(g, cfg)?,
    };
    if p.rows() != g.target_count() {
        return Err(Failure::data(
            "positions",
            format!("{} rows for {} target nodes", p.rows(), g.target_count()),
        ));
    }
    Ok(p)
}

pub fn train(
    g: &HeteroGraph,
    positions: Matrix,
    cfg: &TrainConfig,
    mut log: Log<'_>,
) -> Result<(TrainData, FitResult)> {
    let data = TrainData::new(g, positions).in_stage("train")?;
    let fit = fit_with(&data, cfg, |epoch, r| {
        if epoch % 10 == 0 {
            say(
                &mut log,
                &format!(
                    "epoch {epoch:4}  total {:.6}  mer {:.6}  tar {:.6}  pfp {:.6}  p_a {:.3}",
                    r.total, r.mer, r.tar, r.pfp, r.p_a
                ),
            );
        }
    })
    .in_stage("train")?;
    say(
        &mut log,
        &format!(
            "trained {} epochs, best epoch {:?}{}",
            fit.history.len(),
            fit.best_epoch,
            if fit.stopped_early { " (early stop)" } else { "" }
        ),
    );
    Ok((data, fit))
}

pub fn embed_graph(params: &ModelParams, g: &HeteroGraph) -> Result<Matrix> {
    let views = metapath_views(g).in_stage("embed")?;
    let x = g.target_features().in_stage("embed")?;
    if x.cols() != params.dims().attr_dim {
        return Err(Failure::data(
            "embed",
            format!(
                "attribute width {} but checkpoint expects {}",
                x.cols(),
                params.dims().attr_dim
            ),
        ));
    }
    embed(params, &views, x).in_stage("embed")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub epochs: usize,
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
    pub best: Option<LossReport>,
}

impl TrainingSummary {
    pub fn of(fit: &FitResult) -> Self {
        TrainingSummary {
            epochs: fit.history.len(),
            best_epoch: fit.best_epoch,
            stopped_early: fit.stopped_early,
            best: fit.best_epoch.map(|e| fit.history[e].clone()),
        }
    }
}

/// Evaluation results plus the settings that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub seed: u64,
    pub config: FlatConfig,
    pub training: Option<TrainingSummary>,
    pub classification: Option<ClassificationSummary>,
    pub clustering: Option<ClusteringSummary>,
    pub edges: Option<Vec<EdgeRanking>>,
    pub notices: Vec<String>,
}

impl Report {
    pub fn new(seed: u64, config: FlatConfig) -> Self {
        Report {
            seed,
            config,
            training: None,
            classification: None,
            clustering: None,
            edges: None,
            notices: Vec::new(),
        }
    }
}

/// The dataset's own split when it names train, val and test.
pub fn dataset_split(g: &HeteroGraph) -> Result<Option<Split>> {
    let Some(splits) = &g.splits else { return Ok(None) };
    let get = |name: &str| {
        splits
            .get(name)
            .cloned()
            .ok_or_else(|| Failure::data("eval", format!("splits.json has no '{name}' list")))
    };
    let train = get("train")?;
    let labels = g.labels.as_deref().unwrap_or(&[]);
    let per_class = (0..class_count(labels))
        .map(|c| train.iter().filter(|&&i| labels.get(i) == Some(&c)).count())
        .min()
        .unwrap_or(0);
    Ok(Some(Split {
        train,
        val: get("val")?,
        test: get("test")?,
        labels_per_class: per_class,
    }))
}

pub fn classify(h: &Matrix, g: &HeteroGraph, cfg: &EvalConfig, seed: u64) -> Result<Option<ClassificationSummary>> {
    let Some(labels) = &g.labels else { return Ok(None) };
    let split = dataset_split(g)?;
    classification_protocol(h, labels, split.as_ref(), cfg, seed)
        .in_stage("eval")
        .map(Some)
}

pub fn cluster(h: &Matrix, g: &HeteroGraph, cfg: &EvalConfig, seed: u64) -> Result<Option<ClusteringSummary>> {
    let Some(labels) = &g.labels else { return Ok(None) };
    clustering_protocol(h, labels, cfg, seed).in_stage("eval").map(Some)
}

/// Held-out edge ranking per metapath, with a notice for empty views.
pub fn rank_edges(params: &ModelParams, data: &TrainData, p_e: f64, seed: u64, report: &mut Report) -> Result<()> {
    let ranks = edge_ranking(params, data, p_e, seed).in_stage("eval")?;
    for r in ranks.iter().filter(|r| r.auc.is_none()) {
        report
            .notices
            .push(format!("edge ranking skipped for {}: no held-out edges", r.metapath));
    }
    report.edges = Some(ranks);
    Ok(())
}

/// Runs every stage for `manifest`, writing artifacts and the manifest into `out`.
pub fn run_pipeline(manifest: &RunManifest, out: &Path, mut log: Log<'_>) -> Result<Report> {
    let cfg = manifest.run_config()?;
    write_json(&out.join(MANIFEST_FILE), manifest, "run")?;
    let g = load_dataset(Path::new(&manifest.dataset))?;
    let a = &manifest.artifacts;

    say(&mut log, "computing positional features");
    let positions = compute_positions(&g, &cfg.positions)?;
    write_matrix_csv(&out.join(&a.positions), &positions, "positions")?;

    let (data, fit) = train(
        &g,
        positions,
        &cfg.train,
        log.as_deref_mut().map(|f| f as &mut dyn FnMut(&str)),
    )?;
    Checkpoint::new(&fit.params, &cfg.train, fit.best_epoch).save(&out.join(&a.checkpoint))?;
    write_text(&out.join(&a.losses), &losses_csv(&fit.history), "train")?;

    let h = embed(&fit.params, &data.views, &data.attributes).in_stage("embed")?;
    write_matrix_csv(&out.join(&a.embeddings), &h, "embed")?;

    say(&mut log, "evaluating");
    let mut report = Report::new(cfg.train.seed, manifest.config.clone());
    report.training = Some(TrainingSummary::of(&fit));
    report.classification = classify(&h, &g, &cfg.eval, cfg.train.seed)?;
    report.clustering = cluster(&h, &g, &cfg.eval, cfg.train.seed)?;
    if g.labels.is_none() {
        report
            .notices
            .push("classification and clustering skipped: dataset has no labels".into());
    }
    rank_edges(&fit.params, &data, cfg.train.p_e, cfg.train.seed, &mut report)?;
    write_json(&out.join(&a.report), &report, "eval")?;
    Ok(report)
}
