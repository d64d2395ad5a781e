use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hgmae::artifacts::{losses_csv, read_matrix_csv, write_json, write_matrix_csv, write_text};
use hgmae::checkpoint::Checkpoint;
use hgmae::config::{env_seed, overrides_layer, parse_override, read_config_file, resolve, RunConfig, RunManifest};
use hgmae::dataset::{load_dataset, write_dataset};
use hgmae::error::{Failure, InStage, Result};
use hgmae::pipeline::{
    classify, cluster, embed_graph, load_or_compute_positions, rank_edges, run_pipeline, train, Log, Report,
    TrainingSummary,
};
use hgmae::sweep::{default_axis, run_sweep};
use hgmae_core::hetgraph::{generate_synthetic, SyntheticSpec};
use hgmae_core::trainer::TrainData;
use hgmae_core::Matrix;
use serde_json::Value;

#[derive(Parser)]
#[command(name = "hgmae", version, about = "Heterogeneous graph masked autoencoder")]
struct Cli {
    /// Seed overriding the config file, overrides and HGMAE_SEED.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// No progress output on stderr.
    #[arg(long, short, global = true)]
    quiet: bool,
    /// Output file or directory, depending on the command.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON config file with flat dotted keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `key=value` overrides applied after the config file.
    #[arg(value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a planted-community dataset directory.
    GenSynthetic {
        /// JSON generator spec.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Metapath walk embeddings of the target nodes as CSV.
    Positions {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Train and write checkpoint, losses and manifest into a run directory.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// Precomputed positions CSV; computed when absent.
        #[arg(long)]
        positions: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Embeddings CSV from a checkpoint.
    Embed {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Evaluate embeddings and write a JSON report.
    Eval {
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum)]
        task: Task,
        /// Needed for the edges task.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        labels_per_class: Option<usize>,
        #[arg(long)]
        seeds: Option<usize>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Positions, training, embedding and evaluation in one go.
    Run {
        #[arg(long, required_unless_present = "manifest")]
        data: Option<PathBuf>,
        /// Replay a manifest written by an earlier run.
        #[arg(long, conflicts_with_all = ["data", "config", "overrides"])]
        manifest: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Train over the leave-unchanged by replace grid and tabulate metrics.
    Sweep {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Task {
    Classification,
    Clustering,
    Edges,
}

fn run_config(cfg: &ConfigArgs, seed: Option<u64>) -> Result<RunConfig> {
    let mut layers = Vec::new();
    if let Some(path) = &cfg.config {
        layers.push(read_config_file(path)?);
    }
    layers.push(overrides_layer(&cfg.overrides)?);
    resolve(&layers, seed.or(env_seed()?))
}

fn out_path(out: &Option<PathBuf>) -> Result<&Path> {
    out.as_deref()
        .ok_or_else(|| Failure::config("cli", "--out is required"))
}

fn synthetic_spec(path: Option<&Path>, overrides: &[String], seed: Option<u64>) -> Result<SyntheticSpec> {
    let mut value = match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Failure::config("config", format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| Failure::config("config", format!("{}: {e}", p.display())))?
        }
        None => Value::Object(Default::default()),
    };
    let obj = value
        .as_object_mut()
        .ok_or_else(|| Failure::config("config", "generator spec must be a JSON object"))?;
    for o in overrides {
        let (k, v) = parse_override(o)?;
        obj.insert(k, v);
    }
    if let Some(s) = seed.or(env_seed()?) {
        obj.insert("seed".into(), Value::from(s));
    }
    serde_json::from_value(value).map_err(|e| Failure::config("config", e))
}

fn execute(cli: Cli) -> Result<()> {
    let mut printer = |line: &str| eprintln!("{line}");
    let log: Log<'_> = if cli.quiet { None } else { Some(&mut printer) };
    let out = out_path(&cli.out)?;
    match cli.command {
        Command::GenSynthetic { spec, overrides } => {
            let spec = synthetic_spec(spec.as_deref(), &overrides, cli.seed)?;
            let g = generate_synthetic(&spec).in_stage("hetgraph")?;
            write_dataset(out, &g)
        }
        Command::Positions { data, cfg } => {
            let cfg = run_config(&cfg, cli.seed)?;
            let g = load_dataset(&data)?;
            let p = load_or_compute_positions(&g, &cfg.positions, None)?;
            write_matrix_csv(out, &p, "positions")
        }
        Command::Train { data, positions, cfg } => {
            let cfg = run_config(&cfg, cli.seed)?;
            let manifest = RunManifest::new(&data, &cfg);
            let g = load_dataset(&data)?;
            let p = load_or_compute_positions(&g, &cfg.positions, positions.as_deref())?;
            let a = &manifest.artifacts;
            write_json(&out.join(hgmae::config::MANIFEST_FILE), &manifest, "train")?;
            write_matrix_csv(&out.join(&a.positions), &p, "positions")?;
            let (_, fit) = train(&g, p, &cfg.train, log)?;
            Checkpoint::new(&fit.params, &cfg.train, fit.best_epoch).save(&out.join(&a.checkpoint))?;
            write_text(&out.join(&a.losses), &losses_csv(&fit.history), "train")?;
            write_json(&out.join("training.json"), &TrainingSummary::of(&fit), "train")
        }
        Command::Embed { checkpoint, data } => {
            let params = Checkpoint::load(&checkpoint)?.params()?;
            let g = load_dataset(&data)?;
            write_matrix_csv(out, &embed_graph(&params, &g)?, "embed")
        }
        Command::Eval {
            embeddings,
            data,
            task,
            checkpoint,
            labels_per_class,
            seeds,
            cfg,
        } => {
            let mut cfg = run_config(&cfg, cli.seed)?;
            if let Some(l) = labels_per_class {
                cfg.eval.labels_per_class = l;
            }
            if let Some(s) = seeds {
                cfg.eval.seeds = s;
            }
            cfg.validate()?;
            let g = load_dataset(&data)?;
            let seed = cfg.train.seed;
            let mut report = Report::new(seed, cfg.to_flat());
            let load_h = || -> Result<Matrix> {
                let path = embeddings
                    .as_deref()
                    .ok_or_else(|| Failure::config("eval", "--embeddings is required"))?;
                let h = read_matrix_csv(path, "eval")?;
                if h.rows() != g.target_count() {
                    return Err(Failure::data(
                        "eval",
                        format!("{} embedding rows for {} target nodes", h.rows(), g.target_count()),
                    ));
                }
                Ok(h)
            };
            if matches!(task, Task::Classification | Task::Clustering) && g.labels.is_none() {
                return Err(Failure::data("eval", "dataset has no labels"));
            }
            match task {
                Task::Classification => report.classification = classify(&load_h()?, &g, &cfg.eval, seed)?,
                Task::Clustering => report.clustering = cluster(&load_h()?, &g, &cfg.eval, seed)?,
                Task::Edges => {
                    let path =
                        checkpoint.ok_or_else(|| Failure::config("eval", "--checkpoint is required for edges"))?;
                    let params = Checkpoint::load(&path)?.params()?;
                    // Edge scores never read the positional features.
                    let positions = Matrix::zeros(g.target_count(), params.dims().position_dim);
                    let data = TrainData::new(&g, positions).in_stage("eval")?;
                    rank_edges(&params, &data, cfg.train.p_e, seed, &mut report)?;
                }
            }
            for n in &report.notices {
                eprintln!("notice: {n}");
            }
            write_json(out, &report, "eval")
        }
        Command::Run { data, manifest, cfg } => {
            let manifest = match manifest {
                Some(path) => RunManifest::read(&path)?,
                None => {
                    let data = data.expect("clap requires --data without --manifest");
                    RunManifest::new(&data, &run_config(&cfg, cli.seed)?)
                }
            };
            let report = run_pipeline(&manifest, out, log)?;
            for n in &report.notices {
                eprintln!("notice: {n}");
            }
            Ok(())
        }
        Command::Sweep { data, cfg } => {
            let cfg = run_config(&cfg, cli.seed)?;
            let g = load_dataset(&data)?;
            let axis = default_axis();
            let grid = run_sweep(&g, &cfg, &axis, &axis, log)?;
            write_json(&out.join("sweep.json"), &grid, "sweep")?;
            write_text(&out.join("sweep.csv"), &grid.to_csv(), "sweep")
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
