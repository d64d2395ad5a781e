//! On-disk dataset layout:
//!
//! ```text
//! meta.json            node types, relations, metapaths, file names
//! edges/<rel>.tsv      src_index <TAB> dst_index, 0-based within type
//! features/<type>.csv  comma-separated reals, one row per node
//! labels.tsv           target_index <TAB> class_id (optional)
//! splits.json          {"train": [...], "val": [...], "test": [...]} (optional)
//! ```
//!
//! Blank lines and lines starting with `#` are skipped in the text files.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use hgmae_core::hetgraph::{HeteroGraph, Metapath, MetapathStep, Relation};
use hgmae_core::Matrix;
use serde::{Deserialize, Serialize};

use crate::artifacts::{format_row, write_text};
use crate::error::{Failure, InStage, Result};

const STAGE: &str = "hetgraph";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Meta {
    pub node_types: BTreeMap<String, usize>,
    pub target_type: String,
    pub relations: Vec<RelationMeta>,
    pub metapaths: Vec<MetapathMeta>,
    /// Node type to feature file.
    pub attributes: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub splits: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelationMeta {
    pub name: String,
    pub src_type: String,
    pub dst_type: String,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetapathMeta {
    pub name: String,
    pub steps: Vec<StepMeta>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepMeta {
    pub relation: String,
    #[serde(default)]
    pub reversed: bool,
}

fn read(dir: &Path, name: &str) -> Result<String> {
    fs::read_to_string(dir.join(name)).map_err(|e| Failure::data(STAGE, format!("{name}: {e}")))
}

/// Non-blank, non-comment lines with 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn index_pair(file: &str, line: usize, text: &str) -> Result<(usize, usize)> {
    let fields: Vec<&str> = text.split_whitespace().collect();
    if fields.len() != 2 {
        return Err(Failure::data(
            STAGE,
            format!("{file} line {line}: expected 2 integer columns, found {}", fields.len()),
        ));
    }
    let parse = |s: &str| {
        s.parse::<usize>().map_err(|_| {
            Failure::data(
                STAGE,
                format!("{file} line {line}: '{s}' is not a non-negative integer"),
            )
        })
    };
    Ok((parse(fields[0])?, parse(fields[1])?))
}

pub fn parse_edges(file: &str, text: &str) -> Result<Vec<(usize, usize)>> {
    content_lines(text).map(|(n, l)| index_pair(file, n, l)).collect()
}

/// Dense matrix from CSV text; every row must have the same width.
pub fn parse_matrix(file: &str, text: &str) -> Result<Matrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, l) in content_lines(text) {
        let row =
            l.split(',')
                .map(|s| {
                    let s = s.trim();
                    s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                        Failure::data(STAGE, format!("{file} line {line}: '{s}' is not a finite number"))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Failure::data(
                    STAGE,
                    format!(
                        "{file} line {line}: expected {} columns, found {}",
                        first.len(),
                        row.len()
                    ),
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Failure::data(STAGE, format!("{file}: no rows")));
    }
    Ok(Matrix::from_rows(&rows))
}

/// One class id per target node; every index in `0..n` exactly once.
pub fn parse_labels(file: &str, text: &str, n: usize) -> Result<Vec<usize>> {
    let mut labels = vec![None; n];
    for (line, l) in content_lines(text) {
        let (i, c) = index_pair(file, line, l)?;
        if i >= n {
            return Err(Failure::data(
                STAGE,
                format!("{file} line {line}: target index {i} out of range (count {n})"),
            ));
        }
        if labels[i].replace(c).is_some() {
            return Err(Failure::data(
                STAGE,
                format!("{file} line {line}: duplicate label for node {i}"),
            ));
        }
    }
    labels
        .into_iter()
        .enumerate()
        .map(|(i, c)| c.ok_or_else(|| Failure::data(STAGE, format!("{file}: node {i} has no label"))))
        .collect()
}

/// Reads and validates a dataset directory.
pub fn load_dataset(dir: &Path) -> Result<HeteroGraph> {
    let meta: Meta = serde_json::from_str(&read(dir, "meta.json")?)
        .map_err(|e| Failure::data(STAGE, format!("meta.json line {}: {e}", e.line())))?;

    let mut relations = BTreeMap::new();
    for r in &meta.relations {
        let edges = parse_edges(&r.file, &read(dir, &r.file)?)?;
        let relation = Relation {
            src_type: r.src_type.clone(),
            dst_type: r.dst_type.clone(),
            edges,
        };
        if relations.insert(r.name.clone(), relation).is_some() {
            return Err(Failure::data(
                STAGE,
                format!("meta.json: relation '{}' declared twice", r.name),
            ));
        }
    }
    let mut attributes = BTreeMap::new();
    for (ty, file) in &meta.attributes {
        attributes.insert(ty.clone(), parse_matrix(file, &read(dir, file)?)?);
    }
    let n = meta.node_types.get(&meta.target_type).copied().unwrap_or(0);
    let labels = match &meta.labels {
        Some(file) => Some(parse_labels(file, &read(dir, file)?, n)?),
        None => None,
    };
    let splits = match &meta.splits {
        Some(file) => Some(
            serde_json::from_str::<BTreeMap<String, Vec<usize>>>(&read(dir, file)?)
                .map_err(|e| Failure::data(STAGE, format!("{file} line {}: {e}", e.line())))?,
        ),
        None => None,
    };
    let metapaths = meta
        .metapaths
        .iter()
        .map(|m| {
            let steps = m
                .steps
                .iter()
                .map(|s| {
                    if s.reversed {
                        MetapathStep::reversed(&s.relation)
                    } else {
                        MetapathStep::forward(&s.relation)
                    }
                })
                .collect();
            Metapath::new(&m.name, steps)
        })
        .collect();
    let g = HeteroGraph {
        node_counts: meta.node_types,
        relations,
        attributes,
        metapaths,
        target_type: meta.target_type,
        labels,
        splits,
    };
    g.validate().in_stage(STAGE)?;
    if let Some(splits) = &g.splits {
        for (name, idx) in splits {
            if let Some(&bad) = idx.iter().find(|&&i| i >= n) {
                return Err(Failure::data(
                    STAGE,
                    format!("split '{name}' index {bad} out of range (count {n})"),
                ));
            }
        }
    }
    Ok(g)
}

/// Writes `g` in the layout [`load_dataset`] reads.
pub fn write_dataset(dir: &Path, g: &HeteroGraph) -> Result<()> {
    let io = |e: std::io::Error| Failure::data(STAGE, format!("{}: {e}", dir.display()));
    fs::create_dir_all(dir.join("edges")).map_err(io)?;
    fs::create_dir_all(dir.join("features")).map_err(io)?;
    let mut meta = Meta {
        node_types: g.node_counts.clone(),
        target_type: g.target_type.clone(),
        relations: Vec::new(),
        metapaths: g
            .metapaths
            .iter()
            .map(|m| MetapathMeta {
                name: m.name.clone(),
                steps: m
                    .steps
                    .iter()
                    .map(|s| StepMeta {
                        relation: s.relation.clone(),
                        reversed: s.reversed,
                    })
                    .collect(),
            })
            .collect(),
        attributes: BTreeMap::new(),
        labels: None,
        splits: None,
    };
    for (name, r) in &g.relations {
        let file = format!("edges/{name}.tsv");
        let text: String = r.edges.iter().map(|(s, d)| format!("{s}\t{d}\n")).collect();
        write_text(&dir.join(&file), &text, STAGE)?;
        meta.relations.push(RelationMeta {
            name: name.clone(),
            src_type: r.src_type.clone(),
            dst_type: r.dst_type.clone(),
            file,
        });
    }
    for (ty, m) in &g.attributes {
        let file = format!("features/{ty}.csv");
        let text: String = m.iter_rows().map(|r| format_row(r) + "\n").collect();
        write_text(&dir.join(&file), &text, STAGE)?;
        meta.attributes.insert(ty.clone(), file);
    }
    if let Some(labels) = &g.labels {
        let text: String = labels.iter().enumerate().map(|(i, c)| format!("{i}\t{c}\n")).collect();
        write_text(&dir.join("labels.tsv"), &text, STAGE)?;
        meta.labels = Some("labels.tsv".into());
    }
    if let Some(splits) = &g.splits {
        let text = serde_json::to_string_pretty(splits).map_err(|e| Failure::data(STAGE, e))?;
        write_text(&dir.join("splits.json"), &text, STAGE)?;
        meta.splits = Some("splits.json".into());
    }
    let text = serde_json::to_string_pretty(&meta).map_err(|e| Failure::data(STAGE, e))?;
    write_text(&dir.join("meta.json"), &text, STAGE)
}
