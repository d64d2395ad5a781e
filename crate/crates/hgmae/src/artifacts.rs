//! Plain-text artifacts: matrices as CSV and the per-epoch loss log.

use std::fs;
use std::path::Path;

use hgmae_core::objectives::LossReport;
use hgmae_core::Matrix;
use serde::Serialize;

use crate::dataset::parse_matrix;
use crate::error::{Failure, Result};

/// Shortest decimal form that parses back to the same `f64`.
pub fn format_row(row: &[f64]) -> String {
    row.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

pub fn write_text(path: &Path, text: &str, stage: &'static str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Failure::data(stage, format!("{}: {e}", parent.display())))?;
    }
    fs::write(path, text).map_err(|e| Failure::data(stage, format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T, stage: &'static str) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::data(stage, e))?;
    text.push('\n');
    write_text(path, &text, stage)
}

pub fn write_matrix_csv(path: &Path, m: &Matrix, stage: &'static str) -> Result<()> {
    let text: String = m.iter_rows().map(|r| format_row(r) + "\n").collect();
    write_text(path, &text, stage)
}

/// Reads a CSV matrix; failures are reported under `stage`.
pub fn read_matrix_csv(path: &Path, stage: &'static str) -> Result<Matrix> {
    let text = fs::read_to_string(path).map_err(|e| Failure::data(stage, format!("{}: {e}", path.display())))?;
    let name = path.display().to_string();
    parse_matrix(&name, &text).map_err(|f| Failure { stage, ..f })
}

/// `epoch,p_a,l_mer,l_tar,l_pfp,total,alpha_<metapath>...`
pub fn losses_csv(history: &[LossReport]) -> String {
    let mut out = String::from("epoch,p_a,l_mer,l_tar,l_pfp,total");
    if let Some(first) = history.first() {
        for m in &first.per_metapath {
            out.push_str(",alpha_");
            out.push_str(&m.metapath);
        }
    }
    out.push('\n');
    for (epoch, r) in history.iter().enumerate() {
        let mut row = vec![r.p_a, r.mer, r.tar, r.pfp, r.total];
        row.extend(r.per_metapath.iter().map(|m| m.alpha));
        out.push_str(&format!("{epoch},{}\n", format_row(&row)));
    }
    out
}
