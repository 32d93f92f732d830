//! CSV tables and their JSON metadata sidecars.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::{CliError, CliResult};
use crate::runner::ResultTable;

/// Contents of the `.json` sidecar.
#[derive(Debug, Clone, Serialize)]
pub struct Metadata<'a> {
    pub name: &'a str,
    pub kind: ExperimentKind,
    pub config_hash: String,
    pub seed: Option<u64>,
    pub tool_version: &'static str,
    pub threads: usize,
    pub columns: &'a [String],
    pub n_rows: usize,
    pub warnings: &'a [String],
    /// The full configuration, enough to rerun the experiment.
    pub config: &'a ExperimentConfig,
    pub extra: &'a serde_json::Value,
}

/// Sidecar path: the CSV path with a `.json` extension.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

pub fn metadata<'a>(cfg: &'a ExperimentConfig, table: &'a ResultTable) -> Metadata<'a> {
    Metadata {
        name: &cfg.name,
        kind: table.kind,
        config_hash: cfg.hash(),
        seed: cfg.seed(),
        tool_version: env!("CARGO_PKG_VERSION"),
        threads: rayon::current_num_threads(),
        columns: &table.columns,
        n_rows: table.rows.len(),
        warnings: &table.warnings,
        config: cfg,
        extra: &table.extra,
    }
}

/// Writes the table and its sidecar; returns the sidecar path.
pub fn write_outputs(cfg: &ExperimentConfig, table: &ResultTable, csv_path: &Path) -> CliResult<PathBuf> {
    if let Some(dir) = csv_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(csv_path)?;
    w.write_record(&table.columns)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    w.flush()?;
    let side = sidecar_path(csv_path);
    let json = serde_json::to_string_pretty(&metadata(cfg, table)).map_err(|e| CliError::Runtime(e.to_string()))?;
    std::fs::write(&side, json)?;
    Ok(side)
}
