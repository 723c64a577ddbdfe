//! Experiment orchestration: config, parallel replicas, aggregation and
//! output files.

pub mod config;
pub mod emit;
pub mod experiment;

use std::path::{Path, PathBuf};

pub use config::{parse_config, parse_config_in, ExperimentConfig, Suite, Tolerances};
pub use emit::{dump_paths, emit_csv, emit_jsonl, emit_plotdata, read_manifest_config, write_manifest};
pub use experiment::{config_hash, run_experiment, Cell, PlotData, ResultTable, RunManifest, RunOutput};

use crate::error::{Error, Result};

/// Loads a TOML config, or the config embedded in a `manifest.json`.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    if path.extension().is_some_and(|e| e == "json") {
        return read_manifest_config(path);
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config_in(&text, base).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Runs `config` and writes everything under `config.out`.
///
/// The manifest is written first with `complete = false` and rewritten at
/// the end, so an interrupted run leaves a manifest marked incomplete.
pub fn execute(config: &ExperimentConfig, workers: usize) -> Result<RunOutput> {
    let dir = config.out.as_path();
    write_manifest(&experiment::initial_manifest(config)?, dir)?;
    let mut out = run_experiment(config, workers)?;
    let mut files: Vec<PathBuf> = Vec::new();
    for t in &out.tables {
        files.push(emit_csv(t, dir)?);
    }
    files.push(emit_jsonl(&out.reports, &dir.join("reports.jsonl"))?);
    files.extend(emit_plotdata(&out.plots, &dir.join("plot"))?);
    if config.dump_paths {
        files.push(dump_paths(config, workers, dir)?);
    }
    out.manifest.files = files
        .iter()
        .map(|p| p.strip_prefix(dir).unwrap_or(p).display().to_string())
        .collect();
    out.manifest.complete = true;
    out.manifest.finished_unix = Some(
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    );
    write_manifest(&out.manifest, dir)?;
    Ok(out)
}
