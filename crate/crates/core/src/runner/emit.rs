//! Writing tables, reports, plot data and the manifest.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use super::config::ExperimentConfig;
use super::experiment::{fmt_f64, pool, PlotData, ResultTable, RunManifest};
use crate::error::{Error, Result};
use crate::walker::simulate;

/// Replicas simulated per batch while dumping full paths.
const DUMP_BATCH: u64 = 64;

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Serialize(format!("{}: {other:?}", path.display())),
    }
}

/// Writes `table` as `<dir>/<name>.csv`. An empty table gives a header-only
/// file.
pub fn emit_csv(table: &ResultTable, dir: &Path) -> Result<PathBuf> {
    let path = dir.join(format!("{}.csv", table.name));
    let mut w = csv::Writer::from_writer(create(&path)?);
    w.write_record(&table.columns).map_err(|e| csv_err(&path, e))?;
    for row in &table.rows {
        w.write_record(row.iter().map(|c| c.to_string()))
            .map_err(|e| csv_err(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// One JSON document per line.
pub fn emit_jsonl<T: Serialize>(records: &[T], path: &Path) -> Result<PathBuf> {
    let mut w = create(path)?;
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| Error::Serialize(e.to_string()))?;
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    finish(w, path)?;
    Ok(path.to_path_buf())
}

fn write_matrix(w: &mut impl Write, title: &str, grid: &[f64], m: &[Vec<f64>]) -> std::io::Result<()> {
    writeln!(w, "# {title}")?;
    write!(w, "t")?;
    for t in grid {
        write!(w, " {t}")?;
    }
    writeln!(w)?;
    for (t, row) in grid.iter().zip(m) {
        write!(w, "{t}")?;
        for v in row {
            write!(w, " {}", fmt_f64(*v))?;
        }
        writeln!(w)?;
    }
    Ok(())
}

fn write_plot(w: &mut impl Write, plot: &PlotData) -> std::io::Result<()> {
    match plot {
        PlotData::Ks { sorted, target, .. } => {
            let n = sorted.len() as f64;
            writeln!(w, "# x ecdf")?;
            for (i, x) in sorted.iter().enumerate() {
                writeln!(w, "{} {}", fmt_f64(*x), fmt_f64((i + 1) as f64 / n))?;
            }
            writeln!(w, "\n")?;
            writeln!(w, "# x target_cdf")?;
            for (x, f) in sorted.iter().zip(target) {
                writeln!(w, "{} {}", fmt_f64(*x), fmt_f64(*f))?;
            }
        }
        PlotData::Fdd { grid, correlation, limit, .. } => {
            write_matrix(w, "empirical correlation", grid, correlation)?;
            writeln!(w, "\n")?;
            write_matrix(w, "limit correlation", grid, limit)?;
        }
        PlotData::Flatness(rows) => {
            writeln!(w, "# horizon median p90")?;
            for s in rows {
                writeln!(w, "{} {} {}", s.horizon, fmt_f64(s.median), fmt_f64(s.p90))?;
            }
        }
    }
    Ok(())
}

/// Gnuplot-ready columns; blocks within a file are separated by two blank
/// lines so `index` selects them.
pub fn emit_plotdata(plots: &[PlotData], dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for plot in plots {
        let name = match plot {
            PlotData::Ks { horizon, .. } => format!("ks_n{horizon}.dat"),
            PlotData::Fdd { horizon, .. } => format!("fdd_n{horizon}.dat"),
            PlotData::Flatness(_) => "flatness.dat".to_string(),
        };
        let path = dir.join(name);
        let mut w = create(&path)?;
        write_plot(&mut w, plot).map_err(|e| Error::io(&path, e))?;
        finish(w, &path)?;
        out.push(path);
    }
    Ok(out)
}

/// Full integer paths up to the largest horizon as `replica,step,x` rows.
pub fn dump_paths(config: &ExperimentConfig, workers: usize, dir: &Path) -> Result<PathBuf> {
    let path = dir.join("paths.csv");
    let n = config.max_horizon();
    let schedule = config.cooling()?.prepared(n)?;
    let pool = pool(workers)?;
    let mut w = create(&path)?;
    writeln!(w, "replica,step,x").map_err(|e| Error::io(&path, e))?;
    let mut start = 0;
    while start < config.replicas {
        let end = (start + DUMP_BATCH).min(config.replicas);
        let batch = pool.install(|| {
            (start..end)
                .into_par_iter()
                .map(|r| simulate(&config.rule, &schedule, n, config.seed, r))
                .collect::<Result<Vec<_>>>()
        })?;
        for traj in batch {
            for (i, x) in traj.positions.iter().enumerate() {
                writeln!(w, "{},{i},{x}", traj.replica).map_err(|e| Error::io(&path, e))?;
            }
        }
        start = end;
    }
    finish(w, &path)?;
    Ok(path)
}

pub fn write_manifest(manifest: &RunManifest, dir: &Path) -> Result<PathBuf> {
    let path = dir.join("manifest.json");
    let mut w = create(&path)?;
    serde_json::to_writer_pretty(&mut w, manifest).map_err(|e| Error::Serialize(e.to_string()))?;
    writeln!(w).map_err(|e| Error::io(&path, e))?;
    finish(w, &path)?;
    Ok(path)
}

/// Reads the config back out of a manifest.
pub fn read_manifest_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let config = v
        .get("config")
        .ok_or_else(|| Error::Config(format!("{}: no `config` object", path.display())))?;
    super::config::config_from_json(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_table_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let t = ResultTable::new("empty", &["a", "b"]);
        let p = emit_csv(&t, dir.path()).unwrap();
        assert_eq!(fs::read_to_string(p).unwrap(), "a,b\n");
    }

    #[test]
    fn ks_plot_has_two_series() {
        let dir = tempfile::tempdir().unwrap();
        let plot = PlotData::Ks {
            horizon: 5,
            sorted: vec![-1.0, 0.0, 1.0],
            target: vec![0.1, 0.5, 0.9],
        };
        let p = emit_plotdata(&[plot], dir.path()).unwrap();
        let text = fs::read_to_string(&p[0]).unwrap();
        let blocks: Vec<&str> = text.split("\n\n\n").collect();
        assert_eq!(blocks.len(), 2);
        assert!(blocks[0].starts_with("# x ecdf"));
        assert_eq!(blocks[0].lines().count(), 4);
        assert!(blocks[1].starts_with("# x target_cdf"));
    }

    #[test]
    fn fdd_plot_labels() {
        let dir = tempfile::tempdir().unwrap();
        let plot = PlotData::Fdd {
            horizon: 5,
            grid: vec![0.5, 1.0],
            correlation: vec![vec![1.0, 0.75], vec![0.75, 1.0]],
            limit: vec![vec![1.0, 0.8], vec![0.8, 1.0]],
        };
        let p = emit_plotdata(&[plot], dir.path()).unwrap();
        let text = fs::read_to_string(&p[0]).unwrap();
        assert!(text.contains("t 0.5 1\n0.5 1.0000000000000000e0 7.5000000000000000e-1\n"));
    }
}
