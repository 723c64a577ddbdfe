//! Experiment configuration: a single TOML file.
//!
//! ```toml
//! seed = 7
//! replicas = 5000
//! horizons = [10000, 100000, 1000000]
//! grid = [0.25, 0.5, 0.75, 1.0]     # default depends on the schedule
//! a = 0.5                            # window start for fast cooling
//! rule = { kind = "two-point", p = 0.3333333333333333 }
//! schedule = { kind = "polynomial", B = 1.0, beta = 2.0 }
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cooling::{CoolingSchedule, ScheduleKind};
use crate::env::{ResamplingRule, DEFAULT_RECURRENCE_TOL};
use crate::error::{Error, Result};
use crate::verify::suites::BOOTSTRAP_RESAMPLES;
use crate::verify::DEFAULT_CAP;

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_A: f64 = 0.5;
pub const DEFAULT_OUT: &str = "out";
pub const DEFAULT_GRID: [f64; 4] = [0.25, 0.5, 0.75, 1.0];
pub const DEFAULT_WINDOW_POINTS: usize = 9;

/// Reference for every config key, shown by `--help`.
pub const CONFIG_HELP: &str = "\
Config file (TOML) keys:
  replicas             number of replicas (required, >= 1)
  horizons             walk lengths n, strictly ascending (required)
  rule                 { kind = \"two-point\", p } | { kind = \"finite\", values, weights }
                       | { kind = \"symmetric-beta\", a }   (required)
  schedule             { kind = \"polynomial\", B, beta } | { kind = \"exponential\", C }
                       | { kind = \"unit\" } | { kind = \"explicit\", times | file }   (required)
  seed                 master seed (default 1)
  grid                 time grid in [0,1] (default [0.25, 0.5, 0.75, 1];
                       exponential schedules: 9 points from a to 1)
  a                    window start for fast cooling, in (0,1] (default 0.5)
  out                  output directory (default \"out\")
  dump_paths           write full paths to paths.csv (default false)
  suites               any of \"marginal\", \"fdd\", \"flatness\", \"oracle\" (default none)
  recurrence_tol       allowed |E log rho| (default 1e-9)
  oracle_cap           longest block for exact enumeration (default 12)
  bootstrap_resamples  covariance bootstrap size (default 200)
  [tolerances]         ks_max 0.15, corr_tol 0.1, increment_corr_tol 0.1,
                       flat_corr_min 0.8, oracle_p_min 0.001
A manifest.json from an earlier run is accepted in place of a config file.";

/// Verification procedures a run can execute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Marginal,
    Fdd,
    Flatness,
    Oracle,
}

impl Suite {
    pub fn needs_scaling(&self) -> bool {
        !matches!(self, Suite::Oracle)
    }
}

/// Pass/fail thresholds. Defaults are the acceptance thresholds of the
/// bundled experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Largest KS distance to N(0,1) allowed at the largest horizon.
    pub ks_max: f64,
    /// Entrywise tolerance on the correlation matrix.
    pub corr_tol: f64,
    /// Tolerance on `|corr(X_t, X_s - X_t)|`.
    pub increment_corr_tol: f64,
    /// Minimum pairwise correlation on `[a, 1]` under fast cooling.
    pub flat_corr_min: f64,
    /// Minimum chi-square p-value against the exact oracle.
    pub oracle_p_min: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            ks_max: 0.15,
            corr_tol: 0.1,
            increment_corr_tol: 0.1,
            flat_corr_min: 0.8,
            oracle_p_min: 0.001,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
enum ScheduleSpec {
    Polynomial {
        #[serde(rename = "B")]
        b: f64,
        beta: f64,
    },
    Exponential {
        #[serde(rename = "C")]
        c: f64,
    },
    Unit,
    Explicit {
        times: Option<Vec<u64>>,
        file: Option<String>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<u64>,
    replicas: Option<u64>,
    horizons: Option<Vec<u64>>,
    grid: Option<Vec<f64>>,
    a: Option<f64>,
    out: Option<String>,
    dump_paths: Option<bool>,
    suites: Option<Vec<Suite>>,
    recurrence_tol: Option<f64>,
    oracle_cap: Option<u64>,
    bootstrap_resamples: Option<usize>,
    tolerances: Option<Tolerances>,
    rule: Option<ResamplingRule>,
    schedule: Option<ScheduleSpec>,
}

/// A validated experiment. Serializes to the same shape it is parsed from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub replicas: u64,
    pub horizons: Vec<u64>,
    pub grid: Vec<f64>,
    pub a: f64,
    pub out: PathBuf,
    pub dump_paths: bool,
    pub suites: Vec<Suite>,
    pub recurrence_tol: f64,
    pub oracle_cap: u64,
    pub bootstrap_resamples: usize,
    pub tolerances: Tolerances,
    pub rule: ResamplingRule,
    pub schedule: ScheduleKind,
}

impl ExperimentConfig {
    pub fn cooling(&self) -> Result<CoolingSchedule> {
        CoolingSchedule::new(self.schedule.clone())
    }

    pub fn max_horizon(&self) -> u64 {
        *self.horizons.last().expect("validated non-empty")
    }

    /// Canonical TOML form; parses back to an equal config.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serialize(e.to_string()))
    }

    pub fn to_json(&self) -> Result<serde_json::Value> {
        serde_json::to_value(self).map_err(|e| Error::Serialize(e.to_string()))
    }
}

/// 1-based line of the first line assigning `key`, for error context.
fn line_of(text: &str, key: &str) -> Option<usize> {
    text.lines().position(|l| {
        let l = l.trim_start();
        l.strip_prefix(key)
            .is_some_and(|rest| rest.trim_start().starts_with('='))
            || l.contains(&format!("{key} ="))
            || l.contains(&format!("{key}="))
    })
    .map(|i| i + 1)
}

fn err_at(text: &str, key: &str, msg: impl std::fmt::Display) -> Error {
    match line_of(text, key) {
        Some(line) => Error::Config(format!("line {line}: {msg}")),
        None => Error::Config(msg.to_string()),
    }
}

/// Parses and validates a TOML config. Relative `file` paths in an explicit
/// schedule resolve against `base_dir`.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    parse_config_in(text, Path::new("."))
}

pub fn parse_config_in(text: &str, base_dir: &Path) -> Result<ExperimentConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    validate(raw, text, base_dir)
}

/// Rebuilds a config from the `config` object of a run manifest.
pub fn config_from_json(value: &serde_json::Value) -> Result<ExperimentConfig> {
    let raw: RawConfig =
        serde_json::from_value(value.clone()).map_err(|e| Error::Config(e.to_string()))?;
    validate(raw, "", Path::new("."))
}

fn validate(raw: RawConfig, text: &str, base_dir: &Path) -> Result<ExperimentConfig> {
    let rule = raw
        .rule
        .ok_or_else(|| Error::Config("missing key `rule`".into()))?;
    rule.check().map_err(|e| err_at(text, "rule", e))?;

    let spec = raw
        .schedule
        .ok_or_else(|| Error::Config("missing key `schedule`".into()))?;
    let schedule = match spec {
        ScheduleSpec::Polynomial { b, beta } => ScheduleKind::Polynomial { b, beta },
        ScheduleSpec::Exponential { c } => ScheduleKind::Exponential { c },
        ScheduleSpec::Unit => ScheduleKind::Unit,
        ScheduleSpec::Explicit { times, file } => match (times, file) {
            (Some(times), None) => ScheduleKind::Explicit { times },
            (None, Some(file)) => {
                let path = base_dir.join(&file);
                let body = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                CoolingSchedule::parse_explicit(&body)?.kind().clone()
            }
            _ => {
                return Err(err_at(
                    text,
                    "schedule",
                    "explicit schedule needs exactly one of `times` or `file`",
                ))
            }
        },
    };
    CoolingSchedule::new(schedule.clone()).map_err(|e| err_at(text, "schedule", e))?;

    let replicas = raw
        .replicas
        .ok_or_else(|| Error::Config("missing key `replicas`".into()))?;
    if replicas < 1 {
        return Err(err_at(text, "replicas", "replicas must be at least 1"));
    }
    let horizons = raw
        .horizons
        .ok_or_else(|| Error::Config("missing key `horizons`".into()))?;
    if horizons.is_empty() {
        return Err(err_at(text, "horizons", "horizons must not be empty"));
    }
    if horizons.windows(2).any(|w| w[0] >= w[1]) {
        return Err(err_at(text, "horizons", "horizons must be strictly ascending"));
    }

    let a = raw.a.unwrap_or(DEFAULT_A);
    if !(a > 0.0 && a <= 1.0) {
        return Err(err_at(text, "a", format!("a = {a} must lie in (0, 1]")));
    }

    let grid = match raw.grid {
        Some(g) => g,
        None => match schedule {
            ScheduleKind::Exponential { .. } => window_grid(a, DEFAULT_WINDOW_POINTS),
            _ => DEFAULT_GRID.to_vec(),
        },
    };
    crate::walker::check_grid(&grid).map_err(|e| err_at(text, "grid", e))?;

    let recurrence_tol = raw.recurrence_tol.unwrap_or(DEFAULT_RECURRENCE_TOL);
    if !(recurrence_tol >= 0.0) {
        return Err(err_at(text, "recurrence_tol", "recurrence_tol must be non-negative"));
    }
    let bootstrap_resamples = raw.bootstrap_resamples.unwrap_or(BOOTSTRAP_RESAMPLES);

    Ok(ExperimentConfig {
        seed: raw.seed.unwrap_or(DEFAULT_SEED),
        replicas,
        horizons,
        grid,
        a,
        out: PathBuf::from(raw.out.unwrap_or_else(|| DEFAULT_OUT.to_string())),
        dump_paths: raw.dump_paths.unwrap_or(false),
        suites: raw.suites.unwrap_or_default(),
        recurrence_tol,
        oracle_cap: raw.oracle_cap.unwrap_or(DEFAULT_CAP),
        bootstrap_resamples,
        tolerances: raw.tolerances.unwrap_or_default(),
        rule,
        schedule,
    })
}

/// `points` equally spaced times from `a` to 1 inclusive.
pub fn window_grid(a: f64, points: usize) -> Vec<f64> {
    if points < 2 || a >= 1.0 {
        return vec![1.0];
    }
    (0..points)
        .map(|i| {
            if i + 1 == points {
                1.0
            } else {
                a + (1.0 - a) * i as f64 / (points - 1) as f64
            }
        })
        .collect()
}
