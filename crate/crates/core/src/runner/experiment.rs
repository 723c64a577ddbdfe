//! One experiment: simulate every replica once at the largest horizon, read
//! off every smaller horizon from the same path, then center, scale and run
//! the selected suites.

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use super::config::{ExperimentConfig, Suite, Tolerances};
use crate::cooling::CoolingSchedule;
use crate::env::{log_rho_moments, validate_recurrent, Recurrence};
use crate::error::{Error, Result};
use crate::theory::{LimitLaw, ScalingConstants, SIGMA_V_SQ};
use crate::verify::{
    chi_square_gof, exact_walk_pmf, flatness_trend, sup_gaps, tally, verify_fdd,
    verify_flatness, verify_marginal, FlatnessSummary,
};
use crate::walker::{center, positions_at, Centering, ObservationPlan};

/// One table value.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
    Empty,
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Float(v) => f.write_str(&fmt_f64(*v)),
            Cell::Text(s) => f.write_str(s),
            Cell::Empty => Ok(()),
        }
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

/// A CSV-shaped table with a fixed column order.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl ResultTable {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        ResultTable {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }
}

/// Floats are written with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

/// Series for plotting.
#[derive(Debug, Clone, PartialEq)]
pub enum PlotData {
    /// Sorted samples for the ECDF and the target CDF at the same abscissae.
    Ks {
        horizon: u64,
        sorted: Vec<f64>,
        target: Vec<f64>,
    },
    /// Empirical and limit correlation on the grid.
    Fdd {
        horizon: u64,
        grid: Vec<f64>,
        correlation: Vec<Vec<f64>>,
        limit: Vec<Vec<f64>>,
    },
    Flatness(Vec<FlatnessSummary>),
}

/// Everything needed to reproduce a run, plus the χ values it used.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub started_unix: u64,
    pub finished_unix: Option<u64>,
    pub complete: bool,
    pub passed: Option<bool>,
    pub sigma_mu_sq: Option<f64>,
    pub sigma_v_sq: f64,
    /// `(n, χ_n)` per horizon.
    pub chi: Vec<(u64, f64)>,
    pub oracle_cap: u64,
    pub tolerances: Tolerances,
    pub files: Vec<String>,
    pub config: Value,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub manifest: RunManifest,
    pub tables: Vec<ResultTable>,
    pub reports: Vec<Value>,
    pub plots: Vec<PlotData>,
    pub passed: bool,
}

fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Hex SHA-256 of the canonical JSON form of `config`.
pub fn config_hash(config: &ExperimentConfig) -> Result<String> {
    use sha2::{Digest, Sha256};
    let text = serde_json::to_string(&config.to_json()?)
        .map_err(|e| Error::Serialize(e.to_string()))?;
    let digest = Sha256::digest(text.as_bytes());
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

pub(crate) fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// Starting manifest with `complete = false`.
pub fn initial_manifest(config: &ExperimentConfig) -> Result<RunManifest> {
    Ok(RunManifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: config_hash(config)?,
        seed: config.seed,
        started_unix: unix_now(),
        finished_unix: None,
        complete: false,
        passed: None,
        sigma_mu_sq: None,
        sigma_v_sq: SIGMA_V_SQ,
        chi: Vec::new(),
        oracle_cap: config.oracle_cap,
        tolerances: config.tolerances.clone(),
        files: Vec::new(),
        config: config.to_json()?,
    })
}

struct Horizon {
    n: u64,
    plan: ObservationPlan,
    // Index of each plan time in the shared time list.
    index: Vec<usize>,
    end_index: usize,
}

fn scaling_for(config: &ExperimentConfig, schedule: &CoolingSchedule) -> Result<Option<ScalingConstants>> {
    let needs = config.suites.iter().any(Suite::needs_scaling);
    if needs {
        if let Recurrence::Reject(reason) = validate_recurrent(&config.rule, config.recurrence_tol)? {
            return Err(Error::Config(format!("rule is not recurrent: {reason:?}")));
        }
    }
    let regime = match schedule.regime() {
        Some(r) => r,
        None if needs => {
            return Err(Error::Config(
                "scaling suites need a polynomial or exponential schedule".into(),
            ))
        }
        None => return Ok(None),
    };
    let (_, sigma_mu_sq) = log_rho_moments(&config.rule)?;
    let small = config.horizons[0] < 2;
    match ScalingConstants::new(sigma_mu_sq, SIGMA_V_SQ, regime) {
        Ok(s) if !small => Ok(Some(s)),
        Ok(_) | Err(_) if !needs => Ok(None),
        Ok(_) => Err(Error::Config("scaling needs every horizon >= 2".into())),
        Err(e) => Err(e),
    }
}

/// Runs `config` on `workers` threads. Outputs depend only on `config`.
pub fn run_experiment(config: &ExperimentConfig, workers: usize) -> Result<RunOutput> {
    let mut manifest = initial_manifest(config)?;
    let max_n = config.max_horizon();
    let schedule = config.cooling()?.prepared(max_n)?;
    let scaling = scaling_for(config, &schedule)?;
    manifest.sigma_mu_sq = scaling.map(|s| s.sigma_mu_sq);

    let mut all_times: Vec<u64> = Vec::new();
    let mut plans = Vec::new();
    for &n in &config.horizons {
        let plan = ObservationPlan::new(n, &config.grid)?;
        all_times.extend(&plan.times);
        all_times.push(n);
        plans.push(plan);
    }
    all_times.sort_unstable();
    all_times.dedup();
    let horizons: Vec<Horizon> = plans
        .into_iter()
        .map(|plan| {
            let pos = |t: &u64| all_times.binary_search(t).expect("time recorded");
            Horizon {
                n: plan.n,
                index: plan.times.iter().map(pos).collect(),
                end_index: pos(&plan.n),
                plan,
            }
        })
        .collect();

    let recorded: Vec<Vec<i64>> = pool(workers)?.install(|| {
        (0..config.replicas)
            .into_par_iter()
            .map(|r| positions_at(&config.rule, &schedule, max_n, config.seed, r, &all_times))
            .collect::<Result<Vec<_>>>()
    })?;

    let grid_cols: Vec<String> = config.grid.iter().map(|t| format!("{t}")).collect();
    let mut replica_cols = vec!["horizon".to_string(), "replica".into(), "x_n".into()];
    replica_cols.extend(grid_cols.iter().map(|t| format!("raw@{t}")));
    if scaling.is_some() {
        replica_cols.push("scaled_x_n".into());
        replica_cols.extend(grid_cols.iter().map(|t| format!("scaled@{t}")));
    }
    let mut replicas = ResultTable {
        name: "replicas".into(),
        columns: replica_cols,
        rows: Vec::new(),
    };
    let mut centering_table =
        ResultTable::new("centering", &["horizon", "t", "mean", "std_err", "chi"]);
    let mut pmf_table = ResultTable::new("pmf", &["horizon", "x", "count", "frequency", "exact"]);

    let mut reports = Vec::new();
    let mut plots = Vec::new();
    let mut passed = true;
    let mut ks_stats = Vec::new();
    let mut flat = Vec::new();
    let mut fdd_last = None;
    let mut flat_corr_last = None;
    let tol = &config.tolerances;
    let run = |s: Suite| config.suites.contains(&s);

    for h in &horizons {
        let n = h.n;
        let ends: Vec<i64> = recorded.iter().map(|row| row[h.end_index]).collect();
        let raw: Vec<Vec<f64>> = recorded
            .iter()
            .map(|row| {
                let picked: Vec<i64> = h.index.iter().map(|&i| row[i]).collect();
                h.plan.evaluate(&picked)
            })
            .collect();

        let chi = match &scaling {
            Some(s) => Some(s.chi_n(n as f64)?),
            None => None,
        };
        if let Some(chi) = chi {
            manifest.chi.push((n, chi));
        }
        let cent = if raw.len() >= 2 {
            center(&raw)?
        } else {
            Centering {
                mean: raw[0].clone(),
                std_err: vec![f64::NAN; config.grid.len()],
            }
        };
        let end_f: Vec<Vec<f64>> = ends.iter().map(|&x| vec![x as f64]).collect();
        let end_mean = if end_f.len() >= 2 {
            center(&end_f)?.mean[0]
        } else {
            end_f[0][0]
        };
        for (i, t) in config.grid.iter().enumerate() {
            centering_table.rows.push(vec![
                n.into(),
                Cell::Text(format!("{t}")),
                cent.mean[i].into(),
                cent.std_err[i].into(),
                chi.map_or(Cell::Empty, Cell::Float),
            ]);
        }

        let mut scaled_end = Vec::new();
        let mut scaled = Vec::new();
        for (r, (x, row)) in ends.iter().zip(&raw).enumerate() {
            let mut cells = vec![n.into(), (r as u64).into(), (*x).into()];
            cells.extend(row.iter().map(|&v| Cell::Float(v)));
            if let Some(chi) = chi {
                let norm = chi.sqrt();
                let se = (*x as f64 - end_mean) / norm;
                let sp: Vec<f64> = row.iter().zip(&cent.mean).map(|(v, m)| (v - m) / norm).collect();
                cells.push(se.into());
                cells.extend(sp.iter().map(|&v| Cell::Float(v)));
                scaled_end.push(se);
                scaled.push(sp);
            }
            replicas.rows.push(cells);
        }

        if run(Suite::Marginal) {
            let rep = verify_marginal(&scaled_end)?;
            ks_stats.push(rep.statistic);
            reports.push(json!({"suite": "marginal", "horizon": n, "chi": chi, "report": rep}));
            let mut sorted = scaled_end.clone();
            sorted.sort_by(f64::total_cmp);
            let target = sorted.iter().map(|&x| crate::verify::normal_cdf(x)).collect();
            plots.push(PlotData::Ks { horizon: n, sorted, target });
        }
        let law = scaling.map(|s| LimitLaw::for_regime(s.regime, config.a));
        if run(Suite::Fdd) {
            let law = law.expect("scaling checked");
            let rep = verify_fdd(&scaled, &config.grid, &law, config.seed, config.bootstrap_resamples)?;
            plots.push(PlotData::Fdd {
                horizon: n,
                grid: config.grid.clone(),
                correlation: rep.correlation.clone(),
                limit: rep.limit_correlation.clone(),
            });
            reports.push(json!({"suite": "fdd", "horizon": n, "chi": chi, "report": &rep}));
            fdd_last = Some(rep);
        }
        if run(Suite::Flatness) {
            let summary = verify_flatness(&scaled, &config.grid, config.a, n)?;
            let window = window_paths(&scaled, &config.grid, config.a);
            let corr = verify_fdd(
                &window.1,
                &window.0,
                &LimitLaw::RandomConstant { a: config.a },
                config.seed,
                0,
            )?;
            let gaps = sup_gaps(&scaled, &config.grid, config.a)?;
            reports.push(json!({
                "suite": "flatness",
                "horizon": n,
                "chi": chi,
                "summary": &summary,
                "min_window_correlation": corr.min_correlation,
                "mean_sup_gap": crate::walker::compensated_sum(gaps.iter().copied()) / gaps.len() as f64,
            }));
            flat_corr_last = Some(corr.min_correlation);
            flat.push(summary);
        }
        if run(Suite::Oracle) {
            let exact = exact_walk_pmf(&config.rule, &schedule, n, config.oracle_cap)?;
            let approx = exact.to_pmf();
            let counts = tally(ends.iter().copied());
            let rep = chi_square_gof(&counts, &approx)?;
            let ok = rep.p_value > tol.oracle_p_min;
            passed &= ok;
            let mut xs: Vec<i64> = approx.support().map(|(x, _)| x).collect();
            xs.extend(counts.keys());
            xs.sort_unstable();
            xs.dedup();
            for x in xs {
                let c = counts.get(&x).copied().unwrap_or(0);
                pmf_table.rows.push(vec![
                    n.into(),
                    x.into(),
                    c.into(),
                    (c as f64 / ends.len() as f64).into(),
                    approx.get(x).into(),
                ]);
            }
            reports.push(json!({
                "suite": "oracle",
                "horizon": n,
                "pass": ok,
                "threshold": tol.oracle_p_min,
                "report": rep,
            }));
        }
    }

    if run(Suite::Marginal) {
        let last = *ks_stats.last().expect("one horizon");
        let trend = ks_stats.windows(2).all(|w| w[1] <= w[0]);
        let ok = last < tol.ks_max && trend;
        passed &= ok;
        reports.push(json!({
            "suite": "marginal",
            "summary": true,
            "pass": ok,
            "ks": ks_stats,
            "ks_max": tol.ks_max,
            "non_increasing": trend,
        }));
    }
    if let Some(rep) = &fdd_last {
        let inc_ok = rep.increment_correlations.is_empty() || rep.max_increment_corr <= tol.increment_corr_tol;
        let ok = rep.max_corr_error <= tol.corr_tol && inc_ok;
        passed &= ok;
        reports.push(json!({
            "suite": "fdd",
            "summary": true,
            "pass": ok,
            "horizon": max_n,
            "max_corr_error": rep.max_corr_error,
            "corr_tol": tol.corr_tol,
            "max_increment_corr": rep.max_increment_corr,
            "increment_corr_tol": tol.increment_corr_tol,
        }));
    }
    if run(Suite::Flatness) {
        let trend = flatness_trend(&flat);
        let corr = flat_corr_last.expect("one horizon");
        let ok = trend && corr >= tol.flat_corr_min;
        passed &= ok;
        reports.push(json!({
            "suite": "flatness",
            "summary": true,
            "pass": ok,
            "medians": flat.iter().map(|s| s.median).collect::<Vec<_>>(),
            "strictly_decreasing": trend,
            "min_window_correlation": corr,
            "flat_corr_min": tol.flat_corr_min,
        }));
        plots.push(PlotData::Flatness(flat));
    }

    let mut tables = vec![replicas, centering_table];
    if run(Suite::Oracle) {
        tables.push(pmf_table);
    }
    manifest.passed = Some(passed);
    Ok(RunOutput {
        manifest,
        tables,
        reports,
        plots,
        passed,
    })
}

/// The grid points in `[a, 1]` and each path restricted to them.
fn window_paths(paths: &[Vec<f64>], grid: &[f64], a: f64) -> (Vec<f64>, Vec<Vec<f64>>) {
    let start = grid.iter().position(|&t| t >= a - 1e-12).unwrap_or(grid.len());
    (
        grid[start..].to_vec(),
        paths.iter().map(|p| p[start..].to_vec()).collect(),
    )
}
