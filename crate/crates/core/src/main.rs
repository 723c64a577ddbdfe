use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rwcre::runner::config::CONFIG_HELP;
use rwcre::runner::{execute, load_config, ExperimentConfig, Suite};
use rwcre::theory::{kesten_cdf, kesten_density, sigma_v_sq, ScalingConstants, DEFAULT_TRUNCATION, SIGMA_V_SQ};
use rwcre::env::log_rho_moments;
use rwcre::{Error, Result};

#[derive(Parser)]
#[command(name = "rwcre", version, about = "Random walks in cooling random environments", after_long_help = CONFIG_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment config (TOML) or a manifest.json from an earlier run.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override the master seed.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads; outputs do not depend on this.
    #[arg(long, value_name = "N", default_value_t = default_workers())]
    workers: usize,
    /// Also write every full path to paths.csv.
    #[arg(long)]
    dump_paths: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate and write tables; runs the suites listed in the config.
    Simulate(Common),
    /// Write p(x), F(x), σ_V² and, given a config, χ_n per horizon.
    Targets {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = -6.0, allow_hyphen_values = true)]
        x_min: f64,
        #[arg(long, default_value_t = 6.0, allow_hyphen_values = true)]
        x_max: f64,
        #[arg(long, default_value_t = 1201)]
        points: usize,
    },
    /// KS test of X^n_1 against N(0,1) at every horizon.
    VerifyMarginal(Common),
    /// Covariance on the grid against the limit process.
    VerifyFdd(Common),
    /// Sup-gap on [a, 1] across horizons.
    VerifyFlatness(Common),
    /// Chi-square of X_n against exact enumeration.
    OracleCheck(Common),
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn resolve(common: &Common) -> Result<ExperimentConfig> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config PATH is required".into()))?;
    let mut config = load_config(path)?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(out) = &common.out {
        config.out = out.clone();
    }
    config.dump_paths |= common.dump_paths;
    Ok(config)
}

fn run(common: &Common, suites: Option<Vec<Suite>>) -> Result<bool> {
    let mut config = resolve(common)?;
    if let Some(s) = suites {
        config.suites = s;
    }
    let out = execute(&config, common.workers)?;
    for r in &out.reports {
        if r.get("summary").is_some() || r.get("pass").is_some() {
            println!("{r}");
        }
    }
    println!(
        "{} -> {}",
        if out.passed { "PASS" } else { "FAIL" },
        config.out.display()
    );
    Ok(out.passed)
}

fn targets(common: &Common, x_min: f64, x_max: f64, points: usize) -> Result<bool> {
    if x_min.partial_cmp(&x_max) != Some(std::cmp::Ordering::Less) || points < 2 {
        return Err(Error::Config("need x_min < x_max and points >= 2".into()));
    }
    let config = match &common.config {
        Some(_) => Some(resolve(common)?),
        None => None,
    };
    let dir = common
        .out
        .clone()
        .or_else(|| config.as_ref().map(|c| c.out.clone()))
        .unwrap_or_else(|| PathBuf::from("out"));
    let mut table = rwcre::runner::ResultTable::new("kesten", &["x", "density", "cdf"]);
    for i in 0..points {
        let x = x_min + (x_max - x_min) * i as f64 / (points - 1) as f64;
        table.rows.push(vec![x.into(), kesten_density(x).into(), kesten_cdf(x).into()]);
    }
    rwcre::runner::emit_csv(&table, &dir)?;
    let series = sigma_v_sq(DEFAULT_TRUNCATION)?;
    let mut constants = rwcre::runner::ResultTable::new("constants", &["name", "value"]);
    constants.rows.push(vec!["sigma_v_sq_series".into(), series.into()]);
    constants.rows.push(vec!["sigma_v_sq_closed".into(), SIGMA_V_SQ.into()]);
    if let Some(config) = &config {
        let (mean, var) = log_rho_moments(&config.rule)?;
        constants.rows.push(vec!["mean_log_rho".into(), mean.into()]);
        constants.rows.push(vec!["sigma_mu_sq".into(), var.into()]);
        if let Some(regime) = config.cooling()?.regime() {
            let s = ScalingConstants::new(var, SIGMA_V_SQ, regime)?;
            let mut chi = rwcre::runner::ResultTable::new("chi", &["horizon", "chi"]);
            for &n in &config.horizons {
                chi.rows.push(vec![n.into(), s.chi_n(n as f64)?.into()]);
            }
            rwcre::runner::emit_csv(&chi, &dir)?;
        }
    }
    rwcre::runner::emit_csv(&constants, &dir)?;
    println!("sigma_v_sq = {series} (closed form {SIGMA_V_SQ})");
    println!("wrote {}", dir.display());
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(c) => run(c, None),
        Command::Targets { common, x_min, x_max, points } => targets(common, *x_min, *x_max, *points),
        Command::VerifyMarginal(c) => run(c, Some(vec![Suite::Marginal])),
        Command::VerifyFdd(c) => run(c, Some(vec![Suite::Fdd])),
        Command::VerifyFlatness(c) => run(c, Some(vec![Suite::Flatness])),
        Command::OracleCheck(c) => run(c, Some(vec![Suite::Oracle])),
    };
    let _ = std::io::stdout().flush();
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
