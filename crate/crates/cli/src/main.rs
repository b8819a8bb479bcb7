//! `renwave` — config-driven runner for the spectral wave experiments.
//!
//! Each subcommand wires the library modules into one named experiment and
//! writes CSV tables, SVG plots and a machine-readable PASS/FAIL summary
//! into the output directory. Exit codes: 0 success, 2 configuration error,
//! 3 at least one acceptance check failed.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use renwave_core::config::{ConfigMap, ConfigValue};
use renwave_core::experiments::{run_experiment, EXPERIMENTS};

#[derive(Parser, Debug)]
#[command(
    name = "renwave",
    about = "spectral laboratory for renormalized nonlinear wave dynamics",
    after_help = "experiments: sigma-scan, ito-check, ou-invariance, wick-converge, \
                  green-bound, nlw-energy, gibbs-invariance, solve"
)]
struct Cli {
    /// Experiment to run.
    experiment: String,

    /// Flat TOML config file (schema documented in the README).
    #[arg(long)]
    config: Option<PathBuf>,

    /// Output directory for CSV/SVG artifacts.
    #[arg(long, default_value = "out")]
    out: PathBuf,

    /// Master seed; overrides the config `seed` key.
    #[arg(long)]
    seed: Option<u64>,

    /// Worker thread cap (results are independent of it).
    #[arg(long)]
    threads: Option<usize>,

    /// Repeatable `key=value` config override (TOML value syntax).
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_FAIL: u8 = 3;

fn run() -> Result<bool, renwave_core::Error> {
    let cli = Cli::parse();
    if !EXPERIMENTS.contains(&cli.experiment.as_str()) {
        return Err(renwave_core::Error::Config(format!(
            "unknown experiment `{}` (expected one of: {})",
            cli.experiment,
            EXPERIMENTS.join(", ")
        )));
    }

    let mut cfg = match &cli.config {
        Some(path) => ConfigMap::parse(&std::fs::read_to_string(path)?)?,
        None => ConfigMap::default(),
    };
    for ov in &cli.overrides {
        cfg.apply_override(ov)?;
    }
    // a config may name its experiment; it must agree with the subcommand
    let named = cfg.get_text("experiment", &cli.experiment)?;
    if named != cli.experiment {
        return Err(renwave_core::Error::Config(format!(
            "config names experiment `{named}` but `{}` was requested",
            cli.experiment
        )));
    }
    cfg.insert("experiment", ConfigValue::Text(cli.experiment.clone()));
    let seed = match cli.seed {
        Some(s) => s,
        None => cfg.get_u64("seed", 0)?,
    };

    let report = match cli.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| renwave_core::Error::Config(format!("thread pool: {e}")))?;
            pool.install(|| run_experiment(&cli.experiment, &cfg, seed))?
        }
        None => run_experiment(&cli.experiment, &cfg, seed)?,
    };

    let written = report.write(&cli.out)?;
    report.print_checks();
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(report.passed())
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("FAIL: at least one acceptance check failed");
            ExitCode::from(EXIT_FAIL)
        }
        Err(e @ renwave_core::Error::Config(_)) => {
            eprintln!("config error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}
