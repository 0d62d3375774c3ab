use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hris_loc::bench::{emit_outputs, run_scenario, write_trials, ScenarioConfig};
use hris_loc::Error;

#[derive(Parser)]
#[command(name = "hris-bench", version, about = "Monte Carlo runs of the HRIS localization pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every sweep point and write rmse.csv, trials.csv, bearings.csv and plot.gp.
    Run {
        config: PathBuf,
        #[arg(short, long, default_value = "out")]
        out: PathBuf,
        #[arg(short, long, default_value_t = default_workers())]
        workers: usize,
        /// Use the 17 x 17 surface instead of the configured one.
        #[arg(long)]
        long: bool,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Evaluate the bounds only, at oracle estimates.
    Bounds {
        config: PathBuf,
        #[arg(short, long, default_value = "out")]
        out: PathBuf,
        #[arg(short, long, default_value_t = default_workers())]
        workers: usize,
        #[arg(long)]
        long: bool,
    },
    /// Check a config file and print the resolved scenario.
    Validate { config: PathBuf },
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn load(path: &Path, long: bool) -> Result<ScenarioConfig, ExitCode> {
    match ScenarioConfig::load(path) {
        Ok(cfg) if long => Ok(cfg.long_run()),
        Ok(cfg) => Ok(cfg),
        Err(e) => {
            eprintln!("error: {e}");
            Err(ExitCode::from(1))
        }
    }
}

fn execute(cfg: &ScenarioConfig, out: &Path, workers: usize) -> ExitCode {
    let run = match run_scenario(cfg, workers) {
        Ok(r) => r,
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = emit_outputs(&run.table, out).and_then(|_| write_trials(&run.trials, out)) {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let rate = run.table.max_failure_rate();
    println!("{} sweep points written to {}", run.table.rows.len(), out.display());
    if rate > cfg.run.max_failure_rate {
        eprintln!("failure rate {rate:.3} exceeds {}", cfg.run.max_failure_rate);
        return ExitCode::from(2);
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Run { config, out, workers, long, trials } => {
            let mut cfg = match load(&config, long) {
                Ok(c) => c,
                Err(code) => return code,
            };
            if let Some(t) = trials {
                cfg.run.trials = t;
            }
            execute(&cfg, &out, workers)
        }
        Command::Bounds { config, out, workers, long } => match load(&config, long) {
            Ok(cfg) => execute(&cfg.bounds_only(), &out, workers),
            Err(code) => code,
        },
        Command::Validate { config } => match load(&config, false) {
            Ok(cfg) => {
                print!("{}", cfg.to_toml());
                ExitCode::SUCCESS
            }
            Err(code) => code,
        },
    }
}
