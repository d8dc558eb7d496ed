use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mse_ahrs::harness::{run_experiment, RunConfig, RunMode};

#[derive(Parser)]
#[command(name = "mse-ahrs", version, about = "Adaptive MSE-weighted AHRS fusion with online gyro calibration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fuse a simulated stream and score it against ground truth.
    Simulate(Common),
    /// Fuse a recorded CSV stream (`io.input` or `--input`).
    Replay(Common),
    /// Like simulate (or replay, if an input is given) with online calibration on.
    Calibrate(Common),
}

#[derive(Args)]
struct Common {
    /// Key-value configuration file; every key is optional.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the `seed` key.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the `io.input` key.
    #[arg(long)]
    input: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), Box<dyn std::error::Error>> {
    let (common, mode, calibrate) = match cli.command {
        Command::Simulate(c) => (c, Some(RunMode::Simulate), false),
        Command::Replay(c) => (c, Some(RunMode::Replay), false),
        Command::Calibrate(c) => (c, None, true),
    };
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(i) = common.input {
        cfg.input = Some(i);
    }
    if calibrate {
        cfg.calibration.enabled = true;
    }
    cfg.mode = mode.unwrap_or(if cfg.input.is_some() { RunMode::Replay } else { RunMode::Simulate });
    let report = run_experiment(&cfg, &common.out)?;
    print!("{}", report.to_text());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
