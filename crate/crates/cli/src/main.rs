//! `scatter`: reproducible experiment runner for the Kasner scattering library.
//!
//! Each command writes `<out>/<command>.json` (deterministic for a fixed
//! config), `<out>/<command>.meta.json` (timestamp, timing, threads) and any
//! CSV tables as `<out>/<command>.<table>.csv`. Exit code 0 means every
//! asserted property held, 1 that one failed, 2 an error.

mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde_json::json;

use config::ExperimentConfig;

#[derive(Parser)]
#[command(name = "scatter", version, about = "Scattering experiments on Kasner backgrounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; falls back to SCATTER_THREADS, then all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// RNG seed; overrides `seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    WaveRoundtrip,
    BesselValidate,
    EnergySweep,
    EinsteinRoundtrip,
    EinsteinConstraints,
    SubcriticalScan,
    Norms,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::WaveRoundtrip => "wave-roundtrip",
            Command::BesselValidate => "bessel-validate",
            Command::EnergySweep => "energy-sweep",
            Command::EinsteinRoundtrip => "einstein-roundtrip",
            Command::EinsteinConstraints => "einstein-constraints",
            Command::SubcriticalScan => "subcritical-scan",
            Command::Norms => "norms",
        }
    }
}

fn threads(cli: &Cli) -> Result<Option<usize>> {
    if let Some(n) = cli.threads {
        return Ok(Some(n));
    }
    match std::env::var("SCATTER_THREADS") {
        Ok(v) => Ok(Some(v.trim().parse().with_context(|| format!("SCATTER_THREADS={v}"))?)),
        Err(_) => Ok(None),
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn run(cli: &Cli) -> Result<bool> {
    let path = cli.config.as_ref().context("--config is required")?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    let threads = threads(cli)?;
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let name = cli.command.name();
    let start = Instant::now();
    let outcome = match cli.command {
        Command::WaveRoundtrip => commands::wave_roundtrip(&cfg),
        Command::BesselValidate => commands::bessel_validate(&cfg),
        Command::EnergySweep => commands::energy_sweep(&cfg),
        Command::EinsteinRoundtrip => commands::einstein_roundtrip(&cfg),
        Command::EinsteinConstraints => commands::einstein_constraints(&cfg),
        Command::SubcriticalScan => commands::subcritical_scan(&cfg),
        Command::Norms => commands::norms(&cfg),
    }?;
    let background = cfg.background()?.record();
    let report = json!({
        "command": name,
        "version": kasner_scatter::VERSION,
        "config": cfg,
        "background": background,
        "pass": outcome.pass,
        "results": outcome.results,
    });
    std::fs::create_dir_all(&cfg.output_dir).with_context(|| format!("creating {}", cfg.output_dir.display()))?;
    write(&cfg.output_dir.join(format!("{name}.json")), &serde_json::to_string_pretty(&report)?)?;
    for (table, text) in &outcome.tables {
        write(&cfg.output_dir.join(format!("{name}.{table}.csv")), text)?;
    }
    let meta = json!({
        "timestamp_unix": SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        "elapsed_seconds": start.elapsed().as_secs_f64(),
        "threads": threads.unwrap_or_else(rayon::current_num_threads),
    });
    write(&cfg.output_dir.join(format!("{name}.meta.json")), &serde_json::to_string_pretty(&meta)?)?;
    println!("{name}: {}", if outcome.pass { "pass" } else { "FAIL" });
    Ok(outcome.pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
