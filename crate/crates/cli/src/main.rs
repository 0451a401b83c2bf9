//! antidot: band structures, spectral-gap reports, parameter sweeps,
//! Feshbach certificates, resolvent-kernel decay tables, and a
//! verification suite for periodic Pauli-type Hamiltonians.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::json;

use antidot_cli::commands::{self, flux_diagnostics};
use antidot_cli::config::RunConfig;
use antidot_cli::manifest::RunManifest;
use antidot_cli::output::OutputDir;
use antidot_cli::verify::run_verify;

#[derive(Parser)]
#[command(name = "antidot", version, about = "Plane-wave spectral toolkit for periodic Pauli-type Hamiltonians")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Config file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides [output].dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: rayon's choice, which honors
    /// RAYON_NUM_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for randomized spot checks (overrides [run].seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Eigenvalue table over the k-grid (bands.csv + bands_meta.json).
    Bands,
    /// Spectral-gap report around the center energy (gap_report.json).
    Gap,
    /// (α, β) sweep with gap widths and fitted exponents (sweep.csv).
    Sweep,
    /// Schur-complement certificates at one fiber (scan/roots/couplings).
    Feshbach,
    /// Free-resolvent kernel decay table (kernel_decay.csv).
    Kernel,
    /// Full invariant suite; pass/fail JSON with measured values.
    Verify,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Bands => "bands",
            Command::Gap => "gap",
            Command::Sweep => "sweep",
            Command::Feshbach => "feshbach",
            Command::Kernel => "kernel",
            Command::Verify => "verify",
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            eprintln!("antidot: could not configure the thread pool");
            return ExitCode::FAILURE;
        }
    }
    let config_path = match &cli.config {
        Some(p) => p.clone(),
        None => {
            eprintln!("antidot: --config <path> is required");
            return ExitCode::FAILURE;
        }
    };
    let cfg = match RunConfig::from_path(&config_path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("antidot: {e}");
            return ExitCode::FAILURE;
        }
    };
    let out_dir = cli
        .out
        .clone()
        .or_else(|| cfg.output.dir.clone().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(format!("antidot-out/{}", cli.command.name())));
    let mut out = match OutputDir::create(&out_dir) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("antidot: {e}");
            return ExitCode::FAILURE;
        }
    };
    let seed = cli.seed.unwrap_or(cfg.run.seed);
    let manifest = RunManifest::new(cli.command.name(), &cfg, seed);
    let started = Instant::now();
    let result = run_command(cli.command, &cfg, seed, &mut out);
    let runtime = started.elapsed().as_secs_f64();
    let (diagnostics, error, code) = match result {
        Ok(d) => (d, None, ExitCode::SUCCESS),
        Err(e) => (serde_json::Value::Null, Some(e.to_string()), ExitCode::FAILURE),
    };
    if let Some(err) = &error {
        eprintln!("antidot {}: {err}", cli.command.name());
    }
    if let Err(e) = manifest.finalize(&mut out, runtime, diagnostics, error) {
        eprintln!("antidot: {e}");
        return ExitCode::FAILURE;
    }
    println!(
        "antidot {}: wrote {} file(s) to {}",
        cli.command.name(),
        out.files().len() + 1,
        out.root().display()
    );
    code
}

fn run_command(
    command: Command,
    cfg: &RunConfig,
    seed: u64,
    out: &mut OutputDir,
) -> Result<serde_json::Value, antidot_cli::CliError> {
    let mut diag = match command {
        Command::Bands => commands::run_bands(cfg, out)?,
        Command::Gap => commands::run_gap(cfg, out)?,
        Command::Sweep => commands::run_sweep(cfg, out)?,
        Command::Feshbach => commands::run_feshbach(cfg, out)?,
        Command::Kernel => commands::run_kernel(cfg, out)?,
        Command::Verify => run_verify(cfg, seed, out)?,
    };
    // Common flux/threshold diagnostics for every run.
    if let serde_json::Value::Object(map) = &mut diag {
        map.insert("flux".to_string(), flux_diagnostics(cfg)?);
    } else {
        diag = json!({ "flux": flux_diagnostics(cfg)?, "result": diag });
    }
    Ok(diag)
}
