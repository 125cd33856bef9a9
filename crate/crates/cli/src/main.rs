//! `isac`: experiment runner for OFDM-based ISAC SAR processing.
//!
//! Every run writes its outputs plus `manifest.txt` into the `--out`
//! directory. The manifest is itself a valid config file, so
//! `isac <cmd> --config out/manifest.txt` repeats a run.

mod commands;
mod config;
mod error;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sha2::{Digest, Sha256};

use crate::commands::Run;
use crate::config::Config;
use crate::error::{CliError, Result};

#[derive(Parser, Debug)]
#[command(name = "isac", version, about = "OFDM ISAC SAR simulation, focusing and KPI analysis")]
struct Cli {
    /// Scenario file of `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Override one config key, e.g. `--set platform.altitude_m=100`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Worker threads; 0 picks one per core. Outputs do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Master seed, overriding `seed` from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Point-target response of a single OFDM symbol per constellation and filter.
    Irf,
    /// Simulate a raw acquisition of the configured scene.
    Simulate,
    /// Range-compress and back-project a stored acquisition.
    Focus,
    /// NESZ against one swept parameter.
    NeszSweep,
    /// NESZ and communication BER against one swept parameter.
    BerSweep,
    /// Turn range-compressed chirp data into OFDM data, then focus it.
    Emulate,
    /// Quick numerical checks of the installed build.
    Selftest,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Irf => "irf",
            Command::Simulate => "simulate",
            Command::Focus => "focus",
            Command::NeszSweep => "nesz-sweep",
            Command::BerSweep => "ber-sweep",
            Command::Emulate => "emulate",
            Command::Selftest => "selftest",
        }
    }
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn write_manifest(cli: &Cli, cfg: &Config, inputs: &[(String, PathBuf)]) -> Result<()> {
    let mut text = format!("# isac {}\n# command: {}\n# seed: {}\n", env!("CARGO_PKG_VERSION"), cli.command.name(), cfg.seed()?);
    if let Some(c) = &cli.config {
        text.push_str(&format!("# config: {} sha256={}\n", c.display(), sha256_file(c)?));
    }
    for (name, path) in inputs {
        text.push_str(&format!("# input: {name} sha256={}\n", sha256_file(path)?));
    }
    text.push_str(&cfg.to_text());
    let path = cli.out.join("manifest.txt");
    fs::write(&path, text).map_err(|e| CliError::io(&path, e))
}

fn run(cli: &Cli) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .map_err(|e| CliError::Threads(e.to_string()))?;
    let mut cfg = Config::load(cli.config.as_deref(), &cli.overrides)?;
    if let Some(s) = cli.seed {
        cfg.set("seed", s.to_string());
    }
    fs::create_dir_all(&cli.out).map_err(|e| CliError::io(&cli.out, e))?;
    let mut r = Run { cfg: &cfg, out: &cli.out, inputs: Vec::new() };
    let outcome = match cli.command {
        Command::Irf => commands::irf(&mut r),
        Command::Simulate => commands::simulate(&mut r),
        Command::Focus => commands::focus(&mut r),
        Command::NeszSweep => commands::nesz_sweep_cmd(&mut r),
        Command::BerSweep => commands::ber_sweep_cmd(&mut r),
        Command::Emulate => commands::emulate(&mut r),
        Command::Selftest => commands::selftest(&mut r),
    };
    // a failed selftest still leaves a manifest next to its report
    if outcome.is_ok() || matches!(outcome, Err(CliError::SelfTest(_))) {
        write_manifest(cli, &cfg, &r.inputs)?;
    }
    outcome
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
