//! Experiment harness behind the `centripetal` binary.
//!
//! Every command reads one JSON config, writes its data files into an output
//! directory and finishes with `manifest.json` describing the run. Exit codes:
//! 0 success, 1 usage, config or numerical error, 2 recorded divergence.

pub mod commands;
pub mod config;
pub mod manifest;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::Value;

pub use manifest::RunManifest;

/// Environment variable that overrides the output directory.
pub const OUTPUT_DIR_ENV: &str = "CG_OUTPUT_DIR";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] centripetal::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Parser)]
#[command(name = "centripetal", version, about = "Bilinear-game and toy-GAN experiments with centripetal acceleration")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Overrides the config's `seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Dotted-path config override, e.g. `--set optimizer.alpha1=0.05`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub sets: Vec<String>,
    /// Worker threads for sweeps and grids.
    #[arg(long, default_value_t = 1, global = true)]
    pub jobs: usize,
    /// Output directory; defaults to $CG_OUTPUT_DIR, then `runs/<timestamp>-<command>`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// One optimizer trajectory on a bilinear game, plus its spectral report.
    BilinearRun { config: PathBuf },
    /// Final distance over an (alpha, beta) grid.
    Sweep { config: PathBuf },
    /// Spectral radii and bounds for a list of entries.
    Spectra { config: PathBuf },
    /// Train the mixture-of-Gaussians GAN.
    GanTrain { config: PathBuf },
    /// Per-iteration timing of several GAN optimizers.
    Bench { config: PathBuf },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::BilinearRun { .. } => "bilinear-run",
            Command::Sweep { .. } => "sweep",
            Command::Spectra { .. } => "spectra",
            Command::GanTrain { .. } => "gan-train",
            Command::Bench { .. } => "bench",
        }
    }

    pub fn config_path(&self) -> &Path {
        match self {
            Command::BilinearRun { config }
            | Command::Sweep { config }
            | Command::Spectra { config }
            | Command::GanTrain { config }
            | Command::Bench { config } => config,
        }
    }
}

/// Shared state of one command invocation.
#[derive(Debug)]
pub struct Context {
    pub out_dir: PathBuf,
    pub jobs: usize,
    /// Directory of the config file, for resolving relative paths in it.
    pub config_dir: PathBuf,
    /// Files written so far, relative to `out_dir`.
    pub outputs: Vec<String>,
}

impl Context {
    /// Path for a new output file; records it in the manifest list.
    pub fn output(&mut self, name: &str) -> PathBuf {
        self.outputs.push(name.to_string());
        self.out_dir.join(name)
    }
}

/// What a successful command reports back.
#[derive(Debug)]
pub struct CommandResult {
    pub resolved: Value,
    pub summary: Value,
    pub diverged: bool,
}

fn resolve_out_dir(cli: &Cli) -> PathBuf {
    if let Some(dir) = &cli.out {
        return dir.clone();
    }
    if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV).filter(|d| !d.is_empty()) {
        return PathBuf::from(dir);
    }
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%.3fZ");
    PathBuf::from("runs").join(format!("{stamp}-{}", cli.command.name()))
}

fn load(cli: &Cli) -> Result<Value, CliError> {
    let mut value = config::read_json(cli.command.config_path())?;
    if !value.is_object() {
        return Err(CliError::Config("the top level must be a JSON object".into()));
    }
    for s in &cli.sets {
        config::apply_set(&mut value, s)?;
    }
    if let Some(seed) = cli.seed {
        value["seed"] = seed.into();
    }
    Ok(value)
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let out_dir = resolve_out_dir(&cli);
    let mut manifest = RunManifest::start(cli.command.name(), cli.command.config_path());
    if let Err(e) = std::fs::create_dir_all(&out_dir) {
        eprintln!("error: cannot create {}: {e}", out_dir.display());
        return 1;
    }
    let mut ctx = Context {
        out_dir: out_dir.clone(),
        jobs: cli.jobs.max(1),
        config_dir: cli
            .command
            .config_path()
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default(),
        outputs: Vec::new(),
    };

    let result = load(&cli).and_then(|value| {
        manifest.config = value.clone();
        match &cli.command {
            Command::BilinearRun { .. } => commands::bilinear_run(value, &mut ctx),
            Command::Sweep { .. } => commands::sweep(value, &mut ctx),
            Command::Spectra { .. } => commands::spectra(value, &mut ctx),
            Command::GanTrain { .. } => commands::gan_train(value, &mut ctx),
            Command::Bench { .. } => commands::bench(value, &mut ctx),
        }
    });

    let code = match &result {
        Ok(r) if r.diverged => 2,
        Ok(_) => 0,
        Err(_) => 1,
    };
    manifest.finish(result, ctx.outputs, code);
    if let Some(err) = &manifest.outcome.error {
        eprintln!("error: {err}");
    }
    if let Err(e) = manifest.write(&out_dir.join("manifest.json")) {
        eprintln!("error: writing manifest: {e}");
        return 1;
    }
    code
}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod book_cli {}
