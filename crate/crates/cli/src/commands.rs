//! One function per subcommand. Each takes the loaded config value, writes
//! its files through the [`Context`] and returns the resolved config with a
//! short summary.

use std::path::PathBuf;

use centripetal::autograd::{write_checkpoint, MlpSpec, ParamVector};
use centripetal::games::{BilinearGame, JointPoint};
use centripetal::ganlab::{self, MixtureSpec, TrainConfig, TrainReport};
use centripetal::io;
use centripetal::numkit::Matrix;
use centripetal::optimizers::{run_trajectory, BaseTransform, Method, StepConfig};
use centripetal::spectra::{self, SpectralReport};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::parse_typed;
use crate::{CliError, CommandResult, Context};

fn default_steps() -> usize {
    500
}

fn resolved<T: Serialize>(cfg: &T) -> Value {
    serde_json::to_value(cfg).expect("configs serialize")
}

/// Spectrum of the linear iteration that `cfg` runs on `θᵀAφ`, when it is
/// one of the analyzed families.
pub fn spectrum_for(a: &Matrix, cfg: &StepConfig) -> Result<Option<SpectralReport>, CliError> {
    if cfg.base != BaseTransform::Identity {
        return Ok(None);
    }
    let zero_beta = StepConfig { beta1: 0.0, beta2: 0.0, ..*cfg };
    let report = match cfg.method {
        Method::GradSCA | Method::OMD => spectra::sca_spectrum(a, cfg)?,
        Method::SimGD => spectra::sca_spectrum(a, &zero_beta)?,
        Method::GradACA => spectra::aca_spectrum(a, cfg)?,
        Method::AltGD => spectra::aca_spectrum(a, &zero_beta)?,
        // The half points follow the optimistic recurrence.
        Method::PastExtrapolation => spectra::sca_spectrum(a, &StepConfig::omd(cfg.alpha1))?,
        Method::ConOpt | Method::SGA => return Ok(None),
    };
    Ok(Some(report))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BilinearRunConfig {
    /// Inline game `{"A": [[..]], "b": [..], "c": [..]}`.
    #[serde(default)]
    pub game: Option<BilinearGame>,
    /// Or a path to a game file, relative to the config.
    #[serde(default)]
    pub game_file: Option<PathBuf>,
    pub optimizer: StepConfig,
    #[serde(default = "default_steps")]
    pub steps: usize,
    pub start: JointPoint,
    /// The run counts as diverged when the final squared distance exceeds
    /// the initial one by this factor, or when the coordinate guard trips.
    #[serde(default = "default_divergence_ratio")]
    pub divergence_ratio: f64,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_divergence_ratio() -> f64 {
    100.0
}

pub fn bilinear_run(value: Value, ctx: &mut Context) -> Result<CommandResult, CliError> {
    let cfg: BilinearRunConfig = parse_typed(value)?;
    let game = match (&cfg.game, &cfg.game_file) {
        (Some(g), None) => g.clone(),
        (None, Some(path)) => BilinearGame::from_json_file(ctx.config_dir.join(path))?,
        _ => return Err(CliError::Config("give exactly one of `game` and `game_file`".into())),
    };
    let stationary = game.stationarity()?.point;
    let (d, p) = (game.a().rows(), game.a().cols());
    let reference = stationary.clone().unwrap_or_else(|| JointPoint::zeros(d, p));

    if !(cfg.divergence_ratio > 1.0) {
        return Err(CliError::Config("divergence_ratio must exceed 1".into()));
    }
    let traj = run_trajectory(&game, &cfg.optimizer, &cfg.start, cfg.steps, &reference)?;
    let growth = traj.final_delta() / traj.deltas[0];
    let diverged = traj.diverged || !(growth <= cfg.divergence_ratio);
    io::write_trajectory_csv(ctx.output("trajectory.csv"), &traj)?;
    let report = spectrum_for(game.a(), &cfg.optimizer)?;
    if let Some(r) = &report {
        io::write_json(ctx.output("spectral_report.json"), r)?;
    }
    Ok(CommandResult {
        resolved: resolved(&cfg),
        summary: json!({
            "steps_run": traj.len() - 1,
            "initial_delta": traj.deltas[0],
            "final_delta": traj.final_delta(),
            "growth": growth,
            "guard_tripped": traj.diverged,
            "diverged": diverged,
            "reference": reference,
            "stationary_point_exists": stationary.is_some(),
            "rho": report.as_ref().map(|r| r.rho),
        }),
        diverged,
    })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Points per axis: `k/n · max` for `k = 1..=n`.
    pub n: usize,
    pub max: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { n: 50, max: 0.5 }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(rename = "A")]
    pub a: Matrix,
    pub method: Method,
    #[serde(default)]
    pub grid: GridSpec,
    /// Explicit axis values; override `grid` when present.
    #[serde(default)]
    pub alphas: Option<Vec<f64>>,
    #[serde(default)]
    pub betas: Option<Vec<f64>>,
    #[serde(default = "default_steps")]
    pub steps: usize,
    /// Defaults to all ones.
    #[serde(default)]
    pub start: Option<JointPoint>,
    #[serde(default)]
    pub seed: Option<u64>,
}

pub fn sweep(value: Value, ctx: &mut Context) -> Result<CommandResult, CliError> {
    let mut cfg: SweepConfig = parse_typed(value)?;
    if cfg.grid.n == 0 || !(cfg.grid.max > 0.0) {
        return Err(CliError::Config("grid.n and grid.max must be positive".into()));
    }
    let axis = spectra::grid_points(cfg.grid.n, cfg.grid.max);
    let alphas = cfg.alphas.get_or_insert_with(|| axis.clone()).clone();
    let betas = cfg.betas.get_or_insert_with(|| axis.clone()).clone();
    let start = cfg
        .start
        .get_or_insert_with(|| JointPoint::new(vec![1.0; cfg.a.rows()], vec![1.0; cfg.a.cols()]))
        .clone();

    let grid = spectra::sweep(&cfg.a, cfg.method, &alphas, &betas, cfg.steps, &start, ctx.jobs)?;
    io::write_sweep_csv(ctx.output("sweep.csv"), &grid)?;
    let finals: Vec<f64> = grid.iter().map(|c| c.log10_final_dist).collect();
    Ok(CommandResult {
        resolved: resolved(&cfg),
        summary: json!({
            "cells": finals.len(),
            "rows": alphas.len(),
            "cols": betas.len(),
            "diverged_cells": grid.iter().filter(|c| c.diverged).count(),
            "log10_initial_dist": grid.initial_dist.log10(),
            "min_log10_final_dist": finals.iter().copied().fold(f64::INFINITY, f64::min),
            "max_log10_final_dist": finals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }),
        diverged: false,
    })
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectraEntry {
    pub name: String,
    #[serde(rename = "A")]
    pub a: Matrix,
    pub optimizer: StepConfig,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectraConfig {
    pub entries: Vec<SpectraEntry>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Serialize)]
struct SpectraRecord<'a> {
    name: &'a str,
    report: SpectralReport,
}

pub fn spectra(value: Value, ctx: &mut Context) -> Result<CommandResult, CliError> {
    let cfg: SpectraConfig = parse_typed(value)?;
    if cfg.entries.is_empty() {
        return Err(CliError::Config("`entries` is empty".into()));
    }
    let mut records = Vec::with_capacity(cfg.entries.len());
    for e in &cfg.entries {
        let report = spectrum_for(&e.a, &e.optimizer)?.ok_or_else(|| {
            CliError::Config(format!(
                "entry `{}`: no linear iteration matrix for {} with base {:?}",
                e.name, e.optimizer.method, e.optimizer.base
            ))
        })?;
        records.push(SpectraRecord { name: &e.name, report });
    }
    io::write_json(ctx.output("spectra.json"), &records)?;
    let summary = records
        .iter()
        .map(|r| json!({"name": r.name, "rho": r.report.rho, "bound": r.report.bound, "region_ok": r.report.region_ok}))
        .collect();
    Ok(CommandResult { resolved: resolved(&cfg), summary: Value::Array(summary), diverged: false })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct GanTrainConfig {
    #[serde(flatten)]
    pub train: TrainConfig,
    /// Runs the config once per learning rate (`alpha1 = alpha2`, and
    /// `beta1 = beta2` as well for OMD).
    #[serde(default)]
    pub alpha_grid: Option<Vec<f64>>,
}

fn write_run(ctx: &mut Context, report: &TrainReport) -> Result<(), CliError> {
    let label = &report.label;
    for c in &report.checkpoints {
        io::write_samples_csv(ctx.output(&format!("samples_{label}_{}.csv", c.step)), &c.samples)?;
    }
    if let Some(x) = &report.final_point {
        let cfg = &report.config;
        let step = report.failure.as_ref().map_or(cfg.iterations, |f| f.step);
        let gen = ParamVector::new(cfg.generator.clone(), x.theta.clone())?;
        let disc = ParamVector::new(cfg.discriminator.clone(), x.phi.clone())?;
        write_checkpoint(ctx.output(&format!("generator_{label}.ckpt")), &gen, cfg.seed, step)?;
        write_checkpoint(ctx.output(&format!("discriminator_{label}.ckpt")), &disc, cfg.seed, step)?;
    }
    Ok(())
}

fn run_record(r: &TrainReport) -> Value {
    let mut v = r.metrics_json();
    v["timing"] = json!(r.timing);
    v
}

pub fn gan_train(value: Value, ctx: &mut Context) -> Result<CommandResult, CliError> {
    let cfg: GanTrainConfig = parse_typed(value)?;
    cfg.train.validate()?;
    let runs: Vec<TrainConfig> = match &cfg.alpha_grid {
        None => vec![cfg.train.clone()],
        Some(grid) if grid.is_empty() => return Err(CliError::Config("`alpha_grid` is empty".into())),
        Some(grid) => grid
            .iter()
            .enumerate()
            .map(|(k, &a)| {
                let mut c = cfg.train.clone();
                c.optimizer.alpha1 = a;
                c.optimizer.alpha2 = a;
                if c.optimizer.method == Method::OMD {
                    c.optimizer.beta1 = a;
                    c.optimizer.beta2 = a;
                }
                c.label = Some(format!("{}_lr{k:02}", cfg.train.label()));
                c
            })
            .collect(),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(ctx.jobs)
        .build()
        .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
    let reports: Vec<TrainReport> = pool.install(|| {
        use rayon::prelude::*;
        runs.par_iter().map(ganlab::train).collect::<Result<_, _>>()
    })?;
    for r in &reports {
        write_run(ctx, r)?;
    }
    let records: Vec<Value> = reports.iter().map(run_record).collect();
    io::write_json(ctx.output("metrics.json"), &records)?;
    let failed = reports.iter().any(|r| !r.completed());
    let summary = reports
        .iter()
        .map(|r| {
            json!({
                "label": r.label,
                "alpha": r.config.optimizer.alpha1,
                "completed": r.completed(),
                "final_coverage": r.checkpoints.last().map(|c| c.metrics.mode_coverage),
                "mean_step_s": r.timing.mean_s,
            })
        })
        .collect();
    Ok(CommandResult { resolved: resolved(&cfg), summary: Value::Array(summary), diverged: failed })
}

fn default_noise_dim() -> usize {
    16
}
fn default_batch() -> usize {
    256
}
fn default_bench_iterations() -> usize {
    200
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchMethod {
    #[serde(default)]
    pub label: Option<String>,
    pub optimizer: StepConfig,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub generator: MlpSpec,
    pub discriminator: MlpSpec,
    #[serde(default = "default_noise_dim")]
    pub noise_dim: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default)]
    pub mixture: MixtureSpec,
    pub seed: u64,
    /// Measured iterations per method, after the warm-up.
    #[serde(default = "default_bench_iterations")]
    pub iterations: usize,
    pub methods: Vec<BenchMethod>,
}

impl BenchConfig {
    pub fn train_configs(&self) -> Vec<TrainConfig> {
        self.methods
            .iter()
            .map(|m| TrainConfig {
                label: m.label.clone(),
                generator: self.generator.clone(),
                discriminator: self.discriminator.clone(),
                noise_dim: self.noise_dim,
                optimizer: m.optimizer,
                batch_size: self.batch_size,
                iterations: self.iterations + ganlab::TIMING_WARMUP,
                checkpoint_steps: vec![],
                seed: self.seed,
                eval_samples: 2560,
                mixture: self.mixture.clone(),
                coverage_threshold: None,
                loss_every: 1,
            })
            .collect()
    }
}

pub fn bench(value: Value, ctx: &mut Context) -> Result<CommandResult, CliError> {
    let cfg: BenchConfig = parse_typed(value)?;
    if cfg.methods.is_empty() {
        return Err(CliError::Config("`methods` is empty".into()));
    }
    let rows = ganlab::timing_compare(&cfg.train_configs(), cfg.iterations)?;
    io::write_timing_csv(ctx.output("timing.csv"), &rows)?;
    let base = rows[0].mean_s;
    let summary = rows
        .iter()
        .map(|r| json!({"label": r.label, "mean_s": r.mean_s, "ratio_to_first": r.mean_s / base}))
        .collect();
    Ok(CommandResult { resolved: resolved(&cfg), summary: Value::Array(summary), diverged: false })
}
