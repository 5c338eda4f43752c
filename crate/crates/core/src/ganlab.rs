//! A toy GAN on a ring of eight Gaussians, trained with the update rules of
//! [`crate::optimizers`].
//!
//! Real batches, generator noise and evaluation noise come from three
//! independent seeded streams that do not depend on the update rule, so two
//! runs with the same seed see exactly the same data.

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::autograd::{self, gan_value, gan_value_for, init_params, mlp_on_tape, GradRequest, MlpSpec, Net, Tape, Tensor};
use crate::error::{Error, Result};
use crate::games::{Game, JointPoint};
use crate::optimizers::{composed_step, BaseTransform, Method, OptimizerState, StepConfig};

/// Iterations excluded from timing statistics.
pub const TIMING_WARMUP: usize = 50;

const STREAM_REAL: u64 = 1;
const STREAM_NOISE: u64 = 2;
const STREAM_EVAL: u64 = 3;
const STREAM_INIT_GEN: u64 = 4;
const STREAM_INIT_DISC: u64 = 5;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Equal-weight Gaussians centered on a circle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub modes: usize,
    pub radius: f64,
    pub std: f64,
}

impl Default for MixtureSpec {
    fn default() -> Self {
        MixtureSpec { modes: 8, radius: 2.0, std: 0.04 }
    }
}

impl MixtureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.modes == 0 || !(self.radius > 0.0) || !(self.std >= 0.0) {
            return Err(Error::Configuration(format!("invalid mixture {self:?}")));
        }
        Ok(())
    }

    pub fn centers(&self) -> Vec<[f64; 2]> {
        (0..self.modes)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / self.modes as f64;
                [self.radius * t.cos(), self.radius * t.sin()]
            })
            .collect()
    }
}

fn draw_real(spec: &MixtureSpec, centers: &[[f64; 2]], n: usize, rng: &mut ChaCha8Rng) -> Tensor {
    let mut data = Vec::with_capacity(2 * n);
    for _ in 0..n {
        let c = centers[rng.random_range(0..centers.len())];
        let nx: f64 = StandardNormal.sample(rng);
        let ny: f64 = StandardNormal.sample(rng);
        data.push(c[0] + spec.std * nx);
        data.push(c[1] + spec.std * ny);
    }
    Tensor::new(n, 2, data).expect("n×2")
}

fn draw_noise(n: usize, dim: usize, rng: &mut ChaCha8Rng) -> Tensor {
    let data = (0..n * dim).map(|_| StandardNormal.sample(rng)).collect();
    Tensor::new(n, dim, data).expect("n×dim")
}

/// `n` samples from the mixture, one per row.
pub fn sample_real(spec: &MixtureSpec, n: usize, seed: u64) -> Result<Tensor> {
    if n == 0 {
        return Err(Error::Precondition("sample count must be positive".into()));
    }
    spec.validate()?;
    Ok(draw_real(spec, &spec.centers(), n, &mut stream(seed, STREAM_REAL)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GanMetrics {
    /// Modes that received at least `threshold` high-quality samples.
    pub mode_coverage: usize,
    /// Share of samples within three standard deviations of their nearest
    /// center.
    pub high_quality_fraction: f64,
    /// High-quality samples per mode.
    pub per_mode_counts: Vec<usize>,
    pub mean_min_center_distance: f64,
}

/// Scores generator samples against the mixture.
pub fn evaluate(samples: &Tensor, spec: &MixtureSpec, threshold: usize) -> Result<GanMetrics> {
    if samples.rows() == 0 || samples.cols() != 2 {
        return Err(Error::Precondition(format!(
            "expected a non-empty n×2 sample matrix, got {}x{}",
            samples.rows(),
            samples.cols()
        )));
    }
    let centers = spec.centers();
    let mut counts = vec![0usize; centers.len()];
    let mut dist_sum = 0.0;
    for i in 0..samples.rows() {
        let s = samples.row_slice(i);
        let (k, d) = centers
            .iter()
            .map(|c| (c[0] - s[0]).hypot(c[1] - s[1]))
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("at least one mode");
        dist_sum += d;
        if d <= 3.0 * spec.std {
            counts[k] += 1;
        }
    }
    let n = samples.rows() as f64;
    Ok(GanMetrics {
        mode_coverage: counts.iter().filter(|&&c| c >= threshold).count(),
        high_quality_fraction: counts.iter().sum::<usize>() as f64 / n,
        per_mode_counts: counts,
        mean_min_center_distance: dist_sum / n,
    })
}

/// The GAN value on a fixed minibatch, seen as a two-player game over the
/// flat parameter vectors `θ` (generator) and `φ` (discriminator).
#[derive(Clone, Debug)]
pub struct GanGame {
    pub generator: MlpSpec,
    pub discriminator: MlpSpec,
    pub real: Tensor,
    pub noise: Tensor,
}

impl GanGame {
    fn eval(&self, x: &JointPoint, req: GradRequest) -> Result<autograd::GanEval> {
        gan_value_for(
            Net { spec: &self.generator, params: &x.theta },
            Net { spec: &self.discriminator, params: &x.phi },
            &self.real,
            &self.noise,
            req,
        )
    }
}

impl Game for GanGame {
    fn dims(&self) -> (usize, usize) {
        (self.generator.param_count(), self.discriminator.param_count())
    }

    fn grad_theta(&self, x: &JointPoint) -> Result<Vec<f64>> {
        self.check_point(x)?;
        self.eval(x, GradRequest::Generator)?.grad_theta()
    }

    fn grad_phi(&self, x: &JointPoint) -> Result<Vec<f64>> {
        self.check_point(x)?;
        self.eval(x, GradRequest::Discriminator)?.grad_phi()
    }

    fn grads(&self, x: &JointPoint) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_point(x)?;
        let mut e = self.eval(x, GradRequest::Both)?;
        Ok((e.grad_theta()?, e.grad_phi()?))
    }

    fn value(&self, x: &JointPoint) -> Option<f64> {
        gan_value(
            Net { spec: &self.generator, params: &x.theta },
            Net { spec: &self.discriminator, params: &x.phi },
            &self.real,
            &self.noise,
        )
        .ok()
        .map(|e| e.value)
    }
}

fn default_noise_dim() -> usize {
    16
}
fn default_batch() -> usize {
    256
}
fn default_eval_samples() -> usize {
    2560
}
fn default_loss_every() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Name used in output files; derived from the optimizer when absent.
    #[serde(default)]
    pub label: Option<String>,
    pub generator: MlpSpec,
    pub discriminator: MlpSpec,
    #[serde(default = "default_noise_dim")]
    pub noise_dim: usize,
    pub optimizer: StepConfig,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    pub iterations: usize,
    pub checkpoint_steps: Vec<usize>,
    pub seed: u64,
    #[serde(default = "default_eval_samples")]
    pub eval_samples: usize,
    #[serde(default)]
    pub mixture: MixtureSpec,
    /// Minimum high-quality samples for a mode to count as covered;
    /// `eval_samples / 80` when absent.
    #[serde(default)]
    pub coverage_threshold: Option<usize>,
    /// Record the value every this many iterations.
    #[serde(default = "default_loss_every")]
    pub loss_every: usize,
}

impl TrainConfig {
    /// Networks of `hidden` layers of `width` units, 16-D noise, batch 256.
    pub fn new(optimizer: StepConfig, hidden: usize, width: usize, iterations: usize, seed: u64) -> Self {
        let noise_dim = default_noise_dim();
        TrainConfig {
            label: None,
            generator: MlpSpec { input_dim: noise_dim, hidden_widths: vec![width; hidden], output_dim: 2 },
            discriminator: MlpSpec { input_dim: 2, hidden_widths: vec![width; hidden], output_dim: 1 },
            noise_dim,
            optimizer,
            batch_size: default_batch(),
            iterations,
            checkpoint_steps: vec![iterations],
            seed,
            eval_samples: default_eval_samples(),
            mixture: MixtureSpec::default(),
            coverage_threshold: None,
            loss_every: 1,
        }
    }

    /// Two hidden layers of 64, 4000 iterations, checkpoints at 500, 1000,
    /// 2000 and 4000.
    pub fn desk(optimizer: StepConfig, seed: u64) -> Self {
        TrainConfig { checkpoint_steps: vec![500, 1000, 2000, 4000], ..Self::new(optimizer, 2, 64, 4000, seed) }
    }

    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| method_label(&self.optimizer))
    }

    pub fn threshold(&self) -> usize {
        self.coverage_threshold.unwrap_or(self.eval_samples / 80)
    }

    pub fn validate(&self) -> Result<()> {
        self.generator.validate()?;
        self.discriminator.validate()?;
        self.mixture.validate()?;
        self.optimizer.validate()?;
        if self.iterations == 0 {
            return Err(Error::Precondition("iterations must be positive".into()));
        }
        if self.noise_dim == 0 || self.generator.input_dim != self.noise_dim {
            return Err(Error::Configuration(format!(
                "noise_dim {} must be positive and equal the generator input {}",
                self.noise_dim, self.generator.input_dim
            )));
        }
        if self.generator.output_dim != 2 || self.discriminator.input_dim != 2 || self.discriminator.output_dim != 1 {
            return Err(Error::Configuration(
                "the generator must emit 2-D points and the discriminator map 2-D points to one logit".into(),
            ));
        }
        if self.batch_size == 0 || self.eval_samples == 0 || self.loss_every == 0 {
            return Err(Error::Configuration("batch_size, eval_samples and loss_every must be positive".into()));
        }
        if let Some(&s) = self.checkpoint_steps.iter().find(|&&s| s == 0 || s > self.iterations) {
            return Err(Error::Precondition(format!(
                "checkpoint step {s} outside 1..={}",
                self.iterations
            )));
        }
        match self.optimizer.method {
            Method::SimGD | Method::AltGD | Method::GradSCA | Method::GradACA | Method::OMD => Ok(()),
            m => Err(Error::Capability(format!(
                "{m} needs Jacobian-vector products, which the network game does not provide"
            ))),
        }
    }
}

/// `rmsprop_aca`, `simgd`, ...
pub fn method_label(cfg: &StepConfig) -> String {
    let m = match cfg.method {
        Method::SimGD => "",
        Method::AltGD => "alt",
        Method::GradSCA => "sca",
        Method::GradACA => "aca",
        Method::OMD => "omd",
        Method::PastExtrapolation => "extrapolation",
        Method::ConOpt => "conopt",
        Method::SGA => "sga",
    };
    match (cfg.base, m) {
        (BaseTransform::RmsProp { .. }, "") => "rmsprop".into(),
        (BaseTransform::RmsProp { .. }, m) => format!("rmsprop_{m}"),
        (BaseTransform::Identity, "") => "simgd".into(),
        (BaseTransform::Identity, "alt") => "altgd".into(),
        (BaseTransform::Identity, m) => format!("grad_{m}"),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointRecord {
    pub step: usize,
    pub metrics: GanMetrics,
    /// `eval_samples` generator outputs, `x` then `y` per row.
    #[serde(skip)]
    pub samples: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingSummary {
    pub iterations: usize,
    pub warmup: usize,
    pub mean_s: f64,
    pub std_s: f64,
}

impl TimingSummary {
    pub fn from_samples(times: &[f64], warmup: usize) -> Self {
        let kept = &times[warmup.min(times.len())..];
        let n = kept.len() as f64;
        if kept.is_empty() {
            return TimingSummary { iterations: 0, warmup, mean_s: f64::NAN, std_s: f64::NAN };
        }
        let mean = kept.iter().sum::<f64>() / n;
        let var = kept.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / n;
        TimingSummary { iterations: kept.len(), warmup, mean_s: mean, std_s: var.sqrt() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainFailure {
    pub step: usize,
    pub message: String,
}

/// Outcome of [`train`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub label: String,
    pub config: TrainConfig,
    /// `(iteration, V)` at the start of each recorded iteration.
    pub losses: Vec<(usize, f64)>,
    pub checkpoints: Vec<CheckpointRecord>,
    pub timing: TimingSummary,
    pub failure: Option<TrainFailure>,
    #[serde(skip)]
    pub final_point: Option<JointPoint>,
}

impl TrainReport {
    pub fn completed(&self) -> bool {
        self.failure.is_none()
    }

    /// The data that must be bitwise reproducible for a given config: losses
    /// and checkpoint metrics, without timing.
    pub fn metrics_json(&self) -> serde_json::Value {
        serde_json::json!({
            "label": self.label,
            "seed": self.config.seed,
            "iterations": self.config.iterations,
            "losses_recorded": self.losses.len(),
            "final_loss": self.losses.last().map(|l| l.1),
            "loss_sum": self.losses.iter().map(|l| l.1).sum::<f64>(),
            "checkpoints": self.checkpoints.iter().map(|c| serde_json::json!({
                "step": c.step,
                "metrics": c.metrics,
            })).collect::<Vec<_>>(),
            "failure": self.failure,
        })
    }
}

/// Generator outputs for `n` noise vectors.
pub fn generate(spec: &MlpSpec, theta: &[f64], noise: &Tensor) -> Result<Tensor> {
    let mut tape = Tape::new();
    let b = autograd::bind(&mut tape, spec, theta, false)?;
    let z = tape.constant(noise.clone());
    let out = mlp_on_tape(&mut tape, &b, z)?;
    Ok(tape.value(out)?.clone())
}

struct Run {
    cfg: TrainConfig,
    game: GanGame,
    state: OptimizerState,
    real_rng: ChaCha8Rng,
    noise_rng: ChaCha8Rng,
    centers: Vec<[f64; 2]>,
}

impl Run {
    fn new(cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let theta = init_params(&cfg.generator, cfg.seed.wrapping_add(STREAM_INIT_GEN << 32))?;
        let phi = init_params(&cfg.discriminator, cfg.seed.wrapping_add(STREAM_INIT_DISC << 32))?;
        Ok(Run {
            game: GanGame {
                generator: cfg.generator.clone(),
                discriminator: cfg.discriminator.clone(),
                real: Tensor::zeros(0, 2),
                noise: Tensor::zeros(0, cfg.noise_dim),
            },
            state: OptimizerState::new(JointPoint::new(theta.into_values(), phi.into_values())),
            real_rng: stream(cfg.seed, STREAM_REAL),
            noise_rng: stream(cfg.seed, STREAM_NOISE),
            centers: cfg.mixture.centers(),
            cfg: cfg.clone(),
        })
    }

    fn next_batch(&mut self) {
        self.game.real = draw_real(&self.cfg.mixture, &self.centers, self.cfg.batch_size, &mut self.real_rng);
        self.game.noise = draw_noise(self.cfg.batch_size, self.cfg.noise_dim, &mut self.noise_rng);
    }

    /// One optimizer step on the current batch; returns its wall time.
    fn step(&mut self) -> Result<f64> {
        let t0 = Instant::now();
        composed_step(&self.game, &mut self.state, &self.cfg.optimizer)?;
        Ok(t0.elapsed().as_secs_f64())
    }
}

/// Trains the GAN described by `cfg`.
///
/// A numerical failure (non-finite activations, parameters or value) stops
/// the run and is recorded in [`TrainReport::failure`] with its iteration;
/// configuration problems are returned as errors.
pub fn train(cfg: &TrainConfig) -> Result<TrainReport> {
    let mut run = Run::new(cfg)?;
    let mut report = TrainReport {
        label: cfg.label(),
        config: cfg.clone(),
        losses: Vec::new(),
        checkpoints: Vec::new(),
        timing: TimingSummary::default(),
        failure: None,
        final_point: None,
    };
    let eval_noise = draw_noise(cfg.eval_samples, cfg.noise_dim, &mut stream(cfg.seed, STREAM_EVAL));
    let mut times = Vec::with_capacity(cfg.iterations);

    for t in 1..=cfg.iterations {
        run.next_batch();
        if (t - 1) % cfg.loss_every == 0 {
            match run.game.value(&run.state.current) {
                Some(v) if v.is_finite() => report.losses.push((t - 1, v)),
                other => {
                    report.failure = Some(TrainFailure {
                        step: t - 1,
                        message: format!("value is {other:?}"),
                    });
                    break;
                }
            }
        }
        match run.step() {
            Ok(secs) => times.push(secs),
            Err(e @ (Error::Divergence { .. } | Error::NumericalFailure(_))) => {
                report.failure = Some(TrainFailure { step: t, message: e.to_string() });
                break;
            }
            Err(e) => return Err(e),
        }
        if cfg.checkpoint_steps.contains(&t) {
            let out = generate(&cfg.generator, &run.state.current.theta, &eval_noise)?;
            let metrics = evaluate(&out, &cfg.mixture, cfg.threshold())?;
            let samples = (0..out.rows()).map(|i| [out.row_slice(i)[0], out.row_slice(i)[1]]).collect();
            report.checkpoints.push(CheckpointRecord { step: t, metrics, samples });
        }
    }
    report.timing = TimingSummary::from_samples(&times, TIMING_WARMUP);
    report.final_point = Some(run.state.current);
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TimingRow {
    pub label: String,
    pub mean_s: f64,
    pub std_s: f64,
    pub iterations: usize,
}

/// Mean per-iteration optimizer time of each config over `iterations`
/// measured steps, after [`TIMING_WARMUP`] unmeasured ones.
///
/// The runs advance in lockstep, one step of each config in turn, so that
/// background load affects every method alike.
pub fn timing_compare(cfgs: &[TrainConfig], iterations: usize) -> Result<Vec<TimingRow>> {
    let first = cfgs
        .first()
        .ok_or_else(|| Error::Configuration("timing comparison needs at least one config".into()))?;
    if iterations == 0 {
        return Err(Error::Precondition("iterations must be positive".into()));
    }
    if let Some(c) = cfgs.iter().find(|c| {
        c.generator != first.generator || c.discriminator != first.discriminator || c.batch_size != first.batch_size
    }) {
        return Err(Error::Configuration(format!(
            "{} uses different networks or batch size than {}",
            c.label(),
            first.label()
        )));
    }
    let total = iterations + TIMING_WARMUP;
    let mut runs = cfgs
        .iter()
        .map(|c| Run::new(&TrainConfig { iterations: total, checkpoint_steps: vec![], ..c.clone() }))
        .collect::<Result<Vec<_>>>()?;
    let mut times = vec![Vec::with_capacity(total); runs.len()];
    for _ in 0..total {
        for (run, ts) in runs.iter_mut().zip(&mut times) {
            run.next_batch();
            ts.push(run.step()?);
        }
    }
    Ok(cfgs
        .iter()
        .zip(&times)
        .map(|(c, ts)| {
            let s = TimingSummary::from_samples(ts, TIMING_WARMUP);
            TimingRow { label: c.label(), mean_s: s.mean_s, std_s: s.std_s, iterations: s.iterations }
        })
        .collect())
}

/// Twenty log-spaced learning rates from `2e-5` to `50`, for the optimistic
/// mirror descent search.
pub fn omd_learning_rate_grid() -> Vec<f64> {
    let (lo, hi): (f64, f64) = (2e-5, 50.0);
    (0..20)
        .map(|k| (lo.ln() + (hi.ln() - lo.ln()) * k as f64 / 19.0).exp())
        .collect()
}
