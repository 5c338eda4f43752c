//! Update rules for two-player games.
//!
//! Every rule descends on `θ` and ascends on `φ`:
//!
//! ```text
//! θ⁺ = θ − α₁·G_θ        φ⁺ = φ + α₂·G_φ
//! ```
//!
//! The centripetal rules replace the raw gradient `g` by
//! `G = g + (β/α)(g − g_prev)`. The simultaneous variant (Grad-SCA) evaluates
//! both gradients at `(θ_t, φ_t)`; the alternating variant (Grad-ACA)
//! evaluates the `φ`-gradient at the fresh `(θ_{t+1}, φ_t)` and compares it with
//! the one stored from `(θ_t, φ_{t−1})`.
//!
//! With an RMSProp base transform the step `α·G` is replaced by the RMSProp
//! step computed from `G`. The ratio `β/α` always uses the configured `α`.
//!
//! On the first step no previous gradient exists; it is taken equal to the
//! current one, so the first centripetal step is a plain gradient step.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::games::{Game, JointPoint};
use crate::numkit::norm;

/// Coordinates larger than this stop a trajectory as diverged.
pub const DIVERGENCE_GUARD: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    SimGD,
    AltGD,
    GradSCA,
    GradACA,
    OMD,
    PastExtrapolation,
    ConOpt,
    SGA,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::SimGD,
        Method::AltGD,
        Method::GradSCA,
        Method::GradACA,
        Method::OMD,
        Method::PastExtrapolation,
        Method::ConOpt,
        Method::SGA,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::SimGD => "SimGD",
            Method::AltGD => "AltGD",
            Method::GradSCA => "GradSCA",
            Method::GradACA => "GradACA",
            Method::OMD => "OMD",
            Method::PastExtrapolation => "PastExtrapolation",
            Method::ConOpt => "ConOpt",
            Method::SGA => "SGA",
        }
    }

    /// Whether the rule needs Jacobian-vector products from the game.
    pub fn needs_jacobian(self) -> bool {
        matches!(self, Method::ConOpt | Method::SGA)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-coordinate transform turning an (adjusted) gradient into a step.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum BaseTransform {
    /// `step = α·g`
    #[default]
    Identity,
    /// `cache⁺ = γ·cache + (1−γ)·g²`, `step = α·g / (√cache⁺ + ε)`
    RmsProp { decay: f64, epsilon: f64 },
}

fn default_one() -> f64 {
    1.0
}

/// Everything that determines one optimizer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepConfig {
    pub method: Method,
    pub alpha1: f64,
    pub alpha2: f64,
    #[serde(default)]
    pub beta1: f64,
    #[serde(default)]
    pub beta2: f64,
    #[serde(default)]
    pub base: BaseTransform,
    /// Weight of `Jᵀξ` in consensus optimization.
    #[serde(default = "default_one")]
    pub conopt_gamma: f64,
    /// Weight of the antisymmetric adjustment in SGA.
    #[serde(default = "default_one")]
    pub sga_lambda: f64,
    #[serde(default)]
    pub sga_align: bool,
}

impl StepConfig {
    /// Symmetric configuration `α₁ = α₂ = alpha`, `β₁ = β₂ = beta`.
    pub fn new(method: Method, alpha: f64, beta: f64) -> Self {
        Self {
            method,
            alpha1: alpha,
            alpha2: alpha,
            beta1: beta,
            beta2: beta,
            base: BaseTransform::Identity,
            conopt_gamma: 1.0,
            sga_lambda: 1.0,
            sga_align: false,
        }
    }

    /// Optimistic mirror descent with step `alpha`.
    pub fn omd(alpha: f64) -> Self {
        Self::new(Method::OMD, alpha, alpha)
    }

    /// The special alternating case `β₁ = 0`, `α₁ = α₂ = β₂ = alpha`.
    pub fn aca_special(alpha: f64) -> Self {
        Self { beta1: 0.0, ..Self::new(Method::GradACA, alpha, alpha) }
    }

    pub fn with_base(self, base: BaseTransform) -> Self {
        Self { base, ..self }
    }

    pub fn with_rmsprop(self, decay: f64, epsilon: f64) -> Self {
        self.with_base(BaseTransform::RmsProp { decay, epsilon })
    }

    pub fn validate(&self) -> Result<()> {
        for (name, a) in [("alpha1", self.alpha1), ("alpha2", self.alpha2)] {
            if !(a.is_finite() && a > 0.0) {
                return Err(Error::Configuration(format!("{name} must be positive and finite, got {a}")));
            }
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !b.is_finite() {
                return Err(Error::Configuration(format!("{name} must be finite, got {b}")));
            }
        }
        if self.method == Method::OMD
            && !(self.alpha1 == self.alpha2 && self.alpha1 == self.beta1 && self.alpha1 == self.beta2)
        {
            return Err(Error::Configuration(
                "OMD uses a single step size: alpha1 = alpha2 = beta1 = beta2".into(),
            ));
        }
        if !(self.conopt_gamma.is_finite() && self.conopt_gamma >= 0.0) {
            return Err(Error::Configuration("conopt_gamma must be finite and nonnegative".into()));
        }
        if !self.sga_lambda.is_finite() {
            return Err(Error::Configuration("sga_lambda must be finite".into()));
        }
        if let BaseTransform::RmsProp { decay, epsilon } = self.base {
            if !(decay > 0.0 && decay < 1.0) {
                return Err(Error::Configuration(format!("RMSProp decay must lie in (0, 1), got {decay}")));
            }
            if !(epsilon.is_finite() && epsilon > 0.0) {
                return Err(Error::Configuration(format!("RMSProp epsilon must be positive, got {epsilon}")));
            }
            if matches!(self.method, Method::PastExtrapolation | Method::ConOpt | Method::SGA) {
                return Err(Error::Configuration(format!(
                    "{} cannot be combined with an RMSProp base",
                    self.method
                )));
            }
        }
        Ok(())
    }
}

/// Mutable state carried between steps.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub current: JointPoint,
    /// `∇_θ V` from the previous step (for extrapolation: at the last half point).
    pub prev_grad_theta: Option<Vec<f64>>,
    /// `∇_φ V` from the previous step. For Grad-ACA this was evaluated at
    /// `(θ_t, φ_{t−1})`.
    pub prev_grad_phi: Option<Vec<f64>>,
    pub rms_cache_theta: Vec<f64>,
    pub rms_cache_phi: Vec<f64>,
    pub step_index: usize,
    /// Extrapolation half point `(θ_{t−1/2}, φ_{t−1/2})`.
    pub half_point: Option<JointPoint>,
}

impl OptimizerState {
    pub fn new(start: JointPoint) -> Self {
        let (d, p) = start.dims();
        Self {
            current: start,
            prev_grad_theta: None,
            prev_grad_phi: None,
            rms_cache_theta: vec![0.0; d],
            rms_cache_phi: vec![0.0; p],
            step_index: 0,
            half_point: None,
        }
    }
}

/// One RMSProp update. Returns the step (to be subtracted for descent) and the
/// new squared-gradient cache. The `ε` is added outside the square root.
pub fn rmsprop_transform(grad: &[f64], cache: &[f64], decay: f64, alpha: f64, epsilon: f64) -> (Vec<f64>, Vec<f64>) {
    let new_cache: Vec<f64> = cache
        .iter()
        .zip(grad)
        .map(|(c, g)| decay * c + (1.0 - decay) * g * g)
        .collect();
    let step = grad
        .iter()
        .zip(&new_cache)
        .map(|(g, c)| alpha * g / (c.sqrt() + epsilon))
        .collect();
    (step, new_cache)
}

fn base_step(base: BaseTransform, g: &[f64], cache: &mut Vec<f64>, alpha: f64) -> Vec<f64> {
    match base {
        BaseTransform::Identity => g.iter().map(|v| alpha * v).collect(),
        BaseTransform::RmsProp { decay, epsilon } => {
            let (step, new_cache) = rmsprop_transform(g, cache, decay, alpha, epsilon);
            *cache = new_cache;
            step
        }
    }
}

/// `g + (β/α)(g − prev)`
fn centripetal(g: &[f64], prev: &[f64], beta: f64, alpha: f64) -> Vec<f64> {
    let k = beta / alpha;
    g.iter().zip(prev).map(|(gi, pi)| gi + k * (gi - pi)).collect()
}

fn descend(x: &[f64], step: &[f64]) -> Vec<f64> {
    x.iter().zip(step).map(|(a, s)| a - s).collect()
}

fn ascend(x: &[f64], step: &[f64]) -> Vec<f64> {
    x.iter().zip(step).map(|(a, s)| a + s).collect()
}

fn finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

fn diverged(state: &OptimizerState) -> Error {
    Error::Divergence {
        step: state.step_index,
        last_finite: Box::new(state.current.clone()),
    }
}

fn checked<G: Game + ?Sized>(game: &G, state: &OptimizerState) -> Result<()> {
    game.check_point(&state.current)?;
    let (d, p) = state.current.dims();
    if state.rms_cache_theta.len() != d || state.rms_cache_phi.len() != p {
        return Err(Error::Dimension("optimizer caches do not match the point".into()));
    }
    Ok(())
}

/// Commits a new point if every coordinate is finite.
fn commit(state: &mut OptimizerState, theta: Vec<f64>, phi: Vec<f64>) -> Result<()> {
    if !(finite(&theta) && finite(&phi)) {
        return Err(diverged(state));
    }
    state.current = JointPoint::new(theta, phi);
    state.step_index += 1;
    Ok(())
}

/// Simultaneous gradient descent–ascent.
pub fn sim_gd_step<G: Game + ?Sized>(game: &G, state: &mut OptimizerState, cfg: &StepConfig) -> Result<()> {
    checked(game, state)?;
    let (gt, gp) = game.grads(&state.current)?;
    if !(finite(&gt) && finite(&gp)) {
        return Err(diverged(state));
    }
    let st = base_step(cfg.base, &gt, &mut state.rms_cache_theta, cfg.alpha1);
    let sp = base_step(cfg.base, &gp, &mut state.rms_cache_phi, cfg.alpha2);
    let theta = descend(&state.current.theta, &st);
    let phi = ascend(&state.current.phi, &sp);
    state.prev_grad_theta = Some(gt);
    state.prev_grad_phi = Some(gp);
    commit(state, theta, phi)
}

/// Alternating gradient descent–ascent: `φ` steps with the gradient at `(θ_{t+1}, φ_t)`.
pub fn alt_gd_step<G: Game + ?Sized>(game: &G, state: &mut OptimizerState, cfg: &StepConfig) -> Result<()> {
    checked(game, state)?;
    let gt = game.grad_theta(&state.current)?;
    if !finite(&gt) {
        return Err(diverged(state));
    }
    let st = base_step(cfg.base, &gt, &mut state.rms_cache_theta, cfg.alpha1);
    let theta = descend(&state.current.theta, &st);
    let mid = JointPoint::new(theta, state.current.phi.clone());
    let gp = game.grad_phi(&mid)?;
    if !finite(&gp) {
        return Err(diverged(state));
    }
    let sp = base_step(cfg.base, &gp, &mut state.rms_cache_phi, cfg.alpha2);
    let phi = ascend(&mid.phi, &sp);
    state.prev_grad_theta = Some(gt);
    state.prev_grad_phi = Some(gp);
    commit(state, mid.theta, phi)
}

/// Gradient descent with simultaneous centripetal acceleration.
pub fn grad_sca_step<G: Game + ?Sized>(game: &G, state: &mut OptimizerState, cfg: &StepConfig) -> Result<()> {
    checked(game, state)?;
    let (gt, gp) = game.grads(&state.current)?;
    if !(finite(&gt) && finite(&gp)) {
        return Err(diverged(state));
    }
    let adj_t = centripetal(&gt, state.prev_grad_theta.as_deref().unwrap_or(&gt), cfg.beta1, cfg.alpha1);
    let adj_p = centripetal(&gp, state.prev_grad_phi.as_deref().unwrap_or(&gp), cfg.beta2, cfg.alpha2);
    let st = base_step(cfg.base, &adj_t, &mut state.rms_cache_theta, cfg.alpha1);
    let sp = base_step(cfg.base, &adj_p, &mut state.rms_cache_phi, cfg.alpha2);
    let theta = descend(&state.current.theta, &st);
    let phi = ascend(&state.current.phi, &sp);
    state.prev_grad_theta = Some(gt);
    state.prev_grad_phi = Some(gp);
    commit(state, theta, phi)
}

/// Gradient descent with alternating centripetal acceleration.
pub fn grad_aca_step<G: Game + ?Sized>(game: &G, state: &mut OptimizerState, cfg: &StepConfig) -> Result<()> {
    checked(game, state)?;
    let gt = game.grad_theta(&state.current)?;
    if !finite(&gt) {
        return Err(diverged(state));
    }
    let adj_t = centripetal(&gt, state.prev_grad_theta.as_deref().unwrap_or(&gt), cfg.beta1, cfg.alpha1);
    let st = base_step(cfg.base, &adj_t, &mut state.rms_cache_theta, cfg.alpha1);
    let theta = descend(&state.current.theta, &st);

    let mid = JointPoint::new(theta, state.current.phi.clone());
    let gp = game.grad_phi(&mid)?;
    if !finite(&gp) {
        return Err(diverged(state));
    }
    let adj_p = centripetal(&gp, state.prev_grad_phi.as_deref().unwrap_or(&gp), cfg.beta2, cfg.alpha2);
    let sp = base_step(cfg.base, &adj_p, &mut state.rms_cache_phi, cfg.alpha2);
    let phi = ascend(&mid.phi, &sp);
    state.prev_grad_theta = Some(gt);
    state.prev_grad_phi = Some(gp);
    commit(state, mid.theta, phi)
}

/// Optimistic mirror descent:
/// `θ⁺ = θ − 2α∇_θV(x_t) + α∇_θV(x_{t−1})`, `φ⁺ = φ + 2α∇_φV(x_t) − α∇_φV(x_{t−1})`.
pub fn omd_step<G: Game + ?Sized>(game: &G, state: &mut OptimizerState, cfg: &StepConfig) -> Result<()> {
    checked(game, state)?;
    let (gt, gp) = game.grads(&state.current)?;
    if !(finite(&gt) && finite(&gp)) {
        return Err(diverged(state));
    }
    let pt = state.prev_grad_theta.clone().unwrap_or_else(|| gt.clone());
    let pp = state.prev_grad_phi.clone().unwrap_or_else(|| gp.clone());
    let (theta, phi) = match cfg.base {
        BaseTransform::Identity => {
            let a = cfg.alpha1;
            let theta = state
                .current
                .theta
                .iter()
                .zip(gt.iter().zip(&pt))
                .map(|(x, (g, p))| x - 2.0 * a * g + a * p)
                .collect();
            let phi = state
                .current
                .phi
                .iter()
                .zip(gp.iter().zip(&pp))
                .map(|(x, (g, p))| x + 2.0 * a * g - a * p)
                .collect();
            (theta, phi)
        }
        BaseTransform::RmsProp { .. } => {
            let dt: Vec<f64> = gt.iter().zip(&pt).map(|(g, p)| 2.0 * g - p).collect();
            let dp: Vec<f64> = gp.iter().zip(&pp).map(|(g, p)| 2.0 * g - p).collect();
            let st = base_step(cfg.base, &dt, &mut state.rms_cache_theta, cfg.alpha1);
            let sp = base_step(cfg.base, &dp, &mut state.rms_cache_phi, cfg.alpha2);
            (descend(&state.current.theta, &st), ascend(&state.current.phi, &sp))
        }
    };
    state.prev_grad_theta = Some(gt);
    state.prev_grad_phi = Some(gp);
    commit(state, theta, phi)
}

/// Extrapolation from the past:
///
/// ```text
/// x_{t+1/2} = x_t ∓ α∇V(x_{t−1/2})
/// x_{t+1}   = x_t ∓ α∇V(x_{t+1/2})
/// ```
///
/// The half point starts at the initial point. `prev_grad_*` hold the gradient
/// at the latest half point, so each step costs one gradient evaluation.
pub fn past_extrapolation_step<G: Game + ?Sized>(
    game: &G,
    state: &mut OptimizerState,
    cfg: &StepConfig,
) -> Result<()> {
    checked(game, state)?;
    let (ht, hp) = match (&state.prev_grad_theta, &state.prev_grad_phi) {
        (Some(t), Some(p)) => (t.clone(), p.clone()),
        _ => {
            let start = state.half_point.clone().unwrap_or_else(|| state.current.clone());
            game.grads(&start)?
        }
    };
    let (a1, a2) = (cfg.alpha1, cfg.alpha2);
    let x = &state.current;
    let half = JointPoint::new(
        x.theta.iter().zip(&ht).map(|(v, g)| v - a1 * g).collect(),
        x.phi.iter().zip(&hp).map(|(v, g)| v + a2 * g).collect(),
    );
    if !half.is_finite() {
        return Err(diverged(state));
    }
    let (gt, gp) = game.grads(&half)?;
    if !(finite(&gt) && finite(&gp)) {
        return Err(diverged(state));
    }
    let theta = x.theta.iter().zip(&gt).map(|(v, g)| v - a1 * g).collect();
    let phi = x.phi.iter().zip(&gp).map(|(v, g)| v + a2 * g).collect();
    state.prev_grad_theta = Some(gt);
    state.prev_grad_phi = Some(gp);
    state.half_point = Some(half);
    commit(state, theta, phi)
}

fn require_jacobian<G: Game + ?Sized>(game: &G, method: Method) -> Result<()> {
    if game.has_jacobian() {
        Ok(())
    } else {
        Err(Error::Capability(format!(
            "{method}: the game exposes no Jacobian-vector products"
        )))
    }
}

/// Applies `w⁺ = w − α·(ξ + adjustment)` with `ξ = (∇_θV, −∇_φV)`.
fn field_step(state: &mut OptimizerState, cfg: &StepConfig, gt: &[f64], gp: &[f64], adj: &[f64]) -> Result<()> {
    let d = gt.len();
    let theta = state
        .current
        .theta
        .iter()
        .zip(gt)
        .zip(&adj[..d])
        .map(|((w, g), a)| w - cfg.alpha1 * (g + a))
        .collect();
    let phi = state
        .current
        .phi
        .iter()
        .zip(gp)
        .zip(&adj[d..])
        .map(|((w, g), a)| w - cfg.alpha2 * (-g + a))
        .collect();
    commit(state, theta, phi)
}

/// Consensus optimization: `w⁺ = w − α(ξ + γJᵀξ)`.
pub fn conopt_step<G: Game + ?Sized>(game: &G, state: &mut OptimizerState, cfg: &StepConfig) -> Result<()> {
    require_jacobian(game, Method::ConOpt)?;
    checked(game, state)?;
    let (gt, gp) = game.grads(&state.current)?;
    let jtx = game.jacobian_transpose_vf(&state.current)?;
    if !(finite(&gt) && finite(&gp) && finite(&jtx)) {
        return Err(diverged(state));
    }
    let adj: Vec<f64> = jtx.iter().map(|v| cfg.conopt_gamma * v).collect();
    state.prev_grad_theta = Some(gt.clone());
    state.prev_grad_phi = Some(gp.clone());
    field_step(state, cfg, &gt, &gp, &adj)
}

/// Offset in the sign-alignment rule.
const SGA_ALIGN_EPSILON: f64 = 0.1;

/// Symplectic gradient adjustment: `w⁺ = w − α(ξ + λAᵀξ)` with `A = (J − Jᵀ)/2`.
///
/// With `sga_align`, `λ` takes the sign of `⟨ξ, ∇H⟩⟨Aᵀξ, ∇H⟩/dim + 0.1`
/// where `∇H = Jᵀξ` is the gradient of `½‖ξ‖²`.
pub fn sga_step<G: Game + ?Sized>(game: &G, state: &mut OptimizerState, cfg: &StepConfig) -> Result<()> {
    require_jacobian(game, Method::SGA)?;
    checked(game, state)?;
    let (gt, gp) = game.grads(&state.current)?;
    let jtx = game.jacobian_transpose_vf(&state.current)?;
    let jx = game.jacobian_vf(&state.current)?;
    if !(finite(&gt) && finite(&gp) && finite(&jtx) && finite(&jx)) {
        return Err(diverged(state));
    }
    let antisym: Vec<f64> = jtx.iter().zip(&jx).map(|(a, b)| 0.5 * (a - b)).collect();
    let mut lambda = cfg.sga_lambda;
    if cfg.sga_align {
        let xi: Vec<f64> = gt.iter().copied().chain(gp.iter().map(|v| -v)).collect();
        let dim = xi.len() as f64;
        let score = crate::numkit::dot(&xi, &jtx) * crate::numkit::dot(&antisym, &jtx) / dim + SGA_ALIGN_EPSILON;
        lambda = lambda.abs() * score.signum();
    }
    let adj: Vec<f64> = antisym.iter().map(|v| lambda * v).collect();
    state.prev_grad_theta = Some(gt.clone());
    state.prev_grad_phi = Some(gp.clone());
    field_step(state, cfg, &gt, &gp, &adj)
}

/// Validates the configuration and applies one step of `cfg.method` using
/// `cfg.base` as the per-coordinate transform.
pub fn composed_step<G: Game + ?Sized>(game: &G, state: &mut OptimizerState, cfg: &StepConfig) -> Result<()> {
    cfg.validate()?;
    match cfg.method {
        Method::SimGD => sim_gd_step(game, state, cfg),
        Method::AltGD => alt_gd_step(game, state, cfg),
        Method::GradSCA => grad_sca_step(game, state, cfg),
        Method::GradACA => grad_aca_step(game, state, cfg),
        Method::OMD => omd_step(game, state, cfg),
        Method::PastExtrapolation => past_extrapolation_step(game, state, cfg),
        Method::ConOpt => conopt_step(game, state, cfg),
        Method::SGA => sga_step(game, state, cfg),
    }
}

/// Ordered iterates with their distance to a reference point.
///
/// Index 0 is the starting point (with a zero step time).
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Trajectory {
    pub points: Vec<JointPoint>,
    /// Squared distance to the reference point.
    pub deltas: Vec<f64>,
    /// `‖(∇_θV, ∇_φV)‖` at each point.
    pub grad_norms: Vec<f64>,
    /// Wall time of the step that produced each point, in seconds.
    pub step_times: Vec<f64>,
    /// The run stopped early on the divergence guard.
    pub diverged: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn final_delta(&self) -> f64 {
        *self.deltas.last().expect("trajectory holds the start point")
    }

    fn record<G: Game + ?Sized>(&mut self, game: &G, x: &JointPoint, reference: &JointPoint, secs: f64) -> Result<()> {
        let (gt, gp) = game.grads(x)?;
        self.grad_norms.push(norm(&gt).hypot(norm(&gp)));
        self.deltas.push(x.squared_distance(reference));
        self.points.push(x.clone());
        self.step_times.push(secs);
        Ok(())
    }
}

/// Runs `steps` iterations of `cfg` from `start`, recording squared distances
/// to `reference`. Stops early, flagging divergence, once any coordinate
/// exceeds [`DIVERGENCE_GUARD`] in magnitude or becomes non-finite.
pub fn run_trajectory<G: Game + ?Sized>(
    game: &G,
    cfg: &StepConfig,
    start: &JointPoint,
    steps: usize,
    reference: &JointPoint,
) -> Result<Trajectory> {
    if steps == 0 {
        return Err(Error::Precondition("a trajectory needs at least one step".into()));
    }
    cfg.validate()?;
    game.check_point(start)?;
    game.check_point(reference)?;
    if cfg.method.needs_jacobian() {
        require_jacobian(game, cfg.method)?;
    }

    let mut traj = Trajectory::default();
    traj.record(game, start, reference, 0.0)?;
    let mut state = OptimizerState::new(start.clone());
    for _ in 0..steps {
        let t0 = Instant::now();
        match composed_step(game, &mut state, cfg) {
            Ok(()) => {}
            Err(Error::Divergence { .. }) => {
                traj.diverged = true;
                break;
            }
            Err(e) => return Err(e),
        }
        let secs = t0.elapsed().as_secs_f64();
        traj.record(game, &state.current, reference, secs)?;
        if state.current.max_abs() > DIVERGENCE_GUARD {
            traj.diverged = true;
            break;
        }
    }
    Ok(traj)
}

/// A stepper bundling configuration and state.
#[derive(Clone, Debug)]
pub struct Optimizer {
    pub cfg: StepConfig,
    pub state: OptimizerState,
}

impl Optimizer {
    pub fn new(cfg: StepConfig, start: JointPoint) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg, state: OptimizerState::new(start) })
    }

    pub fn step<G: Game + ?Sized>(&mut self, game: &G) -> Result<()> {
        composed_step(game, &mut self.state, &self.cfg)
    }

    pub fn point(&self) -> &JointPoint {
        &self.state.current
    }
}
