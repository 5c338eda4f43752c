//! Linear convergence analysis of Grad-SCA and Grad-ACA on the centered
//! bilinear game `θᵀAφ`.
//!
//! Both methods are linear recurrences on the stacked state
//! `[θ_t, φ_t, θ_{t−1}, φ_{t−1}]`, with iteration matrices `F₁` (simultaneous)
//! and `F₂` (alternating). The spectral radius of that matrix is the
//! asymptotic per-step contraction of `‖x_t‖`; the squared distance `Δ_t`
//! therefore contracts like `ρ²`.
//!
//! Writing `A = U D Vᵀ`, the recurrence splits into one 4×4 system per
//! singular value `σ`. For Grad-SCA the characteristic polynomial of that
//! block is the quartic
//!
//! ```text
//! λ²(1−λ)² + (λ(α₂+β₂) − β₂)(λ(α₁+β₁) − β₁)·σ²
//! ```
//!
//! so the spectrum of `F₁` is the union of quartic roots over `Sp(AᵀA)`.
//! Directions in the null spaces of `A` or `Aᵀ` are frozen by both methods
//! and contribute the eigenvalues 0 and 1 only.

use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::games::{BilinearGame, JointPoint};
use crate::numkit::{eig_dense, multiset_distance, poly_roots_real, spectral_radius, svd, ComplexNumber, Matrix};
use crate::optimizers::{run_trajectory, Method, StepConfig, Trajectory, DIVERGENCE_GUARD};

/// Relative slack used by the region checks on their `≤` boundaries.
const BOUNDARY_SLACK: f64 = 1e-12;

/// Dense cross-checks run when `d + p` does not exceed this.
const CROSS_CHECK_MAX_DIM: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SpectrumKind {
    /// Grad-SCA, iteration matrix `F₁`.
    #[serde(rename = "SCA")]
    Sca,
    /// Grad-ACA, iteration matrix `F₂`.
    #[serde(rename = "ACA")]
    Aca,
    /// Grad-ACA with `β₁ = 0, α₁ = α₂ = β₂`, where `F₂` collapses to a
    /// one-step recurrence.
    #[serde(rename = "ACA_reduced")]
    AcaReduced,
}

/// Spectrum of an iteration matrix plus the applicable theoretical checks.
#[derive(Clone, Debug, Serialize)]
pub struct SpectralReport {
    pub method: SpectrumKind,
    /// Eigenvalues governing convergence. For rank-deficient `A` these are
    /// the eigenvalues of the subsystem on the leading `rank` singular
    /// directions; the frozen null-space directions are left out.
    #[serde(serialize_with = "complex_pairs")]
    pub eigenvalues: Vec<ComplexNumber>,
    pub rho: f64,
    /// Theoretical rate bound, when its hypotheses hold.
    pub bound: Option<f64>,
    /// Whether the parameters lie in the proven convergence region.
    pub region_ok: Option<bool>,
    pub params: StepConfig,
    pub singular_values: Vec<f64>,
    pub rank: usize,
    /// `true` when `eigenvalues` describe the leading-rank subsystem only.
    pub reduced: bool,
    /// Spectral radius of the full iteration matrix from the dense solver.
    pub dense_rho: Option<f64>,
    /// Largest distance between the structured spectrum and the dense
    /// eigensolve of the full iteration matrix, after multiset matching.
    pub cross_check: Option<f64>,
}

fn complex_pairs<S: Serializer>(v: &[ComplexNumber], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|z| [z.re, z.im]))
}

impl SpectralReport {
    /// `ρ < 1` strictly.
    pub fn converges(&self) -> bool {
        self.rho < 1.0
    }
}

/// `F₁` for `[θ_t, φ_t, θ_{t−1}, φ_{t−1}] ↦ [θ_{t+1}, φ_{t+1}, θ_t, φ_t]`:
///
/// ```text
/// ⎡ I            −(α₁+β₁)A   0      β₁A ⎤
/// ⎢ (α₂+β₂)Aᵀ    I           −β₂Aᵀ  0   ⎥
/// ⎢ I            0           0      0   ⎥
/// ⎣ 0            I           0      0   ⎦
/// ```
pub fn build_f1(a: &Matrix, cfg: &StepConfig) -> Matrix {
    let (d, p) = (a.rows(), a.cols());
    let at = a.transpose();
    let n = 2 * (d + p);
    let mut f = Matrix::zeros(n, n);
    f.set_block(0, 0, &Matrix::identity(d));
    f.set_block(0, d, &a.scaled(-(cfg.alpha1 + cfg.beta1)));
    f.set_block(0, 2 * d + p, &a.scaled(cfg.beta1));
    f.set_block(d, 0, &at.scaled(cfg.alpha2 + cfg.beta2));
    f.set_block(d, d, &Matrix::identity(p));
    f.set_block(d, d + p, &at.scaled(-cfg.beta2));
    shift_rows(&mut f, d, p);
    f
}

/// `F₂`, the alternating counterpart of [`build_f1`]:
///
/// ```text
/// ⎡ I      −(α₁+β₁)A               0   β₁A             ⎤
/// ⎢ α₂Aᵀ   I − (α₁+β₁)(α₂+β₂)AᵀA   0   (α₂+β₂)β₁AᵀA    ⎥
/// ⎢ I      0                       0   0               ⎥
/// ⎣ 0      I                       0   0               ⎦
/// ```
pub fn build_f2(a: &Matrix, cfg: &StepConfig) -> Matrix {
    let (d, p) = (a.rows(), a.cols());
    let at = a.transpose();
    let ata = at.matmul(a).expect("AᵀA shapes agree");
    let (s1, s2) = (cfg.alpha1 + cfg.beta1, cfg.alpha2 + cfg.beta2);
    let n = 2 * (d + p);
    let mut f = Matrix::zeros(n, n);
    f.set_block(0, 0, &Matrix::identity(d));
    f.set_block(0, d, &a.scaled(-s1));
    f.set_block(0, 2 * d + p, &a.scaled(cfg.beta1));
    f.set_block(d, 0, &at.scaled(cfg.alpha2));
    f.set_block(d, d, &Matrix::identity(p).sub(&ata.scaled(s1 * s2)).expect("square"));
    f.set_block(d, 2 * d + p, &ata.scaled(s2 * cfg.beta1));
    shift_rows(&mut f, d, p);
    f
}

fn shift_rows(f: &mut Matrix, d: usize, p: usize) {
    for i in 0..d + p {
        f[(d + p + i, i)] = 1.0;
    }
}

/// One-step matrix of Grad-ACA in the special case `β₁ = 0, α₁ = α₂ = β₂ = α`:
///
/// ```text
/// θ_{t+1} = θ_t − αAφ_t
/// φ_{t+1} = αAᵀθ_t + (I − 2α²AᵀA)φ_t
/// ```
pub fn build_f2_reduced(a: &Matrix, alpha: f64) -> Matrix {
    let (d, p) = (a.rows(), a.cols());
    let at = a.transpose();
    let ata = at.matmul(a).expect("AᵀA shapes agree");
    let mut f = Matrix::zeros(d + p, d + p);
    f.set_block(0, 0, &Matrix::identity(d));
    f.set_block(0, d, &a.scaled(-alpha));
    f.set_block(d, 0, &at.scaled(alpha));
    f.set_block(d, d, &Matrix::identity(p).sub(&ata.scaled(2.0 * alpha * alpha)).expect("square"));
    f
}

/// Coefficients (high → low) of the Grad-SCA quartic for `ζ = σ²`.
pub fn sca_quartic(cfg: &StepConfig, zeta: f64) -> [f64; 5] {
    let (s1, s2) = (cfg.alpha1 + cfg.beta1, cfg.alpha2 + cfg.beta2);
    // λ⁴ − 2λ³ + λ² + ζ[s₁s₂λ² − (s₂β₁ + β₂s₁)λ + β₁β₂]
    [
        1.0,
        -2.0,
        1.0 + zeta * s1 * s2,
        -zeta * (s2 * cfg.beta1 + cfg.beta2 * s1),
        zeta * cfg.beta1 * cfg.beta2,
    ]
}

/// Coefficients of the characteristic polynomial of the special-case
/// Grad-ACA block for `ζ = σ²`: `λ² − (2 − 2α²ζ)λ + (1 − α²ζ)`.
pub fn aca_special_quadratic(alpha: f64, zeta: f64) -> [f64; 3] {
    let a2 = alpha * alpha * zeta;
    [1.0, -(2.0 - 2.0 * a2), 1.0 - a2]
}

/// 4×4 block of `F₂` acting on one singular pair `(u, v)` with value `σ`.
fn aca_block(cfg: &StepConfig, sigma: f64) -> Matrix {
    let (s1, s2) = (cfg.alpha1 + cfg.beta1, cfg.alpha2 + cfg.beta2);
    let z = sigma * sigma;
    Matrix::from_rows(&[
        [1.0, -s1 * sigma, 0.0, cfg.beta1 * sigma],
        [cfg.alpha2 * sigma, 1.0 - s1 * s2 * z, 0.0, s2 * cfg.beta1 * z],
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
    ])
    .expect("finite block")
}

/// Whether `cfg` is the alternating special case `β₁ = 0, α₁ = α₂ = β₂`.
pub fn is_aca_special(cfg: &StepConfig) -> bool {
    cfg.beta1 == 0.0 && cfg.alpha1 == cfg.alpha2 && cfg.alpha2 == cfg.beta2
}

fn le_slack(x: f64, y: f64) -> bool {
    x <= y + BOUNDARY_SLACK * y.abs().max(1.0)
}

fn is_symmetric(cfg: &StepConfig) -> bool {
    cfg.alpha1 == cfg.alpha2 && cfg.beta1 == cfg.beta2
}

/// Eigenvalues 0 and 1 contributed by each unmatched dimension when `d ≠ p`
/// (or by each zero singular value), `count` times each.
fn frozen_modes(count: usize, values: &[f64]) -> Vec<ComplexNumber> {
    (0..count)
        .flat_map(|_| values.iter().map(|&v| ComplexNumber::new(v, 0.0)))
        .collect()
}

/// Spectrum of `F₁` via the per-singular-value quartics.
///
/// When `A` is square and nonsingular the union of quartic roots is the full
/// spectrum of `F₁`. Otherwise the report holds the roots for the nonzero
/// singular values (the subsystem that governs convergence to
/// `(P_N(θ₀), P_M(φ₀))`) and `dense_rho` holds `ρ(F₁)`.
pub fn sca_spectrum(a: &Matrix, cfg: &StepConfig) -> Result<SpectralReport> {
    let s = svd(a)?;
    let (d, p) = (a.rows(), a.cols());
    let full_rank_square = d == p && s.rank == p;

    let mut full = Vec::with_capacity(2 * (d + p));
    let mut leading = Vec::with_capacity(4 * s.rank);
    for (i, sigma) in s.singular_values.iter().enumerate() {
        let roots = if i < s.rank {
            poly_roots_real(&sca_quartic(cfg, sigma * sigma))?
        } else {
            frozen_modes(2, &[0.0, 1.0])
        };
        if i < s.rank {
            leading.extend_from_slice(&roots);
        }
        full.extend(roots);
    }
    full.extend(frozen_modes(d.abs_diff(p), &[0.0, 1.0]));

    let eigenvalues = if full_rank_square || s.rank == 0 { full.clone() } else { leading };
    let rho = spectral_radius(&eigenvalues)?;

    let (dense_rho, cross_check) = dense_check(&build_f1(a, cfg), &full, d + p)?;

    let (bound, region_ok) = if is_symmetric(cfg) && s.rank > 0 {
        let (alpha, beta) = (cfg.alpha1, cfg.beta1);
        let region = if full_rank_square {
            region_check_prop32(a, alpha, beta)?
        } else {
            region_check_prop33(a, alpha, beta)?
        };
        let bound = (alpha == beta).then(|| omd_rate_bound(a, alpha).ok()).flatten();
        (bound, Some(region))
    } else {
        (None, None)
    };

    Ok(SpectralReport {
        method: SpectrumKind::Sca,
        eigenvalues,
        rho,
        bound,
        region_ok,
        params: *cfg,
        singular_values: s.singular_values.clone(),
        rank: s.rank,
        reduced: !(full_rank_square || s.rank == 0),
        dense_rho,
        cross_check,
    })
}

/// Spectrum of `F₂`.
///
/// In the special case `β₁ = 0, α₁ = α₂ = β₂ = α` each singular value `σ`
/// contributes the two roots of `λ² − (2 − 2α²σ²)λ + (1 − α²σ²)`, whose moduli
/// are both `√(1 − α²σ²)` when `ασ < 1`. Otherwise each `σ` contributes the
/// eigenvalues of its 4×4 block of `F₂`.
pub fn aca_spectrum(a: &Matrix, cfg: &StepConfig) -> Result<SpectralReport> {
    let s = svd(a)?;
    let (d, p) = (a.rows(), a.cols());
    let special = is_aca_special(cfg);
    let full_rank_square = d == p && s.rank == p;

    let mut full = Vec::with_capacity(2 * (d + p));
    let mut leading = Vec::new();
    for (i, sigma) in s.singular_values.iter().enumerate() {
        let mut roots = if special {
            poly_roots_real(&aca_special_quadratic(cfg.alpha1, sigma * sigma))?
        } else {
            eig_dense(&aca_block(cfg, *sigma))?
        };
        if i < s.rank {
            leading.extend_from_slice(&roots);
        }
        if special {
            // The lagged half of F₂ is identically zero in this case.
            roots.extend(frozen_modes(2, &[0.0]));
        }
        full.extend(roots);
    }
    full.extend(frozen_modes(d.abs_diff(p), &[0.0, 1.0]));

    let eigenvalues = if s.rank == 0 {
        full.clone()
    } else if full_rank_square {
        if special {
            leading.clone()
        } else {
            full.clone()
        }
    } else {
        leading
    };
    let rho = spectral_radius(&eigenvalues)?;
    let (dense_rho, cross_check) = dense_check(&build_f2(a, cfg), &full, d + p)?;

    let (bound, region_ok) = if special && s.rank > 0 {
        let b = aca_rate_bound(a, cfg.alpha1).ok();
        (b, Some(b.is_some()))
    } else {
        (None, None)
    };

    Ok(SpectralReport {
        method: if special { SpectrumKind::AcaReduced } else { SpectrumKind::Aca },
        eigenvalues,
        rho,
        bound,
        region_ok,
        params: *cfg,
        singular_values: s.singular_values.clone(),
        rank: s.rank,
        reduced: s.rank > 0 && !full_rank_square,
        dense_rho,
        cross_check,
    })
}

fn dense_check(f: &Matrix, structured: &[ComplexNumber], dim: usize) -> Result<(Option<f64>, Option<f64>)> {
    if dim > CROSS_CHECK_MAX_DIM {
        return Ok((None, None));
    }
    let dense = eig_dense(f)?;
    Ok((Some(spectral_radius(&dense)?), multiset_distance(structured, &dense)))
}

/// Sufficient convergence condition for symmetric Grad-SCA on square
/// nonsingular `A`:
/// `0 < α+β ≤ 1/σ_max` and `|α−β| ≤ σ_min·(α+β)²/10`.
pub fn region_check_prop32(a: &Matrix, alpha: f64, beta: f64) -> Result<bool> {
    let s = svd(a)?;
    if !(a.is_square() && s.rank == a.rows()) {
        return Err(Error::Precondition("the region check needs a square nonsingular A".into()));
    }
    Ok(region_holds(&s.singular_values[..s.rank], alpha, beta))
}

/// The same region stated with `σ₁` and the smallest nonzero singular value
/// `σ_r`, for arbitrary `A`. Guarantees convergence of `Δ_t^P`.
pub fn region_check_prop33(a: &Matrix, alpha: f64, beta: f64) -> Result<bool> {
    let s = svd(a)?;
    if s.rank == 0 {
        return Err(Error::Precondition("A is zero".into()));
    }
    Ok(region_holds(&s.singular_values[..s.rank], alpha, beta))
}

fn region_holds(sigmas: &[f64], alpha: f64, beta: f64) -> bool {
    let (s_max, s_min) = (sigmas[0], sigmas[sigmas.len() - 1]);
    let sum = alpha + beta;
    sum > 0.0 && le_slack(sum, 1.0 / s_max) && le_slack((alpha - beta).abs(), s_min * sum * sum / 10.0)
}

/// `√(½ + ½√(1 − α²σ_r²))`, stated for `0 < α ≤ 1/σ₁`.
///
/// This dominates `ρ(F₁)` for OMD (`α₁ = α₂ = β₁ = β₂ = α`) only when
/// `2α ≤ 1/σ₁`. For larger `α` OMD can diverge (scalar game, `α = 0.6`:
/// `ρ ≈ 1.057`) while the formula stays below 1.
pub fn omd_rate_bound(a: &Matrix, alpha: f64) -> Result<f64> {
    let s = svd(a)?;
    if s.rank == 0 {
        return Err(Error::Precondition("A is zero".into()));
    }
    let (s1, sr) = (s.singular_values[0], s.singular_values[s.rank - 1]);
    if !(alpha > 0.0 && le_slack(alpha, 1.0 / s1)) {
        return Err(Error::Precondition(format!("alpha = {alpha} outside (0, 1/σ₁ = {}]", 1.0 / s1)));
    }
    let inner = (1.0 - alpha * alpha * sr * sr).max(0.0);
    Ok((0.5 + 0.5 * inner.sqrt()).sqrt())
}

/// `1 − α²σ_r² + α⁴σ_r⁴`, stated for `0 < α ≤ 1/(√2·σ₁)` in the special
/// alternating case.
///
/// The special-case radius is `√(1 − α²σ_r²)`, which exceeds this value
/// whenever `α²σ_r² < 0.43` (approximately).
pub fn aca_rate_bound(a: &Matrix, alpha: f64) -> Result<f64> {
    let s = svd(a)?;
    if s.rank == 0 {
        return Err(Error::Precondition("A is zero".into()));
    }
    let (s1, sr) = (s.singular_values[0], s.singular_values[s.rank - 1]);
    if !(alpha > 0.0 && le_slack(alpha, 1.0 / (2.0f64.sqrt() * s1))) {
        return Err(Error::Precondition(format!(
            "alpha = {alpha} outside (0, 1/(√2σ₁) = {}]",
            1.0 / (2.0f64.sqrt() * s1)
        )));
    }
    let x = alpha * alpha * sr * sr;
    Ok(1.0 - x + x * x)
}

/// Geometric rate of `Δ_t`: `exp` of the least-squares slope of `ln Δ_t`
/// over `t ∈ [burn_in, end]`.
pub fn empirical_rate(traj: &Trajectory, burn_in: usize) -> Result<f64> {
    if traj.diverged {
        return Err(Error::NotMeasurable("trajectory diverged".into()));
    }
    let deltas = &traj.deltas;
    if deltas.len() < burn_in + 20 {
        return Err(Error::NotMeasurable(format!(
            "{} samples, need at least burn-in {burn_in} + 20",
            deltas.len()
        )));
    }
    let tail = &deltas[burn_in..];
    if let Some(bad) = tail.iter().position(|d| !(d.is_finite() && *d > 0.0)) {
        return Err(Error::NotMeasurable(format!(
            "delta at step {} is {}",
            burn_in + bad,
            tail[bad]
        )));
    }
    let n = tail.len() as f64;
    let ts = (burn_in..deltas.len()).map(|t| t as f64);
    let mean_t = ts.clone().sum::<f64>() / n;
    let logs: Vec<f64> = tail.iter().map(|d| d.ln()).collect();
    let mean_l = logs.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, l) in ts.zip(&logs) {
        sxy += (t - mean_t) * (l - mean_l);
        sxx += (t - mean_t) * (t - mean_t);
    }
    Ok((sxy / sxx).exp())
}

/// [`empirical_rate`] with the burn-in set to 20% of the trajectory.
pub fn empirical_rate_default(traj: &Trajectory) -> Result<f64> {
    empirical_rate(traj, traj.deltas.len() / 5)
}

/// `k/n · max` for `k = 1..=n`.
pub fn grid_points(n: usize, max: f64) -> Vec<f64> {
    (1..=n).map(|k| k as f64 / n as f64 * max).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepCell {
    pub alpha: f64,
    pub beta: f64,
    /// `log₁₀` of the final squared distance to the origin; diverged cells
    /// hold `log₁₀(guard²)`.
    pub log10_final_dist: f64,
    pub diverged: bool,
    /// Theoretical spectral radius (Grad-SCA and Grad-ACA only).
    pub rho: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepGrid {
    pub method: Method,
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub initial_dist: f64,
    /// `cells[i][j]` is the run with `alphas[i]`, `betas[j]`.
    pub cells: Vec<Vec<SweepCell>>,
}

impl SweepGrid {
    pub fn iter(&self) -> impl Iterator<Item = &SweepCell> {
        self.cells.iter().flatten()
    }
}

/// Runs `method` from `start` on `θᵀAφ` for every `(α, β)` of the grid.
///
/// Cells run on a pool of `jobs` threads; the result does not depend on
/// `jobs`.
pub fn sweep(
    a: &Matrix,
    method: Method,
    alphas: &[f64],
    betas: &[f64],
    steps: usize,
    start: &JointPoint,
    jobs: usize,
) -> Result<SweepGrid> {
    if alphas.is_empty() || betas.is_empty() {
        return Err(Error::Precondition("sweep grid is empty".into()));
    }
    let game = BilinearGame::centered(a.clone());
    let origin = JointPoint::zeros(a.rows(), a.cols());
    let cell = |alpha: f64, beta: f64| -> Result<SweepCell> {
        let cfg = if method == Method::OMD { StepConfig::omd(alpha) } else { StepConfig::new(method, alpha, beta) };
        let traj = run_trajectory(&game, &cfg, start, steps, &origin)?;
        let rho = match method {
            Method::GradSCA => Some(sca_spectrum(a, &cfg)?.rho),
            Method::GradACA => Some(aca_spectrum(a, &cfg)?.rho),
            _ => None,
        };
        let log10_final_dist = if traj.diverged {
            (DIVERGENCE_GUARD * DIVERGENCE_GUARD).log10()
        } else {
            traj.final_delta().max(f64::MIN_POSITIVE).log10()
        };
        Ok(SweepCell { alpha, beta, log10_final_dist, diverged: traj.diverged, rho })
    };

    let pairs: Vec<(f64, f64)> = alphas.iter().flat_map(|&a| betas.iter().map(move |&b| (a, b))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Configuration(format!("worker pool: {e}")))?;
    let flat: Vec<SweepCell> = pool.install(|| {
        pairs
            .par_iter()
            .map(|&(a, b)| cell(a, b))
            .collect::<Result<Vec<_>>>()
    })?;
    let cells = flat.chunks(betas.len()).map(<[SweepCell]>::to_vec).collect();
    Ok(SweepGrid {
        method,
        alphas: alphas.to_vec(),
        betas: betas.to_vec(),
        initial_dist: start.squared_distance(&origin),
        cells,
    })
}
