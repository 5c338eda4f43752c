//! Two-player games. Player 1 minimizes `V(θ, φ)` over `θ`; player 2
//! maximizes it over `φ`.
//!
//! Gradients are the raw partial derivatives of `V`. Optimizers descend on `θ`
//! and ascend on `φ`. Where a single vector field is needed (consensus
//! optimization, SGA), it is assembled as `ξ = (∇_θ V, −∇_φ V)` so that both
//! players descend `ξ`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{norm, svd, Matrix, SvdResult};

/// A `(θ, φ)` pair of parameter vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointPoint {
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
}

impl JointPoint {
    pub fn new(theta: Vec<f64>, phi: Vec<f64>) -> Self {
        Self { theta, phi }
    }

    pub fn zeros(d: usize, p: usize) -> Self {
        Self::new(vec![0.0; d], vec![0.0; p])
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.theta.len(), self.phi.len())
    }

    pub fn is_finite(&self) -> bool {
        self.theta.iter().chain(&self.phi).all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.theta.iter().chain(&self.phi).fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `‖θ − θ'‖² + ‖φ − φ'‖²`
    pub fn squared_distance(&self, other: &JointPoint) -> f64 {
        let sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
        sq(&self.theta, &other.theta) + sq(&self.phi, &other.phi)
    }
}

/// The capability set an optimizer may ask of a game.
pub trait Game {
    /// `(dim θ, dim φ)`.
    fn dims(&self) -> (usize, usize);

    fn grad_theta(&self, x: &JointPoint) -> Result<Vec<f64>>;

    fn grad_phi(&self, x: &JointPoint) -> Result<Vec<f64>>;

    /// Both partial gradients at the same point. Games that can share work
    /// between the two should override this.
    fn grads(&self, x: &JointPoint) -> Result<(Vec<f64>, Vec<f64>)> {
        Ok((self.grad_theta(x)?, self.grad_phi(x)?))
    }

    /// Whether [`Game::jacobian_transpose_vf`] and [`Game::jacobian_vf`] are available.
    fn has_jacobian(&self) -> bool {
        false
    }

    /// `Jᵀξ` at `x`, i.e. the gradient of `½‖ξ‖²`, laid out as `(θ-part, φ-part)`.
    fn jacobian_transpose_vf(&self, _x: &JointPoint) -> Result<Vec<f64>> {
        Err(Error::Capability("Jacobian-transpose products".into()))
    }

    /// `Jξ` at `x`.
    fn jacobian_vf(&self, _x: &JointPoint) -> Result<Vec<f64>> {
        Err(Error::Capability("Jacobian products".into()))
    }

    /// `V(θ, φ)`, when cheap to evaluate.
    fn value(&self, _x: &JointPoint) -> Option<f64> {
        None
    }

    fn check_point(&self, x: &JointPoint) -> Result<()> {
        let (d, p) = self.dims();
        if x.dims() != (d, p) {
            return Err(Error::Dimension(format!(
                "point has dims {:?}, game expects ({d}, {p})",
                x.dims()
            )));
        }
        Ok(())
    }
}

/// `min_θ max_φ θᵀAφ + θᵀb + cᵀφ`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBilinear")]
pub struct BilinearGame {
    #[serde(rename = "A")]
    a: Matrix,
    b: Vec<f64>,
    c: Vec<f64>,
}

#[derive(Deserialize)]
struct RawBilinear {
    #[serde(rename = "A")]
    a: Matrix,
    b: Option<Vec<f64>>,
    c: Option<Vec<f64>>,
}

impl TryFrom<RawBilinear> for BilinearGame {
    type Error = Error;

    fn try_from(r: RawBilinear) -> Result<Self> {
        let (d, p) = (r.a.rows(), r.a.cols());
        Self::new(r.a, r.b.unwrap_or_else(|| vec![0.0; d]), r.c.unwrap_or_else(|| vec![0.0; p]))
    }
}

/// Outcome of [`BilinearGame::stationarity`].
#[derive(Clone, Debug, PartialEq)]
pub struct Stationarity {
    pub exists: bool,
    /// Minimum-norm stationary point, when one exists.
    pub point: Option<JointPoint>,
}

impl BilinearGame {
    pub fn new(a: Matrix, b: Vec<f64>, c: Vec<f64>) -> Result<Self> {
        if b.len() != a.rows() || c.len() != a.cols() {
            return Err(Error::Dimension(format!(
                "A is {}x{} but b has {} and c has {} entries",
                a.rows(),
                a.cols(),
                b.len(),
                c.len()
            )));
        }
        if !b.iter().chain(&c).all(|v| v.is_finite()) {
            return Err(Error::InputDomain("offsets must be finite".into()));
        }
        Ok(Self { a, b, c })
    }

    /// `θᵀAφ` with no offsets.
    pub fn centered(a: Matrix) -> Self {
        let (d, p) = (a.rows(), a.cols());
        Self { a, b: vec![0.0; d], c: vec![0.0; p] }
    }

    /// The scalar game `min_θ max_φ θ·φ`.
    pub fn scalar() -> Self {
        Self::centered(Matrix::identity(1))
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn is_centered(&self) -> bool {
        self.b.iter().chain(&self.c).all(|v| *v == 0.0)
    }

    /// `(Aφ + b, Aᵀθ + c)`
    pub fn bilinear_grads(&self, x: &JointPoint) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_point(x)?;
        let mut gt = self.a.matvec(&x.phi)?;
        for (g, b) in gt.iter_mut().zip(&self.b) {
            *g += b;
        }
        let mut gp = self.a.tr_matvec(&x.theta)?;
        for (g, c) in gp.iter_mut().zip(&self.c) {
            *g += c;
        }
        Ok((gt, gp))
    }

    /// Existence of a point with `Aφ* + b = 0` and `Aᵀθ* + c = 0`, and the
    /// minimum-norm such point.
    pub fn stationarity(&self) -> Result<Stationarity> {
        let s = svd(&self.a)?;
        // φ* = −A⁺b, θ* = −(Aᵀ)⁺c
        let phi: Vec<f64> = pinv_apply(&s, &self.b, false).into_iter().map(|v| -v).collect();
        let theta: Vec<f64> = pinv_apply(&s, &self.c, true).into_iter().map(|v| -v).collect();
        let point = JointPoint::new(theta, phi);
        let (rt, rp) = self.bilinear_grads(&point)?;
        let tol = 1e-9 * (1.0 + norm(&self.b) + norm(&self.c));
        let exists = norm(&rt) <= tol && norm(&rp) <= tol;
        Ok(Stationarity { exists, point: exists.then_some(point) })
    }

    /// Same `A`, offsets removed. Gradients of the result at `x − x*` equal
    /// gradients of `self` at `x`.
    pub fn shift_to_origin(&self) -> Result<BilinearGame> {
        if !self.stationarity()?.exists {
            return Err(Error::UnsupportedGame(
                "b is not in range(A) or c is not in range(Aᵀ)".into(),
            ));
        }
        Ok(Self::centered(self.a.clone()))
    }

    /// `(P_N(θ), P_M(φ))` with `N = null(Aᵀ)` and `M = null(A)`.
    pub fn null_projections(&self, x: &JointPoint) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_point(x)?;
        let s = svd(&self.a)?;
        Ok(null_projections_with(&s, x))
    }
}

/// Null-space projections from a precomputed SVD of `A`.
pub fn null_projections_with(s: &SvdResult, x: &JointPoint) -> (Vec<f64>, Vec<f64>) {
    (
        remove_span(&s.u, s.rank, &x.theta),
        remove_span(&s.v, s.rank, &x.phi),
    )
}

/// `x − Q_r Q_rᵀ x` where `Q_r` are the first `r` columns of `q`.
fn remove_span(q: &Matrix, r: usize, x: &[f64]) -> Vec<f64> {
    let mut out = x.to_vec();
    for k in 0..r {
        let col = q.column(k);
        let c: f64 = col.iter().zip(x).map(|(a, b)| a * b).sum();
        for (o, qi) in out.iter_mut().zip(&col) {
            *o -= c * qi;
        }
    }
    out
}

/// `A⁺y` (or `(Aᵀ)⁺y` when `transpose`) from the SVD `A = U D Vᵀ`.
fn pinv_apply(s: &SvdResult, y: &[f64], transpose: bool) -> Vec<f64> {
    let (left, right) = if transpose { (&s.v, &s.u) } else { (&s.u, &s.v) };
    let mut out = vec![0.0; right.rows()];
    for k in 0..s.rank {
        let coeff: f64 = left.column(k).iter().zip(y).map(|(a, b)| a * b).sum::<f64>()
            / s.singular_values[k];
        for (i, o) in out.iter_mut().enumerate() {
            *o += coeff * right[(i, k)];
        }
    }
    out
}

impl Game for BilinearGame {
    fn dims(&self) -> (usize, usize) {
        (self.a.rows(), self.a.cols())
    }

    fn grad_theta(&self, x: &JointPoint) -> Result<Vec<f64>> {
        self.check_point(x)?;
        let mut g = self.a.matvec(&x.phi)?;
        for (g, b) in g.iter_mut().zip(&self.b) {
            *g += b;
        }
        Ok(g)
    }

    fn grad_phi(&self, x: &JointPoint) -> Result<Vec<f64>> {
        self.check_point(x)?;
        let mut g = self.a.tr_matvec(&x.theta)?;
        for (g, c) in g.iter_mut().zip(&self.c) {
            *g += c;
        }
        Ok(g)
    }

    fn grads(&self, x: &JointPoint) -> Result<(Vec<f64>, Vec<f64>)> {
        self.bilinear_grads(x)
    }

    fn has_jacobian(&self) -> bool {
        true
    }

    // ξ = (Aφ + b, −(Aᵀθ + c)), J = [[0, A], [−Aᵀ, 0]]
    // Jᵀξ = (A(Aᵀθ + c), Aᵀ(Aφ + b))
    fn jacobian_transpose_vf(&self, x: &JointPoint) -> Result<Vec<f64>> {
        let (gt, gp) = self.bilinear_grads(x)?;
        let mut out = self.a.matvec(&gp)?;
        out.extend(self.a.tr_matvec(&gt)?);
        Ok(out)
    }

    // Jξ = (−A(Aᵀθ + c), −Aᵀ(Aφ + b))
    fn jacobian_vf(&self, x: &JointPoint) -> Result<Vec<f64>> {
        Ok(self.jacobian_transpose_vf(x)?.into_iter().map(|v| -v).collect())
    }

    fn value(&self, x: &JointPoint) -> Option<f64> {
        let aphi = self.a.matvec(&x.phi).ok()?;
        let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
        Some(dot(&x.theta, &aphi) + dot(&x.theta, &self.b) + dot(&self.c, &x.phi))
    }
}
