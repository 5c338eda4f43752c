use super::matrix::{dot, norm, Matrix};
use crate::error::{Error, Result};

/// Thin singular value decomposition `A = U D Vᵀ`.
///
/// For an `m×n` input with `k = min(m, n)`, `u` is `m×k`, `d` is `k×k` and
/// `v` is `n×k`. Both `u` and `v` have orthonormal columns, including the
/// columns paired with zero singular values.
#[derive(Clone, Debug)]
pub struct SvdResult {
    pub u: Matrix,
    pub d: Matrix,
    pub v: Matrix,
    pub rank: usize,
    /// All `k` singular values, descending.
    pub singular_values: Vec<f64>,
}

impl SvdResult {
    /// Numerical-rank threshold used to compute `rank`.
    pub fn tolerance(&self) -> f64 {
        rank_tolerance(
            self.singular_values.first().copied().unwrap_or(0.0),
            self.u.rows(),
            self.v.rows(),
        )
    }

    /// Nonzero singular values `σ₁ ≥ … ≥ σ_r`.
    pub fn nonzero_singular_values(&self) -> &[f64] {
        &self.singular_values[..self.rank]
    }

    pub fn reconstruct(&self) -> Matrix {
        self.u
            .matmul(&self.d)
            .and_then(|ud| ud.matmul(&self.v.transpose()))
            .expect("svd factors have consistent shapes")
    }
}

fn rank_tolerance(sigma_max: f64, rows: usize, cols: usize) -> f64 {
    1e-12 * sigma_max * rows.max(cols) as f64
}

const MAX_SWEEPS: usize = 80;

/// One-sided (Hestenes) Jacobi SVD.
pub fn svd(a: &Matrix) -> Result<SvdResult> {
    if a.rows() == 0 || a.cols() == 0 {
        return Err(Error::Dimension("svd of an empty matrix".into()));
    }
    if !a.is_finite() {
        return Err(Error::InputDomain("svd input has non-finite entries".into()));
    }
    if a.rows() < a.cols() {
        let t = svd(&a.transpose())?;
        return Ok(SvdResult {
            u: t.v,
            d: t.d,
            v: t.u,
            rank: t.rank,
            singular_values: t.singular_values,
        });
    }

    let (m, n) = (a.rows(), a.cols());
    // Work column-wise: cols[j] is the j-th column of A·V.
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| a.column(j)).collect();
    let mut vcols: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();

    let eps = f64::EPSILON;
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma == 0.0 || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut cols, p, q, c, s);
                rotate(&mut vcols, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NumericalFailure(format!(
            "one-sided Jacobi did not converge in {MAX_SWEEPS} sweeps"
        )));
    }

    let mut order: Vec<(f64, usize)> = cols.iter().map(|c| norm(c)).zip(0..).collect();
    order.sort_by(|x, y| y.0.total_cmp(&x.0));
    let singular_values: Vec<f64> = order.iter().map(|(s, _)| *s).collect();
    let tol = rank_tolerance(singular_values[0], m, n);
    let rank = singular_values.iter().filter(|&&s| s > tol).count();

    let mut u = Matrix::zeros(m, n);
    let mut v = Matrix::zeros(n, n);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
    for (k, &(sigma, j)) in order.iter().enumerate() {
        let uk = if k < rank {
            cols[j].iter().map(|x| x / sigma).collect()
        } else {
            complete_basis(&basis, m)
        };
        for i in 0..m {
            u[(i, k)] = uk[i];
        }
        basis.push(uk);
        for i in 0..n {
            v[(i, k)] = vcols[j][i];
        }
    }

    Ok(SvdResult {
        u,
        d: Matrix::diag(&singular_values),
        v,
        rank,
        singular_values,
    })
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (head, tail) = cols.split_at_mut(q);
    let (cp, cq) = (&mut head[p], &mut tail[0]);
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (t1, t2) = (*x, *y);
        *x = c * t1 - s * t2;
        *y = s * t1 + c * t2;
    }
}

/// Unit vector orthogonal to every vector in `basis` (which must be orthonormal
/// and have fewer than `dim` members).
fn complete_basis(basis: &[Vec<f64>], dim: usize) -> Vec<f64> {
    let mut best: Option<Vec<f64>> = None;
    let mut best_norm = 0.0;
    for e in 0..dim {
        let mut w = vec![0.0; dim];
        w[e] = 1.0;
        // Two Gram-Schmidt passes.
        for _ in 0..2 {
            for b in basis {
                let c = dot(&w, b);
                for (wi, bi) in w.iter_mut().zip(b) {
                    *wi -= c * bi;
                }
            }
        }
        let nw = norm(&w);
        if nw > best_norm {
            best_norm = nw;
            best = Some(w);
        }
        if nw > 0.5 {
            break;
        }
    }
    let w = best.expect("basis is not complete");
    w.iter().map(|x| x / best_norm).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn orthonormal_columns(m: &Matrix) -> f64 {
        let g = m.transpose().matmul(m).unwrap();
        g.sub(&Matrix::identity(m.cols())).unwrap().frobenius_norm()
    }

    #[test]
    fn diagonal_rank_one() {
        let a = Matrix::from_rows(&[[3.0, 0.0], [0.0, 0.0]]).unwrap();
        let s = svd(&a).unwrap();
        assert_eq!(s.singular_values, vec![3.0, 0.0]);
        assert_eq!(s.rank, 1);
        assert!(orthonormal_columns(&s.u) < 1e-12);
    }

    #[test]
    fn permutation() {
        let a = Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let s = svd(&a).unwrap();
        assert!((s.singular_values[0] - 1.0).abs() < 1e-15);
        assert!((s.singular_values[1] - 1.0).abs() < 1e-15);
        assert_eq!(s.rank, 2);
    }

    #[test]
    fn wide_input_is_transposed() {
        let a = Matrix::from_rows(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]).unwrap();
        let s = svd(&a).unwrap();
        assert_eq!((s.u.rows(), s.u.cols()), (2, 2));
        assert_eq!((s.v.rows(), s.v.cols()), (3, 2));
        assert!(s.reconstruct().sub(&a).unwrap().frobenius_norm() < 1e-12);
    }

    #[test]
    fn zero_matrix() {
        let s = svd(&Matrix::zeros(3, 2)).unwrap();
        assert_eq!(s.rank, 0);
        assert!(orthonormal_columns(&s.u) < 1e-12);
        assert!(orthonormal_columns(&s.v) < 1e-12);
    }

    #[test]
    fn non_finite_rejected() {
        let mut a = Matrix::zeros(2, 2);
        a[(0, 1)] = f64::INFINITY;
        assert!(matches!(svd(&a), Err(Error::InputDomain(_))));
    }
}
