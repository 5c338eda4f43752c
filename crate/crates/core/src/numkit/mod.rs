//! Small dense linear algebra: matrices, SVD, nonsymmetric eigenvalues and
//! polynomial roots. Everything here is sized for matrices of a few dozen rows.

mod eigen;
mod matrix;
mod poly;
mod svd;

pub use eigen::eig_dense;
pub use matrix::{dot, norm, Matrix};
pub use poly::{poly_eval, poly_roots, poly_roots_real};
pub use svd::{svd, SvdResult};

pub use num_complex::Complex64 as ComplexNumber;

use crate::error::{Error, Result};

/// Largest modulus in a list of eigenvalues.
pub fn spectral_radius(eigs: &[ComplexNumber]) -> Result<f64> {
    if eigs.is_empty() {
        return Err(Error::InputDomain("spectral radius of an empty list".into()));
    }
    Ok(eigs.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Greedy nearest-pair matching of two multisets of complex numbers.
///
/// Elements of `a` are visited in order; each is paired with the closest
/// unused element of `b`. Returns the largest paired distance, or `None` when
/// the lengths differ.
pub fn multiset_distance(a: &[ComplexNumber], b: &[ComplexNumber]) -> Option<f64> {
    if a.len() != b.len() {
        return None;
    }
    let mut used = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    for x in a {
        let (j, d) = b
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, y)| (j, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))?;
        used[j] = true;
        worst = worst.max(d);
    }
    Some(worst)
}
