use num_complex::Complex64;

use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 800;

/// Evaluates a polynomial (coefficients high→low) and its derivative by Horner.
pub fn poly_eval(coeffs: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for c in coeffs {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// All roots of a polynomial given by complex coefficients ordered from the
/// leading term down to the constant term.
///
/// Uses the Aberth–Ehrlich simultaneous iteration, followed by a Newton polish.
/// Exact zero roots (vanishing trailing coefficients) are split off first.
pub fn poly_roots(coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
    let Some(lead) = coeffs.first() else {
        return Err(Error::DegeneratePolynomial("no coefficients".into()));
    };
    if *lead == Complex64::new(0.0, 0.0) {
        return Err(Error::DegeneratePolynomial("leading coefficient is zero".into()));
    }
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::InputDomain("non-finite polynomial coefficient".into()));
    }

    let zero = Complex64::new(0.0, 0.0);
    let trailing_zeros = coeffs.iter().rev().take_while(|c| **c == zero).count();
    let monic: Vec<Complex64> = coeffs[..coeffs.len() - trailing_zeros]
        .iter()
        .map(|c| c / lead)
        .collect();
    let mut roots = vec![zero; trailing_zeros];
    let degree = monic.len() - 1;
    match degree {
        0 => return Ok(roots),
        1 => {
            roots.push(-monic[1]);
            return Ok(roots);
        }
        _ => {}
    }

    let mut z = initial_guesses(&monic);
    for _ in 0..MAX_ITERATIONS {
        let mut max_step: f64 = 0.0;
        for k in 0..degree {
            let (p, dp) = poly_eval(&monic, z[k]);
            if p == zero {
                continue;
            }
            let ratio = p / dp;
            let repulsion: Complex64 = (0..degree)
                .filter(|&j| j != k)
                .map(|j| (z[k] - z[j]).inv())
                .sum();
            let denom = Complex64::new(1.0, 0.0) - ratio * repulsion;
            let step = if dp == zero || !ratio.is_finite() || denom == zero {
                // Nudge off a critical point.
                Complex64::new(1e-3, 1e-3) * (1.0 + z[k].norm())
            } else {
                ratio / denom
            };
            z[k] -= step;
            max_step = max_step.max(step.norm() / (1.0 + z[k].norm()));
        }
        if max_step <= 2.0 * f64::EPSILON {
            break;
        }
    }

    for zk in &mut z {
        for _ in 0..3 {
            let (p, dp) = poly_eval(&monic, *zk);
            if dp == zero {
                break;
            }
            let cand = *zk - p / dp;
            if poly_eval(&monic, cand).0.norm() < p.norm() {
                *zk = cand;
            } else {
                break;
            }
        }
    }

    if z.iter().any(|r| !r.is_finite()) {
        return Err(Error::NumericalFailure("root iteration produced non-finite values".into()));
    }
    roots.extend(z);
    Ok(roots)
}

/// Roots of a polynomial with real coefficients.
pub fn poly_roots_real(coeffs: &[f64]) -> Result<Vec<Complex64>> {
    let c: Vec<Complex64> = coeffs.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    poly_roots(&c)
}

fn initial_guesses(monic: &[Complex64]) -> Vec<Complex64> {
    let n = monic.len() - 1;
    let center = -monic[1] / n as f64;
    // Fujiwara-type bound on root moduli.
    let radius = (1..=n)
        .map(|k| monic[k].norm().powf(1.0 / k as f64))
        .fold(0.0f64, f64::max)
        .max(1e-3)
        * 2.0;
    (0..n)
        .map(|k| {
            let angle = std::f64::consts::TAU * k as f64 / n as f64 + 0.4;
            center + Complex64::from_polar(radius, angle)
        })
        .collect()
}
