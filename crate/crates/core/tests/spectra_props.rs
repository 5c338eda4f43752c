use centripetal::games::{BilinearGame, JointPoint};
use centripetal::numkit::{eig_dense, multiset_distance, spectral_radius, svd, Matrix};
use centripetal::optimizers::{run_trajectory, Method, StepConfig};
use centripetal::spectra::{
    aca_spectrum, build_f1, build_f2, build_f2_reduced, empirical_rate, omd_rate_bound, region_check_prop32,
    region_check_prop33, sca_spectrum, SpectrumKind,
};
use centripetal::Error;
use proptest::prelude::*;

fn square(max: usize) -> impl Strategy<Value = Matrix> {
    (1..=max).prop_flat_map(|n| {
        prop::collection::vec(-1.5..1.5f64, n * n).prop_map(move |v| Matrix::from_row_major(n, n, v).unwrap())
    })
}

fn any_shape(max: usize) -> impl Strategy<Value = Matrix> {
    (1..=max, 1..=max).prop_flat_map(|(r, c)| {
        prop::collection::vec(-1.5..1.5f64, r * c).prop_map(move |v| Matrix::from_row_major(r, c, v).unwrap())
    })
}

fn steps() -> impl Strategy<Value = StepConfig> {
    (0.01..0.4f64, 0.01..0.4f64, 0.0..0.4f64, 0.0..0.4f64).prop_map(|(a1, a2, b1, b2)| StepConfig {
        alpha1: a1,
        alpha2: a2,
        beta1: b1,
        beta2: b2,
        ..StepConfig::new(Method::GradSCA, a1, b1)
    })
}

/// Rank-`r` matrix `Σ u_k v_kᵀ` of shape `rows×cols`.
fn low_rank(rows: usize, cols: usize, factors: &[(Vec<f64>, Vec<f64>)]) -> Matrix {
    let mut a = Matrix::zeros(rows, cols);
    for (u, v) in factors {
        for i in 0..rows {
            for j in 0..cols {
                a[(i, j)] += u[i] * v[j];
            }
        }
    }
    a
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn sca_quartics_match_dense_f1(a in any_shape(4), cfg in steps()) {
        let r = sca_spectrum(&a, &cfg).unwrap();
        prop_assert!(r.cross_check.unwrap() < 1e-7, "cross check {:?}", r.cross_check);
        let dense = spectral_radius(&eig_dense(&build_f1(&a, &cfg)).unwrap()).unwrap();
        prop_assert!((dense - r.dense_rho.unwrap()).abs() < 1e-12);
        prop_assert!(r.rho <= dense + 1e-9);
    }

    #[test]
    fn aca_blocks_match_dense_f2(a in any_shape(4), cfg in steps()) {
        let cfg = StepConfig { method: Method::GradACA, ..cfg };
        let r = aca_spectrum(&a, &cfg).unwrap();
        prop_assert_eq!(r.method, SpectrumKind::Aca);
        prop_assert!(r.cross_check.unwrap() < 1e-7);
    }

    #[test]
    fn aca_special_case_matches_both_matrices(a in any_shape(4), alpha in 0.01..0.4f64) {
        let cfg = StepConfig::aca_special(alpha);
        let r = aca_spectrum(&a, &cfg).unwrap();
        prop_assert_eq!(r.method, SpectrumKind::AcaReduced);
        prop_assert!(r.cross_check.unwrap() < 1e-7);
        // Nonzero eigenvalues of F₂ are those of the one-step matrix.
        let reduced = eig_dense(&build_f2_reduced(&a, alpha)).unwrap();
        let full = eig_dense(&build_f2(&a, &cfg)).unwrap();
        let mut from_full: Vec<_> = full.iter().copied().filter(|z| z.norm() > 1e-6).collect();
        let mut from_reduced: Vec<_> = reduced.iter().copied().filter(|z| z.norm() > 1e-6).collect();
        from_full.sort_by(|x, y| x.norm().total_cmp(&y.norm()));
        from_reduced.sort_by(|x, y| x.norm().total_cmp(&y.norm()));
        prop_assert_eq!(from_full.len(), from_reduced.len());
        prop_assert!(multiset_distance(&from_full, &from_reduced).unwrap() < 1e-6);
    }

    #[test]
    fn radius_depends_on_step_times_sigma(a in square(3), cfg in steps(), c in 0.5..3.0f64) {
        let scaled = StepConfig {
            alpha1: cfg.alpha1 / c,
            alpha2: cfg.alpha2 / c,
            beta1: cfg.beta1 / c,
            beta2: cfg.beta2 / c,
            ..cfg
        };
        let r1 = sca_spectrum(&a, &cfg).unwrap().rho;
        let r2 = sca_spectrum(&a.scaled(c), &scaled).unwrap().rho;
        prop_assert!((r1 - r2).abs() < 1e-8 * (1.0 + r1));
    }

    #[test]
    fn region_implies_convergence(a in square(4), frac in 0.05..1.0f64, split in 0.0..1.0f64) {
        let s = svd(&a).unwrap();
        prop_assume!(s.rank == a.rows() && s.singular_values[s.rank - 1] > 0.05);
        let (s1, sr) = (s.singular_values[0], s.singular_values[s.rank - 1]);
        // Pick α+β inside (0, 1/σ₁] and |α−β| inside the allowed band.
        let sum = frac / s1;
        let gap = split * sr * sum * sum / 10.0;
        let (alpha, beta) = ((sum + gap) / 2.0, (sum - gap) / 2.0);
        prop_assert!(region_check_prop32(&a, alpha, beta).unwrap());
        let r = sca_spectrum(&a, &StepConfig::new(Method::GradSCA, alpha, beta)).unwrap();
        prop_assert!(r.rho < 1.0, "rho {}", r.rho);
    }

    #[test]
    fn omd_bound_dominates_for_small_steps(a in any_shape(4), frac in 0.01..1.0f64) {
        let s = svd(&a).unwrap();
        prop_assume!(s.rank > 0);
        let alpha = frac / (2.0 * s.singular_values[0]);
        let r = sca_spectrum(&a, &StepConfig::omd(alpha)).unwrap();
        let bound = omd_rate_bound(&a, alpha).unwrap();
        prop_assert!(r.rho <= bound + 1e-9, "rho {} bound {}", r.rho, bound);
    }
}

#[test]
fn rank_deficient_report_uses_leading_block() {
    let a = low_rank(3, 2, &[(vec![1.0, 2.0, -1.0], vec![0.5, 1.0])]);
    let cfg = StepConfig::omd(0.05);
    let r = sca_spectrum(&a, &cfg).unwrap();
    assert_eq!(r.rank, 1);
    assert!(r.reduced);
    assert_eq!(r.singular_values.len(), 2);
    assert_eq!(r.eigenvalues.len(), 4);
    assert!(r.rho < 1.0);
    // The full matrix keeps the frozen unit modes.
    assert!((r.dense_rho.unwrap() - 1.0).abs() < 1e-9);
    assert!(region_check_prop33(&a, 0.05, 0.05).unwrap());
    assert!(matches!(region_check_prop32(&a, 0.05, 0.05), Err(Error::Precondition(_))));
}

#[test]
fn rank_two_in_four_by_three() {
    let a = low_rank(
        4,
        3,
        &[
            (vec![1.0, 0.0, 1.0, 0.5], vec![1.0, -1.0, 0.0]),
            (vec![0.0, 1.0, -1.0, 0.2], vec![0.3, 0.3, 1.0]),
        ],
    );
    let cfg = StepConfig::new(Method::GradACA, 0.05, 0.1);
    let r = aca_spectrum(&a, &cfg).unwrap();
    assert_eq!(r.rank, 2);
    assert!(r.reduced);
    assert_eq!(r.eigenvalues.len(), 8);
    assert!(r.cross_check.unwrap() < 1e-7);
    assert!(r.rho < 1.0);
}

#[test]
fn zero_matrix_spectrum_is_all_frozen() {
    let a = Matrix::zeros(2, 3);
    let r = sca_spectrum(&a, &StepConfig::new(Method::GradSCA, 0.1, 0.1)).unwrap();
    assert_eq!(r.rank, 0);
    assert!(!r.reduced);
    assert!((r.rho - 1.0).abs() < 1e-12);
    assert!(r.bound.is_none());
}

#[test]
fn empirical_rate_tracks_radius_squared() {
    let a = Matrix::from_rows(&[[1.0, 0.3], [0.0, 0.7]]).unwrap();
    let g = BilinearGame::centered(a.clone());
    let start = JointPoint::new(vec![1.0, -0.5], vec![0.3, 0.8]);
    for cfg in [
        StepConfig::new(Method::GradSCA, 0.1, 0.3),
        StepConfig::new(Method::GradACA, 0.1, 0.3),
        StepConfig::aca_special(0.2),
        StepConfig::omd(0.2),
    ] {
        let rho = match cfg.method {
            Method::GradACA => aca_spectrum(&a, &cfg).unwrap().rho,
            _ => sca_spectrum(&a, &cfg).unwrap().rho,
        };
        let traj = run_trajectory(&g, &cfg, &start, 3000, &JointPoint::zeros(2, 2)).unwrap();
        let rate = empirical_rate(&traj, 600).unwrap();
        assert!((rate - rho * rho).abs() < 0.01, "{:?}: rate {rate} vs rho² {}", cfg.method, rho * rho);
    }
}
