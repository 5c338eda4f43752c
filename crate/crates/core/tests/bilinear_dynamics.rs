use centripetal::games::{BilinearGame, Game, JointPoint};
use centripetal::numkit::{svd, Matrix};
use centripetal::optimizers::{
    composed_step, run_trajectory, BaseTransform, Method, OptimizerState, StepConfig,
};
use centripetal::Error;
use proptest::prelude::*;

fn game_strategy() -> impl Strategy<Value = (BilinearGame, JointPoint)> {
    (1..=4usize, 1..=4usize).prop_flat_map(|(d, p)| {
        (
            prop::collection::vec(-2.0..2.0f64, d * p),
            prop::collection::vec(-1.0..1.0f64, d),
            prop::collection::vec(-1.0..1.0f64, p),
            prop::collection::vec(-2.0..2.0f64, d),
            prop::collection::vec(-2.0..2.0f64, p),
        )
            .prop_map(move |(a, b, c, t, f)| {
                let a = Matrix::from_row_major(d, p, a).unwrap();
                (BilinearGame::new(a, b, c).unwrap(), JointPoint::new(t, f))
            })
    })
}

fn field(g: &BilinearGame, x: &JointPoint) -> Vec<f64> {
    let (gt, gp) = g.grads(x).unwrap();
    gt.into_iter().chain(gp.into_iter().map(|v| -v)).collect()
}

fn perturbed(x: &JointPoint, k: usize, h: f64) -> JointPoint {
    let mut y = x.clone();
    let d = y.theta.len();
    if k < d {
        y.theta[k] += h;
    } else {
        y.phi[k - d] += h;
    }
    y
}

fn run(game: &BilinearGame, cfg: &StepConfig, start: &JointPoint, steps: usize) -> Vec<OptimizerState> {
    let mut s = OptimizerState::new(start.clone());
    (0..steps)
        .map(|_| {
            composed_step(game, &mut s, cfg).unwrap();
            s.clone()
        })
        .collect()
}

fn max_gap(a: &JointPoint, b: &JointPoint) -> f64 {
    a.theta
        .iter()
        .zip(&b.theta)
        .chain(a.phi.iter().zip(&b.phi))
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn jacobian_products_match_differences((g, x) in game_strategy()) {
        let n = x.theta.len() + x.phi.len();
        let h = 1e-6;
        // Jᵀξ is the gradient of ½‖ξ‖².
        let half_sq = |y: &JointPoint| 0.5 * field(&g, y).iter().map(|v| v * v).sum::<f64>();
        let jtx = g.jacobian_transpose_vf(&x).unwrap();
        let jx = g.jacobian_vf(&x).unwrap();
        let xi = field(&g, &x);
        for k in 0..n {
            let fd = (half_sq(&perturbed(&x, k, h)) - half_sq(&perturbed(&x, k, -h))) / (2.0 * h);
            prop_assert!((fd - jtx[k]).abs() < 1e-6 * (1.0 + jtx[k].abs()), "Jᵀξ[{}]: {} vs {}", k, jtx[k], fd);
        }
        // Jξ is the directional derivative of ξ along ξ.
        let plus = x.theta.iter().chain(&x.phi).zip(&xi).map(|(a, v)| a + h * v).collect::<Vec<_>>();
        let minus = x.theta.iter().chain(&x.phi).zip(&xi).map(|(a, v)| a - h * v).collect::<Vec<_>>();
        let d = x.theta.len();
        let xp = JointPoint::new(plus[..d].to_vec(), plus[d..].to_vec());
        let xm = JointPoint::new(minus[..d].to_vec(), minus[d..].to_vec());
        let (fp, fm) = (field(&g, &xp), field(&g, &xm));
        for k in 0..n {
            let fd = (fp[k] - fm[k]) / (2.0 * h);
            prop_assert!((fd - jx[k]).abs() < 1e-6 * (1.0 + jx[k].abs()));
        }
    }

    #[test]
    fn null_projection_is_orthogonal_projector((g, x) in game_strategy()) {
        let (pt, pf) = g.null_projections(&x).unwrap();
        let again = g.null_projections(&JointPoint::new(pt.clone(), pf.clone())).unwrap();
        for (a, b) in pt.iter().zip(&again.0).chain(pf.iter().zip(&again.1)) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        // P_N(θ) ∈ null(Aᵀ), P_M(φ) ∈ null(A).
        let at_theta = g.a().tr_matvec(&pt).unwrap();
        let a_phi = g.a().matvec(&pf).unwrap();
        let scale = 1.0 + g.a().frobenius_norm() * 4.0;
        prop_assert!(at_theta.iter().chain(&a_phi).all(|v| v.abs() < 1e-10 * scale));
        // The removed part is orthogonal to the kept part.
        let r: f64 = pt.iter().zip(&x.theta).map(|(p, t)| p * (t - p)).sum();
        prop_assert!(r.abs() < 1e-10 * scale);
    }

    #[test]
    fn offsets_in_range_have_a_stationary_point(
        (g, x) in game_strategy(),
    ) {
        // b = −Aφ₀ and c = −Aᵀθ₀ always lie in range.
        let b: Vec<f64> = g.a().matvec(&x.phi).unwrap().into_iter().map(|v| -v).collect();
        let c: Vec<f64> = g.a().tr_matvec(&x.theta).unwrap().into_iter().map(|v| -v).collect();
        let shifted = BilinearGame::new(g.a().clone(), b, c).unwrap();
        let st = shifted.stationarity().unwrap();
        prop_assert!(st.exists);
        let (rt, rp) = shifted.grads(&st.point.unwrap()).unwrap();
        prop_assert!(rt.iter().chain(&rp).all(|v| v.abs() < 1e-9));
        prop_assert!(shifted.shift_to_origin().unwrap().is_centered());
    }

    #[test]
    fn reductions_hold_on_random_games(
        (g, x) in game_strategy(),
        alpha in 0.01..0.2f64,
    ) {
        let g = BilinearGame::centered(g.a().clone());
        let steps = 100;
        let pairs = [
            (StepConfig::new(Method::GradSCA, alpha, 0.0), StepConfig::new(Method::SimGD, alpha, 0.0)),
            (StepConfig::new(Method::GradACA, alpha, 0.0), StepConfig::new(Method::AltGD, alpha, 0.0)),
            (StepConfig::new(Method::GradSCA, alpha, alpha), StepConfig::omd(alpha)),
        ];
        for (lhs, rhs) in pairs {
            let a = run(&g, &lhs, &x, steps);
            let b = run(&g, &rhs, &x, steps);
            for (sa, sb) in a.iter().zip(&b) {
                let scale = 1.0 + sa.current.max_abs();
                prop_assert!(max_gap(&sa.current, &sb.current) <= 1e-12 * scale, "{:?} vs {:?}", lhs.method, rhs.method);
            }
        }
    }

    #[test]
    fn extrapolation_half_points_follow_omd(
        (g, x) in game_strategy(),
        alpha in 0.01..0.2f64,
    ) {
        let pe = run(&g, &StepConfig::new(Method::PastExtrapolation, alpha, 0.0), &x, 100);
        let omd = run(&g, &StepConfig::omd(alpha), &x, 100);
        for (sp, so) in pe.iter().zip(&omd) {
            let half = sp.half_point.as_ref().unwrap();
            prop_assert!(max_gap(half, &so.current) <= 1e-12 * (1.0 + half.max_abs()));
        }
    }
}

#[test]
fn runs_are_deterministic() {
    let a = Matrix::from_rows(&[[1.0, 0.5], [-0.3, 2.0]]).unwrap();
    let g = BilinearGame::centered(a);
    let start = JointPoint::new(vec![1.0, -1.0], vec![0.5, 0.25]);
    let cfg = StepConfig::new(Method::GradACA, 0.05, 0.1)
        .with_base(BaseTransform::RmsProp { decay: 0.9, epsilon: 1e-8 });
    let r1 = run_trajectory(&g, &cfg, &start, 200, &JointPoint::zeros(2, 2)).unwrap();
    let r2 = run_trajectory(&g, &cfg, &start, 200, &JointPoint::zeros(2, 2)).unwrap();
    assert_eq!(r1.points, r2.points);
    assert_eq!(r1.deltas, r2.deltas);
}

#[test]
fn null_space_component_is_frozen() {
    // Rank one: θ ∝ (1, 2) is hit, (2, −1) is not.
    let a = Matrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]]).unwrap();
    let g = BilinearGame::centered(a.clone());
    let s = svd(&a).unwrap();
    let start = JointPoint::new(vec![0.3, -0.7], vec![1.1, 0.2]);
    let (n0t, n0f) = g.null_projections(&start).unwrap();
    for cfg in [
        StepConfig::new(Method::GradSCA, 0.02, 0.06),
        StepConfig::new(Method::GradACA, 0.02, 0.06),
        StepConfig::omd(0.02),
        StepConfig::new(Method::SimGD, 0.02, 0.0),
        StepConfig::new(Method::AltGD, 0.02, 0.0),
    ] {
        let method = cfg.method;
        let traj = run_trajectory(&g, &cfg, &start, 300, &JointPoint::zeros(2, 2)).unwrap();
        for x in &traj.points {
            let (nt, nf) = centripetal::games::null_projections_with(&s, x);
            let gap = nt.iter().zip(&n0t).chain(nf.iter().zip(&n0f)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(gap <= 1e-10, "{method}: {gap}");
        }
    }
}

#[test]
fn mismatched_point_is_rejected() {
    let g = BilinearGame::scalar();
    let err = run_trajectory(
        &g,
        &StepConfig::new(Method::SimGD, 0.1, 0.0),
        &JointPoint::zeros(2, 1),
        10,
        &JointPoint::zeros(1, 1),
    )
    .unwrap_err();
    assert!(matches!(err, Error::Dimension(_)));
}

#[test]
fn unreachable_offsets_have_no_stationary_point() {
    let a = Matrix::from_rows(&[[1.0, 0.0], [0.0, 0.0]]).unwrap();
    let g = BilinearGame::new(a, vec![0.0, 1.0], vec![0.0, 0.0]).unwrap();
    assert!(!g.stationarity().unwrap().exists);
    assert!(matches!(g.shift_to_origin(), Err(Error::UnsupportedGame(_))));
}
