use centripetal::autograd::{read_checkpoint, write_checkpoint, ParamVector, Tensor};
use centripetal::ganlab::{evaluate, sample_real, timing_compare, train, MixtureSpec, TrainConfig};
use centripetal::optimizers::{Method, StepConfig};
use centripetal::Error;

fn small(method: Method, beta: f64, seed: u64) -> TrainConfig {
    let opt = StepConfig::new(method, 5e-4, beta).with_rmsprop(0.9, 1e-10);
    TrainConfig {
        batch_size: 32,
        eval_samples: 400,
        checkpoint_steps: vec![10, 30],
        ..TrainConfig::new(opt, 2, 16, 30, seed)
    }
}

#[test]
fn mode_counts_are_binomial() {
    let spec = MixtureSpec::default();
    let n = 8000;
    let samples = sample_real(&spec, n, 42).unwrap();
    let m = evaluate(&samples, &spec, 1).unwrap();
    // Each mode is hit with probability 1/8; all samples lie within 3σ
    // except for about 1.1% (two-dimensional Rayleigh tail).
    let p = 1.0 / 8.0;
    let mean = n as f64 * p;
    let sd = (n as f64 * p * (1.0 - p)).sqrt();
    for (k, c) in m.per_mode_counts.iter().enumerate() {
        let z = (*c as f64 - mean * 0.989) / sd;
        assert!(z.abs() < 5.0, "mode {k}: {c} samples, z = {z}");
    }
    let tail = (-4.5f64).exp();
    assert!((1.0 - m.high_quality_fraction - tail).abs() < 0.005, "{}", m.high_quality_fraction);
    assert_eq!(m.mode_coverage, 8);
}

#[test]
fn samples_are_seeded() {
    let spec = MixtureSpec::default();
    let a = sample_real(&spec, 100, 5).unwrap();
    let b = sample_real(&spec, 100, 5).unwrap();
    let c = sample_real(&spec, 100, 6).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn far_samples_cover_nothing() {
    let spec = MixtureSpec::default();
    let far = Tensor::new(3, 2, vec![10.0, 10.0, -9.0, 0.0, 0.0, 0.0]).unwrap();
    let m = evaluate(&far, &spec, 1).unwrap();
    assert_eq!(m.mode_coverage, 0);
    assert_eq!(m.high_quality_fraction, 0.0);
}

#[test]
fn aca_with_zero_beta_is_alternating_rmsprop() {
    let aca = train(&small(Method::GradACA, 0.0, 3)).unwrap();
    let alt = train(&small(Method::AltGD, 0.0, 3)).unwrap();
    let (pa, pb) = (aca.final_point.unwrap(), alt.final_point.unwrap());
    let gap = pa
        .theta
        .iter()
        .zip(&pb.theta)
        .chain(pa.phi.iter().zip(&pb.phi))
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    assert!(gap <= 1e-12, "{gap}");
    for (la, lb) in aca.losses.iter().zip(&alt.losses) {
        assert!((la.1 - lb.1).abs() <= 1e-12);
    }
}

#[test]
fn sca_with_zero_beta_is_simultaneous_rmsprop() {
    let sca = train(&small(Method::GradSCA, 0.0, 4)).unwrap();
    let sim = train(&small(Method::SimGD, 0.0, 4)).unwrap();
    assert_eq!(sca.final_point, sim.final_point);
}

#[test]
fn training_is_reproducible() {
    let cfg = small(Method::GradACA, 0.25, 9);
    let a = train(&cfg).unwrap();
    let b = train(&cfg).unwrap();
    assert_eq!(a.metrics_json(), b.metrics_json());
    assert_eq!(a.final_point, b.final_point);
    assert_eq!(a.checkpoints.len(), 2);
    assert_eq!(a.checkpoints[0].samples.len(), 400);
    assert!(a.completed());
    assert!(a.losses.iter().all(|l| l.1.is_finite()));
    assert_eq!(a.losses.len(), 30);
}

#[test]
fn checkpoint_files_round_trip_trained_parameters() {
    let cfg = small(Method::OMD, 0.0, 1);
    let cfg = TrainConfig { optimizer: StepConfig::omd(5e-4).with_rmsprop(0.9, 1e-10), ..cfg };
    let r = train(&cfg).unwrap();
    let theta = r.final_point.unwrap().theta;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.ckpt");
    write_checkpoint(&path, &ParamVector::new(cfg.generator.clone(), theta.clone()).unwrap(), 1, 30).unwrap();
    let (back, seed, step) = read_checkpoint(&path).unwrap();
    assert_eq!((seed, step), (1, 30));
    assert_eq!(back.values(), &theta[..]);
}

#[test]
fn jacobian_methods_are_refused() {
    for method in [Method::ConOpt, Method::SGA, Method::PastExtrapolation] {
        let cfg = TrainConfig { optimizer: StepConfig::new(method, 1e-4, 0.0), ..small(method, 0.0, 1) };
        assert!(matches!(train(&cfg), Err(Error::Capability(_))), "{method}");
    }
}

#[test]
fn timing_rejects_mismatched_workloads() {
    let a = small(Method::SimGD, 0.0, 1);
    let b = TrainConfig { batch_size: 64, ..small(Method::GradACA, 0.1, 1) };
    assert!(matches!(timing_compare(&[a, b], 5), Err(Error::Configuration(_))));
    assert!(matches!(timing_compare(&[], 5), Err(Error::Configuration(_))));
}
