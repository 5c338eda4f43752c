use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

fn preset(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../presets").join(name)
}

struct Run {
    code: i32,
    stderr: String,
    dir: tempfile::TempDir,
}

impl Run {
    fn manifest(&self) -> Value {
        self.json("manifest.json")
    }

    fn json(&self, name: &str) -> Value {
        serde_json::from_str(&self.read(name)).unwrap()
    }

    fn read(&self, name: &str) -> String {
        std::fs::read_to_string(self.dir.path().join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
    }
}

fn run(args: &[&str]) -> Run {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_centripetal"))
        .args(args)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    Run {
        code: out.status.code().unwrap(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
        dir,
    }
}

fn write_config(dir: &Path, name: &str, value: &Value) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(value).unwrap()).unwrap();
    p
}

#[test]
fn trajectory_presets_exit_codes() {
    for (name, code) in [("fig1_simgd.json", 2), ("fig1_altgd.json", 0), ("fig1_sca.json", 0), ("fig1_aca.json", 0)] {
        let r = run(&["bilinear-run", preset(name).to_str().unwrap()]);
        assert_eq!(r.code, code, "{name}: {}", r.stderr);
        let m = r.manifest();
        assert_eq!(m["command"], "bilinear-run");
        assert_eq!(m["outcome"]["exit_code"], code);
        assert_eq!(m["outcome"]["status"], if code == 2 { "diverged" } else { "success" });
        let csv = r.read("trajectory.csv");
        // Header plus start plus 500 steps.
        assert_eq!(csv.lines().count(), 502, "{name}");
        assert!(csv.starts_with("step,theta_0,phi_0,delta,grad_norm,step_time_s\r\n"));
        assert!(m["outputs"].as_array().unwrap().iter().any(|o| o == "spectral_report.json"));
    }
}

#[test]
fn trajectory_files_are_reproducible() {
    let strip_time = |s: String| -> Vec<String> {
        s.lines().map(|l| l.rsplit_once(',').unwrap().0.to_string()).collect()
    };
    let a = run(&["bilinear-run", preset("fig1_aca.json").to_str().unwrap()]);
    let b = run(&["bilinear-run", preset("fig1_aca.json").to_str().unwrap()]);
    assert_eq!(strip_time(a.read("trajectory.csv")), strip_time(b.read("trajectory.csv")));
    assert_eq!(a.read("spectral_report.json"), b.read("spectral_report.json"));
}

#[test]
fn overrides_and_seed_are_recorded() {
    let r = run(&[
        "bilinear-run",
        preset("fig1_sca.json").to_str().unwrap(),
        "--set",
        "steps=20",
        "--set",
        "optimizer.beta1=0.2",
        "--seed",
        "99",
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let m = r.manifest();
    assert_eq!(m["seed"], 99);
    assert_eq!(m["config"]["steps"], 20);
    assert_eq!(m["config"]["optimizer"]["beta1"], 0.2);
    assert_eq!(m["config"]["divergence_ratio"], 100.0);
    assert_eq!(r.read("trajectory.csv").lines().count(), 22);
}

#[test]
fn bad_inputs_exit_one_with_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, "{\n  \"steps\": 3,\n  oops\n}").unwrap();
    let r = run(&["bilinear-run", broken.to_str().unwrap()]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("line 3"), "{}", r.stderr);
    assert_eq!(r.manifest()["outcome"]["status"], "error");

    let r = run(&["bilinear-run", preset("fig1_sca.json").to_str().unwrap(), "--set", "optimizer.alpha1=\"fast\""]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("optimizer.alpha1"), "{}", r.stderr);

    let r = run(&["bilinear-run", preset("fig1_sca.json").to_str().unwrap(), "--set", "optimizer.alpha1=-1"]);
    assert_eq!(r.code, 1);

    let r = run(&["bilinear-run", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(r.code, 1);

    let cfg = write_config(dir.path(), "unknown.json", &serde_json::json!({
        "game": {"A": [[1.0]]},
        "optimizer": {"method": "SimGD", "alpha1": 0.1, "alpha2": 0.1},
        "start": {"theta": [1.0], "phi": [1.0]},
        "stepz": 3
    }));
    let r = run(&["bilinear-run", cfg.to_str().unwrap()]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("stepz"), "{}", r.stderr);
}

#[test]
fn game_file_is_resolved_next_to_the_config() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("game.json"), r#"{"A": [[2.0, 0.0], [0.0, 1.0]], "b": [1.0, 0.0]}"#).unwrap();
    let cfg = write_config(dir.path(), "run.json", &serde_json::json!({
        "game_file": "game.json",
        "optimizer": {"method": "GradACA", "alpha1": 0.1, "alpha2": 0.1, "beta1": 0.2, "beta2": 0.2},
        "steps": 800,
        "start": {"theta": [1.0, 1.0], "phi": [1.0, 1.0]}
    }));
    let r = run(&["bilinear-run", cfg.to_str().unwrap()]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let s = &r.manifest()["outcome"]["summary"];
    assert_eq!(s["stationary_point_exists"], true);
    // φ* = −A⁻¹b = (−0.5, 0)
    assert_eq!(s["reference"]["phi"][0], -0.5);
    assert!(s["final_delta"].as_f64().unwrap() < 1e-8);
}

#[test]
fn sweep_smoke_has_four_rows() {
    let r = run(&["sweep", preset("sweep_smoke.json").to_str().unwrap(), "--jobs", "2"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let csv = r.read("sweep.csv");
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "alpha,beta,log10_final_dist,rho,diverged");
    assert_eq!(lines.len(), 5);
    let again = run(&["sweep", preset("sweep_smoke.json").to_str().unwrap()]);
    assert_eq!(csv, again.read("sweep.csv"));
}

#[test]
fn spectra_preset_reports_each_entry() {
    let r = run(&["spectra", preset("spectra.json").to_str().unwrap()]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let out = r.json("spectra.json");
    let by_name = |n: &str| out.as_array().unwrap().iter().find(|e| e["name"] == n).unwrap()["report"].clone();
    let omd = by_name("scalar_omd");
    assert!((omd["rho"].as_f64().unwrap() - 0.994936).abs() < 1e-6);
    assert!((omd["bound"].as_f64().unwrap() - 0.998746).abs() < 1e-6);
    assert_eq!(omd["region_ok"], true);
    assert_eq!(by_name("scalar_sca_outside_region")["region_ok"], false);
    let rank_one = by_name("rank_one_sca");
    assert_eq!(rank_one["rank"], 1);
    assert_eq!(rank_one["reduced"], true);
    assert_eq!(rank_one["singular_values"].as_array().unwrap().len(), 2);
}

#[test]
fn spectra_rejects_rmsprop_entries() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.json", &serde_json::json!({"entries": [{
        "name": "x", "A": [[1.0]],
        "optimizer": {"method": "SimGD", "alpha1": 0.1, "alpha2": 0.1,
                      "base": {"kind": "RmsProp", "decay": 0.9, "epsilon": 1e-10}}
    }]}));
    assert_eq!(run(&["spectra", cfg.to_str().unwrap()]).code, 1);
}

fn short_gan(extra: &[&str]) -> Vec<String> {
    let mut args: Vec<String> = vec![
        "gan-train".into(),
        preset("gan_aca_desk.json").to_str().unwrap().into(),
    ];
    for s in ["iterations=20", "checkpoint_steps=[10,20]", "batch_size=32", "eval_samples=160", "generator.hidden_widths=[16,16]", "discriminator.hidden_widths=[16,16]"] {
        args.push("--set".into());
        args.push(s.into());
    }
    args.extend(extra.iter().map(|s| s.to_string()));
    args
}

#[test]
fn gan_train_writes_checkpoints_and_metrics() {
    let args = short_gan(&[]);
    let argv: Vec<&str> = args.iter().map(String::as_str).collect();
    let a = run(&argv);
    assert_eq!(a.code, 0, "{}", a.stderr);
    for f in ["samples_rmsprop_aca_10.csv", "samples_rmsprop_aca_20.csv", "generator_rmsprop_aca.ckpt", "discriminator_rmsprop_aca.ckpt"] {
        assert!(a.dir.path().join(f).exists(), "{f}");
    }
    assert_eq!(a.read("samples_rmsprop_aca_20.csv").lines().count(), 161);
    let b = run(&argv);
    let strip = |mut v: Value| {
        for r in v.as_array_mut().unwrap() {
            r.as_object_mut().unwrap().remove("timing");
        }
        v
    };
    assert_eq!(strip(a.json("metrics.json")), strip(b.json("metrics.json")));
    assert_eq!(a.read("samples_rmsprop_aca_20.csv"), b.read("samples_rmsprop_aca_20.csv"));
}

#[test]
fn gan_grid_labels_each_rate() {
    let args = short_gan(&["--set", "alpha_grid=[1e-4,1e-3]", "--jobs", "2"]);
    let argv: Vec<&str> = args.iter().map(String::as_str).collect();
    let r = run(&argv);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let m = r.json("metrics.json");
    let labels: Vec<&str> = m.as_array().unwrap().iter().map(|v| v["label"].as_str().unwrap()).collect();
    assert_eq!(labels, ["rmsprop_aca_lr00", "rmsprop_aca_lr01"]);
}

#[test]
fn conopt_preset_is_refused() {
    let r = run(&["gan-train", preset("gan_conopt.json").to_str().unwrap()]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("Jacobian"), "{}", r.stderr);
}

#[test]
fn bench_tables() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg: Value = serde_json::from_str(&std::fs::read_to_string(preset("bench_desk.json")).unwrap()).unwrap();
    cfg["iterations"] = 5.into();
    cfg["batch_size"] = 16.into();
    let three = write_config(dir.path(), "three.json", &cfg);
    let r = run(&["bench", three.to_str().unwrap()]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let csv = r.read("timing.csv");
    assert_eq!(csv.lines().next().unwrap(), "label,mean_s,std_s,iterations");
    assert_eq!(csv.lines().count(), 4);

    cfg["methods"].as_array_mut().unwrap().truncate(1);
    let one = write_config(dir.path(), "one.json", &cfg);
    assert_eq!(run(&["bench", one.to_str().unwrap()]).read("timing.csv").lines().count(), 2);

    cfg["methods"] = Value::Array(vec![]);
    let none = write_config(dir.path(), "none.json", &cfg);
    assert_eq!(run(&["bench", none.to_str().unwrap()]).code, 1);
}

#[test]
fn output_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("from_env");
    let status = Command::new(env!("CARGO_BIN_EXE_centripetal"))
        .args(["sweep", preset("sweep_smoke.json").to_str().unwrap()])
        .env(centripetal_cli::OUTPUT_DIR_ENV, &target)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(target.join("sweep.csv").exists());
    assert!(target.join("manifest.json").exists());
}
