use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn prisens(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_prisens")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

const NORMAL: &str = r#"{
  "model": {"kind": "conjugate_normal", "data": {"fixture": "normal_seven"}},
  "sampler": {"draws": 2000},
  "alternatives": [[{"name": "mu", "family": "normal", "mean": 0, "precision": 0.0001}]],
  "seed": 5
}"#;

fn fitted(dir: &Path, config: &str) -> (PathBuf, PathBuf) {
    let cfg = write(dir, "run.json", config);
    let out = dir.join("out");
    let o = prisens(&["fit", "--config", cfg.to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    (cfg, out.join("draws.csv"))
}

#[test]
fn identical_prior_gives_zero_divergence() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, draws) = fitted(dir.path(), NORMAL);
    let o = prisens(&["sensitivity", "--config", cfg.to_str().unwrap(), "--draws", draws.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["h2"], 0.0);
    assert_eq!(v["kl"], 0.0);
    assert_eq!(v["log_mlr"], 0.0);
    assert_eq!(v["ess_ratio"], 2000.0);
    assert_eq!(v["n_draws"], 2000);
}

#[test]
fn fit_is_deterministic_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "run.json",
        r#"{"model": {"kind": "binomial_beta_p2", "data": {"fixture": "small_binomial"}},
            "sampler": {"draws": 300, "burn_in": 300}}"#,
    );
    let run = |out: &str, seed: &str| {
        let out = dir.path().join(out);
        let o = prisens(&["fit", "--config", cfg.to_str().unwrap(), "--seed", seed, "--out-dir", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0);
        fs::read(out.join("draws.csv")).unwrap()
    };
    let (a, b, c) = (run("a", "9"), run("b", "9"), run("c", "10"));
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn latent_estimator_without_latents_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, draws) = fitted(dir.path(), NORMAL);
    let o = prisens(&[
        "sensitivity",
        "--config",
        cfg.to_str().unwrap(),
        "--draws",
        draws.to_str().unwrap(),
        "--estimator",
        "t3",
    ]);
    assert_eq!(code(&o), 1);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("eta.") && err.contains("f."), "{err}");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    assert_eq!(code(&prisens(&["fit", "--config", missing.to_str().unwrap()])), 2);

    let bad = write(dir.path(), "bad.json", r#"{"model": {"kind": "conjugate_normal", "data": {"fixture": "normal_seven"}}, "sede": 1}"#);
    let o = prisens(&["fit", "--config", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("sede"));

    assert_eq!(code(&prisens(&["fit"])), 1);
    assert_eq!(code(&prisens(&["--help"])), 0);

    let (cfg, _) = fitted(dir.path(), NORMAL);
    let draws = write(dir.path(), "draws.csv", "mu\n0.5\nx\n");
    let o = prisens(&["sensitivity", "--config", cfg.to_str().unwrap(), "--draws", draws.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
}

#[test]
fn draws_outside_the_alternative_support_are_a_numeric_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "run.json",
        r#"{"model": {"kind": "binomial_beta_p2", "data": {"fixture": "small_binomial"}},
            "alternatives": [[{"name": "alpha", "family": "gamma", "shape": 2, "rate": 1},
                              {"name": "beta", "family": "gamma", "shape": 1, "rate": 1}]],
            "estimator": "t2"}"#,
    );
    let draws = write(dir.path(), "draws.csv", "alpha,beta\n-1.0,2.0\n-2.0,1.0\n");
    let o = prisens(&["sensitivity", "--config", cfg.to_str().unwrap(), "--draws", draws.to_str().unwrap()]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn sweep_writes_every_requested_format() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"{
      "model": {"kind": "conjugate_normal", "data": {"fixture": "normal_seven"}},
      "sampler": {"draws": 2000},
      "sweep": [{"blocks": ["mu"], "param": "normal_mean", "values": [-1, 0, 1]},
                {"blocks": ["mu"], "param": "normal_precision", "values": [0.1, 1]}],
      "mean_shift_column": "mu",
      "bootstrap": {"resamples": 20},
      "seed": 2
    }"#;
    let (cfg, draws) = fitted(dir.path(), config);
    let out = dir.path().join("sweep");
    let o = prisens(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--draws",
        draws.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
        "--format",
        "csv,json,svg",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["sweep_t1.csv", "sweep_t1.json", "sweep_t1_h2.svg", "sweep_t1_kl.svg", "mean_shift_mu.csv"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let csv = fs::read_to_string(out.join("sweep_t1.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "axis1,axis2,h2,h2_se,kl,kl_se,log_mlr,ess_ratio,warnings");
    assert_eq!(csv.lines().count(), 7);
}

#[test]
fn one_axis_sweep_cannot_render_svg() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"{
      "model": {"kind": "conjugate_normal", "data": {"fixture": "normal_seven"}},
      "sampler": {"draws": 500},
      "sweep": [{"blocks": ["mu"], "param": "normal_mean", "values": [-1, 0, 1]}]
    }"#;
    let (cfg, draws) = fitted(dir.path(), config);
    let args = ["sweep", "--config", cfg.to_str().unwrap(), "--draws", draws.to_str().unwrap()];
    let out = dir.path().join("o");
    let mut with_dir: Vec<&str> = args.to_vec();
    with_dir.extend(["--out-dir", out.to_str().unwrap()]);
    assert_eq!(code(&prisens(&with_dir)), 1);
    with_dir.extend(["--format", "csv"]);
    assert_eq!(code(&prisens(&with_dir)), 0);
}

#[test]
fn oracle_names_a_corrupted_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let src = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    for f in ["normal_seven.csv", "rat_tumor.csv", "small_binomial.csv"] {
        fs::copy(src.join(f), dir.path().join(f)).unwrap();
    }
    let rat = fs::read_to_string(dir.path().join("rat_tumor.csv")).unwrap();
    let corrupted = rat.replacen("\n0,20\n", "\n1,20\n", 1);
    assert_ne!(rat, corrupted);
    fs::write(dir.path().join("rat_tumor.csv"), corrupted).unwrap();

    let o = prisens(&["oracle", "--fixture-dir", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 4);
    let table = String::from_utf8_lossy(&o.stdout);
    let failed: Vec<&str> = table.lines().filter(|l| l.contains("FAIL")).collect();
    assert!(!failed.is_empty());
    assert!(failed.iter().all(|l| l.contains("rat_tumor.csv")), "{failed:?}");
}
