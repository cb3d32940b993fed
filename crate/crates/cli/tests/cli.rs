use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn small_config(dir: &Path) -> PathBuf {
    let cfg = config_text();
    let path = dir.join("run.json");
    fs::write(&path, cfg).unwrap();
    path
}

// Two years of a compact scenario with quick model settings.
fn config_text() -> String {
    let lambda: Vec<String> = (0..24)
        .map(|h| format!("{}", if (8..20).contains(&h) { 0.3 } else { 0.05 }))
        .collect();
    format!(
        r#"{{
  "seed": 7,
  "input": {{
    "source": "synthetic",
    "scenario": {{
      "n_hours": 17520,
      "lambda": [{}],
      "covariates": [
        {{"name": "road", "kind": "diurnal_correlated", "coupling": 1.0, "noise": 0.1}},
        {{"name": "noise1", "kind": "iid_noise"}},
        {{"name": "air", "kind": "daily_constant"}}
      ]
    }}
  }},
  "hyperparams": {{
    "gbdt": {{"n_trees": 20, "max_depth": 3}},
    "mlp": {{"hidden": [8], "epochs": 3, "patience": 2}}
  }},
  "shap": {{"max_rows": 50}},
  "permutation": {{"repeats": 2}}
}}"#,
        lambda.join(", ")
    )
}

fn occurlens(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_occurlens"))
        .args(args)
        .env("OCCURLENS_THREADS", "1")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn stepwise_run_matches_single_shot() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let cfg = cfg.to_str().unwrap();
    let steps = tmp.path().join("steps");
    let steps = steps.to_str().unwrap();
    for step in ["synth", "ingest", "stats", "train", "eval", "explain", "report"] {
        let o = occurlens(&[step, "--config", cfg, "--out", steps]);
        assert_eq!(code(&o), 0, "{step}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let whole = tmp.path().join("whole");
    let o = occurlens(&["all", "--config", cfg, "--out", whole.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("auc="));

    for file in ["manifest.json", "S1/metrics.json", "S1/shap.csv", "S1/iv.csv"] {
        let a = fs::read(Path::new(steps).join("report").join(file)).unwrap();
        let b = fs::read(whole.join("report").join(file)).unwrap();
        assert!(a == b, "{file} differs between stepwise and single-shot runs");
    }
}

#[test]
fn seed_flag_changes_results() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let cfg = cfg.to_str().unwrap();
    let run = |seed: &str, name: &str| {
        let out = tmp.path().join(name);
        let o = occurlens(&["all", "--config", cfg, "--seed", seed, "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        fs::read(out.join("report/S1/metrics.json")).unwrap()
    };
    assert_ne!(run("1", "a"), run("2", "b"));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&occurlens(&[])), 1);
    assert_eq!(code(&occurlens(&["frobnicate"])), 1);
    assert_eq!(code(&occurlens(&["all", "--seed", "x"])), 1);
    assert_eq!(code(&occurlens(&["all"])), 1);
    assert_eq!(code(&occurlens(&["--help"])), 0);

    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    // No --out and no out_dir in the config.
    assert_eq!(code(&occurlens(&["all", "--config", cfg.to_str().unwrap()])), 1);
}

#[test]
fn data_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let out = out.to_str().unwrap();

    let bad = tmp.path().join("bad.json");
    fs::write(
        &bad,
        r#"{"seed": 1, "input": {"source": "synthetic"}, "colour": "red"}"#,
    )
    .unwrap();
    let o = occurlens(&["all", "--config", bad.to_str().unwrap(), "--out", out]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));

    let missing = tmp.path().join("nope.json");
    assert_eq!(
        code(&occurlens(&[
            "all",
            "--config",
            missing.to_str().unwrap(),
            "--out",
            out
        ])),
        2
    );

    // A later step without the earlier ones has nothing to read.
    let cfg = small_config(tmp.path());
    let o = occurlens(&["train", "--config", cfg.to_str().unwrap(), "--out", out]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("ingest"));

    let o = occurlens(&[
        "all",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out,
        "--station",
        "S9",
    ]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn bad_thread_count_is_usage_error() {
    let o = Command::new(env!("CARGO_BIN_EXE_occurlens"))
        .args(["all", "--config", "x.json", "--out", "y"])
        .env("OCCURLENS_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&o), 1);
}
