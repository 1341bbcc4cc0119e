use std::path::Path;
use std::process::{Command, Output};

fn upliftrank(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_upliftrank"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn simulate(dir: &Path) {
    let o = upliftrank(&["simulate", "--scenario", "balanced", "--n", "150", "--seed", "2", "--out", "sim.csv"], dir);
    assert!(o.status.success(), "{o:?}");
}

#[test]
fn simulate_then_eval_score_column() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path());
    let text = std::fs::read_to_string(dir.path().join("sim.csv")).unwrap();
    assert!(text.starts_with("t,y,score\n"));
    assert_eq!(text.lines().count(), 301);

    let o = upliftrank(
        &["eval", "--data", "sim.csv", "--score-col", "score", "--curves", "curves"],
        dir.path(),
    );
    assert!(o.status.success(), "{o:?}");
    let json: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(json.as_array().unwrap().len(), 2);
    assert!(dir.path().join("curves/uplift-joint-relative.csv").exists());
}

#[test]
fn train_and_baseline_models_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path());
    let o = upliftrank(
        &[
            "train", "--data", "sim.csv", "--feature-cols", "score", "--metric", "ndcg", "--relevance", "abs3",
            "--setting", "separate", "--cutoff", "0.3", "--trees", "15", "--lr", "0.1", "--seed", "1", "--out",
            "lm.json",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{o:?}");
    let trace = std::fs::read_to_string(dir.path().join("lm.json.trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 17);

    for kind in ["flipped", "two-model", "dummy"] {
        let out = format!("{kind}.json");
        let o = upliftrank(
            &["train-baseline", "--kind", kind, "--data", "sim.csv", "--trees", "10", "--lr", "0.1", "--out", &out],
            dir.path(),
        );
        assert!(o.status.success(), "{kind}: {o:?}");
    }
    let o = upliftrank(&["eval", "--data", "sim.csv", "--model", "lm.json", "--spec", "qini-joint-absolute"], dir.path());
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).contains("qini-joint-absolute"));
}

fn write_config(dir: &Path, models: &str) {
    let config = format!(
        r#"{{
            "data": {{"source": "csv", "path": "sim.csv"}},
            "models": {models},
            "repeats": 2,
            "reference": "flipped",
            "gbrt": {{"n_trees": 10, "learning_rate": 0.1}}
        }}"#
    );
    std::fs::write(dir.join("exp.json"), config).unwrap();
}

#[test]
fn experiment_is_reproducible_and_comparable() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path());
    write_config(
        dir.path(),
        r#"[{"name": "flipped", "kind": "flipped-label"},
            {"name": "pcg", "kind": "lambdamart", "metric": "pcg", "relevance": "rel", "setting": "joint"}]"#,
    );
    for out in ["a", "b"] {
        let o = upliftrank(&["experiment", "--config", "exp.json", "--out", out], dir.path());
        assert!(o.status.success(), "{o:?}");
    }
    let a = std::fs::read(dir.path().join("a/report.json")).unwrap();
    let b = std::fs::read(dir.path().join("b/report.json")).unwrap();
    assert_eq!(a, b);
    for f in ["auuc_table.csv", "curves/flipped.csv", "curves/pcg.csv", "models/pcg.json"] {
        assert!(dir.path().join("a").join(f).exists(), "{f}");
    }

    let o = upliftrank(
        &["compare", "--report", "a/report.json", "--model", "pcg", "--against", "flipped"],
        dir.path(),
    );
    assert!(o.status.success(), "{o:?}");
    let json: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(json["pairs"], 2);

    let o = upliftrank(&["experiment", "--config", "exp.json", "--out", "c", "--repeats", "0"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path());
    // Unknown flag value is a usage error.
    let o = upliftrank(&["train", "--data", "sim.csv", "--metric", "bogus", "--out", "m.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    // Missing input file is a data error.
    let o = upliftrank(&["train-baseline", "--kind", "flipped", "--data", "missing.csv", "--out", "m.json"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    // Missing column is a data error.
    let o = upliftrank(
        &["train-baseline", "--kind", "flipped", "--data", "sim.csv", "--treatment-col", "w", "--out", "m.json"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(3));
    // A model that fails on every split yields a partial-failure exit.
    std::fs::write(
        dir.path().join("sim.csv"),
        (0..40).fold(String::from("t,y,x\n"), |mut s, i| {
            s.push_str(&format!("{},{},{}\n", i % 2, i % 2, i));
            s
        }),
    )
    .unwrap();
    write_config(
        dir.path(),
        r#"[{"name": "flipped", "kind": "flipped-label"}, {"name": "two", "kind": "two-model"}]"#,
    );
    let o = upliftrank(&["experiment", "--config", "exp.json", "--out", "out"], dir.path());
    assert_eq!(o.status.code(), Some(4), "{o:?}");
    assert!(dir.path().join("out/report.json").exists());
}
