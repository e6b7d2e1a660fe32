//! End-to-end tests of the `disagg` binary: exit codes, stdout contracts,
//! artifact layout, and run-to-run determinism.

mod common;

use std::fs;
use std::path::Path;

use common::{disagg, exit_code, path_str, run_ok, stderr_of, write_two_level_dataset};
use disagg::dataio::load_split_plan;
use tempfile::tempdir;

#[test]
fn missing_schema_is_exit_2_naming_the_path() {
    let dir = tempdir().unwrap();
    let out = disagg(&[
        "build-dict",
        "--data",
        path_str(&dir.path().join("whatever.csv")),
        "--schema",
        path_str(&dir.path().join("absent.toml")),
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(exit_code(&out), 2);
    assert!(
        stderr_of(&out).contains("absent.toml"),
        "error must name the missing schema path: {}",
        stderr_of(&out)
    );
}

#[test]
fn build_dict_reports_dimensions_at_default_training_fraction() {
    let dir = tempdir().unwrap();
    let syn = dir.path().join("syn");
    run_ok(&[
        "synth",
        "--out",
        path_str(&syn),
        "--devices",
        "19",
        "--days",
        "365",
        "--samples-per-day",
        "4",
        "--seed",
        "11",
    ]);
    let stdout = run_ok(&[
        "build-dict",
        "--data",
        path_str(&syn.join("data.csv")),
        "--schema",
        path_str(&syn.join("schema.toml")),
        "--out",
        path_str(&dir.path().join("dict")),
        "--seed",
        "11",
    ]);
    // 19 devices, round(0.8 * 365) = 292 training days each.
    assert!(
        stdout.contains("k=19, T=5548"),
        "expected year-of-data dimensions in stdout, got:\n{stdout}"
    );
}

#[test]
fn disaggregate_recovers_training_days_exactly() {
    let dir = tempdir().unwrap();
    let syn = dir.path().join("syn");
    run_ok(&[
        "synth",
        "--out",
        path_str(&syn),
        "--days",
        "8",
        "--seed",
        "23",
    ]);
    let dict_dir = dir.path().join("dict");
    run_ok(&[
        "build-dict",
        "--data",
        path_str(&syn.join("data.csv")),
        "--schema",
        path_str(&syn.join("schema.toml")),
        "--out",
        path_str(&dict_dir),
        "--train-fraction",
        "0.75",
        "--seed",
        "23",
    ]);

    let plan = load_split_plan(dict_dir.join("split.json")).unwrap();
    let train_days: Vec<String> = plan.folds[0]
        .train_days
        .iter()
        .map(|d| d.to_string())
        .collect();
    let run_dir = dir.path().join("run");
    let config = dir.path().join("run.toml");
    fs::write(
        &config,
        format!("dict = \"{}\"\n", path_str(&dict_dir.join("dictionary"))),
    )
    .unwrap();
    run_ok(&[
        "disaggregate",
        "--config",
        path_str(&config),
        "--data",
        path_str(&syn.join("data.csv")),
        "--schema",
        path_str(&syn.join("schema.toml")),
        "--out",
        path_str(&run_dir),
        "--days",
        &train_days.join(","),
    ]);

    let metrics: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run_dir.join("metrics.json")).unwrap()).unwrap();
    let de = metrics["disaggregation_error"].as_f64().unwrap();
    assert!(
        de <= 1e-8,
        "training-day replay must reconstruct exactly, DE = {de}"
    );
    for device in ["dev00", "dev01", "dev02"] {
        assert!(
            run_dir.join("estimates").join(format!("{device}.csv")).exists(),
            "per-device estimate file missing for {device}"
        );
    }
}

#[test]
fn estimates_match_with_and_without_ground_truth_channels() {
    let dir = tempdir().unwrap();
    let syn = dir.path().join("syn");
    run_ok(&["synth", "--out", path_str(&syn), "--days", "6", "--seed", "31"]);
    let dict_dir = dir.path().join("dict");
    run_ok(&[
        "build-dict",
        "--data",
        path_str(&syn.join("data.csv")),
        "--schema",
        path_str(&syn.join("schema.toml")),
        "--out",
        path_str(&dict_dir),
        "--train-fraction",
        "1.0",
        "--seed",
        "31",
    ]);
    let config = dir.path().join("run.toml");
    fs::write(
        &config,
        format!("dict = \"{}\"\n", path_str(&dict_dir.join("dictionary"))),
    )
    .unwrap();

    // Strip every device channel, leaving timestamp + aggregate only.
    let labeled = fs::read_to_string(syn.join("data.csv")).unwrap();
    let mut lines = labeled.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let keep: Vec<usize> = header
        .iter()
        .enumerate()
        .filter(|(_, name)| **name == "timestamp" || **name == "aggregate")
        .map(|(i, _)| i)
        .collect();
    assert_eq!(keep.len(), 2);
    let mut stripped = String::new();
    for line in labeled.lines() {
        let fields: Vec<&str> = line.split(',').collect();
        let kept: Vec<&str> = keep.iter().map(|&i| fields[i]).collect();
        stripped.push_str(&kept.join(","));
        stripped.push('\n');
    }
    let blind_csv = dir.path().join("blind.csv");
    fs::write(&blind_csv, stripped).unwrap();

    let labeled_out = dir.path().join("labeled");
    let blind_out = dir.path().join("blind");
    run_ok(&[
        "disaggregate",
        "--config",
        path_str(&config),
        "--data",
        path_str(&syn.join("data.csv")),
        "--schema",
        path_str(&syn.join("schema.toml")),
        "--out",
        path_str(&labeled_out),
    ]);
    let blind_stdout = run_ok(&[
        "disaggregate",
        "--config",
        path_str(&config),
        "--data",
        path_str(&blind_csv),
        "--schema",
        path_str(&syn.join("schema.toml")),
        "--out",
        path_str(&blind_out),
    ]);

    assert!(
        blind_stdout.contains("ground truth channels absent; evaluation report omitted"),
        "expected the no-ground-truth notice, got:\n{blind_stdout}"
    );
    assert!(labeled_out.join("metrics.json").exists());
    assert!(!blind_out.join("metrics.json").exists());

    // The solver path reads only the aggregate: removing every ground-truth
    // channel must not change a single estimated byte.
    for device in ["dev00", "dev01", "dev02"] {
        let a = fs::read(labeled_out.join("estimates").join(format!("{device}.csv"))).unwrap();
        let b = fs::read(blind_out.join("estimates").join(format!("{device}.csv"))).unwrap();
        assert_eq!(a, b, "estimates for {device} changed when labels were removed");
    }
}

#[test]
fn crossval_reports_are_byte_identical_across_reruns() {
    let dir = tempdir().unwrap();
    let syn = dir.path().join("syn");
    run_ok(&["synth", "--out", path_str(&syn), "--days", "10", "--seed", "47"]);
    let args = |out: &Path| {
        vec![
            "crossval".to_string(),
            "--data".into(),
            path_str(&syn.join("data.csv")).into(),
            "--schema".into(),
            path_str(&syn.join("schema.toml")).into(),
            "--out".into(),
            path_str(out).to_string(),
            "--seed".into(),
            "47".into(),
            "--splits".into(),
            "0.8,0.5".into(),
            "--folds".into(),
            "2".into(),
        ]
    };
    let first = dir.path().join("cv1");
    let second = dir.path().join("cv2");
    let argv1 = args(&first);
    let argv2 = args(&second);
    run_ok(&argv1.iter().map(String::as_str).collect::<Vec<_>>());
    run_ok(&argv2.iter().map(String::as_str).collect::<Vec<_>>());

    for file in ["folds.csv", "devices.csv", "summary.csv", "report.json"] {
        let a = fs::read(first.join(file)).unwrap();
        let b = fs::read(second.join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identical runs");
    }
}

#[test]
fn crossval_single_fold_emits_one_summary_row_per_method() {
    let dir = tempdir().unwrap();
    let syn = dir.path().join("syn");
    run_ok(&["synth", "--out", path_str(&syn), "--days", "8", "--seed", "3"]);
    let cv = dir.path().join("cv");
    run_ok(&[
        "crossval",
        "--data",
        path_str(&syn.join("data.csv")),
        "--schema",
        path_str(&syn.join("schema.toml")),
        "--out",
        path_str(&cv),
        "--seed",
        "3",
        "--folds",
        "1",
    ]);
    let summary = fs::read_to_string(cv.join("summary.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().skip(1).collect();
    assert_eq!(rows.len(), 3, "one row per method, got:\n{summary}");
    assert!(rows[0].contains("s2k"));
    assert!(rows[1].contains("lasso"));
    assert!(rows[2].contains("elastic-net"));
}

#[test]
fn hierarchical_writes_two_stage_reports() {
    let dir = tempdir().unwrap();
    let ds = write_two_level_dataset(dir.path(), 3, 2, 10, 48, 5, &[]);
    let out = dir.path().join("hier");
    run_ok(&[
        "hierarchical",
        "--data",
        path_str(&ds.data),
        "--schema",
        path_str(&ds.stage1_schema),
        "--stage2-schema",
        path_str(&ds.stage2_schema),
        "--out",
        path_str(&out),
        "--seed",
        "2",
        "--train-fraction",
        "0.6",
        "--folds",
        "2",
    ]);

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("hier_report.json")).unwrap()).unwrap();
    assert!(report["mean_de1"].as_f64().unwrap() <= 1e-6);
    assert!(report["mean_de2"].as_f64().unwrap() <= 1e-6);
    assert_eq!(report["hvac_device"], "hvac");

    let de = fs::read_to_string(out.join("hier_de.csv")).unwrap();
    // Header plus one stage-1 and one stage-2 row per fold.
    assert_eq!(de.lines().count(), 1 + 2 * 2, "unexpected hier_de.csv:\n{de}");
    let rmse = fs::read_to_string(out.join("components_rmse.csv")).unwrap();
    assert_eq!(rmse.lines().count(), 1 + 3 * 2, "unexpected components_rmse.csv:\n{rmse}");
}

#[test]
fn config_file_supplies_paths_and_flags_override_them() {
    let dir = tempdir().unwrap();
    let config_out = dir.path().join("from_config");
    let flag_out = dir.path().join("from_flag");
    let config = dir.path().join("cfg.toml");
    fs::write(
        &config,
        format!("out = \"{}\"\nseed = 9\n", path_str(&config_out)),
    )
    .unwrap();

    run_ok(&["synth", "--config", path_str(&config), "--days", "4"]);
    assert!(config_out.join("data.csv").exists());

    run_ok(&[
        "synth",
        "--config",
        path_str(&config),
        "--days",
        "4",
        "--out",
        path_str(&flag_out),
    ]);
    assert!(flag_out.join("data.csv").exists());
    // Same seed, same spec: the two runs must generate identical data.
    let a = fs::read(config_out.join("data.csv")).unwrap();
    let b = fs::read(flag_out.join("data.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn bad_day_selection_is_exit_2() {
    let dir = tempdir().unwrap();
    let syn = dir.path().join("syn");
    run_ok(&["synth", "--out", path_str(&syn), "--days", "4", "--seed", "1"]);
    let dict_dir = dir.path().join("dict");
    run_ok(&[
        "build-dict",
        "--data",
        path_str(&syn.join("data.csv")),
        "--schema",
        path_str(&syn.join("schema.toml")),
        "--out",
        path_str(&dict_dir),
        "--train-fraction",
        "1.0",
    ]);
    let config = dir.path().join("run.toml");
    fs::write(
        &config,
        format!("dict = \"{}\"\n", path_str(&dict_dir.join("dictionary"))),
    )
    .unwrap();
    let out = disagg(&[
        "disaggregate",
        "--config",
        path_str(&config),
        "--data",
        path_str(&syn.join("data.csv")),
        "--schema",
        path_str(&syn.join("schema.toml")),
        "--out",
        path_str(&dir.path().join("run")),
        "--days",
        "99",
    ]);
    assert_eq!(exit_code(&out), 2);
    assert!(stderr_of(&out).contains("out of range"));
}
