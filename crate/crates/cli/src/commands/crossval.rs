//! `crossval`: benchmark the configured methods across seeded splits and
//! folds, scoring train-replay and held-out disaggregation error.
//!
//! Requires a fully labeled dataset — every device channel present — since
//! every fold is scored against ground truth. A failing fold aborts the run
//! but leaves the rows gathered so far on disk next to a FAILED marker.

use serde::Serialize;

use disagg::dataio::{
    build_dictionary, day_matrix, make_kfold_splits, make_splits, ChannelTable, DatasetSchema,
    Fold, SplitPlan,
};
use disagg::metrics::{self, disaggregation_error, evaluate, EvaluationParams, RowContext};
use disagg::solvers::solve_with;

use crate::commands::disaggregate::ground_truth;
use crate::commands::{ensure_dir, ground_truth_present, load_dataset, CsvBuffer, Pool};
use crate::config::{CvMode, Settings};
use crate::{CliError, RunStatus};

#[derive(Serialize)]
struct FoldRow {
    split: String,
    method: String,
    fold: usize,
    train_days: usize,
    test_days: usize,
    train_de: f64,
    test_de: f64,
    converged: bool,
}

#[derive(Serialize)]
struct MethodSummary {
    split: String,
    method: String,
    folds: usize,
    mean_train_de: f64,
    mean_test_de: f64,
}

#[derive(Serialize)]
struct CrossvalReport {
    seed: u64,
    day_count: usize,
    cv_mode: String,
    fold_count: usize,
    methods: Vec<String>,
    splits: Vec<String>,
    folds: Vec<FoldRow>,
    summary: Vec<MethodSummary>,
}

struct MethodOutcome {
    method: &'static str,
    train_de: f64,
    converged: bool,
    report: metrics::EvaluationReport,
}

pub fn run(settings: &Settings) -> Result<RunStatus, CliError> {
    let data = settings.require_data()?;
    let schema_path = settings.require_schema()?;
    let out = settings.require_out()?;
    let (table, schema) = load_dataset(data, schema_path)?;
    let aggregate = schema.require_aggregate()?.to_string();
    if !ground_truth_present(&table, &schema) {
        return Err(CliError::config(
            "cross-validation needs every device channel present in the data",
        ));
    }

    let day_count = table.day_windows().len();
    let plans = split_plans(settings, day_count)?;
    let pool = Pool::new(settings.workers)?;
    ensure_dir(out)?;

    let mut status = RunStatus::Clean;
    let mut fold_rows: Vec<FoldRow> = Vec::new();
    let mut folds_csv = CsvBuffer::new("split,method,fold,train_de,test_de");
    let mut devices_csv: Vec<u8> = Vec::new();
    metrics::csv_header(&mut devices_csv)?;

    for (label, plan) in &plans {
        for (fold_idx, fold) in plan.folds.iter().enumerate() {
            let outcomes =
                match run_fold(settings, &pool, &table, &schema, &aggregate, fold) {
                    Ok(o) => o,
                    Err(e) => {
                        // Abort, but leave everything computed so far on
                        // disk with a marker saying where the run died.
                        folds_csv.save(&out.join("folds.csv"))?;
                        std::fs::write(out.join("devices.csv"), &devices_csv).map_err(
                            |io| CliError::config(format!("devices.csv: {io}")),
                        )?;
                        std::fs::write(
                            out.join("FAILED"),
                            format!("aborted at split={label} fold={fold_idx}: {e}\n"),
                        )
                        .map_err(|io| CliError::config(format!("FAILED marker: {io}")))?;
                        return Err(e);
                    }
                };
            for oc in outcomes {
                status = status.merge(if oc.converged {
                    RunStatus::Clean
                } else {
                    RunStatus::Unconverged
                });
                let test_de = oc.report.disaggregation_error;
                folds_csv.row(format_args!(
                    "{label},{},{fold_idx},{},{test_de}",
                    oc.method, oc.train_de
                ));
                let ctx = RowContext {
                    split: label.clone(),
                    method: oc.method.to_string(),
                    fold: fold_idx,
                };
                metrics::append_csv_rows(&mut devices_csv, &ctx, &oc.report)?;
                fold_rows.push(FoldRow {
                    split: label.clone(),
                    method: oc.method.to_string(),
                    fold: fold_idx,
                    train_days: fold.train_days.len(),
                    test_days: fold.test_days.len(),
                    train_de: oc.train_de,
                    test_de,
                    converged: oc.converged,
                });
            }
        }
    }

    let summary = summarize(settings, &plans, &fold_rows);
    folds_csv.save(&out.join("folds.csv"))?;
    std::fs::write(out.join("devices.csv"), &devices_csv)
        .map_err(|io| CliError::config(format!("devices.csv: {io}")))?;

    let mut summary_csv = CsvBuffer::new("split,method,folds,mean_train_de,mean_test_de");
    for row in &summary {
        summary_csv.row(format_args!(
            "{},{},{},{},{}",
            row.split, row.method, row.folds, row.mean_train_de, row.mean_test_de
        ));
    }
    summary_csv.save(&out.join("summary.csv"))?;

    let report = CrossvalReport {
        seed: settings.seed,
        day_count,
        cv_mode: mode_name(settings.cv_mode).to_string(),
        fold_count: settings.folds,
        methods: settings.methods.iter().map(|m| m.as_str().to_string()).collect(),
        splits: plans.iter().map(|(label, _)| label.clone()).collect(),
        folds: fold_rows,
        summary,
    };
    let mut json = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::config(format!("report serialization: {e}")))?;
    json.push('\n');
    std::fs::write(out.join("report.json"), json)
        .map_err(|io| CliError::config(format!("report.json: {io}")))?;

    for row in &report.summary {
        println!(
            "split={} method={} folds={} mean_train_de={} mean_test_de={}",
            row.split, row.method, row.folds, row.mean_train_de, row.mean_test_de
        );
    }
    Ok(status)
}

/// The seeded plans to run: one per requested fraction in subsample mode,
/// a single disjoint partition in k-fold mode.
fn split_plans(
    settings: &Settings,
    day_count: usize,
) -> Result<Vec<(String, SplitPlan)>, CliError> {
    match settings.cv_mode {
        CvMode::Subsample => settings
            .splits
            .iter()
            .map(|&f| {
                let plan = make_splits(day_count, f, settings.folds, settings.seed)?;
                Ok((format!("{f}"), plan))
            })
            .collect(),
        CvMode::KFold => {
            let plan = make_kfold_splits(day_count, settings.folds, settings.seed)?;
            Ok(vec![("kfold".to_string(), plan)])
        }
    }
}

fn mode_name(mode: CvMode) -> &'static str {
    match mode {
        CvMode::Subsample => "subsample",
        CvMode::KFold => "kfold",
    }
}

/// One fold: dictionary from the training days, then every method solves
/// the train replay (DE only) and the held-out days (full report).
fn run_fold(
    settings: &Settings,
    pool: &Pool,
    table: &ChannelTable,
    schema: &DatasetSchema,
    aggregate: &str,
    fold: &Fold,
) -> Result<Vec<MethodOutcome>, CliError> {
    let (dict, build_report) =
        build_dictionary(table, schema, &fold.train_days, settings.normalization)?;
    for warning in build_report.warnings() {
        eprintln!("warning: {warning}");
    }
    let x_train = day_matrix(table, aggregate, &fold.train_days, schema.unit())?;
    let x_test = day_matrix(table, aggregate, &fold.test_days, schema.unit())?;
    let missing = || CliError::config("device channels missing from the data");
    let ground_train = ground_truth(&dict, table, schema, &fold.train_days)?.ok_or_else(missing)?;
    let ground_test = ground_truth(&dict, table, schema, &fold.test_days)?.ok_or_else(missing)?;
    let params = EvaluationParams {
        off_threshold_pcec: settings.off_threshold_pcec,
        scale_divisor: 1.0,
    };

    let device_ids = dict.device_ids();
    let mut outcomes = Vec::with_capacity(settings.methods.len());
    for name in &settings.methods {
        let method = settings.method_config(*name)?;
        let res_train = pool.run(|| solve_with(&dict, &x_train, &method))?;
        let res_test = pool.run(|| solve_with(&dict, &x_test, &method))?;
        let train_de = disaggregation_error(&ground_train, &res_train.per_device)?;
        let report = evaluate(&device_ids, &ground_test, &res_test, &params)?;
        outcomes.push(MethodOutcome {
            method: method.name(),
            train_de,
            converged: res_train.all_converged() && res_test.all_converged(),
            report,
        });
    }
    Ok(outcomes)
}

/// Per (split, method) means over folds, in run order.
fn summarize(
    settings: &Settings,
    plans: &[(String, SplitPlan)],
    rows: &[FoldRow],
) -> Vec<MethodSummary> {
    let mut out = Vec::new();
    for (label, _) in plans {
        for name in &settings.methods {
            let matching: Vec<&FoldRow> = rows
                .iter()
                .filter(|r| r.split == *label && r.method == name.as_str())
                .collect();
            if matching.is_empty() {
                continue;
            }
            let n = matching.len() as f64;
            out.push(MethodSummary {
                split: label.clone(),
                method: name.as_str().to_string(),
                folds: matching.len(),
                mean_train_de: matching.iter().map(|r| r.train_de).sum::<f64>() / n,
                mean_test_de: matching.iter().map(|r| r.test_de).sum::<f64>() / n,
            });
        }
    }
    out
}
