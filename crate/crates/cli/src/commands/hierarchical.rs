//! `hierarchical`: two-stage run. Stage 1 splits the building aggregate
//! into top-level devices; stage 2 splits the stage-1 estimate of the
//! designated HVAC device into its components. Stage 2 never sees measured
//! HVAC data at test time — its input is the stage-1 estimate.

use serde::Serialize;

use disagg::dataio::{build_dictionary, day_matrix, make_splits, DatasetSchema};
use disagg::metrics::{disaggregation_error, rmse};
use disagg::solvers::{detect_off_devices, hierarchical_disaggregate, HierarchicalStage};

use crate::commands::disaggregate::ground_truth;
use crate::commands::{ensure_dir, ground_truth_present, load_dataset, CsvBuffer, Pool};
use crate::config::Settings;
use crate::{CliError, RunStatus};

#[derive(Serialize)]
struct HierFoldRow {
    fold: usize,
    train_days: usize,
    test_days: usize,
    de1: f64,
    de2: f64,
    component_rmse: Vec<f64>,
    converged: bool,
}

#[derive(Serialize)]
struct HierReport {
    seed: u64,
    day_count: usize,
    train_fraction: f64,
    fold_count: usize,
    method: String,
    hvac_device: String,
    devices: Vec<String>,
    components: Vec<String>,
    folds: Vec<HierFoldRow>,
    mean_de1: f64,
    mean_de2: f64,
}

pub fn run(settings: &Settings) -> Result<RunStatus, CliError> {
    let data = settings.require_data()?;
    let schema_path = settings.require_schema()?;
    let out = settings.require_out()?;
    let stage2_path = settings.stage2_schema.as_deref().ok_or_else(|| {
        CliError::config("no stage-2 schema given (--stage2-schema or `stage2_schema` in config)")
    })?;

    let (table, schema1) = load_dataset(data, schema_path)?;
    let schema2 = DatasetSchema::from_toml_path(stage2_path)?;
    if schema2.unit() != schema1.unit() {
        return Err(CliError::config(format!(
            "stage-2 unit {:?} does not match stage-1 unit {:?}",
            schema2.unit(),
            schema1.unit()
        )));
    }
    let hvac = schema1
        .hvac_device()
        .ok_or_else(|| CliError::config("stage-1 schema does not designate an hvac_device"))?
        .to_string();
    if !ground_truth_present(&table, &schema1) || !ground_truth_present(&table, &schema2) {
        return Err(CliError::config(
            "hierarchical runs need every stage-1 and stage-2 channel present in the data",
        ));
    }

    let aggregate = schema1.require_aggregate()?.to_string();
    let day_count = table.day_windows().len();
    let plan = make_splits(day_count, settings.train_fraction, settings.folds, settings.seed)?;
    let label = format!("{}", plan.train_fraction);
    let pool = Pool::new(settings.workers)?;
    ensure_dir(out)?;

    let mut status = RunStatus::Clean;
    let mut de_csv = CsvBuffer::new("split,fold,stage,de");
    let mut rmse_csv = CsvBuffer::new("split,fold,component,rmse");
    let mut off_csv = CsvBuffer::new("split,fold,component,window,flagged");
    let mut fold_rows: Vec<HierFoldRow> = Vec::new();
    let mut components: Vec<String> = Vec::new();
    let mut devices: Vec<String> = Vec::new();

    for (fold_idx, fold) in plan.folds.iter().enumerate() {
        let (dict1, rep1) =
            build_dictionary(&table, &schema1, &fold.train_days, settings.normalization)?;
        let (dict2, rep2) =
            build_dictionary(&table, &schema2, &fold.train_days, settings.normalization)?;
        for warning in rep1.warnings().into_iter().chain(rep2.warnings()) {
            eprintln!("warning: {warning}");
        }
        devices = dict1.device_ids();
        components = dict2.device_ids();

        let building = day_matrix(&table, &aggregate, &fold.test_days, schema1.unit())?;
        let stage1 = HierarchicalStage {
            dict: &dict1,
            method: settings.method_config(settings.method)?,
        };
        let stage2 = HierarchicalStage {
            dict: &dict2,
            method: settings.method_config(settings.method)?,
        };
        let (res1, res2) =
            pool.run(|| hierarchical_disaggregate(&stage1, &hvac, &stage2, &building))?;

        let missing = || CliError::config("device channels missing from the data");
        let ground1 = ground_truth(&dict1, &table, &schema1, &fold.test_days)?.ok_or_else(missing)?;
        let ground2 = ground_truth(&dict2, &table, &schema2, &fold.test_days)?.ok_or_else(missing)?;
        let de1 = disaggregation_error(&ground1, &res1.per_device)?;
        let de2 = disaggregation_error(&ground2, &res2.per_device)?;
        de_csv.row(format_args!("{label},{fold_idx},1,{de1}"));
        de_csv.row(format_args!("{label},{fold_idx},2,{de2}"));

        let mut component_rmse = Vec::with_capacity(components.len());
        for (id, (g, e)) in components.iter().zip(ground2.iter().zip(&res2.per_device)) {
            let r = rmse(g, e)?;
            rmse_csv.row(format_args!("{label},{fold_idx},{id},{r}"));
            component_rmse.push(r);
        }

        let off = detect_off_devices(&dict2, &res2, settings.off_threshold_pcec)?;
        for (ci, id) in off.device_ids.iter().enumerate() {
            for (j, window) in building.window_labels().iter().enumerate() {
                off_csv.row(format_args!(
                    "{label},{fold_idx},{id},{window},{}",
                    u8::from(off.flags[[ci, j]])
                ));
            }
        }

        let converged = res1.all_converged() && res2.all_converged();
        status = status.merge(if converged {
            RunStatus::Clean
        } else {
            RunStatus::Unconverged
        });
        fold_rows.push(HierFoldRow {
            fold: fold_idx,
            train_days: fold.train_days.len(),
            test_days: fold.test_days.len(),
            de1,
            de2,
            component_rmse,
            converged,
        });
    }

    de_csv.save(&out.join("hier_de.csv"))?;
    rmse_csv.save(&out.join("components_rmse.csv"))?;
    off_csv.save(&out.join("off_components.csv"))?;

    let n = fold_rows.len() as f64;
    let report = HierReport {
        seed: settings.seed,
        day_count,
        train_fraction: plan.train_fraction,
        fold_count: plan.fold_count(),
        method: settings.method_config(settings.method)?.name().to_string(),
        hvac_device: hvac,
        devices,
        components,
        mean_de1: fold_rows.iter().map(|r| r.de1).sum::<f64>() / n,
        mean_de2: fold_rows.iter().map(|r| r.de2).sum::<f64>() / n,
        folds: fold_rows,
    };
    let mut json = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::config(format!("report serialization: {e}")))?;
    json.push('\n');
    std::fs::write(out.join("hier_report.json"), json)
        .map_err(|io| CliError::config(format!("hier_report.json: {io}")))?;

    for row in &report.folds {
        println!("fold={} DE1={} DE2={}", row.fold, row.de1, row.de2);
    }
    println!("mean DE1={} mean DE2={}", report.mean_de1, report.mean_de2);
    Ok(status)
}
