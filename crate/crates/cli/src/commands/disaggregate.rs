//! `disaggregate`: run one method over selected days of the aggregate
//! channel and write estimate, activation, and metric files.
//!
//! The solver path touches nothing but the aggregate column: ground-truth
//! channels are looked up only afterwards, to score the run, and their
//! absence merely skips the report.

use std::time::Instant;

use disagg::dataio::{day_matrix, load_dictionary, write_signal_csv, ChannelTable, DatasetSchema};
use disagg::metrics::{evaluate, EvaluationParams};
use disagg::signal::{GroupedDictionary, SignalMatrix};
use disagg::solvers::{detect_off_devices, solve_with};

use crate::commands::{
    ensure_dir, write_activations_csv, write_diagnostics_json, write_group_sums_csv, CsvBuffer,
    Pool,
};
use crate::config::Settings;
use crate::{CliError, RunStatus};

pub fn run(settings: &Settings) -> Result<RunStatus, CliError> {
    let data = settings.require_data()?;
    let schema_path = settings.require_schema()?;
    let out = settings.require_out()?;
    let dict_dir = settings
        .dict
        .as_deref()
        .ok_or_else(|| CliError::config("no dictionary given (--dict or `dict` in config)"))?;

    let dict = load_dictionary(dict_dir)?;
    let (table, schema) = super::load_dataset(data, schema_path)?;
    let days = settings.parse_days(table.day_windows().len())?;
    let aggregate = schema.require_aggregate()?;
    let x = day_matrix(&table, aggregate, &days, schema.unit())?;

    let method = settings.method_config(settings.method)?;
    let pool = Pool::new(settings.workers)?;
    let started = Instant::now();
    let result = pool.run(|| solve_with(&dict, &x, &method))?;
    eprintln!(
        "solved {} windows with {} in {:.3}s",
        x.windows(),
        method.name(),
        started.elapsed().as_secs_f64()
    );

    ensure_dir(out)?;
    let estimates_dir = out.join("estimates");
    ensure_dir(&estimates_dir)?;
    for (id, estimate) in dict.device_ids().iter().zip(&result.per_device) {
        write_signal_csv(estimates_dir.join(format!("{id}.csv")), estimate)?;
    }
    write_activations_csv(&out.join("activations.csv"), &dict, &result, x.window_labels())?;
    write_group_sums_csv(&out.join("group_sums.csv"), &dict, &result, x.window_labels())?;
    write_off_flags_csv(settings, &dict, &result, x.window_labels())?;
    write_diagnostics_json(&out.join("diagnostics.json"), &result)?;

    println!(
        "windows: {}, residual: {}, converged: {}",
        x.windows(),
        result.residual_fro_sq,
        result.all_converged()
    );

    match ground_truth(&dict, &table, &schema, &days)? {
        Some(ground) => {
            let params = EvaluationParams {
                off_threshold_pcec: settings.off_threshold_pcec,
                scale_divisor: 1.0,
            };
            let report = evaluate(&dict.device_ids(), &ground, &result, &params)?;
            std::fs::write(out.join("metrics.json"), report.to_json_pretty()? + "\n")
                .map_err(|e| CliError::config(format!("metrics.json: {e}")))?;
            println!("disaggregation error: {}", report.disaggregation_error);
        }
        None => println!("ground truth channels absent; evaluation report omitted"),
    }

    if result.all_converged() {
        Ok(RunStatus::Clean)
    } else {
        Ok(RunStatus::Unconverged)
    }
}

/// Per-device ground truth on the solved days, in dictionary group order —
/// or None when any device channel is missing from the data.
pub fn ground_truth(
    dict: &GroupedDictionary,
    table: &ChannelTable,
    schema: &DatasetSchema,
    days: &[usize],
) -> Result<Option<Vec<SignalMatrix>>, CliError> {
    let mut ground = Vec::with_capacity(dict.device_count());
    for id in dict.device_ids() {
        let Some(spec) = schema.devices().iter().find(|d| d.id == id) else {
            return Ok(None);
        };
        if table.channel_index(spec.channel_name()).is_err() {
            return Ok(None);
        }
        ground.push(day_matrix(table, spec.channel_name(), days, schema.unit())?);
    }
    Ok(Some(ground))
}

fn write_off_flags_csv(
    settings: &Settings,
    dict: &GroupedDictionary,
    result: &disagg::signal::DisaggregationResult,
    window_labels: &[String],
) -> Result<(), CliError> {
    let off = detect_off_devices(dict, result, settings.off_threshold_pcec)?;
    let mut csv = CsvBuffer::new(&format!("device,{}", window_labels.join(",")));
    for (i, id) in off.device_ids.iter().enumerate() {
        let cells: Vec<&str> = (0..window_labels.len())
            .map(|j| if off.flags[[i, j]] { "1" } else { "0" })
            .collect();
        csv.row(format_args!("{id},{}", cells.join(",")));
    }
    csv.save(&settings.require_out()?.join("off_flags.csv"))
}
