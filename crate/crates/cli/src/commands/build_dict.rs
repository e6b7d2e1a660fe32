//! `build-dict`: pick training days and write the dictionary artifact.

use disagg::dataio::{
    build_dictionary, make_splits, save_dictionary, save_split_plan, Fold, SplitMode, SplitPlan,
};

use crate::commands::{ensure_dir, load_dataset};
use crate::config::Settings;
use crate::{CliError, RunStatus};

pub fn run(settings: &Settings) -> Result<RunStatus, CliError> {
    let data = settings.require_data()?;
    let schema_path = settings.require_schema()?;
    let out = settings.require_out()?;
    let (table, schema) = load_dataset(data, schema_path)?;

    let day_count = table.day_windows().len();
    let plan = training_plan(day_count, settings.train_fraction, settings.seed)?;
    let train_days = &plan.folds[0].train_days;

    let (dict, report) = build_dictionary(&table, &schema, train_days, settings.normalization)?;
    for warning in report.warnings() {
        eprintln!("warning: {warning}");
    }

    ensure_dir(out)?;
    save_dictionary(out.join("dictionary"), &dict)?;
    save_split_plan(out.join("split.json"), &plan)?;

    println!("k={}, T={}", dict.device_count(), dict.basis_count());
    let sizes: Vec<String> = dict
        .groups()
        .iter()
        .map(|g| g.column_count.to_string())
        .collect();
    println!("group sizes: {}", sizes.join(","));
    println!(
        "training days: {} of {} (fraction {})",
        train_days.len(),
        day_count,
        plan.train_fraction
    );
    Ok(RunStatus::Clean)
}

/// One seeded training split. A fraction of 1 means "train on everything";
/// it keeps an empty test set instead of being rejected, because a
/// dictionary build has no use for held-out days.
fn training_plan(day_count: usize, fraction: f64, seed: u64) -> Result<SplitPlan, CliError> {
    if fraction >= 1.0 {
        return Ok(SplitPlan {
            mode: SplitMode::Subsample,
            day_count,
            train_fraction: 1.0,
            seed,
            folds: vec![Fold {
                train_days: (0..day_count).collect(),
                test_days: Vec::new(),
            }],
        });
    }
    Ok(make_splits(day_count, fraction, 1, seed)?)
}
