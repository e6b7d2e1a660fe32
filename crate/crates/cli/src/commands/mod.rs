pub mod build_dict;
pub mod crossval;
pub mod disaggregate;
pub mod hierarchical;
pub mod synth;

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use disagg::dataio::{load_channel_csv, ChannelTable, DatasetSchema};
use disagg::signal::{DisaggregationResult, GroupedDictionary};

use crate::CliError;

/// Loads the input CSV under its schema, surfacing repair warnings on
/// stderr so they never contaminate machine-read stdout or output files.
pub fn load_dataset(
    data: &Path,
    schema_path: &Path,
) -> Result<(ChannelTable, DatasetSchema), CliError> {
    let schema = DatasetSchema::from_toml_path(schema_path)?;
    let (table, report) = load_channel_csv(data, &schema)?;
    for warning in report.warnings() {
        eprintln!("warning: {warning}");
    }
    if table.day_windows().is_empty() {
        return Err(CliError::config(format!(
            "{}: no complete days to work with",
            data.display()
        )));
    }
    Ok((table, schema))
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::config(format!("cannot create {}: {e}", dir.display())))
}

/// True when every device channel the schema names exists in the table —
/// i.e. ground truth is available for scoring.
pub fn ground_truth_present(table: &ChannelTable, schema: &DatasetSchema) -> bool {
    schema
        .devices()
        .iter()
        .all(|d| table.channel_index(d.channel_name()).is_ok())
}

/// Per-window solver diagnostics without wall-clock times, so files stay
/// byte-identical across reruns. Timing goes to stderr instead.
#[derive(Serialize)]
struct StableDiagnostics {
    column: usize,
    iterations: usize,
    support_size: usize,
    converged: bool,
}

pub fn write_diagnostics_json(
    path: &Path,
    result: &DisaggregationResult,
) -> Result<(), CliError> {
    let rows: Vec<StableDiagnostics> = result
        .diagnostics
        .iter()
        .map(|d| StableDiagnostics {
            column: d.column,
            iterations: d.iterations,
            support_size: d.support_size,
            converged: d.converged,
        })
        .collect();
    let mut json = serde_json::to_string_pretty(&rows)
        .map_err(|e| CliError::config(format!("diagnostics serialization: {e}")))?;
    json.push('\n');
    fs::write(path, json).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

/// Writes the activation matrix: one row per dictionary column, one value
/// column per window.
pub fn write_activations_csv(
    path: &Path,
    dict: &GroupedDictionary,
    result: &DisaggregationResult,
    window_labels: &[String],
) -> Result<(), CliError> {
    let mut out = String::from("basis");
    for label in window_labels {
        out.push(',');
        out.push_str(label);
    }
    out.push('\n');
    let acts = result.activations.values();
    for (t, label) in dict.column_labels().iter().enumerate() {
        out.push_str(label);
        for j in 0..acts.ncols() {
            out.push_str(&format!(",{}", acts[[t, j]]));
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

/// Writes per-device activation sums (rows devices, columns windows).
pub fn write_group_sums_csv(
    path: &Path,
    dict: &GroupedDictionary,
    result: &DisaggregationResult,
    window_labels: &[String],
) -> Result<(), CliError> {
    let mut out = String::from("device");
    for label in window_labels {
        out.push(',');
        out.push_str(label);
    }
    out.push('\n');
    for (i, id) in dict.device_ids().iter().enumerate() {
        out.push_str(id);
        for j in 0..result.group_sums.ncols() {
            out.push_str(&format!(",{}", result.group_sums[[i, j]]));
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

/// Accumulates CSV text and writes it out whole, so partially-computed runs
/// never leave half-written lines behind.
pub struct CsvBuffer {
    text: String,
}

impl CsvBuffer {
    pub fn new(header: &str) -> Self {
        let mut text = String::from(header);
        if !text.ends_with('\n') {
            text.push('\n');
        }
        CsvBuffer { text }
    }

    pub fn row(&mut self, line: std::fmt::Arguments<'_>) {
        use std::fmt::Write as _;
        self.text.write_fmt(line).expect("string write");
        self.text.push('\n');
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        fs::write(path, &self.text)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    }
}

/// Writes via a std::io writer path for helpers that expect one.
pub fn write_string(path: &Path, text: &str) -> Result<(), CliError> {
    let mut f = fs::File::create(path)
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    f.write_all(text.as_bytes())
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

/// The worker pool solves run on: rayon's global pool by default, a
/// dedicated pool when `--workers` asks for a specific thread count.
pub enum Pool {
    Default,
    Sized(rayon::ThreadPool),
}

impl Pool {
    pub fn new(workers: usize) -> Result<Self, CliError> {
        if workers == 0 {
            return Ok(Pool::Default);
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| CliError::config(format!("cannot build worker pool: {e}")))?;
        Ok(Pool::Sized(pool))
    }

    pub fn run<T: Send>(&self, f: impl FnOnce() -> T + Send) -> T {
        match self {
            Pool::Default => f(),
            Pool::Sized(pool) => pool.install(f),
        }
    }
}
