//! CSV ingestion onto a uniform, day-windowable sample grid.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{DateTime, NaiveDateTime};
use ndarray::Array2;

use crate::error::{Error, Result};
use crate::dataio::schema::DatasetSchema;

pub const SECONDS_PER_DAY: i64 = 86_400;

/// One complete, kept day of the table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DayWindow {
    /// Row of the day's first sample.
    pub start_row: usize,
    /// Epoch second of the day's first sample (a multiple of 86 400).
    pub start_epoch: i64,
}

/// A repaired multi-channel recording on a uniform time grid.
///
/// Invariants: timestamps strictly increasing with constant step
/// `sample_period`; every value finite and non-negative; channel names
/// unique. Day windows cover only complete midnight-aligned days that
/// survived the missing-data threshold; partial leading/trailing days are
/// never windows but stay in the table.
#[derive(Debug, Clone)]
pub struct ChannelTable {
    timestamps: Vec<i64>,
    names: Vec<String>,
    /// Rows = samples, columns = channels, parallel to `names`.
    values: Array2<f64>,
    sample_period: i64,
    day_windows: Vec<DayWindow>,
}

/// What ingestion repaired, for surfacing as warnings.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestReport {
    /// Negative samples clamped to zero.
    pub clamped_negatives: usize,
    /// Cells filled by carrying the previous observation forward (absent
    /// grid rows count once per channel).
    pub filled_missing: usize,
    /// Start epochs of complete days discarded for exceeding the missing
    /// threshold in at least one channel.
    pub dropped_day_starts: Vec<i64>,
}

impl IngestReport {
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.clamped_negatives > 0 {
            out.push(format!(
                "clamped {} negative sample(s) to zero",
                self.clamped_negatives
            ));
        }
        if self.filled_missing > 0 {
            out.push(format!(
                "filled {} missing sample(s) by carrying the last observation forward",
                self.filled_missing
            ));
        }
        for start in &self.dropped_day_starts {
            out.push(format!(
                "dropped day starting at epoch {start}: more than {}% missing",
                MAX_MISSING_FRACTION * 100.0
            ));
        }
        out
    }
}

/// A complete day is discarded when any channel had more than this fraction
/// of its samples missing.
const MAX_MISSING_FRACTION: f64 = 0.05;

impl ChannelTable {
    /// Assembles a table from already-gridded data. `timestamps` must be
    /// strictly increasing with a constant step that divides a day; all
    /// values must be finite and non-negative.
    pub fn from_grid(
        timestamps: Vec<i64>,
        names: Vec<String>,
        values: Array2<f64>,
    ) -> Result<Self> {
        if timestamps.len() < 2 {
            return Err(Error::data(
                "a channel table needs at least 2 rows to define a sample period",
            ));
        }
        if values.nrows() != timestamps.len() || values.ncols() != names.len() {
            return Err(Error::shape(
                "channel table values",
                format!("{}x{}", timestamps.len(), names.len()),
                format!("{}x{}", values.nrows(), values.ncols()),
            ));
        }
        check_unique_names(&names)?;
        let sample_period = timestamps[1] - timestamps[0];
        check_period(sample_period)?;
        for w in timestamps.windows(2) {
            if w[1] - w[0] != sample_period {
                return Err(Error::data(format!(
                    "timestamps are not on a uniform grid: step {} after step {}",
                    w[1] - w[0],
                    sample_period
                )));
            }
        }
        if let Some(v) = values.iter().find(|v| **v < 0.0 || !v.is_finite()) {
            return Err(Error::invalid(format!(
                "channel values must be finite and non-negative, found {v}"
            )));
        }
        let day_windows = complete_days(&timestamps, sample_period)
            .map(|(start_row, start_epoch)| DayWindow {
                start_row,
                start_epoch,
            })
            .collect();
        Ok(ChannelTable {
            timestamps,
            names,
            values,
            sample_period,
            day_windows,
        })
    }

    pub fn timestamps(&self) -> &[i64] {
        &self.timestamps
    }

    pub fn channel_names(&self) -> &[String] {
        &self.names
    }

    pub fn sample_period(&self) -> i64 {
        self.sample_period
    }

    pub fn rows(&self) -> usize {
        self.timestamps.len()
    }

    /// Samples in one day window.
    pub fn samples_per_day(&self) -> usize {
        (SECONDS_PER_DAY / self.sample_period) as usize
    }

    /// Complete midnight-aligned days that survived ingestion.
    pub fn day_windows(&self) -> &[DayWindow] {
        &self.day_windows
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn channel_index(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::data(format!("channel '{name}' not found in table")))
    }

    /// One channel's samples for one day window, in grid order.
    pub fn day_samples(&self, channel: usize, day: usize) -> ndarray::ArrayView1<'_, f64> {
        let w = &self.day_windows[day];
        let m = self.samples_per_day();
        self.values.slice(ndarray::s![w.start_row..w.start_row + m, channel])
    }

    /// Human-readable date label of a day window (UTC calendar date).
    pub fn day_label(&self, day: usize) -> String {
        epoch_date_label(self.day_windows[day].start_epoch)
    }
}

pub(crate) fn epoch_date_label(epoch: i64) -> String {
    match DateTime::from_timestamp(epoch, 0) {
        Some(dt) => dt.format("%Y-%m-%d").to_string(),
        None => format!("epoch{epoch}"),
    }
}

fn check_unique_names(names: &[String]) -> Result<()> {
    let mut seen = std::collections::BTreeSet::new();
    for n in names {
        if n.is_empty() {
            return Err(Error::data("channel names must be non-empty"));
        }
        if !seen.insert(n.as_str()) {
            return Err(Error::data(format!("duplicate channel name '{n}'")));
        }
    }
    Ok(())
}

fn check_period(period: i64) -> Result<()> {
    if period <= 0 {
        return Err(Error::data(format!(
            "inferred sample period must be positive, got {period}"
        )));
    }
    if SECONDS_PER_DAY % period != 0 {
        return Err(Error::data(format!(
            "sample period {period}s does not divide a day; day windows would drift"
        )));
    }
    Ok(())
}

/// Iterator over `(start_row, start_epoch)` of every complete
/// midnight-aligned day inside the grid.
fn complete_days(timestamps: &[i64], period: i64) -> impl Iterator<Item = (usize, i64)> + '_ {
    let per_day = (SECONDS_PER_DAY / period) as usize;
    let t0 = timestamps[0];
    let n = timestamps.len();
    // first midnight at or after the first sample
    let first_midnight = t0.div_euclid(SECONDS_PER_DAY) * SECONDS_PER_DAY
        + if t0.rem_euclid(SECONDS_PER_DAY) == 0 {
            0
        } else {
            SECONDS_PER_DAY
        };
    let first_row = ((first_midnight - t0) / period) as usize;
    (0..)
        .map(move |d| (first_row + d * per_day, first_midnight + d as i64 * SECONDS_PER_DAY))
        .take_while(move |(row, _)| row + per_day <= n)
}

/// Parses a timestamp cell: integer epoch seconds, or an ISO-8601 instant
/// (with offset, or naive and treated as UTC).
fn parse_timestamp(cell: &str) -> Option<i64> {
    let cell = cell.trim();
    if let Ok(v) = cell.parse::<i64>() {
        return Some(v);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(cell) {
        return Some(dt.timestamp());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S"] {
        if let Ok(naive) = NaiveDateTime::parse_from_str(cell, fmt) {
            return Some(naive.and_utc().timestamp());
        }
    }
    None
}

/// Reads a headered CSV into a repaired [`ChannelTable`].
///
/// The schema names the timestamp column; every other column becomes a
/// channel. Negative samples are clamped to zero and counted. Missing cells
/// and absent grid rows are filled by carrying each channel's previous
/// observation forward (zero before the first observation), and counted.
/// Complete days where any channel had more than 5% of its samples missing
/// are removed from the day-window list, with the grid left intact.
pub fn load_channel_csv(
    path: impl AsRef<Path>,
    schema: &DatasetSchema,
) -> Result<(ChannelTable, IngestReport)> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_path(path)?;

    let headers = reader.headers()?.clone();
    let ts_col = headers
        .iter()
        .position(|h| h == schema.timestamp_column())
        .ok_or_else(|| {
            Error::data(format!(
                "{}: timestamp column '{}' not in header",
                path.display(),
                schema.timestamp_column()
            ))
        })?;
    let channel_cols: Vec<usize> = (0..headers.len()).filter(|&i| i != ts_col).collect();
    if channel_cols.is_empty() {
        return Err(Error::data(format!(
            "{}: no channel columns besides the timestamp",
            path.display()
        )));
    }
    let names: Vec<String> = channel_cols
        .iter()
        .map(|&i| headers[i].to_string())
        .collect();
    check_unique_names(&names)?;

    // Raw parse: rows as (epoch, per-channel Option<f64>), collecting bad lines.
    let mut rows: Vec<(i64, Vec<Option<f64>>)> = Vec::new();
    let mut bad_lines: Vec<u64> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let Some(ts) = record.get(ts_col).and_then(parse_timestamp) else {
            bad_lines.push(line);
            continue;
        };
        let mut cells = Vec::with_capacity(channel_cols.len());
        let mut row_ok = true;
        for &c in &channel_cols {
            let cell = record.get(c).unwrap_or("");
            if cell.is_empty() {
                cells.push(None);
            } else {
                match cell.parse::<f64>() {
                    Ok(v) if v.is_finite() => cells.push(Some(v)),
                    Ok(_) => cells.push(None), // non-finite = missing
                    Err(_) => {
                        row_ok = false;
                        break;
                    }
                }
            }
        }
        if row_ok {
            rows.push((ts, cells));
        } else {
            bad_lines.push(line);
        }
    }
    if !bad_lines.is_empty() {
        let shown: Vec<String> = bad_lines.iter().take(20).map(|l| l.to_string()).collect();
        let suffix = if bad_lines.len() > 20 {
            format!(" and {} more", bad_lines.len() - 20)
        } else {
            String::new()
        };
        return Err(Error::data(format!(
            "{}: unparseable rows at line(s) {}{suffix}",
            path.display(),
            shown.join(", ")
        )));
    }
    if rows.len() < 2 {
        return Err(Error::data(format!(
            "{}: need at least 2 data rows to infer the sample period",
            path.display()
        )));
    }
    for w in rows.windows(2) {
        if w[1].0 <= w[0].0 {
            return Err(Error::data(format!(
                "{}: timestamps not strictly increasing ({} then {})",
                path.display(),
                w[0].0,
                w[1].0
            )));
        }
    }

    // Infer the period as the most common consecutive difference (ties to
    // the smallest), then require every timestamp to sit on that grid.
    let mut diff_counts: BTreeMap<i64, usize> = BTreeMap::new();
    for w in rows.windows(2) {
        *diff_counts.entry(w[1].0 - w[0].0).or_insert(0) += 1;
    }
    let period = *diff_counts
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
        .map(|(d, _)| d)
        .expect("at least one diff");
    check_period(period)?;
    let t0 = rows[0].0;
    for (ts, _) in &rows {
        if (ts - t0) % period != 0 {
            return Err(Error::data(format!(
                "{}: timestamp {ts} is off the {period}s grid anchored at {t0}",
                path.display()
            )));
        }
    }

    // Lay rows onto the full grid; absent rows are missing for every channel.
    let t_end = rows.last().expect("nonempty").0;
    let n = ((t_end - t0) / period) as usize + 1;
    let c = names.len();
    let mut grid: Vec<Vec<Option<f64>>> = vec![vec![None; c]; n];
    for (ts, cells) in rows {
        grid[((ts - t0) / period) as usize] = cells;
    }

    // Repair: clamp negatives, carry observations forward, count both; track
    // missing per (channel, grid row) for the day threshold.
    let mut report = IngestReport::default();
    let mut values = Array2::<f64>::zeros((n, c));
    let mut missing = vec![vec![false; c]; n];
    for ch in 0..c {
        let mut last = 0.0f64;
        for (row, cells) in grid.iter().enumerate() {
            let v = match cells[ch] {
                Some(v) => {
                    let clamped = if v < 0.0 {
                        report.clamped_negatives += 1;
                        0.0
                    } else {
                        v
                    };
                    last = clamped;
                    clamped
                }
                None => {
                    report.filled_missing += 1;
                    missing[row][ch] = true;
                    last
                }
            };
            values[[row, ch]] = v;
        }
    }

    let timestamps: Vec<i64> = (0..n).map(|i| t0 + i as i64 * period).collect();
    let mut table = ChannelTable::from_grid(timestamps, names, values)?;

    // Day threshold: drop complete days where any channel was mostly filled.
    let per_day = table.samples_per_day();
    let max_missing = (MAX_MISSING_FRACTION * per_day as f64).floor() as usize;
    let mut kept = Vec::new();
    for w in &table.day_windows {
        let worst = (0..c)
            .map(|ch| {
                (w.start_row..w.start_row + per_day)
                    .filter(|&r| missing[r][ch])
                    .count()
            })
            .max()
            .unwrap_or(0);
        if worst > max_missing {
            report.dropped_day_starts.push(w.start_epoch);
        } else {
            kept.push(*w);
        }
    }
    table.day_windows = kept;
    Ok((table, report))
}
