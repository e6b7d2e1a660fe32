//! Evaluation metrics: RMSE, disaggregation error, per-column energy
//! shares (PCEC), OFF-device confusion counts, and the combined report.

use ndarray::Array2;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::signal::{DisaggregationResult, SignalMatrix};

/// Root mean squared error over all entries: `sqrt(ΣΣ(X−X̂)² / (m·d))`.
pub fn rmse(x: &SignalMatrix, xhat: &SignalMatrix) -> Result<f64> {
    check_same_shape("rmse", x, xhat)?;
    Ok(rmse_values(x.values(), xhat.values()))
}

fn rmse_values(x: &Array2<f64>, xhat: &Array2<f64>) -> f64 {
    let n = (x.nrows() * x.ncols()) as f64;
    let ss: f64 = x
        .iter()
        .zip(xhat.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    (ss / n).sqrt()
}

/// Sum over devices of half the squared Frobenius distance to ground truth.
pub fn disaggregation_error(ground: &[SignalMatrix], est: &[SignalMatrix]) -> Result<f64> {
    if ground.len() != est.len() {
        return Err(Error::shape("device count", ground.len(), est.len()));
    }
    if ground.is_empty() {
        return Err(Error::invalid("disaggregation error over zero devices"));
    }
    let mut total = 0.0;
    for (g, e) in ground.iter().zip(est) {
        check_same_shape("disaggregation error", g, e)?;
        let ss: f64 = g
            .values()
            .iter()
            .zip(e.values().iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        total += 0.5 * ss;
    }
    Ok(total)
}

fn check_same_shape(context: &'static str, a: &SignalMatrix, b: &SignalMatrix) -> Result<()> {
    if a.values().dim() != b.values().dim() {
        return Err(Error::shape(
            context,
            format!("{}x{}", a.samples(), a.windows()),
            format!("{}x{}", b.samples(), b.windows()),
        ));
    }
    Ok(())
}

/// Percentage of consumed energy per device for one window.
#[derive(Debug, Clone, Serialize)]
pub struct PcecColumn {
    pub percents: Vec<f64>,
    /// False when the column's total energy is zero; `percents` are then all
    /// zero rather than undefined ratios.
    pub defined: bool,
}

/// Energy share of each device in window `column`, in percent of the summed
/// device energies. Shares sum to 100 when the total is positive.
pub fn pcec(signals: &[SignalMatrix], column: usize) -> Result<PcecColumn> {
    if signals.is_empty() {
        return Err(Error::invalid("pcec over zero devices"));
    }
    let d = signals[0].windows();
    for s in signals {
        check_same_shape("pcec", &signals[0], s)?;
    }
    if column >= d {
        return Err(Error::parameter(
            "column",
            format!("index {column} out of range for {d} windows"),
        ));
    }
    let energies: Vec<f64> = signals.iter().map(|s| s.window_energy(column)).collect();
    let total: f64 = energies.iter().sum();
    if total <= 0.0 {
        return Ok(PcecColumn {
            percents: vec![0.0; signals.len()],
            defined: false,
        });
    }
    Ok(PcecColumn {
        percents: energies.iter().map(|e| 100.0 * e / total).collect(),
        defined: true,
    })
}

/// PCEC for every window: devices-by-windows percent matrix plus the indices
/// of zero-energy (undefined) columns.
pub fn pcec_matrix(signals: &[SignalMatrix]) -> Result<(Array2<f64>, Vec<usize>)> {
    if signals.is_empty() {
        return Err(Error::invalid("pcec over zero devices"));
    }
    let d = signals[0].windows();
    let mut out = Array2::zeros((signals.len(), d));
    let mut degenerate = Vec::new();
    for j in 0..d {
        let col = pcec(signals, j)?;
        if !col.defined {
            degenerate.push(j);
        }
        for (i, p) in col.percents.iter().enumerate() {
            out[[i, j]] = *p;
        }
    }
    Ok((out, degenerate))
}

/// OFF flags derived from estimated energy shares: device `i` is flagged in
/// window `j` when its estimated PCEC is at or below `threshold_pcec`
/// percent. Zero-energy columns flag every device and are reported
/// separately. Shared by OFF detection and report assembly so both use one
/// definition.
pub(crate) fn off_flags_from_estimates(
    estimates: &[SignalMatrix],
    threshold_pcec: f64,
) -> Result<(Array2<bool>, Vec<usize>)> {
    if threshold_pcec < 0.0 || !threshold_pcec.is_finite() {
        return Err(Error::parameter(
            "off_threshold_pcec",
            format!("must be a non-negative percent, got {threshold_pcec}"),
        ));
    }
    let d = estimates
        .first()
        .ok_or_else(|| Error::invalid("off detection over zero devices"))?
        .windows();
    let mut flags = Array2::from_elem((estimates.len(), d), false);
    let mut degenerate = Vec::new();
    for j in 0..d {
        let col = pcec(estimates, j)?;
        if !col.defined {
            degenerate.push(j);
            for i in 0..estimates.len() {
                flags[[i, j]] = true;
            }
        } else {
            for (i, p) in col.percents.iter().enumerate() {
                flags[[i, j]] = *p <= threshold_pcec;
            }
        }
    }
    Ok((flags, degenerate))
}

/// Confusion counts for OFF-device detection. A device is truly OFF in a
/// window when its ground-truth column is identically zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct OffConfusion {
    pub true_positives: usize,
    pub false_positives: usize,
    pub true_negatives: usize,
    pub false_negatives: usize,
}

impl OffConfusion {
    pub fn false_positive_rate(&self) -> f64 {
        let negatives = self.false_positives + self.true_negatives;
        if negatives == 0 {
            0.0
        } else {
            self.false_positives as f64 / negatives as f64
        }
    }

    pub fn true_positive_rate(&self) -> f64 {
        let positives = self.true_positives + self.false_negatives;
        if positives == 0 {
            1.0
        } else {
            self.true_positives as f64 / positives as f64
        }
    }
}

/// Scores OFF flags against ground truth.
pub fn score_off_detection(
    ground: &[SignalMatrix],
    flags: &Array2<bool>,
) -> Result<OffConfusion> {
    if ground.is_empty() {
        return Err(Error::invalid("off detection over zero devices"));
    }
    let k = ground.len();
    let d = ground[0].windows();
    for g in ground {
        check_same_shape("off detection ground truth", &ground[0], g)?;
    }
    if flags.dim() != (k, d) {
        return Err(Error::shape(
            "off flags",
            format!("{k}x{d}"),
            format!("{}x{}", flags.nrows(), flags.ncols()),
        ));
    }
    let mut c = OffConfusion {
        true_positives: 0,
        false_positives: 0,
        true_negatives: 0,
        false_negatives: 0,
    };
    for i in 0..k {
        for j in 0..d {
            let truly_off = ground[i].column(j).iter().all(|&v| v == 0.0);
            match (truly_off, flags[[i, j]]) {
                (true, true) => c.true_positives += 1,
                (false, true) => c.false_positives += 1,
                (false, false) => c.true_negatives += 1,
                (true, false) => c.false_negatives += 1,
            }
        }
    }
    Ok(c)
}

/// Report configuration.
#[derive(Debug, Clone, Copy)]
pub struct EvaluationParams {
    /// Percent threshold below which an estimated device counts as OFF.
    pub off_threshold_pcec: f64,
    /// Divisor applied to all signals before RMSE/DE (PCEC is scale
    /// invariant). Use the aggregate's mean to compare across datasets with
    /// different absolute levels; 1.0 reports native units.
    pub scale_divisor: f64,
}

impl Default for EvaluationParams {
    fn default() -> Self {
        EvaluationParams {
            off_threshold_pcec: 0.01,
            scale_divisor: 1.0,
        }
    }
}

/// Full per-run evaluation: per-device RMSE, total disaggregation error,
/// energy-share matrices for both estimate and ground truth, and the OFF
/// confusion counts.
#[derive(Debug, Clone, Serialize)]
pub struct EvaluationReport {
    pub device_ids: Vec<String>,
    pub window_labels: Vec<String>,
    pub per_device_rmse: Vec<f64>,
    pub disaggregation_error: f64,
    /// Devices-by-windows percent matrices, row order matching `device_ids`.
    pub pcec_estimated: Vec<Vec<f64>>,
    pub pcec_ground_truth: Vec<Vec<f64>>,
    /// Windows whose estimated / true total energy was zero.
    pub degenerate_estimated_windows: Vec<usize>,
    pub degenerate_ground_truth_windows: Vec<usize>,
    pub off_detection: OffConfusion,
}

/// Builds the report for a solve against per-device ground truth.
pub fn evaluate(
    device_ids: &[String],
    ground: &[SignalMatrix],
    result: &DisaggregationResult,
    params: &EvaluationParams,
) -> Result<EvaluationReport> {
    let k = ground.len();
    if k == 0 {
        return Err(Error::invalid("evaluation over zero devices"));
    }
    if result.per_device.len() != k {
        return Err(Error::shape("estimated devices", k, result.per_device.len()));
    }
    if device_ids.len() != k {
        return Err(Error::shape("device ids", k, device_ids.len()));
    }
    if params.scale_divisor <= 0.0 || !params.scale_divisor.is_finite() {
        return Err(Error::parameter(
            "scale_divisor",
            format!("must be positive, got {}", params.scale_divisor),
        ));
    }

    let c = params.scale_divisor;
    let mut per_device_rmse = Vec::with_capacity(k);
    for (g, e) in ground.iter().zip(&result.per_device) {
        check_same_shape("evaluation", g, e)?;
        per_device_rmse.push(rmse_values(g.values(), e.values()) / c);
    }
    let de = disaggregation_error(ground, &result.per_device)? / (c * c);

    let (pcec_est, degenerate_est) = pcec_matrix(&result.per_device)?;
    let (pcec_gt, degenerate_gt) = pcec_matrix(ground)?;
    let (flags, _) = off_flags_from_estimates(&result.per_device, params.off_threshold_pcec)?;
    let off_detection = score_off_detection(ground, &flags)?;

    Ok(EvaluationReport {
        device_ids: device_ids.to_vec(),
        window_labels: ground[0].window_labels().to_vec(),
        per_device_rmse,
        disaggregation_error: de,
        pcec_estimated: rows_of(&pcec_est),
        pcec_ground_truth: rows_of(&pcec_gt),
        degenerate_estimated_windows: degenerate_est,
        degenerate_ground_truth_windows: degenerate_gt,
        off_detection,
    })
}

fn rows_of(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

impl EvaluationReport {
    pub fn device_count(&self) -> usize {
        self.device_ids.len()
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Mean estimated PCEC of one device across windows.
    pub fn mean_pcec_estimated(&self, device: usize) -> f64 {
        mean(&self.pcec_estimated[device])
    }

    pub fn mean_pcec_ground_truth(&self, device: usize) -> f64 {
        mean(&self.pcec_ground_truth[device])
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Identifies one report row in flat CSV output.
#[derive(Debug, Clone)]
pub struct RowContext {
    pub split: String,
    pub method: String,
    pub fold: usize,
}

/// Appends one CSV row per device:
/// `split,method,fold,device_id,rmse,mean_pcec_estimated,mean_pcec_ground_truth`.
/// Call [`csv_header`] once before the first report.
pub fn append_csv_rows<W: std::io::Write>(
    w: &mut W,
    ctx: &RowContext,
    report: &EvaluationReport,
) -> Result<()> {
    for (i, id) in report.device_ids.iter().enumerate() {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            ctx.split,
            ctx.method,
            ctx.fold,
            id,
            report.per_device_rmse[i],
            report.mean_pcec_estimated(i),
            report.mean_pcec_ground_truth(i),
        )?;
    }
    Ok(())
}

pub fn csv_header<W: std::io::Write>(w: &mut W) -> Result<()> {
    writeln!(
        w,
        "split,method,fold,device_id,rmse,mean_pcec_estimated,mean_pcec_ground_truth"
    )?;
    Ok(())
}
