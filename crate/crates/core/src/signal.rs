//! Core data model: sampled signal windows, grouped dictionaries, selector
//! and activation matrices, and the per-device reconstruction result.
//!
//! Matrices follow one convention throughout the crate: signal matrices are
//! sample-by-window (each column is one day), dictionaries are
//! sample-by-basis with the bases of each device occupying a contiguous
//! column block, and activation matrices are basis-by-window.

use ndarray::{s, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical unit of the stored samples. Current is the default measurement;
/// power is the alternative where a meter provides it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalUnit {
    #[default]
    Ampere,
    Watt,
}

impl std::fmt::Display for SignalUnit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SignalUnit::Ampere => write!(f, "ampere"),
            SignalUnit::Watt => write!(f, "watt"),
        }
    }
}

/// Column normalization applied to dictionary bases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    #[default]
    None,
    UnitL2,
}

/// A non-negative sample-by-window signal matrix. Each column is one
/// observation window (typically a day) on a uniform sample grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalMatrix {
    values: Array2<f64>,
    sample_period: f64,
    unit: SignalUnit,
    window_labels: Vec<String>,
}

impl SignalMatrix {
    /// Validates non-negativity and finiteness of every entry; rejects empty
    /// matrices and label/column count mismatches.
    pub fn new(
        values: Array2<f64>,
        sample_period: f64,
        unit: SignalUnit,
        window_labels: Vec<String>,
    ) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::shape(
                "signal matrix",
                "at least 1x1",
                format!("{}x{}", values.nrows(), values.ncols()),
            ));
        }
        if !sample_period.is_finite() || sample_period <= 0.0 {
            return Err(Error::parameter(
                "sample_period",
                format!("must be positive, got {sample_period}"),
            ));
        }
        if window_labels.len() != values.ncols() {
            return Err(Error::shape(
                "window labels",
                values.ncols(),
                window_labels.len(),
            ));
        }
        if let Some(v) = values.iter().find(|v| **v < 0.0 || !v.is_finite()) {
            return Err(Error::invalid(format!(
                "signal matrix entries must be finite and non-negative, found {v}"
            )));
        }
        Ok(SignalMatrix {
            values,
            sample_period,
            unit,
            window_labels,
        })
    }

    /// Like [`SignalMatrix::new`] with generated window labels `w0000`, ...
    pub fn with_default_labels(
        values: Array2<f64>,
        sample_period: f64,
        unit: SignalUnit,
    ) -> Result<Self> {
        let labels = (0..values.ncols()).map(|j| format!("w{j:04}")).collect();
        SignalMatrix::new(values, sample_period, unit, labels)
    }

    /// Replaces the window labels (length must match the column count).
    pub fn with_labels(mut self, window_labels: Vec<String>) -> Result<Self> {
        if window_labels.len() != self.values.ncols() {
            return Err(Error::shape(
                "window labels",
                self.values.ncols(),
                window_labels.len(),
            ));
        }
        self.window_labels = window_labels;
        Ok(self)
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn column(&self, j: usize) -> ArrayView1<'_, f64> {
        self.values.column(j)
    }

    /// Samples per window.
    pub fn samples(&self) -> usize {
        self.values.nrows()
    }

    /// Number of windows.
    pub fn windows(&self) -> usize {
        self.values.ncols()
    }

    pub fn sample_period(&self) -> f64 {
        self.sample_period
    }

    pub fn unit(&self) -> SignalUnit {
        self.unit
    }

    pub fn window_labels(&self) -> &[String] {
        &self.window_labels
    }

    /// Energy of one window: sum of samples times the sample period.
    pub fn window_energy(&self, j: usize) -> f64 {
        self.values.column(j).sum() * self.sample_period
    }
}

/// One device's contiguous block of dictionary columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviceGroup {
    pub device_id: String,
    pub column_start: usize,
    pub column_count: usize,
}

impl DeviceGroup {
    pub fn columns(&self) -> std::ops::Range<usize> {
        self.column_start..self.column_start + self.column_count
    }
}

/// Checks that groups are non-empty, contiguous, non-overlapping, cover
/// `0..total` exactly, and carry unique device ids.
fn validate_groups(groups: &[DeviceGroup], total: usize) -> Result<()> {
    if groups.is_empty() {
        return Err(Error::invalid("dictionary must contain at least one group"));
    }
    let mut next = 0usize;
    for g in groups {
        if g.column_count == 0 {
            return Err(Error::invalid(format!(
                "group '{}' has no columns",
                g.device_id
            )));
        }
        if g.column_start != next {
            return Err(Error::invalid(format!(
                "group '{}' starts at column {} but columns up to {} are already assigned; \
                 groups must tile the dictionary contiguously",
                g.device_id, g.column_start, next
            )));
        }
        next += g.column_count;
    }
    if next != total {
        return Err(Error::invalid(format!(
            "groups cover {next} columns but the dictionary has {total}"
        )));
    }
    for (i, g) in groups.iter().enumerate() {
        if groups[..i].iter().any(|o| o.device_id == g.device_id) {
            return Err(Error::invalid(format!(
                "duplicate device id '{}'",
                g.device_id
            )));
        }
    }
    Ok(())
}

/// Dictionary of per-device basis columns, grouped by device.
///
/// Bases are stored after normalization; `column_scales` keeps the original
/// column norms so estimates can be mapped back to physical units.
#[derive(Debug, Clone)]
pub struct GroupedDictionary {
    bases: Array2<f64>,
    groups: Vec<DeviceGroup>,
    normalization: Normalization,
    column_scales: Vec<f64>,
    sample_period: f64,
    unit: SignalUnit,
    column_labels: Vec<String>,
}

impl GroupedDictionary {
    /// Builds a dictionary from raw (unnormalized) basis columns.
    ///
    /// Rejects all-zero columns: a basis that is identically zero can never
    /// contribute to a reconstruction and breaks unit-norm scaling.
    pub fn new(
        raw_bases: Array2<f64>,
        groups: Vec<DeviceGroup>,
        normalization: Normalization,
        sample_period: f64,
        unit: SignalUnit,
        column_labels: Vec<String>,
    ) -> Result<Self> {
        let (m, t) = raw_bases.dim();
        if m == 0 || t == 0 {
            return Err(Error::shape(
                "dictionary bases",
                "at least 1x1",
                format!("{m}x{t}"),
            ));
        }
        validate_groups(&groups, t)?;
        if column_labels.len() != t {
            return Err(Error::shape("dictionary column labels", t, column_labels.len()));
        }
        if !sample_period.is_finite() || sample_period <= 0.0 {
            return Err(Error::parameter(
                "sample_period",
                format!("must be positive, got {sample_period}"),
            ));
        }
        if let Some(v) = raw_bases.iter().find(|v| **v < 0.0 || !v.is_finite()) {
            return Err(Error::invalid(format!(
                "dictionary entries must be finite and non-negative, found {v}"
            )));
        }

        let mut bases = raw_bases;
        let mut column_scales = vec![1.0; t];
        for j in 0..t {
            let norm = bases.column(j).dot(&bases.column(j)).sqrt();
            if norm == 0.0 {
                return Err(Error::invalid(format!(
                    "dictionary column {j} ('{}') is all zero",
                    column_labels[j]
                )));
            }
            if normalization == Normalization::UnitL2 {
                column_scales[j] = norm;
                bases.column_mut(j).mapv_inplace(|v| v / norm);
            }
        }

        Ok(GroupedDictionary {
            bases,
            groups,
            normalization,
            column_scales,
            sample_period,
            unit,
            column_labels,
        })
    }

    pub fn bases(&self) -> &Array2<f64> {
        &self.bases
    }

    pub fn groups(&self) -> &[DeviceGroup] {
        &self.groups
    }

    /// Number of device groups.
    pub fn device_count(&self) -> usize {
        self.groups.len()
    }

    /// Samples per basis column.
    pub fn samples(&self) -> usize {
        self.bases.nrows()
    }

    /// Total number of basis columns.
    pub fn basis_count(&self) -> usize {
        self.bases.ncols()
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn column_scales(&self) -> &[f64] {
        &self.column_scales
    }

    pub fn sample_period(&self) -> f64 {
        self.sample_period
    }

    pub fn unit(&self) -> SignalUnit {
        self.unit
    }

    pub fn column_labels(&self) -> &[String] {
        &self.column_labels
    }

    pub fn device_ids(&self) -> Vec<String> {
        self.groups.iter().map(|g| g.device_id.clone()).collect()
    }

    /// Basis columns of one device.
    pub fn group_bases(&self, i: usize) -> ArrayView2<'_, f64> {
        let r = self.groups[i].columns();
        self.bases.slice(s![.., r])
    }
}

/// Binary group-membership matrix: one row per device, one column per basis,
/// entry 1 where the basis belongs to the device.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectorMatrix {
    values: Array2<f64>,
}

impl SelectorMatrix {
    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    /// Rows (devices).
    pub fn device_count(&self) -> usize {
        self.values.nrows()
    }

    /// Columns (bases).
    pub fn basis_count(&self) -> usize {
        self.values.ncols()
    }

    /// Per-device activation sums `Q·A`.
    pub fn group_sums(&self, activations: &ActivationMatrix) -> Array2<f64> {
        self.values.dot(activations.values())
    }
}

/// Builds the selector matrix for a group layout.
///
/// Row `i` holds ones exactly over group `i`'s column range; every column has
/// exactly one nonzero because the groups tile the dictionary.
pub fn build_selector(groups: &[DeviceGroup]) -> Result<SelectorMatrix> {
    let total = groups.iter().map(|g| g.column_count).sum();
    validate_groups(groups, total)?;
    let mut values = Array2::zeros((groups.len(), total));
    for (i, g) in groups.iter().enumerate() {
        for j in g.columns() {
            values[[i, j]] = 1.0;
        }
    }
    Ok(SelectorMatrix { values })
}

/// Non-negative basis-by-window activation matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationMatrix {
    values: Array2<f64>,
}

impl ActivationMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| **v < 0.0 || !v.is_finite()) {
            return Err(Error::invalid(format!(
                "activations must be finite and non-negative, found {v}"
            )));
        }
        Ok(ActivationMatrix { values })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    /// Rows belonging to one device group.
    pub fn group_rows(&self, group: &DeviceGroup) -> ArrayView2<'_, f64> {
        self.values.slice(s![group.columns(), ..])
    }
}

/// Per-column solver diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct ColumnDiagnostics {
    pub column: usize,
    pub iterations: usize,
    /// Size of the final positive support.
    pub support_size: usize,
    pub wall_time_secs: f64,
    pub converged: bool,
}

/// Output of a disaggregation solve: per-device estimates, the activation
/// matrix that produced them, and bookkeeping for reporting.
#[derive(Debug, Clone)]
pub struct DisaggregationResult {
    pub per_device: Vec<SignalMatrix>,
    pub activations: ActivationMatrix,
    /// Squared Frobenius norm of `X̄ − D·A` (data term only).
    pub residual_fro_sq: f64,
    /// `Q·A`: per-device activation sums, one row per device.
    pub group_sums: Array2<f64>,
    pub diagnostics: Vec<ColumnDiagnostics>,
}

impl DisaggregationResult {
    pub fn all_converged(&self) -> bool {
        self.diagnostics.iter().all(|d| d.converged)
    }

    pub fn device_ids<'a>(&self, dict: &'a GroupedDictionary) -> Vec<&'a str> {
        dict.groups().iter().map(|g| g.device_id.as_str()).collect()
    }
}

/// Reconstructs device `i`'s estimate `D_i·A_i` in the dictionary's unit.
///
/// Normalization scales cancel here because the activations were computed
/// against the stored (normalized) bases.
pub fn reconstruct(
    dict: &GroupedDictionary,
    activations: &ActivationMatrix,
    device: usize,
) -> Result<SignalMatrix> {
    if device >= dict.device_count() {
        return Err(Error::parameter(
            "device",
            format!(
                "index {device} out of range for {} groups",
                dict.device_count()
            ),
        ));
    }
    check_activation_shape(dict, activations)?;
    let group = &dict.groups()[device];
    let est = dict.group_bases(device).dot(&activations.group_rows(group));
    // Products and sums of non-negative values stay non-negative.
    SignalMatrix::with_default_labels(est, dict.sample_period(), dict.unit())
}

/// Reconstructs the modeled aggregate `D·A`.
pub fn total_reconstruction(
    dict: &GroupedDictionary,
    activations: &ActivationMatrix,
) -> Result<SignalMatrix> {
    check_activation_shape(dict, activations)?;
    let est = dict.bases().dot(activations.values());
    SignalMatrix::with_default_labels(est, dict.sample_period(), dict.unit())
}

fn check_activation_shape(dict: &GroupedDictionary, activations: &ActivationMatrix) -> Result<()> {
    if activations.values().nrows() != dict.basis_count() {
        return Err(Error::shape(
            "activation rows",
            dict.basis_count(),
            activations.values().nrows(),
        ));
    }
    Ok(())
}

/// Helper for tests and synthetic constructions: dictionary from explicit
/// per-device column blocks.
pub fn dictionary_from_blocks(
    blocks: &[(&str, Array2<f64>)],
    normalization: Normalization,
    sample_period: f64,
    unit: SignalUnit,
) -> Result<GroupedDictionary> {
    if blocks.is_empty() {
        return Err(Error::invalid("no device blocks"));
    }
    let m = blocks[0].1.nrows();
    let total: usize = blocks.iter().map(|(_, b)| b.ncols()).sum();
    let mut bases = Array2::<f64>::zeros((m, total));
    let mut groups = Vec::with_capacity(blocks.len());
    let mut labels = Vec::with_capacity(total);
    let mut start = 0usize;
    for (id, block) in blocks {
        if block.nrows() != m {
            return Err(Error::shape("device block rows", m, block.nrows()));
        }
        bases.slice_mut(s![.., start..start + block.ncols()]).assign(block);
        for j in 0..block.ncols() {
            labels.push(format!("{id}/{j}"));
        }
        groups.push(DeviceGroup {
            device_id: id.to_string(),
            column_start: start,
            column_count: block.ncols(),
        });
        start += block.ncols();
    }
    GroupedDictionary::new(bases, groups, normalization, sample_period, unit, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn groups(sizes: &[usize]) -> Vec<DeviceGroup> {
        let mut out = Vec::new();
        let mut start = 0;
        for (i, &n) in sizes.iter().enumerate() {
            out.push(DeviceGroup {
                device_id: format!("dev{i}"),
                column_start: start,
                column_count: n,
            });
            start += n;
        }
        out
    }

    #[test]
    fn selector_for_two_groups() {
        let q = build_selector(&groups(&[3, 2])).unwrap();
        let expected = array![
            [1.0, 1.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 1.0, 1.0]
        ];
        assert_eq!(q.values(), &expected);
    }

    #[test]
    fn selector_single_group_single_column() {
        let q = build_selector(&groups(&[1])).unwrap();
        assert_eq!(q.values(), &array![[1.0]]);
    }

    #[test]
    fn selector_all_singletons_is_identity() {
        let q = build_selector(&groups(&[1, 1, 1])).unwrap();
        assert_eq!(q.values(), &Array2::<f64>::eye(3));
    }

    #[test]
    fn selector_rejects_gap_and_overlap() {
        let mut gap = groups(&[2, 2]);
        gap[1].column_start = 3;
        assert!(build_selector(&gap).is_err());

        let mut overlap = groups(&[2, 2]);
        overlap[1].column_start = 1;
        assert!(build_selector(&overlap).is_err());
    }

    #[test]
    fn selector_rejects_duplicate_ids() {
        let mut gs = groups(&[1, 1]);
        gs[1].device_id = "dev0".into();
        assert!(build_selector(&gs).is_err());
    }

    #[test]
    fn selector_row_and_column_sums() {
        let sizes = [4usize, 1, 3];
        let q = build_selector(&groups(&sizes)).unwrap();
        for (i, &n) in sizes.iter().enumerate() {
            assert_eq!(q.values().row(i).sum(), n as f64);
        }
        for j in 0..q.basis_count() {
            assert_eq!(q.values().column(j).sum(), 1.0);
        }
    }

    #[test]
    fn signal_matrix_rejects_negative_and_nan() {
        let neg = array![[1.0, -0.1], [0.0, 2.0]];
        assert!(SignalMatrix::with_default_labels(neg, 60.0, SignalUnit::Ampere).is_err());
        let nan = array![[1.0, f64::NAN]];
        assert!(SignalMatrix::with_default_labels(nan, 60.0, SignalUnit::Ampere).is_err());
    }

    #[test]
    fn unit_l2_normalization_records_scales() {
        let bases = array![[3.0, 0.0], [4.0, 2.0]];
        let dict = GroupedDictionary::new(
            bases,
            groups(&[1, 1]),
            Normalization::UnitL2,
            60.0,
            SignalUnit::Watt,
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        assert!((dict.column_scales()[0] - 5.0).abs() < 1e-12);
        assert!((dict.column_scales()[1] - 2.0).abs() < 1e-12);
        let n0 = dict.bases().column(0).dot(&dict.bases().column(0));
        assert!((n0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dictionary_rejects_all_zero_column() {
        let bases = array![[1.0, 0.0], [1.0, 0.0]];
        let err = GroupedDictionary::new(
            bases,
            groups(&[2]),
            Normalization::None,
            60.0,
            SignalUnit::Ampere,
            vec!["a".into(), "b".into()],
        );
        assert!(err.is_err());
    }

    #[test]
    fn reconstruct_is_block_times_rows() {
        let dict = dictionary_from_blocks(
            &[
                ("a", array![[1.0], [0.0]]),
                ("b", array![[1.0, 0.0], [1.0, 2.0]]),
            ],
            Normalization::None,
            60.0,
            SignalUnit::Ampere,
        )
        .unwrap();
        let acts = ActivationMatrix::new(array![[2.0], [1.0], [0.5]]).unwrap();
        let xa = reconstruct(&dict, &acts, 0).unwrap();
        assert_eq!(xa.values(), &array![[2.0], [0.0]]);
        let xb = reconstruct(&dict, &acts, 1).unwrap();
        assert_eq!(xb.values(), &array![[1.0], [2.0]]);
        let total = total_reconstruction(&dict, &acts).unwrap();
        assert_eq!(total.values(), &array![[3.0], [2.0]]);
    }

    #[test]
    fn total_reconstruction_is_sum_of_devices() {
        let dict = dictionary_from_blocks(
            &[
                ("a", array![[1.0, 0.5], [0.2, 0.7]]),
                ("b", array![[0.3], [0.9]]),
            ],
            Normalization::None,
            1.0,
            SignalUnit::Watt,
        )
        .unwrap();
        let acts = ActivationMatrix::new(array![[0.1, 0.9], [0.4, 0.0], [0.5, 0.3]]).unwrap();
        let total = total_reconstruction(&dict, &acts).unwrap();
        let mut sum = Array2::<f64>::zeros(total.values().dim());
        for i in 0..dict.device_count() {
            sum += reconstruct(&dict, &acts, i).unwrap().values();
        }
        let diff = (total.values() - &sum).mapv(f64::abs).fold(0.0f64, |a, &b| a.max(b));
        assert!(diff < 1e-12);
    }

    #[test]
    fn activation_matrix_rejects_negative() {
        assert!(ActivationMatrix::new(array![[0.0, -1.0]]).is_err());
    }
}
