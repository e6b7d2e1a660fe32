//! Disaggregation solvers.
//!
//! All three methods reduce to the same non-negative least-squares kernel,
//! applied column by column with one shared Gram matrix:
//!
//! * grouped sum-to-one (`s2k_solve`): appends `beta·Q` to the design and
//!   `beta·1` to every target, softly anchoring each device's activation
//!   sum at one. The effective penalty weight on `‖1 − QA‖²` is `beta²`.
//! * non-negative lasso (`lasso_solve`): the L1 term is linear on the
//!   non-negative orthant, so it becomes a constant shift of the linear
//!   term: `h' = Dᵀx − (beta1/2)·1`. Exact, not an approximation.
//! * non-negative elastic net (`elastic_net_solve`): the ridge term adds
//!   `beta2·I` to the Gram on top of the same shift.
//!
//! Columns are independent; they are solved in parallel and merged in
//! column order, so results do not depend on the worker count.

use std::time::Instant;

use ndarray::{concatenate, s, Array1, Array2, ArrayView1, Axis};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metrics::off_flags_from_estimates;
use crate::nnls::{default_max_iter, fnnls_with, NnlsSolution, DEFAULT_TOL};
use crate::signal::{
    build_selector, reconstruct, ActivationMatrix, ColumnDiagnostics, DisaggregationResult,
    GroupedDictionary, SelectorMatrix, SignalMatrix,
};

/// Default augmentation weight. Small enough that the data term dominates
/// wherever it has curvature; still decisive along directions the data term
/// leaves flat (strongly correlated bases).
pub const DEFAULT_BETA: f64 = 0.1;

/// Default OFF threshold, in percent of a window's estimated energy.
pub const DEFAULT_OFF_THRESHOLD_PCEC: f64 = 0.01;

/// Settings for the grouped sum-to-one solver.
#[derive(Debug, Clone, Copy)]
pub struct S2kConfig {
    pub beta: f64,
    pub tol: f64,
    /// `None` selects `3·T` for a dictionary with `T` columns.
    pub max_iter: Option<usize>,
    pub off_threshold_pcec: f64,
}

impl S2kConfig {
    pub fn new(beta: f64) -> Result<Self> {
        let cfg = S2kConfig {
            beta,
            ..S2kConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.beta <= 0.0 || !self.beta.is_finite() {
            return Err(Error::parameter(
                "beta",
                format!("must be positive, got {}", self.beta),
            ));
        }
        validate_solver_settings(self.tol, self.max_iter)?;
        if self.off_threshold_pcec < 0.0 || !self.off_threshold_pcec.is_finite() {
            return Err(Error::parameter(
                "off_threshold_pcec",
                format!("must be a non-negative percent, got {}", self.off_threshold_pcec),
            ));
        }
        Ok(())
    }
}

impl Default for S2kConfig {
    fn default() -> Self {
        S2kConfig {
            beta: DEFAULT_BETA,
            tol: DEFAULT_TOL,
            max_iter: None,
            off_threshold_pcec: DEFAULT_OFF_THRESHOLD_PCEC,
        }
    }
}

/// Settings for the non-negative lasso baseline.
#[derive(Debug, Clone, Copy)]
pub struct LassoConfig {
    pub beta1: f64,
    pub tol: f64,
    pub max_iter: Option<usize>,
}

impl LassoConfig {
    pub fn new(beta1: f64) -> Result<Self> {
        let cfg = LassoConfig {
            beta1,
            ..LassoConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.beta1 < 0.0 || !self.beta1.is_finite() {
            return Err(Error::parameter(
                "beta1",
                format!("must be non-negative, got {}", self.beta1),
            ));
        }
        validate_solver_settings(self.tol, self.max_iter)
    }
}

impl Default for LassoConfig {
    fn default() -> Self {
        LassoConfig {
            beta1: 0.01,
            tol: DEFAULT_TOL,
            max_iter: None,
        }
    }
}

/// Settings for the non-negative elastic-net baseline.
#[derive(Debug, Clone, Copy)]
pub struct ElasticNetConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub tol: f64,
    pub max_iter: Option<usize>,
}

impl ElasticNetConfig {
    pub fn new(beta1: f64, beta2: f64) -> Result<Self> {
        let cfg = ElasticNetConfig {
            beta1,
            beta2,
            ..ElasticNetConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.beta1 < 0.0 || !self.beta1.is_finite() {
            return Err(Error::parameter(
                "beta1",
                format!("must be non-negative, got {}", self.beta1),
            ));
        }
        if self.beta2 < 0.0 || !self.beta2.is_finite() {
            return Err(Error::parameter(
                "beta2",
                format!("must be non-negative, got {}", self.beta2),
            ));
        }
        validate_solver_settings(self.tol, self.max_iter)
    }
}

impl Default for ElasticNetConfig {
    fn default() -> Self {
        ElasticNetConfig {
            beta1: 0.01,
            beta2: 0.001,
            tol: DEFAULT_TOL,
            max_iter: None,
        }
    }
}

fn validate_solver_settings(tol: f64, max_iter: Option<usize>) -> Result<()> {
    if tol <= 0.0 || !tol.is_finite() {
        return Err(Error::parameter("tol", format!("must be positive, got {tol}")));
    }
    if max_iter == Some(0) {
        return Err(Error::parameter("max_iter", "must be at least 1".to_string()));
    }
    Ok(())
}

/// Method selection with its settings, for callers that dispatch at runtime.
#[derive(Debug, Clone, Copy)]
pub enum MethodConfig {
    S2k(S2kConfig),
    Lasso(LassoConfig),
    ElasticNet(ElasticNetConfig),
}

impl MethodConfig {
    pub fn name(&self) -> &'static str {
        match self {
            MethodConfig::S2k(_) => "s2k",
            MethodConfig::Lasso(_) => "lasso",
            MethodConfig::ElasticNet(_) => "elastic-net",
        }
    }
}

/// The materialized stacked system: the dictionary over the scaled selector.
///
/// `s2k_solve` never forms this matrix (it works on the structured Gram);
/// it exists as the reference route, and the two must agree. Used by tests
/// to cross-check the solver through an independent assembly.
#[derive(Debug, Clone)]
pub struct AugmentedSystem {
    design: Array2<f64>,
    beta: f64,
    device_count: usize,
}

impl AugmentedSystem {
    /// The `(m+k)×T` stacked design.
    pub fn design(&self) -> &Array2<f64> {
        &self.design
    }

    /// Stacks a target column: `[x; beta·1]`. `x` must have `m` entries.
    pub fn target(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        let m = self.design.nrows() - self.device_count;
        assert_eq!(x.len(), m, "target length must match the signal sample count");
        let mut out = Array1::zeros(m + self.device_count);
        out.slice_mut(s![..m]).assign(&x);
        out.slice_mut(s![m..]).fill(self.beta);
        out
    }
}

/// Stacks `beta·Q` under the dictionary and provides the matching
/// target builder.
pub fn s2k_augment(
    dict: &GroupedDictionary,
    q: &SelectorMatrix,
    beta: f64,
) -> Result<AugmentedSystem> {
    if beta <= 0.0 || !beta.is_finite() {
        return Err(Error::parameter(
            "beta",
            format!("must be positive, got {beta}"),
        ));
    }
    check_selector(dict, q)?;
    let scaled_q = q.values() * beta;
    let design = concatenate![Axis(0), dict.bases().view(), scaled_q.view()];
    Ok(AugmentedSystem {
        design,
        beta,
        device_count: q.device_count(),
    })
}

fn check_selector(dict: &GroupedDictionary, q: &SelectorMatrix) -> Result<()> {
    if q.basis_count() != dict.basis_count() || q.device_count() != dict.device_count() {
        return Err(Error::shape(
            "selector matrix",
            format!("{}x{}", dict.device_count(), dict.basis_count()),
            format!("{}x{}", q.device_count(), q.basis_count()),
        ));
    }
    let expected = build_selector(dict.groups())?;
    if q.values() != expected.values() {
        return Err(Error::invalid(
            "selector matrix does not match the dictionary's group layout",
        ));
    }
    Ok(())
}

fn check_signal(dict: &GroupedDictionary, x: &SignalMatrix) -> Result<()> {
    if x.samples() != dict.samples() {
        return Err(Error::shape(
            "signal sample count",
            dict.samples(),
            x.samples(),
        ));
    }
    if x.unit() != dict.unit() {
        return Err(Error::invalid(format!(
            "signal unit {} does not match dictionary unit {}",
            x.unit(),
            dict.unit()
        )));
    }
    Ok(())
}

/// Grouped sum-to-one disaggregation.
///
/// Solves, for every window `x` of `signal` independently,
/// `min_{a≥0} ‖x − Da‖² + beta²·‖1 − Qa‖²` through the stacked formulation,
/// using the structured Gram `DᵀD + beta²·QᵀQ` (`QᵀQ` is block-diagonal
/// all-ones) and linear term `Dᵀx + beta²·1`.
///
/// Non-convergence on a column is not fatal: the column's diagnostics carry
/// `converged = false` and the best iterate is used.
pub fn s2k_solve(
    dict: &GroupedDictionary,
    q: &SelectorMatrix,
    signal: &SignalMatrix,
    cfg: &S2kConfig,
) -> Result<DisaggregationResult> {
    cfg.validate()?;
    check_selector(dict, q)?;
    check_signal(dict, signal)?;

    let b2 = cfg.beta * cfg.beta;
    let mut gram = dict.bases().t().dot(dict.bases());
    for group in dict.groups() {
        let r = group.columns();
        gram.slice_mut(s![r.clone(), r]).mapv_inplace(|v| v + b2);
    }
    let mut ht = dict.bases().t().dot(signal.values());
    ht.mapv_inplace(|v| v + b2);

    let (activations, diagnostics) = solve_all_columns(&gram, &ht, cfg.tol, cfg.max_iter)?;
    assemble_result(dict, q, signal, activations, diagnostics)
}

/// Non-negative lasso baseline: `min_{a≥0} ‖x − Da‖² + beta1·1ᵀa` per window.
pub fn lasso_solve(
    dict: &GroupedDictionary,
    signal: &SignalMatrix,
    cfg: &LassoConfig,
) -> Result<DisaggregationResult> {
    cfg.validate()?;
    check_signal(dict, signal)?;
    let gram = dict.bases().t().dot(dict.bases());
    let shift = cfg.beta1 / 2.0;
    let mut ht = dict.bases().t().dot(signal.values());
    ht.mapv_inplace(|v| v - shift);
    let (activations, diagnostics) = solve_all_columns(&gram, &ht, cfg.tol, cfg.max_iter)?;
    let q = build_selector(dict.groups())?;
    assemble_result(dict, &q, signal, activations, diagnostics)
}

/// Non-negative elastic net baseline:
/// `min_{a≥0} ‖x − Da‖² + beta1·1ᵀa + beta2·‖a‖²` per window.
pub fn elastic_net_solve(
    dict: &GroupedDictionary,
    signal: &SignalMatrix,
    cfg: &ElasticNetConfig,
) -> Result<DisaggregationResult> {
    cfg.validate()?;
    check_signal(dict, signal)?;
    let mut gram = dict.bases().t().dot(dict.bases());
    for i in 0..gram.nrows() {
        gram[[i, i]] += cfg.beta2;
    }
    let shift = cfg.beta1 / 2.0;
    let mut ht = dict.bases().t().dot(signal.values());
    ht.mapv_inplace(|v| v - shift);
    let (activations, diagnostics) = solve_all_columns(&gram, &ht, cfg.tol, cfg.max_iter)?;
    let q = build_selector(dict.groups())?;
    assemble_result(dict, &q, signal, activations, diagnostics)
}

/// Dispatches on the method selection.
pub fn solve_with(
    dict: &GroupedDictionary,
    signal: &SignalMatrix,
    method: &MethodConfig,
) -> Result<DisaggregationResult> {
    match method {
        MethodConfig::S2k(cfg) => {
            let q = build_selector(dict.groups())?;
            s2k_solve(dict, &q, signal, cfg)
        }
        MethodConfig::Lasso(cfg) => lasso_solve(dict, signal, cfg),
        MethodConfig::ElasticNet(cfg) => elastic_net_solve(dict, signal, cfg),
    }
}

/// One stage of the hierarchical pipeline.
#[derive(Debug, Clone)]
pub struct HierarchicalStage<'a> {
    pub dict: &'a GroupedDictionary,
    pub method: MethodConfig,
}

/// Two-stage disaggregation: stage 1 splits the building aggregate into
/// top-level devices; the estimate for `hvac_device` (never the ground
/// truth, which this function does not see) becomes the stage-2 input and is
/// split into components.
pub fn hierarchical_disaggregate(
    stage1: &HierarchicalStage<'_>,
    hvac_device: &str,
    stage2: &HierarchicalStage<'_>,
    building: &SignalMatrix,
) -> Result<(DisaggregationResult, DisaggregationResult)> {
    let hvac_index = stage1
        .dict
        .groups()
        .iter()
        .position(|g| g.device_id == hvac_device)
        .ok_or_else(|| {
            Error::parameter(
                "hvac_device",
                format!("'{hvac_device}' is not a device group of the stage-1 dictionary"),
            )
        })?;
    if stage2.dict.samples() != stage1.dict.samples() {
        return Err(Error::shape(
            "stage-2 sample count",
            stage1.dict.samples(),
            stage2.dict.samples(),
        ));
    }
    let res1 = solve_with(stage1.dict, building, &stage1.method)?;
    let hvac_estimate = res1.per_device[hvac_index].clone();
    let res2 = solve_with(stage2.dict, &hvac_estimate, &stage2.method)?;
    Ok((res1, res2))
}

/// Devices flagged OFF per window.
#[derive(Debug, Clone)]
pub struct OffDetection {
    pub device_ids: Vec<String>,
    /// Devices-by-windows; true = flagged OFF.
    pub flags: Array2<bool>,
    /// Windows with zero total estimated energy: every device is flagged
    /// there and the estimate carries no share information.
    pub degenerate_windows: Vec<usize>,
}

impl OffDetection {
    pub fn off_in_window(&self, j: usize) -> Vec<&str> {
        (0..self.device_ids.len())
            .filter(|&i| self.flags[[i, j]])
            .map(|i| self.device_ids[i].as_str())
            .collect()
    }
}

/// Flags a device OFF in a window when its share of the estimated energy is
/// at or below `threshold_pcec` percent.
pub fn detect_off_devices(
    dict: &GroupedDictionary,
    result: &DisaggregationResult,
    threshold_pcec: f64,
) -> Result<OffDetection> {
    if result.per_device.len() != dict.device_count() {
        return Err(Error::shape(
            "result devices",
            dict.device_count(),
            result.per_device.len(),
        ));
    }
    let (flags, degenerate_windows) =
        off_flags_from_estimates(&result.per_device, threshold_pcec)?;
    Ok(OffDetection {
        device_ids: dict.device_ids(),
        flags,
        degenerate_windows,
    })
}

/// Solves every column of `ht` against the shared `gram`, in parallel,
/// merging activations in column order.
fn solve_all_columns(
    gram: &Array2<f64>,
    ht: &Array2<f64>,
    tol: f64,
    max_iter: Option<usize>,
) -> Result<(Array2<f64>, Vec<ColumnDiagnostics>)> {
    let t = gram.nrows();
    let d = ht.ncols();
    let cap = max_iter.unwrap_or_else(|| default_max_iter(t));

    let solved: Vec<Result<(NnlsSolution, f64)>> = (0..d)
        .into_par_iter()
        .map(|j| {
            let started = Instant::now();
            let sol = fnnls_with(gram.view(), ht.column(j), tol, cap)?;
            Ok((sol, started.elapsed().as_secs_f64()))
        })
        .collect();

    let mut activations = Array2::zeros((t, d));
    let mut diagnostics = Vec::with_capacity(d);
    for (j, item) in solved.into_iter().enumerate() {
        let (sol, wall_time_secs) = item?;
        activations.column_mut(j).assign(&sol.a);
        diagnostics.push(ColumnDiagnostics {
            column: j,
            iterations: sol.iterations,
            support_size: sol.passive_set.len(),
            wall_time_secs,
            converged: sol.converged,
        });
    }
    Ok((activations, diagnostics))
}

fn assemble_result(
    dict: &GroupedDictionary,
    q: &SelectorMatrix,
    signal: &SignalMatrix,
    activations: Array2<f64>,
    diagnostics: Vec<ColumnDiagnostics>,
) -> Result<DisaggregationResult> {
    let activations = ActivationMatrix::new(activations)?;
    let labels = signal.window_labels().to_vec();
    let mut per_device = Vec::with_capacity(dict.device_count());
    for i in 0..dict.device_count() {
        per_device.push(reconstruct(dict, &activations, i)?.with_labels(labels.clone())?);
    }
    let modeled = dict.bases().dot(activations.values());
    let residual_fro_sq = signal
        .values()
        .iter()
        .zip(modeled.iter())
        .map(|(x, m)| (x - m) * (x - m))
        .sum();
    let group_sums = q.group_sums(&activations);
    Ok(DisaggregationResult {
        per_device,
        activations,
        residual_fro_sq,
        group_sums,
        diagnostics,
    })
}
