//! Non-negative least squares on the normal equations.
//!
//! The solver minimizes `0.5 aᵀGa − hᵀa` over `a ≥ 0`, where `G = DᵀD` and
//! `h = Dᵀx` for a design matrix `D` and target `x`. Working in Gram space
//! lets one expensive `DᵀD` be shared across many targets, which is the
//! shape of every disaggregation solve in this crate.
//!
//! The active-set strategy follows the fast NNLS variant: grow a passive
//! (positive) set one coordinate at a time, solve the unconstrained
//! subsystem on it, and walk back along the segment to the previous iterate
//! whenever the subsystem solution leaves the feasible orthant. Tolerances
//! are relative to `scale = max(1, ‖h‖∞)`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// Relative optimality tolerance used when callers do not override it.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Default iteration cap for a problem with `t` coordinates.
pub fn default_max_iter(t: usize) -> usize {
    3 * t.max(1)
}

/// A normal-equation pair `(G, h)`.
///
/// `G` must be symmetric (checked to a relative `1e-10`) with a non-negative
/// diagonal; both are properties of any `DᵀD`.
#[derive(Debug, Clone)]
pub struct GramSystem {
    g: Array2<f64>,
    h: Array1<f64>,
}

impl GramSystem {
    pub fn new(g: Array2<f64>, h: Array1<f64>) -> Result<Self> {
        let t = h.len();
        if g.nrows() != t || g.ncols() != t {
            return Err(Error::shape(
                "gram matrix",
                format!("{t}x{t}"),
                format!("{}x{}", g.nrows(), g.ncols()),
            ));
        }
        if let Some(v) = g.iter().chain(h.iter()).find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "gram system entries must be finite, found {v}"
            )));
        }
        let gmax = g.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()));
        let sym_tol = 1e-10 * gmax.max(1.0);
        for i in 0..t {
            if g[[i, i]] < 0.0 {
                return Err(Error::invalid(format!(
                    "gram diagonal must be non-negative, found {} at {i}",
                    g[[i, i]]
                )));
            }
            for j in i + 1..t {
                if (g[[i, j]] - g[[j, i]]).abs() > sym_tol {
                    return Err(Error::invalid(format!(
                        "gram matrix is not symmetric at ({i},{j}): {} vs {}",
                        g[[i, j]],
                        g[[j, i]]
                    )));
                }
            }
        }
        Ok(GramSystem { g, h })
    }

    /// Forms `G = DᵀD`, `h = Dᵀx` from a design matrix and target.
    pub fn from_design(design: ArrayView2<'_, f64>, x: ArrayView1<'_, f64>) -> Result<Self> {
        if design.nrows() != x.len() {
            return Err(Error::shape("design rows", x.len(), design.nrows()));
        }
        let g = design.t().dot(&design);
        let h = design.t().dot(&x);
        GramSystem::new(g, h)
    }

    pub fn g(&self) -> &Array2<f64> {
        &self.g
    }

    pub fn h(&self) -> &Array1<f64> {
        &self.h
    }

    /// Problem dimension.
    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }

    /// `max(1, ‖h‖∞)`: the reference magnitude for tolerances.
    pub fn scale(&self) -> f64 {
        self.h.iter().fold(1.0f64, |acc, &v| acc.max(v.abs()))
    }

    /// `0.5 aᵀGa − hᵀa`.
    pub fn objective(&self, a: &Array1<f64>) -> f64 {
        0.5 * a.dot(&self.g.dot(a)) - self.h.dot(a)
    }
}

/// Solver output. Coordinates outside `passive_set` are exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct NnlsSolution {
    pub a: Array1<f64>,
    /// Ascending indices of the strictly positive coordinates.
    pub passive_set: Vec<usize>,
    /// Outer iterations consumed (coordinates tried).
    pub iterations: usize,
    /// True when the optimality conditions held within tolerance; false when
    /// the iteration cap was reached (the best iterate is still returned).
    pub converged: bool,
}

/// First-order optimality diagnosis of a candidate solution.
///
/// With `grad = Ga − h`: positive coordinates must have zero gradient
/// (stationarity), zero coordinates must have non-negative gradient
/// (complementarity). Violations are reported unscaled; `passes` compares
/// them against `tol·scale`. Negative coordinates make the point infeasible
/// and are excluded from both maxima.
#[derive(Debug, Clone, Copy)]
pub struct KktReport {
    pub max_stationarity_violation: f64,
    pub max_complementarity_violation: f64,
    pub feasible: bool,
    pub scale: f64,
    pub passes: bool,
}

/// Evaluates the optimality conditions of `a` for the system, with `tol`
/// relative to the system scale. Pure function of its inputs.
pub fn kkt_report(sys: &GramSystem, a: &Array1<f64>, tol: f64) -> Result<KktReport> {
    if a.len() != sys.len() {
        return Err(Error::shape("kkt candidate", sys.len(), a.len()));
    }
    let grad = sys.g.dot(a) - &sys.h;
    let mut stationarity = 0.0f64;
    let mut complementarity = 0.0f64;
    let mut feasible = true;
    for j in 0..a.len() {
        let aj = a[j];
        if !aj.is_finite() || aj < 0.0 {
            feasible = false;
        } else if aj > 0.0 {
            stationarity = stationarity.max(grad[j].abs());
        } else {
            complementarity = complementarity.max(-grad[j]);
        }
    }
    let scale = sys.scale();
    let bound = tol * scale;
    Ok(KktReport {
        max_stationarity_violation: stationarity,
        max_complementarity_violation: complementarity,
        feasible,
        scale,
        passes: feasible && stationarity <= bound && complementarity <= bound,
    })
}

/// Active-set non-negative least squares on a normal-equation pair.
///
/// Deterministic: candidate selection breaks ties toward the lowest index,
/// and no randomness or unordered collections are involved, so identical
/// inputs produce bit-identical outputs. The objective is non-increasing
/// across outer iterations (asserted in debug builds).
pub fn fnnls(sys: &GramSystem, tol: f64, max_iter: usize) -> Result<NnlsSolution> {
    fnnls_with(sys.g.view(), sys.h.view(), tol, max_iter)
}

/// [`fnnls`] on raw views, for callers that share one validated Gram matrix
/// across many targets. `g` must satisfy the [`GramSystem`] invariants; this
/// entry point does not re-check them.
pub fn fnnls_with(
    g: ArrayView2<'_, f64>,
    h: ArrayView1<'_, f64>,
    tol: f64,
    max_iter: usize,
) -> Result<NnlsSolution> {
    if tol <= 0.0 || !tol.is_finite() {
        return Err(Error::parameter("tol", format!("must be positive, got {tol}")));
    }
    if max_iter == 0 {
        return Err(Error::parameter("max_iter", "must be at least 1".to_string()));
    }
    let t = h.len();
    if g.nrows() != t || g.ncols() != t {
        return Err(Error::shape(
            "gram matrix",
            format!("{t}x{t}"),
            format!("{}x{}", g.nrows(), g.ncols()),
        ));
    }
    let scale = h.iter().fold(1.0f64, |acc, &v| acc.max(v.abs()));
    let tol_eff = tol * scale;

    let mut a: Array1<f64> = Array1::zeros(t);
    let mut w = h.to_owned();
    let mut passive = vec![false; t];
    // Coordinates that produced no progress since the last change of `a`;
    // skipped during candidate selection to avoid cycling on degenerate
    // directions. Cleared whenever the iterate moves.
    let mut banned = vec![false; t];
    let mut iterations = 0usize;
    let converged;
    #[cfg(debug_assertions)]
    let mut prev_obj = f64::INFINITY;

    loop {
        // Candidate selection: largest gradient among free coordinates,
        // lowest index on ties.
        let mut best: Option<(usize, f64)> = None;
        let mut best_any = f64::NEG_INFINITY;
        for j in 0..t {
            if passive[j] {
                continue;
            }
            let wj = w[j];
            if wj > best_any {
                best_any = wj;
            }
            if !banned[j] {
                match best {
                    Some((_, bw)) if bw >= wj => {}
                    _ => best = Some((j, wj)),
                }
            }
        }
        if best_any <= tol_eff {
            // No free coordinate can decrease the objective: optimal.
            converged = true;
            break;
        }
        let j_new = match best {
            Some((j, wj)) if wj > tol_eff => j,
            // Improving coordinates exist but all were banned as degenerate.
            _ => {
                converged = false;
                break;
            }
        };
        if iterations >= max_iter {
            converged = false;
            break;
        }
        iterations += 1;

        let a_before = a.clone();
        passive[j_new] = true;

        // Inner loop: restore feasibility of the passive subsystem solution.
        // Every pass either accepts a solution or removes a coordinate from
        // the passive set, so it terminates.
        loop {
            let p_idx: Vec<usize> = (0..t).filter(|&j| passive[j]).collect();
            let s = match solve_passive(&g, &h, &p_idx) {
                Some(s) => s,
                None => {
                    // Subsystem solve produced garbage: retract the
                    // coordinate that caused it.
                    passive[j_new] = false;
                    a[j_new] = 0.0;
                    break;
                }
            };
            if s.iter().all(|&v| v >= 0.0) {
                let smax = s.iter().fold(0.0f64, |acc, &v| acc.max(v));
                let clamp = tol * smax.max(1.0);
                for (r, &j) in p_idx.iter().enumerate() {
                    if s[r] <= clamp {
                        a[j] = 0.0;
                        passive[j] = false;
                    } else {
                        a[j] = s[r];
                    }
                }
                break;
            }
            // Walk from `a` toward `s` until the first coordinate hits zero.
            let mut alpha = f64::INFINITY;
            let mut limiting = p_idx[0];
            for (r, &j) in p_idx.iter().enumerate() {
                if s[r] < 0.0 {
                    let ratio = a[j] / (a[j] - s[r]);
                    if ratio < alpha {
                        alpha = ratio;
                        limiting = j;
                    }
                }
            }
            if alpha == 0.0 {
                // Zero step: the newly added coordinate is blocked at the
                // boundary and cannot make progress.
                a[limiting] = 0.0;
                passive[limiting] = false;
                if limiting == j_new {
                    break;
                }
                continue;
            }
            let amax = {
                let mut m = 0.0f64;
                for (r, &j) in p_idx.iter().enumerate() {
                    let v = a[j] + alpha * (s[r] - a[j]);
                    a[j] = v;
                    m = m.max(v);
                }
                m
            };
            let clamp = tol * amax.max(1.0);
            let mut removed = false;
            for &j in &p_idx {
                if passive[j] && a[j] <= clamp {
                    a[j] = 0.0;
                    passive[j] = false;
                    removed = true;
                }
            }
            if !removed {
                // Float dust kept the limiting coordinate marginally above
                // the clamp; force it out to guarantee progress.
                a[limiting] = 0.0;
                passive[limiting] = false;
            }
        }

        if a == a_before {
            // The candidate bought nothing; exclude it until the iterate
            // moves so the selection cannot cycle.
            banned[j_new] = true;
            passive[j_new] = false;
        } else {
            banned.iter_mut().for_each(|b| *b = false);
            // w = h − G·a, accumulated over the support only.
            w.assign(&h);
            for j in 0..t {
                if a[j] > 0.0 {
                    let aj = a[j];
                    w.zip_mut_with(&g.column(j), |wi, &gij| *wi -= aj * gij);
                }
            }
            #[cfg(debug_assertions)]
            {
                let obj = 0.5 * a.dot(&g.dot(&a)) - h.dot(&a);
                debug_assert!(
                    obj <= prev_obj + 1e-9 * (1.0 + prev_obj.abs()),
                    "objective increased: {prev_obj} -> {obj}"
                );
                prev_obj = obj;
            }
        }
    }

    let passive_set: Vec<usize> = (0..t).filter(|&j| a[j] > 0.0).collect();
    Ok(NnlsSolution {
        a,
        passive_set,
        iterations,
        converged,
    })
}

/// Convenience entry point from a design matrix and target.
pub fn nnls_direct(
    design: ArrayView2<'_, f64>,
    x: ArrayView1<'_, f64>,
    tol: f64,
    max_iter: usize,
) -> Result<NnlsSolution> {
    for j in 0..design.ncols() {
        if design.column(j).iter().all(|&v| v == 0.0) {
            return Err(Error::invalid(format!(
                "design column {j} is all zero; remove it before solving"
            )));
        }
    }
    let sys = GramSystem::from_design(design, x)?;
    fnnls(&sys, tol, max_iter)
}

/// Solves `G[P,P] s = h[P]`. Tries a Cholesky factorization first; on a
/// semidefinite pivot falls back to a least-norm (pseudo-inverse) solve via
/// a Jacobi eigendecomposition. Returns `None` only for non-finite results.
fn solve_passive(
    g: &ArrayView2<'_, f64>,
    h: &ArrayView1<'_, f64>,
    p_idx: &[usize],
) -> Option<Vec<f64>> {
    let n = p_idx.len();
    let mut gpp = Array2::zeros((n, n));
    let mut hp = Array1::zeros(n);
    for (r, &i) in p_idx.iter().enumerate() {
        hp[r] = h[i];
        for (c, &j) in p_idx.iter().enumerate() {
            gpp[[r, c]] = g[[i, j]];
        }
    }
    if let Some(s) = cholesky_solve(&gpp, &hp) {
        return Some(s);
    }
    least_norm_solve(&gpp, &hp)
}

/// Unpivoted Cholesky solve. Returns `None` when a pivot drops below
/// `1e-13` of the largest diagonal entry (matrix numerically semidefinite).
fn cholesky_solve(gpp: &Array2<f64>, hp: &Array1<f64>) -> Option<Vec<f64>> {
    let n = hp.len();
    let max_diag = (0..n).fold(0.0f64, |acc, i| acc.max(gpp[[i, i]]));
    let floor = max_diag * 1e-13;
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut d = gpp[[j, j]];
        for k in 0..j {
            d -= l[[j, k]] * l[[j, k]];
        }
        if d <= floor || !d.is_finite() {
            return None;
        }
        let ljj = d.sqrt();
        l[[j, j]] = ljj;
        for i in j + 1..n {
            let mut v = gpp[[i, j]];
            for k in 0..j {
                v -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = v / ljj;
        }
    }
    // L y = hp, then Lᵀ s = y.
    let mut y = vec![0.0f64; n];
    for i in 0..n {
        let mut v = hp[i];
        for k in 0..i {
            v -= l[[i, k]] * y[k];
        }
        y[i] = v / l[[i, i]];
    }
    let mut s = vec![0.0f64; n];
    for i in (0..n).rev() {
        let mut v = y[i];
        for k in i + 1..n {
            v -= l[[k, i]] * s[k];
        }
        s[i] = v / l[[i, i]];
    }
    if s.iter().all(|v| v.is_finite()) {
        Some(s)
    } else {
        None
    }
}

/// Minimum-norm solution of a symmetric positive semidefinite system via
/// eigendecomposition, dropping eigenvalues below `1e-12` of the largest.
fn least_norm_solve(gpp: &Array2<f64>, hp: &Array1<f64>) -> Option<Vec<f64>> {
    let n = hp.len();
    let (vals, vecs) = jacobi_eigen(gpp.clone());
    let vmax = vals.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()));
    let cutoff = vmax * 1e-12;
    let mut s = vec![0.0f64; n];
    for r in 0..n {
        if vals[r].abs() <= cutoff {
            continue;
        }
        let coeff = vecs.column(r).dot(hp) / vals[r];
        for i in 0..n {
            s[i] += coeff * vecs[[i, r]];
        }
    }
    if s.iter().all(|v| v.is_finite()) {
        Some(s)
    } else {
        None
    }
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns
/// eigenvalues and an orthogonal matrix whose columns are eigenvectors.
fn jacobi_eigen(mut a: Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let n = a.nrows();
    let mut v = Array2::<f64>::eye(n);
    let norm = a.iter().fold(0.0f64, |acc, &x| acc + x * x).sqrt();
    let target = norm * 1e-14;
    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in p + 1..n {
                off += 2.0 * a[[p, q]] * a[[p, q]];
            }
        }
        if off.sqrt() <= target {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[[p, q]];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (theta * theta + 1.0).sqrt())
                } else {
                    -1.0 / (-theta + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[[p, k]];
                    let aqk = a[[q, k]];
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    let vals = (0..n).map(|i| a[[i, i]]).collect();
    (vals, v)
}
