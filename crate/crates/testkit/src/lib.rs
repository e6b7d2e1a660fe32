//! Reference oracles and problem generators used by the test suites.
//!
//! Everything here is deliberately independent of the production solver:
//! the oracle enumerates zero patterns and solves each candidate subsystem
//! with plain Gaussian elimination, so it shares no code path with the
//! active-set implementation it is used to check.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Result of the brute-force search over zero patterns.
#[derive(Debug, Clone)]
pub struct ExhaustiveSolution {
    pub a: Array1<f64>,
    pub objective: f64,
}

/// Minimizes `0.5 aᵀGa − hᵀa` subject to `a ≥ 0` by enumerating every
/// subset of coordinates allowed to be nonzero.
///
/// For each subset the unconstrained stationarity system on the free
/// coordinates is solved; candidates with a negative free coordinate are
/// discarded. Subsets whose subsystem is singular are skipped: when the
/// optimum lies on a flat face, sliding along the null direction reaches an
/// optimum with a nonsingular support, so the best objective is still found.
/// Only usable for small dimensions (2^t subsets).
pub fn exhaustive_nnls(g: &Array2<f64>, h: &Array1<f64>) -> ExhaustiveSolution {
    let t = h.len();
    assert!(t <= 20, "exhaustive oracle is exponential in t");
    assert_eq!(g.nrows(), t);
    assert_eq!(g.ncols(), t);

    // Empty support: a = 0, objective 0.
    let mut best = ExhaustiveSolution {
        a: Array1::zeros(t),
        objective: 0.0,
    };

    for mask in 1u32..(1u32 << t) {
        let support: Vec<usize> = (0..t).filter(|&i| mask & (1 << i) != 0).collect();
        let n = support.len();
        let mut sub = Array2::zeros((n, n));
        let mut rhs = Array1::zeros(n);
        for (r, &i) in support.iter().enumerate() {
            rhs[r] = h[i];
            for (c, &j) in support.iter().enumerate() {
                sub[[r, c]] = g[[i, j]];
            }
        }
        let s = match gauss_solve(sub, rhs) {
            Some(s) => s,
            None => continue,
        };
        if s.iter().any(|&v| v < 0.0) {
            continue;
        }
        let mut a = Array1::zeros(t);
        for (r, &i) in support.iter().enumerate() {
            a[i] = s[r];
        }
        let obj = quadratic_objective(g, h, &a);
        if obj < best.objective {
            best = ExhaustiveSolution { a, objective: obj };
        }
    }
    best
}

/// `0.5 aᵀGa − hᵀa`.
pub fn quadratic_objective(g: &Array2<f64>, h: &Array1<f64>, a: &Array1<f64>) -> f64 {
    0.5 * a.dot(&g.dot(a)) - h.dot(a)
}

/// Gaussian elimination with partial pivoting. Returns `None` on a pivot
/// smaller than `1e-12` relative to the largest entry (treated singular).
fn gauss_solve(mut m: Array2<f64>, mut b: Array1<f64>) -> Option<Array1<f64>> {
    let n = b.len();
    let scale = m.iter().fold(0.0f64, |acc, &v| acc.max(v.abs())).max(1e-300);
    for col in 0..n {
        let mut pivot_row = col;
        for r in col + 1..n {
            if m[[r, col]].abs() > m[[pivot_row, col]].abs() {
                pivot_row = r;
            }
        }
        if m[[pivot_row, col]].abs() <= 1e-12 * scale {
            return None;
        }
        if pivot_row != col {
            for c in 0..n {
                m.swap([pivot_row, c], [col, c]);
            }
            b.swap(pivot_row, col);
        }
        for r in col + 1..n {
            let f = m[[r, col]] / m[[col, col]];
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                m[[r, c]] -= f * m[[col, c]];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = Array1::zeros(n);
    for row in (0..n).rev() {
        let mut acc = b[row];
        for c in row + 1..n {
            acc -= m[[row, c]] * x[c];
        }
        x[row] = acc / m[[row, row]];
    }
    if x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}

/// A random least-squares instance: design `d` (m×t, entries in (0,1)),
/// target `x` with mixed signs so that clamping actually occurs, and the
/// corresponding normal-equation pair `(G, h)`.
pub struct RandomInstance {
    pub design: Array2<f64>,
    pub x: Array1<f64>,
    pub g: Array2<f64>,
    pub h: Array1<f64>,
}

pub fn random_instance(seed: u64, m: usize, t: usize) -> RandomInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let design = Array2::from_shape_fn((m, t), |_| rng.gen_range(0.0..1.0));
    let x = Array1::from_shape_fn(m, |_| rng.gen_range(-0.5..1.5));
    let g = design.t().dot(&design);
    let h = design.t().dot(&x);
    RandomInstance { design, x, g, h }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn oracle_matches_hand_solved_2x2() {
        // G = [[2,1],[1,2]], h = [3,3]: unconstrained solution [1,1] is
        // feasible, objective 0.5*(2+1+1+2) - 6 = -3.
        let g = array![[2.0, 1.0], [1.0, 2.0]];
        let h = array![3.0, 3.0];
        let sol = exhaustive_nnls(&g, &h);
        assert!((sol.a[0] - 1.0).abs() < 1e-12);
        assert!((sol.a[1] - 1.0).abs() < 1e-12);
        assert!((sol.objective + 3.0).abs() < 1e-12);
    }

    #[test]
    fn oracle_clamps_negative_gradient_direction() {
        // h all negative: gradient at origin is -h > 0, so a = 0 is optimal.
        let g = array![[5.0]];
        let h = array![-5.0];
        let sol = exhaustive_nnls(&g, &h);
        assert_eq!(sol.a[0], 0.0);
        assert_eq!(sol.objective, 0.0);
    }

    #[test]
    fn gauss_solver_rejects_singular() {
        let g = array![[1.0, 1.0], [1.0, 1.0]];
        let h = array![1.0, 2.0];
        assert!(gauss_solve(g, h).is_none());
    }
}
