//! Dense linear-algebra helpers shared by the solvers and probes.
//!
//! Bulk products go through `ndarray` (matrixmultiply); factorizations are
//! delegated to `nalgebra`.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::{LabError, Result};

pub(crate) fn to_na(a: ArrayView2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

pub(crate) fn from_na(m: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Multiplicative margin applied to the power-iteration estimate so that the
/// derived step size stays below the true inverse Lipschitz constant.
pub const LIPSCHITZ_MARGIN: f64 = 1.01;

/// Largest eigenvalue of `DᵀD` (the squared spectral norm of `D`) by power
/// iteration: at most `max_iters` rounds, stopping once the Rayleigh
/// quotient changes by less than `tol` relative.
pub fn spectral_norm_sq(d: ArrayView2<f64>, max_iters: usize, tol: f64) -> f64 {
    let n = d.ncols();
    if n == 0 || d.nrows() == 0 {
        return 0.0;
    }
    // deterministic start, not orthogonal to any coordinate axis
    let mut v = Array1::from_shape_fn(n, |j| 1.0 + 0.01 * ((j % 7) as f64));
    v /= v.dot(&v).sqrt();
    let mut est = 0.0;
    for _ in 0..max_iters {
        let w = d.t().dot(&d.dot(&v));
        let next = v.dot(&w);
        let norm = w.dot(&w).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        v = w / norm;
        let converged = (next - est).abs() <= tol * next.abs().max(f64::MIN_POSITIVE);
        est = next;
        if converged {
            break;
        }
    }
    est
}

/// Solve `G X = R` for symmetric positive (semi-)definite `G` by Cholesky.
/// A failing factorization is retried with a growing diagonal jitter.
pub fn spd_solve(g: &Array2<f64>, rhs: &Array2<f64>) -> Result<Array2<f64>> {
    let n = g.nrows();
    if g.ncols() != n || rhs.nrows() != n {
        return Err(LabError::invalid("spd_solve: shape mismatch"));
    }
    let scale = (0..n).map(|i| g[[i, i]].abs()).fold(0.0, f64::max).max(1.0);
    let b = to_na(rhs.view());
    let mut jitter = 0.0;
    for _ in 0..8 {
        let mut m = to_na(g.view());
        for i in 0..n {
            m[(i, i)] += jitter;
        }
        if let Some(ch) = m.cholesky() {
            return Ok(from_na(&ch.solve(&b)));
        }
        jitter = if jitter == 0.0 { 1e-12 * scale } else { jitter * 100.0 };
    }
    Err(LabError::numeric("Cholesky factorization failed"))
}

/// Minimum-norm least-squares solution of `A x ≈ b` via SVD.
/// Returns the solution and the numerical rank of `A`.
pub fn lstsq_min_norm(a: ArrayView2<f64>, b: ArrayView1<f64>) -> Result<(Array1<f64>, usize)> {
    let (m, n) = a.dim();
    if b.len() != m {
        return Err(LabError::invalid("lstsq: shape mismatch"));
    }
    if n == 0 {
        return Ok((Array1::zeros(0), 0));
    }
    let svd = to_na(a).svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cutoff = f64::EPSILON * (m.max(n) as f64) * smax;
    let rank = svd.singular_values.iter().filter(|&&s| s > cutoff).count();
    let rhs = nalgebra::DVector::from_iterator(m, b.iter().cloned());
    let x = svd
        .solve(&rhs, cutoff)
        .map_err(|e| LabError::numeric(format!("svd solve: {e}")))?;
    Ok((Array1::from_iter(x.iter().cloned()), rank))
}

pub fn all_finite<'a>(xs: impl IntoIterator<Item = &'a f64>) -> bool {
    xs.into_iter().all(|x| x.is_finite())
}

pub fn column_norms(m: ArrayView2<f64>) -> Array1<f64> {
    m.columns().into_iter().map(|c| c.dot(&c).sqrt()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn power_iteration_matches_svd() {
        let d = array![[3.0, 1.0, 0.0], [1.0, 2.0, 1.0]];
        let est = spectral_norm_sq(d.view(), 200, 1e-14);
        let smax = to_na(d.view()).singular_values().max();
        assert!((est - smax * smax).abs() < 1e-9);
    }

    #[test]
    fn spd_solve_recovers_known_solution() {
        let g = array![[4.0, 1.0], [1.0, 3.0]];
        let x = array![[1.0], [-2.0]];
        let r = g.dot(&x);
        let got = spd_solve(&g, &r).unwrap();
        assert!((&got - &x).iter().all(|e| e.abs() < 1e-12));
    }

    #[test]
    fn min_norm_lstsq_on_rank_deficient_system() {
        // duplicated column: min-norm splits the weight evenly
        let a = array![[1.0, 1.0], [0.0, 0.0]];
        let b = array![2.0, 0.0];
        let (x, rank) = lstsq_min_norm(a.view(), b.view()).unwrap();
        assert_eq!(rank, 1);
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
    }
}
