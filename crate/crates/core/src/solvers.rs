//! Per-sample sparse inference against a fixed dictionary.
//!
//! Codes minimise the Lasso objective `½‖y − D h‖² + λ‖h‖₁`. [`FistaPlan`]
//! caches `DᵀD` and the step size for one dictionary so that repeated solves
//! only pay for the iteration itself.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::{all_finite, lstsq_min_norm, spectral_norm_sq, LIPSCHITZ_MARGIN};
use crate::{LabError, Result};

/// Entries with magnitude above this count as active.
pub const SUPPORT_THRESHOLD: f64 = 1e-8;

const POWER_ITERS: usize = 50;
const POWER_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepSize {
    Auto,
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub lambda: f64,
    pub max_iters: usize,
    pub step_size: StepSize,
    pub tol: f64,
    pub momentum: bool,
    /// Reset the momentum whenever the step direction stops agreeing with
    /// the previous update (gradient-scheme adaptive restart).
    pub restart: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            lambda: 0.1,
            max_iters: 1000,
            step_size: StepSize::Auto,
            tol: 1e-7,
            momentum: true,
            restart: true,
        }
    }
}

impl SolverConfig {
    pub fn with_lambda(lambda: f64) -> Self {
        SolverConfig { lambda, ..Default::default() }
    }

    pub fn iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(LabError::invalid(format!("lambda must be finite and >= 0, got {}", self.lambda)));
        }
        if !(self.tol >= 0.0) {
            return Err(LabError::invalid(format!("tol must be >= 0, got {}", self.tol)));
        }
        if let StepSize::Fixed(eta) = self.step_size {
            if !(eta > 0.0) || !eta.is_finite() {
                return Err(LabError::invalid(format!("step size must be positive, got {eta}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SparseCode {
    pub values: Array1<f64>,
    pub support: Vec<usize>,
    pub objective: f64,
    pub iters_run: usize,
    /// Set by [`lstsq_on_support`] when the sub-dictionary lost rank and the
    /// minimum-norm solution was returned.
    pub rank_deficient: bool,
}

impl SparseCode {
    fn new(values: Array1<f64>, objective: f64, iters_run: usize) -> Self {
        let support = support_of(values.view());
        SparseCode { values, support, objective, iters_run, rank_deficient: false }
    }
}

pub fn support_of(h: ArrayView1<f64>) -> Vec<usize> {
    h.iter()
        .enumerate()
        .filter(|(_, v)| v.abs() > SUPPORT_THRESHOLD)
        .map(|(j, _)| j)
        .collect()
}

pub fn soft_threshold(v: ArrayView1<f64>, tau: f64) -> Array1<f64> {
    v.mapv(|x| shrink(x, tau))
}

#[inline]
fn shrink(x: f64, tau: f64) -> f64 {
    if x > tau {
        x - tau
    } else if x < -tau {
        x + tau
    } else {
        0.0
    }
}

pub fn lasso_objective(y: ArrayView1<f64>, d: ArrayView2<f64>, h: ArrayView1<f64>, lambda: f64) -> f64 {
    let r = &y - &d.dot(&h);
    0.5 * r.dot(&r) + lambda * h.iter().map(|v| v.abs()).sum::<f64>()
}

fn check_finite_dict(d: ArrayView2<f64>) -> Result<()> {
    if !all_finite(d.iter()) {
        return Err(LabError::numeric("dictionary contains non-finite entries"));
    }
    Ok(())
}

/// Cached quantities for solving many Lasso problems against one dictionary.
#[derive(Clone, Debug)]
pub struct FistaPlan {
    dict: Array2<f64>,
    gram: Array2<f64>,
    eta: f64,
}

impl FistaPlan {
    pub fn new(d: ArrayView2<f64>, step: StepSize) -> Result<Self> {
        check_finite_dict(d)?;
        let eta = match step {
            StepSize::Fixed(eta) => eta,
            StepSize::Auto => {
                let l = spectral_norm_sq(d, POWER_ITERS, POWER_TOL);
                if l > 0.0 {
                    1.0 / (LIPSCHITZ_MARGIN * l)
                } else {
                    1.0
                }
            }
        };
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(LabError::invalid(format!("step size must be positive, got {eta}")));
        }
        Ok(FistaPlan { dict: d.to_owned(), gram: d.t().dot(&d), eta })
    }

    pub fn step_size(&self) -> f64 {
        self.eta
    }

    pub fn dictionary(&self) -> ArrayView2<'_, f64> {
        self.dict.view()
    }

    pub fn code_dim(&self) -> usize {
        self.dict.ncols()
    }

    /// `G q`, skipping zero coordinates of `q`.
    fn gram_times(&self, q: &Array1<f64>, out: &mut Array1<f64>) {
        let nnz = q.iter().filter(|&&v| v != 0.0).count();
        if 4 * nnz < q.len() {
            out.fill(0.0);
            for (j, &qj) in q.iter().enumerate() {
                if qj != 0.0 {
                    out.scaled_add(qj, &self.gram.column(j));
                }
            }
        } else {
            ndarray::linalg::general_mat_vec_mul(1.0, &self.gram, q, 0.0, out);
        }
    }

    /// Solve one Lasso problem. The iteration is
    /// `h ← S_{ηλ}(q − η(DᵀD q − Dᵀy))`, i.e. `S_{ηλ}(W q + b)` with
    /// `W = I − ηDᵀD` and `b = ηDᵀy`.
    pub fn solve(&self, y: ArrayView1<f64>, cfg: &SolverConfig, init: Option<ArrayView1<f64>>) -> Result<SparseCode> {
        cfg.validate()?;
        if y.len() != self.dict.nrows() {
            return Err(LabError::invalid(format!(
                "observation has length {}, dictionary has {} rows",
                y.len(),
                self.dict.nrows()
            )));
        }
        if !all_finite(y.iter()) {
            return Err(LabError::numeric("observation contains non-finite entries"));
        }
        let n = self.code_dim();
        let mut h = match init {
            Some(h0) => {
                if h0.len() != n {
                    return Err(LabError::invalid(format!("init has length {}, expected {n}", h0.len())));
                }
                if !all_finite(h0.iter()) {
                    return Err(LabError::numeric("initial code contains non-finite entries"));
                }
                h0.to_owned()
            }
            None => Array1::zeros(n),
        };
        let eta = self.eta;
        let tau = eta * cfg.lambda;
        let b = self.dict.t().dot(&y) * eta;
        let mut q = h.clone();
        let mut gq = Array1::zeros(n);
        let mut next = Array1::zeros(n);
        let mut t = 1.0f64;
        let mut iters = 0;
        for _ in 0..cfg.max_iters {
            iters += 1;
            self.gram_times(&q, &mut gq);
            Zip::from(&mut next)
                .and(&q)
                .and(&gq)
                .and(&b)
                .for_each(|o, &qv, &g, &bv| *o = shrink(qv - eta * g + bv, tau));
            let mut diff2 = 0.0;
            let mut norm2 = 0.0;
            for (a, c) in next.iter().zip(h.iter()) {
                diff2 += (a - c) * (a - c);
                norm2 += c * c;
            }
            let reset = cfg.restart
                && cfg.momentum
                && Zip::from(&q).and(&next).and(&h).fold(0.0, |acc, &qv, &a, &c| acc + (qv - a) * (a - c)) > 0.0;
            if reset {
                q.assign(&next);
                t = 1.0;
            } else if cfg.momentum {
                let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
                let beta = (t - 1.0) / t_next;
                Zip::from(&mut q).and(&next).and(&h).for_each(|qv, &a, &c| *qv = a + beta * (a - c));
                t = t_next;
            } else {
                q.assign(&next);
            }
            std::mem::swap(&mut h, &mut next);
            if diff2.sqrt() / norm2.sqrt().max(1.0) < cfg.tol {
                break;
            }
        }
        if !all_finite(h.iter()) {
            return Err(LabError::numeric("FISTA iterate diverged"));
        }
        let obj = lasso_objective(y, self.dict.view(), h.view(), cfg.lambda);
        Ok(SparseCode::new(h, obj, iters))
    }

    /// Solve one problem per row of `y`, optionally warm-started from the
    /// matching row of `init`. Rows are independent and solved in parallel.
    pub fn solve_batch(&self, y: ArrayView2<f64>, cfg: &SolverConfig, init: Option<ArrayView2<f64>>) -> Result<CodeBatch> {
        if let Some(h0) = init {
            if h0.dim() != (y.nrows(), self.code_dim()) {
                return Err(LabError::invalid(format!(
                    "init has shape {:?}, expected ({}, {})",
                    h0.dim(),
                    y.nrows(),
                    self.code_dim()
                )));
            }
        }
        let codes: Vec<SparseCode> = (0..y.nrows())
            .into_par_iter()
            .map(|i| self.solve(y.row(i), cfg, init.as_ref().map(|h0| h0.row(i))))
            .collect::<Result<_>>()?;
        Ok(CodeBatch::from_codes(&codes, self.code_dim()))
    }
}

/// Codes for a batch of observations, one sample per row.
#[derive(Clone, Debug, PartialEq)]
pub struct CodeBatch {
    pub codes: Array2<f64>,
    pub iters: Vec<usize>,
    pub objectives: Vec<f64>,
}

impl CodeBatch {
    fn from_codes(codes: &[SparseCode], n: usize) -> Self {
        let mut h = Array2::zeros((codes.len(), n));
        for (mut row, c) in h.rows_mut().into_iter().zip(codes) {
            row.assign(&c.values);
        }
        CodeBatch {
            codes: h,
            iters: codes.iter().map(|c| c.iters_run).collect(),
            objectives: codes.iter().map(|c| c.objective).collect(),
        }
    }

    pub fn mean_iters(&self) -> f64 {
        if self.iters.is_empty() {
            return 0.0;
        }
        self.iters.iter().sum::<usize>() as f64 / self.iters.len() as f64
    }
}

pub fn fista(y: ArrayView1<f64>, d: ArrayView2<f64>, cfg: &SolverConfig, init: Option<ArrayView1<f64>>) -> Result<SparseCode> {
    cfg.validate()?;
    FistaPlan::new(d, cfg.step_size)?.solve(y, cfg, init)
}

pub fn fista_batch(y: ArrayView2<f64>, d: ArrayView2<f64>, cfg: &SolverConfig, init: Option<ArrayView2<f64>>) -> Result<CodeBatch> {
    cfg.validate()?;
    FistaPlan::new(d, cfg.step_size)?.solve_batch(y, cfg, init)
}

/// Selected atoms, their coefficients and every intermediate residual of a
/// matching-pursuit run. `residuals[0]` is the input and `residuals[t]` the
/// residual after step `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct MpTrace {
    pub atoms: Vec<usize>,
    pub coeffs: Vec<f64>,
    pub residuals: Vec<Array1<f64>>,
}

impl MpTrace {
    pub fn code(&self, d_h: usize) -> Array1<f64> {
        let mut h = Array1::zeros(d_h);
        for (&j, &c) in self.atoms.iter().zip(&self.coeffs) {
            h[j] += c;
        }
        h
    }
}

/// Greedy pursuit: pick `argmax_j d_jᵀ r` (ties to the smallest index), add
/// the projection to `h_j`, subtract it from the residual. Atoms may be
/// picked more than once. Stops early once the residual is exactly zero.
pub fn mp_trace(r0: ArrayView1<f64>, d: ArrayView2<f64>, steps: usize) -> MpTrace {
    let mut r = r0.to_owned();
    let mut trace = MpTrace { atoms: Vec::with_capacity(steps), coeffs: Vec::with_capacity(steps), residuals: vec![r.clone()] };
    for _ in 0..steps {
        if r.iter().all(|&v| v == 0.0) {
            break;
        }
        let scores = d.t().dot(&r);
        let mut best = 0;
        for (j, &v) in scores.iter().enumerate() {
            if v > scores[best] {
                best = j;
            }
        }
        let c = scores[best];
        r.scaled_add(-c, &d.column(best));
        trace.atoms.push(best);
        trace.coeffs.push(c);
        trace.residuals.push(r.clone());
    }
    trace
}

pub fn matching_pursuit(y: ArrayView1<f64>, d: ArrayView2<f64>, steps: usize) -> Result<SparseCode> {
    if steps == 0 {
        return Err(LabError::invalid("matching pursuit needs at least one step"));
    }
    if y.len() != d.nrows() {
        return Err(LabError::invalid(format!("observation has length {}, dictionary has {} rows", y.len(), d.nrows())));
    }
    check_finite_dict(d)?;
    let trace = mp_trace(y, d, steps);
    let h = trace.code(d.ncols());
    let r = trace.residuals.last().expect("residual trace starts with the input");
    Ok(SparseCode::new(h, 0.5 * r.dot(r), trace.atoms.len()))
}

/// Minimise `‖y − D h‖₂` over codes supported on `support`.
pub fn lstsq_on_support(y: ArrayView1<f64>, d: ArrayView2<f64>, support: &[usize]) -> Result<SparseCode> {
    if y.len() != d.nrows() {
        return Err(LabError::invalid(format!("observation has length {}, dictionary has {} rows", y.len(), d.nrows())));
    }
    if let Some(&j) = support.iter().find(|&&j| j >= d.ncols()) {
        return Err(LabError::invalid(format!("support index {j} out of range for {} atoms", d.ncols())));
    }
    let mut h = Array1::zeros(d.ncols());
    let mut rank_deficient = false;
    if !support.is_empty() {
        let sub = d.select(Axis(1), support);
        let (coef, rank) = lstsq_min_norm(sub.view(), y)?;
        rank_deficient = rank < support.len();
        for (&j, &c) in support.iter().zip(coef.iter()) {
            h[j] = c;
        }
    }
    let r = &y - &d.dot(&h);
    let mut code = SparseCode::new(h, 0.5 * r.dot(&r), 1);
    code.rank_deficient = rank_deficient;
    Ok(code)
}

/// Refit magnitudes row by row on the support of each row of `h`.
pub fn lstsq_refit_batch(y: ArrayView2<f64>, d: ArrayView2<f64>, h: ArrayView2<f64>) -> Result<Array2<f64>> {
    let rows: Vec<Array1<f64>> = (0..y.nrows())
        .into_par_iter()
        .map(|i| lstsq_on_support(y.row(i), d, &support_of(h.row(i))).map(|c| c.values))
        .collect::<Result<_>>()?;
    let mut out = Array2::zeros((y.nrows(), d.ncols()));
    for (mut row, v) in out.rows_mut().into_iter().zip(rows) {
        row.assign(&v);
    }
    Ok(out)
}

/// Run [`matching_pursuit`] on every row of `y`.
pub fn mp_batch(y: ArrayView2<f64>, d: ArrayView2<f64>, steps: usize) -> Result<Array2<f64>> {
    let mut out = Array2::zeros((y.nrows(), d.ncols()));
    for (i, mut row) in out.rows_mut().into_iter().enumerate() {
        row.assign(&matching_pursuit(y.row(i), d, steps)?.values);
    }
    Ok(out)
}

/// Largest dictionary width accepted by [`exhaustive_lasso`].
pub const EXHAUSTIVE_MAX_ATOMS: usize = 20;

/// Exact Lasso minimiser for tiny dictionaries by enumeration.
///
/// For every support `S` with `|S| ≤ max_support` and every sign vector `s`
/// the restricted objective is a quadratic minimised by
/// `D_Sᵀ D_S h = D_Sᵀ y − λ s`. Sign-consistent candidates are scored by the
/// full objective and the best one is returned. With `max_support ≥ d_y`
/// this finds the global minimiser whenever it is unique.
pub fn exhaustive_lasso(y: ArrayView1<f64>, d: ArrayView2<f64>, lambda: f64, max_support: usize) -> Result<SparseCode> {
    let n = d.ncols();
    if n > EXHAUSTIVE_MAX_ATOMS {
        return Err(LabError::invalid(format!("exhaustive search supports at most {EXHAUSTIVE_MAX_ATOMS} atoms, got {n}")));
    }
    if y.len() != d.nrows() {
        return Err(LabError::invalid(format!("observation has length {}, dictionary has {} rows", y.len(), d.nrows())));
    }
    if !(lambda >= 0.0) {
        return Err(LabError::invalid(format!("lambda must be >= 0, got {lambda}")));
    }
    let gram = d.t().dot(&d);
    let corr = d.t().dot(&y);
    let yy = y.dot(&y);
    let objective = |idx: &[usize], h: &[f64]| {
        let mut quad = 0.0;
        let mut lin = 0.0;
        let mut l1 = 0.0;
        for (a, &i) in idx.iter().enumerate() {
            lin += corr[i] * h[a];
            l1 += h[a].abs();
            for (b, &j) in idx.iter().enumerate() {
                quad += h[a] * gram[[i, j]] * h[b];
            }
        }
        0.5 * yy - lin + 0.5 * quad + lambda * l1
    };
    let mut best_idx: Vec<usize> = Vec::new();
    let mut best_h: Vec<f64> = Vec::new();
    let mut best_obj = 0.5 * yy;
    for mask in 1u32..(1u32 << n) {
        let size = mask.count_ones() as usize;
        if size > max_support {
            continue;
        }
        let idx: Vec<usize> = (0..n).filter(|&j| mask & (1 << j) != 0).collect();
        let sub = nalgebra::DMatrix::from_fn(size, size, |a, b| gram[[idx[a], idx[b]]]);
        let Some(chol) = sub.cholesky() else { continue };
        for signs in 0u32..(1u32 << size) {
            let s = |a: usize| if signs & (1 << a) != 0 { 1.0 } else { -1.0 };
            let rhs = nalgebra::DVector::from_fn(size, |a, _| corr[idx[a]] - lambda * s(a));
            let h = chol.solve(&rhs);
            if (0..size).all(|a| h[a] * s(a) > 0.0) {
                let hv: Vec<f64> = h.iter().copied().collect();
                let obj = objective(&idx, &hv);
                if obj < best_obj {
                    best_obj = obj;
                    best_idx = idx.clone();
                    best_h = hv;
                }
            }
        }
    }
    let mut values = Array1::zeros(n);
    for (&j, &v) in best_idx.iter().zip(&best_h) {
        values[j] = v;
    }
    Ok(SparseCode::new(values, best_obj.max(0.0), 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn soft_threshold_examples() {
        assert_eq!(soft_threshold(array![0.0, 0.0].view(), 1.0), array![0.0, 0.0]);
        assert_eq!(soft_threshold(array![3.0, -2.0, 0.5].view(), 1.0), array![2.0, -1.0, 0.0]);
        assert_eq!(soft_threshold(array![-1.75].view(), 0.0), array![-1.75]);
    }

    #[test]
    fn identity_dictionary_gives_soft_threshold() {
        let d = Array2::eye(3);
        let y = array![3.0, -2.0, 0.5];
        let code = fista(y.view(), d.view(), &SolverConfig::with_lambda(1.0), None).unwrap();
        for (a, b) in code.values.iter().zip([2.0, -1.0, 0.0]) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
        assert_eq!(code.support, vec![0, 1]);
        for j in 0..3 {
            for delta in [-0.01, 0.01] {
                let mut h = code.values.clone();
                h[j] += delta;
                assert!(lasso_objective(y.view(), d.view(), h.view(), 1.0) > code.objective);
            }
        }
    }

    #[test]
    fn orthonormal_unregularised_fits_exactly() {
        let theta = 0.3f64;
        let d = array![[theta.cos(), -theta.sin()], [theta.sin(), theta.cos()]];
        let y = array![0.7, -1.2];
        let cfg = SolverConfig { lambda: 0.0, max_iters: 200, tol: 0.0, ..Default::default() };
        let code = fista(y.view(), d.view(), &cfg, None).unwrap();
        let r = &y - &d.dot(&code.values);
        assert!(r.dot(&r).sqrt() <= 1e-8);
    }

    #[test]
    fn exhaustive_matches_soft_threshold_on_identity() {
        let d = Array2::eye(3);
        let code = exhaustive_lasso(array![3.0, -2.0, 0.5].view(), d.view(), 1.0, 3).unwrap();
        for (a, b) in code.values.iter().zip([2.0, -1.0, 0.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let d = Array2::eye(2);
        let y = array![1.0, f64::NAN];
        assert!(matches!(fista(y.view(), d.view(), &SolverConfig::default(), None), Err(LabError::Numeric(_))));
        let y = array![1.0, 1.0];
        assert!(matches!(
            fista(y.view(), d.view(), &SolverConfig::with_lambda(-1.0), None),
            Err(LabError::InvalidArgument(_))
        ));
    }

    #[test]
    fn matching_pursuit_examples() {
        let d = Array2::eye(3);
        let code = matching_pursuit(array![2.0, 1.0, 0.0].view(), d.view(), 2).unwrap();
        assert_eq!(code.values, array![2.0, 1.0, 0.0]);

        let rho: f64 = 0.5;
        let d = array![[1.0, rho], [0.0, (1.0 - rho * rho).sqrt()]];
        let y = &d.column(0) * 1.0 + &d.column(1) * 0.5;
        let code = matching_pursuit(y.view(), d.view(), 1).unwrap();
        assert!((code.values[0] - 1.25).abs() < 1e-12);

        let code = matching_pursuit(array![0.0, 0.0].view(), d.view(), 5).unwrap();
        assert_eq!(code.values, array![0.0, 0.0]);
        assert_eq!(code.iters_run, 0);
    }

    #[test]
    fn matching_pursuit_tie_goes_to_smallest_index() {
        let d = Array2::eye(2);
        let code = matching_pursuit(array![1.0, 1.0].view(), d.view(), 1).unwrap();
        assert_eq!(code.support, vec![0]);
    }

    #[test]
    fn lstsq_support_cases() {
        let d = array![[1.0, 0.0, 0.6], [0.0, 1.0, 0.8], [0.0, 0.0, 0.0]];
        let y = array![2.0, -1.0, 0.0];
        let code = lstsq_on_support(y.view(), d.view(), &[0, 1]).unwrap();
        assert!((code.values[0] - 2.0).abs() < 1e-12 && (code.values[1] + 1.0).abs() < 1e-12);
        assert_eq!(code.values[2], 0.0);
        assert!(!code.rank_deficient);

        let empty = lstsq_on_support(y.view(), d.view(), &[]).unwrap();
        assert_eq!(empty.values, Array1::<f64>::zeros(3));
        assert!((empty.objective - 0.5 * 5.0).abs() < 1e-12);

        let dup = array![[1.0, 1.0], [0.0, 0.0]];
        let code = lstsq_on_support(array![2.0, 0.0].view(), dup.view(), &[0, 1]).unwrap();
        assert!(code.rank_deficient);
        assert!((code.values[0] - 1.0).abs() < 1e-12 && (code.values[1] - 1.0).abs() < 1e-12);
    }

    fn unit_columns(m: usize, n: usize, raw: Vec<f64>) -> Array2<f64> {
        let mut d = Array2::from_shape_vec((m, n), raw).unwrap();
        for mut c in d.columns_mut() {
            let norm = c.dot(&c).sqrt().max(1e-12);
            c /= norm;
        }
        d
    }

    proptest! {
        #[test]
        fn soft_threshold_is_odd_and_nonexpansive(
            v in prop::collection::vec(-10.0..10.0f64, 1..20),
            w in prop::collection::vec(-10.0..10.0f64, 1..20),
            tau in 0.0..5.0f64,
        ) {
            let n = v.len().min(w.len());
            let a = Array1::from(v[..n].to_vec());
            let b = Array1::from(w[..n].to_vec());
            let sa = soft_threshold(a.view(), tau);
            let neg = soft_threshold((-&a).view(), tau);
            prop_assert_eq!(&neg, &(-&sa));
            let sb = soft_threshold(b.view(), tau);
            let lhs = (&sa - &sb).mapv(|x| x * x).sum().sqrt();
            let rhs = (&a - &b).mapv(|x| x * x).sum().sqrt();
            prop_assert!(lhs <= rhs + 1e-12);
        }

        #[test]
        fn mp_residual_never_grows(raw in prop::collection::vec(-1.0..1.0f64, 48), y in prop::collection::vec(-2.0..2.0f64, 4)) {
            let d = unit_columns(4, 12, raw);
            let y = Array1::from(y);
            let tr = mp_trace(y.view(), d.view(), 10);
            for w in tr.residuals.windows(2) {
                prop_assert!(w[1].dot(&w[1]) <= w[0].dot(&w[0]) + 1e-12);
            }
        }

        #[test]
        fn fista_final_objective_not_above_start(
            raw in prop::collection::vec(-1.0..1.0f64, 60),
            y in prop::collection::vec(-2.0..2.0f64, 5),
            h0 in prop::collection::vec(-1.0..1.0f64, 12),
            lambda in 0.01..0.5f64,
        ) {
            let d = unit_columns(5, 12, raw);
            let y = Array1::from(y);
            let h0 = Array1::from(h0);
            let start = lasso_objective(y.view(), d.view(), h0.view(), lambda);
            let cfg = SolverConfig::with_lambda(lambda).iters(300);
            let code = fista(y.view(), d.view(), &cfg, Some(h0.view())).unwrap();
            prop_assert!(code.objective <= start + 1e-10);
            prop_assert!(code.objective >= 0.0);
        }

        #[test]
        fn warm_and_cold_starts_agree(
            raw in prop::collection::vec(-1.0..1.0f64, 16 * 24),
            coeffs in prop::collection::vec(0.2..1.0f64, 2),
            atoms in prop::collection::vec(0usize..24, 2),
            h0 in prop::collection::vec(-1.0..1.0f64, 24),
        ) {
            let d = unit_columns(16, 24, raw);
            let mut z = Array1::zeros(24);
            for (&j, &c) in atoms.iter().zip(&coeffs) {
                z[j] += c;
            }
            let y = d.dot(&z);
            let cfg = SolverConfig::with_lambda(0.1).iters(100);
            let cold = fista(y.view(), d.view(), &cfg, None).unwrap();
            let warm = fista(y.view(), d.view(), &cfg, Some(Array1::from(h0).view())).unwrap();
            let gap = (&cold.values - &warm.values).mapv(|x| x * x).sum().sqrt();
            prop_assert!(gap <= 1e-4, "gap {}", gap);
        }

        #[test]
        fn ista_objective_is_monotone(
            raw in prop::collection::vec(-1.0..1.0f64, 40),
            y in prop::collection::vec(-2.0..2.0f64, 4),
            lambda in 0.01..0.5f64,
        ) {
            let d = unit_columns(4, 10, raw);
            let y = Array1::from(y);
            let plan = FistaPlan::new(d.view(), StepSize::Auto).unwrap();
            let mut h = Array1::zeros(10);
            let mut prev = lasso_objective(y.view(), d.view(), h.view(), lambda);
            for _ in 0..30 {
                let cfg = SolverConfig { lambda, max_iters: 1, momentum: false, tol: 0.0, ..Default::default() };
                h = plan.solve(y.view(), &cfg, Some(h.view())).unwrap().values;
                let obj = lasso_objective(y.view(), d.view(), h.view(), lambda);
                prop_assert!(obj <= prev + 1e-10);
                prev = obj;
            }
        }
    }
}
