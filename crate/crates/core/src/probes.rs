//! Supervised read-outs: a ridge map from observations to latents and a
//! logistic head on arbitrary codes.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::linalg::{all_finite, spd_solve};
use crate::{LabError, Result};

pub const DEFAULT_RIDGE_ALPHA: f64 = 1e-3;
pub const DEFAULT_LOGISTIC_L2: f64 = 1e-4;

const LOGISTIC_MAX_ITERS: usize = 500;
const LOGISTIC_GRAD_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct RidgeProbe {
    /// d_z × d_y map.
    pub b: Array2<f64>,
    pub c: Array1<f64>,
    pub alpha: f64,
}

impl RidgeProbe {
    pub fn predict(&self, y: ArrayView2<f64>) -> Array2<f64> {
        y.dot(&self.b.t()) + &self.c
    }
}

/// Ridge regression with an unpenalised intercept.
pub fn fit_ridge(y: ArrayView2<f64>, z: ArrayView2<f64>, alpha: f64) -> Result<RidgeProbe> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(LabError::invalid(format!("ridge alpha must be finite and >= 0, got {alpha}")));
    }
    if y.nrows() != z.nrows() || y.nrows() == 0 {
        return Err(LabError::invalid(format!("need matching non-empty row counts, got {} and {}", y.nrows(), z.nrows())));
    }
    let my = y.mean_axis(Axis(0)).expect("non-empty");
    let mz = z.mean_axis(Axis(0)).expect("non-empty");
    let yc = &y - &my;
    let zc = &z - &mz;
    let mut g = yc.t().dot(&yc);
    for i in 0..g.nrows() {
        g[[i, i]] += alpha;
    }
    let rhs = yc.t().dot(&zc);
    let bt = spd_solve(&g, &rhs)?;
    let b = bt.t().to_owned();
    let c = &mz - &b.dot(&my);
    if !all_finite(b.iter().chain(c.iter())) {
        return Err(LabError::numeric("ridge solution is not finite"));
    }
    Ok(RidgeProbe { b, c, alpha })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogisticProbe {
    pub a: Array1<f64>,
    pub a0: f64,
    pub iters: usize,
    pub grad_norm: f64,
}

impl LogisticProbe {
    pub fn decision(&self, h: ArrayView2<f64>) -> Array1<f64> {
        h.dot(&self.a) + self.a0
    }

    pub fn predict_proba(&self, h: ArrayView2<f64>) -> Array1<f64> {
        self.decision(h).mapv(sigmoid)
    }

    pub fn predict(&self, h: ArrayView2<f64>) -> Vec<bool> {
        self.predict_proba(h).iter().map(|&p| p > 0.5).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticConfig {
    /// Penalty on `½‖a‖²` added to the mean negative log-likelihood.
    pub l2: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig { l2: DEFAULT_LOGISTIC_L2, max_iters: LOGISTIC_MAX_ITERS, grad_tol: LOGISTIC_GRAD_TOL }
    }
}

fn sigmoid(m: f64) -> f64 {
    if m >= 0.0 {
        1.0 / (1.0 + (-m).exp())
    } else {
        let e = m.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^m)` without overflow.
fn softplus(m: f64) -> f64 {
    if m > 0.0 {
        m + (-m).exp().ln_1p()
    } else {
        m.exp().ln_1p()
    }
}

/// Penalised mean log-likelihood and its gradient at `theta = [a, a0]`;
/// the intercept is not penalised.
fn objective(x: ArrayView2<f64>, t: &Array1<f64>, theta: &Array1<f64>, l2: f64) -> (f64, Array1<f64>) {
    let d = x.ncols();
    let n = x.nrows() as f64;
    let w = theta.slice(s![..d]);
    let m = x.dot(&w) + theta[d];
    let mut ll = 0.0;
    let mut resid = Array1::zeros(m.len());
    for ((r, &mi), &ti) in resid.iter_mut().zip(m.iter()).zip(t.iter()) {
        ll += ti * mi - softplus(mi);
        *r = ti - sigmoid(mi);
    }
    let f = ll / n - 0.5 * l2 * w.dot(&w);
    let mut g = Array1::zeros(d + 1);
    g.slice_mut(s![..d]).assign(&(x.t().dot(&resid) / n - &w * l2));
    g[d] = resid.sum() / n;
    (f, g)
}

pub fn fit_logistic(h: ArrayView2<f64>, t: &[bool], l2: f64) -> Result<LogisticProbe> {
    fit_logistic_with(h, t, &LogisticConfig { l2, ..Default::default() })
}

/// Maximise the ℓ2-penalised mean log-likelihood by accelerated gradient
/// ascent with backtracking and function-value restarts.
pub fn fit_logistic_with(h: ArrayView2<f64>, t: &[bool], cfg: &LogisticConfig) -> Result<LogisticProbe> {
    let l2 = cfg.l2;
    if !(l2 >= 0.0) || !l2.is_finite() {
        return Err(LabError::invalid(format!("l2 must be finite and >= 0, got {l2}")));
    }
    if h.nrows() != t.len() {
        return Err(LabError::invalid("codes and labels differ in length"));
    }
    let n_pos = t.iter().filter(|&&v| v).count();
    if n_pos == 0 || n_pos == t.len() {
        return Err(LabError::invalid("logistic probe needs both classes in the training labels"));
    }
    if !all_finite(h.iter()) {
        return Err(LabError::numeric("codes contain non-finite entries"));
    }
    let tf: Array1<f64> = t.iter().map(|&v| if v { 1.0 } else { 0.0 }).collect();
    let d = h.ncols();
    let mut x = Array1::<f64>::zeros(d + 1);
    let (mut fx, mut gx) = objective(h, &tf, &x, l2);
    let mut v = x.clone();
    let (mut fv, mut gv) = (fx, gx.clone());
    let mut step = 1.0;
    let mut momentum = 1.0f64;
    let mut iters = 0;
    while iters < cfg.max_iters && gx.dot(&gx).sqrt() > cfg.grad_tol {
        iters += 1;
        let gv2 = gv.dot(&gv);
        let (x_new, f_new, g_new) = loop {
            let cand = &v + &(&gv * step);
            let (fc, gc) = objective(h, &tf, &cand, l2);
            if fc >= fv + 0.5 * step * gv2 || step < 1e-14 {
                break (cand, fc, gc);
            }
            step *= 0.5;
        };
        if f_new < fx {
            // Restart: drop momentum and take a plain step from x next time.
            momentum = 1.0;
            v = x.clone();
            fv = fx;
            gv = gx.clone();
            continue;
        }
        let m_next = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
        let beta = (momentum - 1.0) / m_next;
        v = &x_new + &((&x_new - &x) * beta);
        momentum = m_next;
        x = x_new;
        fx = f_new;
        gx = g_new;
        let (f2, g2) = if beta == 0.0 { (fx, gx.clone()) } else { objective(h, &tf, &v, l2) };
        fv = f2;
        gv = g2;
        step *= 1.5;
    }
    let a = x.slice(s![..d]).to_owned();
    let a0 = x[d];
    if !all_finite(a.iter()) || !a0.is_finite() {
        return Err(LabError::numeric("logistic probe diverged"));
    }
    Ok(LogisticProbe { a, a0, iters, grad_norm: gx.dot(&gx).sqrt() })
}

pub fn eval_accuracy(probe: &LogisticProbe, h: ArrayView2<f64>, t: &[bool]) -> Result<f64> {
    if h.nrows() != t.len() || t.is_empty() {
        return Err(LabError::invalid("codes and labels differ in length or are empty"));
    }
    let pred = probe.predict(h);
    Ok(pred.iter().zip(t).filter(|(p, l)| p == l).count() as f64 / t.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ridge_identity_task() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let y = Array2::from_shape_fn((200, 4), |_| rng.random::<f64>());
        let p = fit_ridge(y.view(), y.view(), 1e-10).unwrap();
        for ((i, j), &v) in p.b.indexed_iter() {
            assert!((v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-6);
        }
        assert!(p.c.iter().all(|v| v.abs() < 1e-6));
    }

    #[test]
    fn ridge_infinite_shrinkage_predicts_means() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let y = Array2::from_shape_fn((100, 3), |_| rng.random::<f64>());
        let z = Array2::from_shape_fn((100, 2), |_| rng.random::<f64>());
        let p = fit_ridge(y.view(), z.view(), 1e12).unwrap();
        let mz = z.mean_axis(Axis(0)).unwrap();
        let pred = p.predict(y.view());
        for row in pred.rows() {
            for (a, b) in row.iter().zip(mz.iter()) {
                assert!((a - b).abs() < 1e-9);
            }
        }
        assert!(fit_ridge(y.view(), z.view(), -1.0).is_err());
    }

    #[test]
    fn ridge_predictions_are_rotation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let y = Array2::from_shape_fn((150, 2), |_| rng.random::<f64>());
        let z = Array2::from_shape_fn((150, 3), |_| rng.random::<f64>());
        let th = 0.7f64;
        let r = array![[th.cos(), -th.sin()], [th.sin(), th.cos()]];
        let yr = y.dot(&r.t());
        let p1 = fit_ridge(y.view(), z.view(), 1e-3).unwrap().predict(y.view());
        let p2 = fit_ridge(yr.view(), z.view(), 1e-3).unwrap().predict(yr.view());
        assert!((&p1 - &p2).iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn separable_toy_is_fit_perfectly() {
        let h = array![[-1.0, 0.0], [-1.5, 1.0], [-2.0, -1.0], [1.0, 0.0], [1.5, 1.0], [2.0, -1.0]];
        let t = [false, false, false, true, true, true];
        let p = fit_logistic(h.view(), &t, 1e-4).unwrap();
        assert_eq!(eval_accuracy(&p, h.view(), &t).unwrap(), 1.0);
        assert!(fit_logistic(h.view(), &[true; 6], 1e-4).is_err());
    }

    #[test]
    fn independent_labels_give_chance_accuracy() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = Array2::from_shape_fn((2000, 5), |_| rng.random::<f64>());
        let t: Vec<bool> = (0..2000).map(|_| rng.random_bool(0.5)).collect();
        let p = fit_logistic(h.view(), &t, 1e-4).unwrap();
        let h2 = Array2::from_shape_fn((2000, 5), |_| rng.random::<f64>());
        let t2: Vec<bool> = (0..2000).map(|_| rng.random_bool(0.5)).collect();
        let acc = eval_accuracy(&p, h2.view(), &t2).unwrap();
        assert!((acc - 0.5).abs() <= 0.03, "accuracy {acc}");
    }

    #[test]
    fn decisions_ignore_feature_rescaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = Array2::from_shape_fn((300, 3), |_| rng.random::<f64>() - 0.5);
        let t: Vec<bool> = h.rows().into_iter().map(|r| r[0] + 0.3 * r[1] + 0.2 * (rng.random::<f64>() - 0.5) > 0.0).collect();
        let mut scaled = h.clone();
        scaled.column_mut(1).mapv_inplace(|v| v * 3.0);
        let p1 = fit_logistic(h.view(), &t, 0.0).unwrap();
        let p2 = fit_logistic(scaled.view(), &t, 0.0).unwrap();
        assert_eq!(p1.predict(h.view()), p2.predict(scaled.view()));
    }
}
