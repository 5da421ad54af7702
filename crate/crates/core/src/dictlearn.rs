//! Dictionary learning by alternating minimisation.
//!
//! Each round solves the Lasso for every sample under the current dictionary
//! and then refits the dictionary to those codes under the constraint
//! `‖W[:, j]‖₂ ≤ 1`.

use std::io::Write;
use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::io::write_matrix_csv;
use crate::linalg::{all_finite, spd_solve};
use crate::metrics::dict_diagnostics;
use crate::rng::stream;
use crate::solvers::{FistaPlan, SolverConfig};
use crate::synthgen::MixingMatrix;
use crate::{seed_of, LabError, Result};

/// Ridge added to `HᵀH` in the closed-form dictionary step.
pub const DICT_RIDGE: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub enum DictInit {
    Random(u64),
    FromDictionary(Array2<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct DlConfig {
    pub d_h: usize,
    pub rounds: usize,
    /// Inference settings for the coding step; `inner.lambda` is the ℓ1
    /// weight of the joint objective.
    pub inner: SolverConfig,
    pub init: DictInit,
    /// Atoms whose absolute cosine with an earlier atom exceeds this value
    /// are re-seeded from the worst-reconstructed residuals between rounds.
    /// `None` disables re-seeding.
    pub replace_coherence: Option<f64>,
}

/// Default coherence threshold for atom re-seeding.
pub const DEFAULT_REPLACE_COHERENCE: f64 = 0.7;

impl DlConfig {
    pub fn new(d_h: usize, lambda: f64, rounds: usize, init: DictInit) -> Self {
        DlConfig {
            d_h,
            rounds,
            inner: SolverConfig::with_lambda(lambda).iters(100),
            init,
            replace_coherence: Some(DEFAULT_REPLACE_COHERENCE),
        }
    }

    pub fn lambda(&self) -> f64 {
        self.inner.lambda
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundStats {
    pub round: usize,
    /// Mean squared reconstruction error `mean ‖y − W h‖²` after the update.
    pub loss: f64,
    pub cosine: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LearnedDictionary {
    pub w: Array2<f64>,
    pub round_trace: Vec<RoundStats>,
}

impl LearnedDictionary {
    /// Write `{stem}.csv` with the matrix and `{stem}.json` with the last
    /// round's statistics.
    pub fn save_checkpoint(&self, stem: &Path) -> Result<()> {
        write_matrix_csv(&stem.with_extension("csv"), self.w.view())?;
        let last = self.round_trace.last().copied().unwrap_or(RoundStats { round: 0, loss: f64::NAN, cosine: None });
        let json = serde_json::to_string_pretty(&last).map_err(|e| LabError::Format(e.to_string()))?;
        let mut f = std::fs::File::create(stem.with_extension("json"))?;
        writeln!(f, "{json}")?;
        Ok(())
    }
}

pub fn random_dictionary(d_y: usize, d_h: usize, seed: u64) -> Array2<f64> {
    let mut rng = stream(seed_of!(seed, "dictionary-init"));
    let mut w = Array2::from_shape_simple_fn((d_y, d_h), || rng.sample::<f64, _>(StandardNormal));
    normalise_columns(&mut w);
    w
}

pub fn normalise_columns(w: &mut Array2<f64>) {
    for mut c in w.columns_mut() {
        let n = c.dot(&c).sqrt();
        if n > 0.0 {
            c /= n;
        }
    }
}

fn project_columns(w: &mut Array2<f64>) {
    for mut c in w.columns_mut() {
        let n = c.dot(&c).sqrt();
        if n > 1.0 {
            c /= n;
        }
    }
}

/// Sum of squared residuals `‖Y − H Wᵀ‖_F²`.
pub fn reconstruction_loss(y: ArrayView2<f64>, h: ArrayView2<f64>, w: ArrayView2<f64>) -> f64 {
    let r = &y - &h.dot(&w.t());
    r.iter().map(|v| v * v).sum()
}

/// One block-coordinate sweep over the used columns; each column step is
/// the exact minimiser over the unit ball with the others held fixed.
fn bcd_sweep(y: ArrayView2<f64>, h: ArrayView2<f64>, w: &mut Array2<f64>, used: &[usize]) {
    let gram = h.t().dot(&h);
    let yth = y.t().dot(&h);
    for &j in used {
        let hjj = gram[[j, j]];
        let mut target = yth.column(j).to_owned();
        let wg = w.dot(&gram.column(j));
        target -= &wg;
        target.scaled_add(hjj, &w.column(j));
        target /= hjj;
        let n = target.dot(&target).sqrt();
        if n > 1.0 {
            target /= n;
        }
        w.column_mut(j).assign(&target);
    }
}

/// Least-squares dictionary step for fixed codes followed by projection of
/// each column onto the unit ball. Columns whose code is identically zero
/// keep their previous value. If the projected solution does not improve
/// on `w_prev`, a block-coordinate sweep from `w_prev` is returned instead,
/// so the loss never increases.
pub fn update_dictionary(y: ArrayView2<f64>, h: ArrayView2<f64>, w_prev: ArrayView2<f64>) -> Result<Array2<f64>> {
    if y.nrows() != h.nrows() || w_prev.nrows() != y.ncols() || w_prev.ncols() != h.ncols() {
        return Err(LabError::invalid(format!(
            "shape mismatch: Y {:?}, H {:?}, W {:?}",
            y.dim(),
            h.dim(),
            w_prev.dim()
        )));
    }
    let used: Vec<usize> = (0..h.ncols()).filter(|&j| h.column(j).iter().any(|&v| v != 0.0)).collect();
    let mut w = w_prev.to_owned();
    if used.is_empty() {
        return Ok(w);
    }
    let hu = h.select(Axis(1), &used);
    let mut g = hu.t().dot(&hu);
    for i in 0..g.nrows() {
        g[[i, i]] += DICT_RIDGE;
    }
    let rhs = hu.t().dot(&y);
    let wu_t = spd_solve(&g, &rhs)?;
    for (col, &j) in used.iter().enumerate() {
        w.column_mut(j).assign(&wu_t.row(col));
    }
    project_columns(&mut w);
    if !all_finite(w.iter()) {
        return Err(LabError::numeric("dictionary update produced non-finite entries"));
    }
    let before = reconstruction_loss(y, h, w_prev);
    if reconstruction_loss(y, h, w.view()) > before {
        let mut fallback = w_prev.to_owned();
        bcd_sweep(y, h, &mut fallback, &used);
        return Ok(fallback);
    }
    Ok(w)
}

/// Re-seed every atom that nearly duplicates an earlier one with the
/// normalised residual of a poorly reconstructed sample, zeroing its codes.
/// Returns the number of atoms replaced.
pub fn replace_coherent_atoms(y: ArrayView2<f64>, h: &mut Array2<f64>, w: &mut Array2<f64>, tau: f64) -> usize {
    let resid = &y - &h.dot(&w.t());
    let mut worst: Vec<(f64, usize)> = resid.rows().into_iter().enumerate().map(|(i, r)| (r.dot(&r), i)).collect();
    worst.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut candidates = worst.into_iter().filter(|&(e, _)| e > 0.0).map(|(_, i)| i);
    let mut replaced = 0;
    for j in 1..w.ncols() {
        let nj = w.column(j).dot(&w.column(j)).sqrt();
        let coherent = (0..j).any(|i| {
            let ni = w.column(i).dot(&w.column(i)).sqrt();
            ni > 0.0 && nj > 0.0 && (w.column(i).dot(&w.column(j)) / (ni * nj)).abs() > tau
        });
        if !coherent {
            continue;
        }
        let Some(sample) = candidates.next() else { break };
        let r = resid.row(sample);
        let norm = r.dot(&r).sqrt();
        w.column_mut(j).assign(&(&r / norm));
        h.column_mut(j).fill(0.0);
        replaced += 1;
    }
    replaced
}

pub fn dl_fista(y: ArrayView2<f64>, cfg: &DlConfig, truth: Option<&MixingMatrix>) -> Result<LearnedDictionary> {
    dl_fista_observed(y, cfg, truth, |_, _| Ok(()))
}

/// As [`dl_fista`], calling `observe(round, W)` on the initial dictionary
/// (round 0) and after every round.
pub fn dl_fista_observed(
    y: ArrayView2<f64>,
    cfg: &DlConfig,
    truth: Option<&MixingMatrix>,
    mut observe: impl FnMut(usize, ArrayView2<f64>) -> Result<()>,
) -> Result<LearnedDictionary> {
    if y.nrows() == 0 {
        return Err(LabError::invalid("dictionary learning needs at least one sample"));
    }
    if cfg.rounds == 0 {
        return Err(LabError::invalid("rounds must be at least 1"));
    }
    let d_y = y.ncols();
    if cfg.d_h < d_y {
        return Err(LabError::invalid(format!("d_h={} must be at least d_y={d_y}", cfg.d_h)));
    }
    cfg.inner.validate()?;
    let mut w = match &cfg.init {
        DictInit::Random(seed) => random_dictionary(d_y, cfg.d_h, *seed),
        DictInit::FromDictionary(m) => {
            if m.dim() != (d_y, cfg.d_h) {
                return Err(LabError::invalid(format!("initial dictionary has shape {:?}, expected ({d_y}, {})", m.dim(), cfg.d_h)));
            }
            let mut m = m.clone();
            project_columns(&mut m);
            m
        }
    };
    observe(0, w.view())?;
    let mut codes: Option<Array2<f64>> = None;
    let mut trace = Vec::with_capacity(cfg.rounds);
    for round in 1..=cfg.rounds {
        let plan = FistaPlan::new(w.view(), cfg.inner.step_size)?;
        let h = plan.solve_batch(y, &cfg.inner, codes.as_ref().map(|c| c.view()))?.codes;
        let mut h = h;
        w = update_dictionary(y, h.view(), w.view())?;
        if let (Some(tau), true) = (cfg.replace_coherence, round < cfg.rounds) {
            replace_coherent_atoms(y, &mut h, &mut w, tau);
        }
        let loss = reconstruction_loss(y, h.view(), w.view()) / y.nrows() as f64;
        let cosine = match truth {
            Some(a) => Some(dict_diagnostics(w.view(), a.matrix().view())?.mean_cosine),
            None => None,
        };
        trace.push(RoundStats { round, loss, cosine });
        codes = Some(h);
        observe(round, w.view())?;
    }
    Ok(LearnedDictionary { w, round_trace: trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn separable_codes_copy_samples() {
        let y = array![[0.3, 0.4], [0.0, 2.0]];
        let h = array![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let prev = array![[1.0, 0.0, 0.6], [0.0, 1.0, 0.8]];
        let w = update_dictionary(y.view(), h.view(), prev.view()).unwrap();
        assert!((w[[0, 0]] - 0.3).abs() < 1e-6 && (w[[1, 0]] - 0.4).abs() < 1e-6);
        assert!((w[[0, 1]]).abs() < 1e-9 && (w[[1, 1]] - 1.0).abs() < 1e-9);
        assert_eq!(w.column(2), prev.column(2));
    }

    #[test]
    fn fixed_point_at_truth() {
        let a = crate::synthgen::gen_mixing(20, 30, 5).unwrap();
        let cfg = crate::synthgen::GenConfig::new(30, 3, 400, 5).with_obs_dim(20);
        let ds = crate::synthgen::sample_split(&cfg, &a, crate::synthgen::Split::IdTrain).unwrap();
        let mut init = a.matrix().clone();
        normalise_columns(&mut init);
        let dl = DlConfig::new(30, 0.01, 1, DictInit::FromDictionary(init));
        let out = dl_fista(ds.y.view(), &dl, Some(&a)).unwrap();
        assert!(out.round_trace[0].cosine.unwrap() >= 0.99);
    }

    #[test]
    fn duplicate_atom_is_reseeded_from_worst_residual() {
        let y = array![[1.0, 0.0, 0.0], [0.0, 0.0, 3.0], [0.0, 2.0, 0.0]];
        let mut w = array![[1.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 0.0]];
        let mut h = array![[1.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 2.0]];
        let n = replace_coherent_atoms(y.view(), &mut h, &mut w, 0.7);
        assert_eq!(n, 1);
        assert_eq!(w.column(1), array![0.0, 0.0, 1.0]);
        assert_eq!(h.column(1), array![0.0, 0.0, 0.0]);
        assert_eq!(w.column(0), array![1.0, 0.0, 0.0]);
        assert_eq!(w.column(2), array![0.0, 1.0, 0.0]);
    }

    proptest! {
        #[test]
        fn update_never_increases_loss(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (n, d_y, d_h) = (25, 4, 8);
            let y = Array2::from_shape_simple_fn((n, d_y), || rng.sample::<f64, _>(StandardNormal));
            let h = Array2::from_shape_simple_fn((n, d_h), || if rng.random_bool(0.3) { rng.random::<f64>() } else { 0.0 });
            let w0 = random_dictionary(d_y, d_h, seed);
            let w1 = update_dictionary(y.view(), h.view(), w0.view()).unwrap();
            prop_assert!(reconstruction_loss(y.view(), h.view(), w1.view()) <= reconstruction_loss(y.view(), h.view(), w0.view()) + 1e-9);
            for c in w1.columns() {
                prop_assert!(c.dot(&c).sqrt() <= 1.0 + 1e-9);
            }
        }
    }
}
