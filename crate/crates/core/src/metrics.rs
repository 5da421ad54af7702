//! Identifiability and downstream metrics.
//!
//! Codes and latents are compared up to permutation, rescaling and sign.
//! Every permutation is resolved by a minimum-cost one-to-one assignment.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::solvers::SUPPORT_THRESHOLD;
use crate::{LabError, Result};

/// One-to-one assignment between rows (codes) and columns (latents) of a
/// cost matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matching {
    /// `(row, col)` pairs sorted by row.
    pub pairs: Vec<(usize, usize)>,
    /// Per-pair score, aligned with `pairs`. Its meaning depends on the
    /// producer: assignment cost for [`hungarian`], |correlation| for [`mcc`].
    pub scores: Vec<f64>,
}

impl Matching {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Lookup table `row -> Some(col)`.
    pub fn row_map(&self, rows: usize) -> Vec<Option<usize>> {
        let mut map = vec![None; rows];
        for &(r, c) in &self.pairs {
            map[r] = Some(c);
        }
        map
    }

    pub fn total(&self) -> f64 {
        self.scores.iter().sum()
    }
}

/// Minimum-cost assignment of `min(rows, cols)` pairs (shortest augmenting
/// paths with dual potentials, O(n²m)).
pub fn hungarian(cost: ArrayView2<f64>) -> Result<Matching> {
    if cost.iter().any(|v| !v.is_finite()) {
        return Err(LabError::invalid("assignment cost contains non-finite entries"));
    }
    let (rows, cols) = cost.dim();
    if rows == 0 || cols == 0 {
        return Ok(Matching { pairs: Vec::new(), scores: Vec::new() });
    }
    let transposed = rows > cols;
    let a = if transposed { cost.t() } else { cost.view() };
    let (n, m) = a.dim();

    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = a[[i0 - 1, j - 1]] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut pairs: Vec<(usize, usize)> = (1..=m)
        .filter(|&j| p[j] != 0)
        .map(|j| if transposed { (j - 1, p[j] - 1) } else { (p[j] - 1, j - 1) })
        .collect();
    pairs.sort_unstable();
    let scores = pairs.iter().map(|&(r, c)| cost[[r, c]]).collect();
    Ok(Matching { pairs, scores })
}

fn is_constant(col: ArrayView1<f64>) -> bool {
    let (lo, hi) = col.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    lo == hi
}

/// |Pearson correlation| between every column of `a` and every column of
/// `b`. Pairs involving a constant column are 0.
pub fn abs_correlation(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<Array2<f64>> {
    if a.nrows() != b.nrows() {
        return Err(LabError::invalid(format!("row counts differ: {} vs {}", a.nrows(), b.nrows())));
    }
    if a.nrows() < 2 {
        return Err(LabError::invalid("correlation needs at least 2 samples"));
    }
    let center = |m: ArrayView2<f64>| {
        let mean = m.mean_axis(Axis(0)).expect("non-empty");
        let c = &m - &mean;
        let norms: Vec<f64> = c
            .columns()
            .into_iter()
            .zip(m.columns())
            .map(|(cc, raw)| if is_constant(raw) { 0.0 } else { cc.dot(&cc).sqrt() })
            .collect();
        (c, norms)
    };
    let (ac, an) = center(a);
    let (bc, bn) = center(b);
    let mut corr = ac.t().dot(&bc);
    for ((i, j), v) in corr.indexed_iter_mut() {
        *v = if an[i] > 0.0 && bn[j] > 0.0 { (*v / (an[i] * bn[j])).abs().min(1.0) } else { 0.0 };
    }
    Ok(corr)
}

/// Mean matched |Pearson| between code columns and latent columns.
///
/// Latent columns that are constant on the evaluated sample carry no
/// identifiability signal and are left out of the assignment; the matching
/// reports original latent indices.
pub fn mcc(h: ArrayView2<f64>, z: ArrayView2<f64>) -> Result<(f64, Matching)> {
    if h.nrows() != z.nrows() {
        return Err(LabError::invalid(format!("row counts differ: {} vs {}", h.nrows(), z.nrows())));
    }
    if h.nrows() < 2 {
        return Err(LabError::invalid("mcc needs at least 2 samples"));
    }
    let live: Vec<usize> = (0..z.ncols()).filter(|&j| !is_constant(z.column(j))).collect();
    if live.is_empty() || h.ncols() == 0 {
        return Ok((0.0, Matching { pairs: Vec::new(), scores: Vec::new() }));
    }
    let zl = z.select(Axis(1), &live);
    let corr = abs_correlation(h, zl.view())?;
    let assignment = hungarian((1.0 - &corr).view())?;
    let pairs: Vec<(usize, usize)> = assignment.pairs.iter().map(|&(r, c)| (r, live[c])).collect();
    let scores: Vec<f64> = assignment.pairs.iter().map(|&(r, c)| corr[[r, c]]).collect();
    let score = scores.iter().sum::<f64>() / scores.len() as f64;
    Ok((score, Matching { pairs, scores }))
}

/// ROC AUC of `scores` for the positive class (Mann-Whitney U with average
/// ranks for ties).
pub fn roc_auc(scores: ArrayView1<f64>, labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(LabError::invalid("scores and labels differ in length"));
    }
    let n_pos = labels.iter().filter(|&&t| t).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(LabError::invalid("AUC needs both classes"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[i].total_cmp(&scores[j]));
    let mut rank_sum_pos = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let avg_rank = 0.5 * ((start + 1) + end) as f64;
        let pos_in_block = order[start..end].iter().filter(|&&i| labels[i]).count();
        rank_sum_pos += avg_rank * pos_in_block as f64;
        start = end;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureAuc {
    pub auc_id: f64,
    pub auc_ood: f64,
    pub feature: usize,
    /// Whether the feature scores the positive class with low activations.
    pub flipped: bool,
}

/// Pick the single code dimension with the best oriented AUC on the ID
/// split and report it, with the ID orientation, on the OOD split.
pub fn per_feature_auc(h_id: ArrayView2<f64>, t_id: &[bool], h_ood: ArrayView2<f64>, t_ood: &[bool]) -> Result<FeatureAuc> {
    if h_id.ncols() != h_ood.ncols() {
        return Err(LabError::invalid("ID and OOD codes differ in width"));
    }
    if h_id.ncols() == 0 {
        return Err(LabError::invalid("codes have no columns"));
    }
    let mut best: Option<(f64, usize, bool)> = None;
    for j in 0..h_id.ncols() {
        let raw = roc_auc(h_id.column(j), t_id)?;
        let (oriented, flipped) = if raw >= 1.0 - raw { (raw, false) } else { (1.0 - raw, true) };
        if best.map_or(true, |(b, _, _)| oriented > b) {
            best = Some((oriented, j, flipped));
        }
    }
    let (auc_id, feature, flipped) = best.expect("at least one column");
    let raw_ood = roc_auc(h_ood.column(feature), t_ood)?;
    let auc_ood = if flipped { 1.0 - raw_ood } else { raw_ood };
    Ok(FeatureAuc { auc_id, auc_ood, feature, flipped })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Mean number of active code entries per sample.
    pub mean_active: f64,
}

/// Compare active code entries with active latents after mapping codes to
/// latents through `matching`. Counts are pooled over all samples before
/// forming the ratios. Active codes without a matched latent are false
/// positives.
pub fn support_metrics(h: ArrayView2<f64>, z: ArrayView2<f64>, matching: &Matching) -> Result<SupportScores> {
    if h.nrows() != z.nrows() {
        return Err(LabError::invalid(format!("row counts differ: {} vs {}", h.nrows(), z.nrows())));
    }
    let map = matching.row_map(h.ncols());
    if matching.pairs.iter().any(|&(r, c)| r >= h.ncols() || c >= z.ncols()) {
        return Err(LabError::invalid("matching indices out of range"));
    }
    let (mut tp, mut n_active, mut n_true) = (0usize, 0usize, 0usize);
    for (hr, zr) in h.rows().into_iter().zip(z.rows()) {
        n_true += zr.iter().filter(|&&v| v.abs() > SUPPORT_THRESHOLD).count();
        for (j, &v) in hr.iter().enumerate() {
            if v.abs() > SUPPORT_THRESHOLD {
                n_active += 1;
                if let Some(c) = map[j] {
                    if zr[c].abs() > SUPPORT_THRESHOLD {
                        tp += 1;
                    }
                }
            }
        }
    }
    let precision = if n_active > 0 { tp as f64 / n_active as f64 } else { 0.0 };
    let recall = if n_true > 0 { tp as f64 / n_true as f64 } else { 0.0 };
    let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
    let mean_active = if h.nrows() > 0 { n_active as f64 / h.nrows() as f64 } else { 0.0 };
    Ok(SupportScores { precision, recall, f1, mean_active })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnMatch {
    pub estimate: usize,
    pub truth: usize,
    pub cosine: f64,
    pub angle: f64,
    pub norm_ratio: f64,
    pub zero: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DictDiagnostics {
    pub mean_cosine: f64,
    pub mean_angle: f64,
    pub mean_norm_ratio: f64,
    pub columns: Vec<ColumnMatch>,
    /// Estimated column index -> ground-truth column index.
    pub matching: Matching,
}

/// Match estimated dictionary columns to ground-truth columns by |cosine|.
pub fn dict_diagnostics(w_hat: ArrayView2<f64>, a: ArrayView2<f64>) -> Result<DictDiagnostics> {
    if w_hat.nrows() != a.nrows() {
        return Err(LabError::invalid(format!("row counts differ: {} vs {}", w_hat.nrows(), a.nrows())));
    }
    let wn: Array1<f64> = w_hat.columns().into_iter().map(|c| c.dot(&c).sqrt()).collect();
    let an: Array1<f64> = a.columns().into_iter().map(|c| c.dot(&c).sqrt()).collect();
    let mut cos = w_hat.t().dot(&a);
    for ((i, j), v) in cos.indexed_iter_mut() {
        *v = if wn[i] > 0.0 && an[j] > 0.0 { (*v / (wn[i] * an[j])).abs().min(1.0) } else { 0.0 };
    }
    let assignment = hungarian((1.0 - &cos).view())?;
    let columns: Vec<ColumnMatch> = assignment
        .pairs
        .iter()
        .map(|&(i, j)| {
            let zero = wn[i] == 0.0;
            ColumnMatch {
                estimate: i,
                truth: j,
                cosine: cos[[i, j]],
                angle: cos[[i, j]].acos(),
                norm_ratio: if zero || an[j] == 0.0 { 0.0 } else { wn[i] / an[j] },
                zero,
            }
        })
        .collect();
    let n = columns.len().max(1) as f64;
    let matching = Matching { pairs: assignment.pairs.clone(), scores: columns.iter().map(|c| c.cosine).collect() };
    Ok(DictDiagnostics {
        mean_cosine: columns.iter().map(|c| c.cosine).sum::<f64>() / n,
        mean_angle: columns.iter().map(|c| c.angle).sum::<f64>() / n,
        mean_norm_ratio: columns.iter().map(|c| c.norm_ratio).sum::<f64>() / n,
        columns,
        matching,
    })
}
