//! Synthetic superposition data.
//!
//! Latents `z ∈ [0,1]^{d_z}` carry exactly `k` active entries drawn
//! Uniform(0,1); observations are `y = A z` for a row-normalised Gaussian
//! mixing matrix `A` with `d_y < d_z` rows. The binary target is
//! `t = 1{z_1 > 0.5}`.
//!
//! Supports follow a compositional split over the latent indices. With
//! 1-based indexing and `h = d_z / 2`:
//!
//! * in-distribution, case (a): index 1 active plus `k − 1` indices from `[2, h]`;
//! * in-distribution, case (b): index 1 inactive, `k` indices from `[2, d_z]`;
//! * out-of-distribution: index 1 active plus `k − 1` indices from `[h + 1, d_z]`.
//!
//! Cases (a) and (b) are chosen with probability 1/2 per sample. Index 1
//! therefore never co-occurs with the upper half of the latents during
//! training, and always does at test time. Internally indices are 0-based.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1};
use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::io::fmt_f64;
use crate::rng::stream;
use crate::{seed_of, LabError, Result};

/// Smallest observation dimension meeting `d_y ≥ 2·k·ln(d_h / k)`.
pub fn cs_bound_dim(k: usize, d_h: usize) -> Result<usize> {
    if k == 0 || k >= d_h {
        return Err(LabError::invalid(format!(
            "cs_bound_dim needs 1 <= k < d_h, got k={k}, d_h={d_h}"
        )));
    }
    let bound = 2.0 * k as f64 * (d_h as f64 / k as f64).ln();
    Ok(bound.ceil() as usize)
}

/// Critical undersampling ratio `2ρ·ln(1/ρ)` for sparsity ratio `ρ = k/d_h`.
pub fn critical_delta(k: usize, d_h: usize) -> f64 {
    let rho = k as f64 / d_h as f64;
    2.0 * rho * (1.0 / rho).ln()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub d_z: usize,
    pub k: usize,
    /// Observation dimension; `None` means "follow the CS bound".
    pub d_y: Option<usize>,
    pub p: usize,
    pub seed: u64,
}

impl GenConfig {
    pub fn new(d_z: usize, k: usize, p: usize, seed: u64) -> Self {
        GenConfig { d_z, k, d_y: None, p, seed }
    }

    pub fn with_obs_dim(mut self, d_y: usize) -> Self {
        self.d_y = Some(d_y);
        self
    }

    pub fn obs_dim(&self) -> Result<usize> {
        match self.d_y {
            Some(d) => Ok(d),
            None => cs_bound_dim(self.k, self.d_z),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(LabError::invalid("p must be at least 1"));
        }
        if self.k == 0 || 2 * self.k > self.d_z {
            return Err(LabError::invalid(format!(
                "need 1 <= k <= d_z/2, got k={}, d_z={}",
                self.k, self.d_z
            )));
        }
        if self.d_z % 2 != 0 {
            return Err(LabError::invalid(format!("d_z must be even, got {}", self.d_z)));
        }
        let d_y = self.obs_dim()?;
        if d_y == 0 {
            return Err(LabError::invalid("d_y must be at least 1"));
        }
        if self.d_y.is_none() && d_y >= self.d_z {
            return Err(LabError::invalid(format!(
                "CS-bound observation dimension {d_y} is not below d_z={}",
                self.d_z
            )));
        }
        Ok(())
    }
}

/// Ground-truth dictionary `A` (d_y × d_z) with unit-norm rows.
#[derive(Clone, Debug, PartialEq)]
pub struct MixingMatrix(Array2<f64>);

impl MixingMatrix {
    pub fn from_matrix(m: Array2<f64>) -> Self {
        MixingMatrix(m)
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> Array2<f64> {
        self.0
    }

    pub fn obs_dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn latent_dim(&self) -> usize {
        self.0.ncols()
    }

    /// `A z`, accumulated over the nonzero entries of `z` in ascending index
    /// order. Dense products that also run in ascending order reproduce this
    /// bit for bit because the skipped terms are exact zeros.
    pub fn mix(&self, z: ArrayView1<f64>) -> Array1<f64> {
        let mut y = Array1::zeros(self.obs_dim());
        for (j, &zj) in z.iter().enumerate() {
            if zj != 0.0 {
                for (yr, &a) in y.iter_mut().zip(self.0.column(j)) {
                    *yr += a * zj;
                }
            }
        }
        y
    }
}

pub fn gen_mixing(d_y: usize, d_z: usize, seed: u64) -> Result<MixingMatrix> {
    if d_y == 0 || d_z < d_y {
        return Err(LabError::invalid(format!(
            "gen_mixing needs 1 <= d_y <= d_z, got d_y={d_y}, d_z={d_z}"
        )));
    }
    let mut rng = stream(seed_of!(seed, "mixing"));
    let mut a = Array2::from_shape_simple_fn((d_y, d_z), || rng.sample::<f64, _>(StandardNormal));
    for mut row in a.rows_mut() {
        let n = row.dot(&row).sqrt();
        row /= n;
    }
    Ok(MixingMatrix(a))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Split {
    IdTrain,
    IdTest,
    OodTest,
}

impl Split {
    pub fn tag(self) -> &'static str {
        match self {
            Split::IdTrain => "id_train",
            Split::IdTest => "id_test",
            Split::OodTest => "ood_test",
        }
    }

    pub fn is_ood(self) -> bool {
        matches!(self, Split::OodTest)
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Split {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "id_train" => Ok(Split::IdTrain),
            "id_test" => Ok(Split::IdTest),
            "ood_test" => Ok(Split::OodTest),
            _ => Err(LabError::invalid(format!("unknown split {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    /// Latents, one sample per row (p × d_z).
    pub z: Array2<f64>,
    /// Observations, one sample per row (p × d_y).
    pub y: Array2<f64>,
    pub labels: Vec<bool>,
    pub split: Split,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.z.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.z.nrows() == 0
    }

    pub fn support(&self, i: usize) -> Vec<usize> {
        self.z
            .row(i)
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(j, _)| j)
            .collect()
    }

    pub fn labels_f64(&self) -> Array1<f64> {
        self.labels.iter().map(|&t| if t { 1.0 } else { 0.0 }).collect()
    }

    /// CSV with header `sample_id,split,z_1..z_dz,y_1..y_dy,label`.
    pub fn write_csv(&self, w: &mut impl Write) -> Result<()> {
        let d_z = self.z.ncols();
        let d_y = self.y.ncols();
        let mut header = vec!["sample_id".to_string(), "split".to_string()];
        header.extend((1..=d_z).map(|j| format!("z_{j}")));
        header.extend((1..=d_y).map(|j| format!("y_{j}")));
        header.push("label".into());
        writeln!(w, "{}", header.join(","))?;
        for i in 0..self.len() {
            let mut fields = vec![i.to_string(), self.split.tag().to_string()];
            fields.extend(self.z.row(i).iter().map(|&v| fmt_f64(v)));
            fields.extend(self.y.row(i).iter().map(|&v| fmt_f64(v)));
            fields.push(if self.labels[i] { "1".into() } else { "0".into() });
            writeln!(w, "{}", fields.join(","))?;
        }
        Ok(())
    }
}

/// Draw the active index set for one sample (0-based, ascending).
fn draw_support(rng: &mut impl Rng, d_z: usize, k: usize, split: Split) -> Vec<usize> {
    let half = d_z / 2;
    let mut support = match split {
        Split::OodTest => {
            let mut s = vec![0];
            s.extend(index::sample(rng, d_z - half, k - 1).into_iter().map(|j| half + j));
            s
        }
        Split::IdTrain | Split::IdTest => {
            if rng.random_bool(0.5) {
                let mut s = vec![0];
                s.extend(index::sample(rng, half - 1, k - 1).into_iter().map(|j| 1 + j));
                s
            } else {
                index::sample(rng, d_z - 1, k).into_iter().map(|j| 1 + j).collect()
            }
        }
    };
    support.sort_unstable();
    support
}

/// Sample `cfg.p` observations of the requested split. The random stream is
/// derived from `(cfg.seed, split)`, so the same configuration and split
/// always yield the same dataset.
pub fn sample_split(cfg: &GenConfig, a: &MixingMatrix, split: Split) -> Result<Dataset> {
    sample_split_with_seed(cfg, a, split, seed_of!(cfg.seed, "split", split.tag()))
}

/// As [`sample_split`] but with an explicit stream seed.
pub fn sample_split_with_seed(
    cfg: &GenConfig,
    a: &MixingMatrix,
    split: Split,
    seed: u64,
) -> Result<Dataset> {
    let d_z = cfg.d_z;
    let k = cfg.k;
    if d_z % 2 != 0 {
        return Err(LabError::invalid(format!("d_z must be even, got {d_z}")));
    }
    if k == 0 || k > d_z / 2 {
        return Err(LabError::invalid(format!(
            "k-1={} exceeds the available pool of {} indices",
            k.saturating_sub(1),
            d_z / 2 - 1
        )));
    }
    if cfg.p == 0 {
        return Err(LabError::invalid("p must be at least 1"));
    }
    if a.latent_dim() != d_z {
        return Err(LabError::invalid(format!(
            "mixing matrix has {} columns, config has d_z={d_z}",
            a.latent_dim()
        )));
    }
    let mut rng = stream(seed);
    let mut z = Array2::zeros((cfg.p, d_z));
    for mut row in z.rows_mut() {
        for j in draw_support(&mut rng, d_z, k, split) {
            row[j] = rng.random::<f64>();
        }
    }
    let mut y = Array2::zeros((cfg.p, a.obs_dim()));
    for (mut yrow, zrow) in y.rows_mut().into_iter().zip(z.rows()) {
        yrow.assign(&a.mix(zrow));
    }
    let labels = z.column(0).iter().map(|&v| v > 0.5).collect();
    Ok(Dataset { z, y, labels, split })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cs_bound_reference_values() {
        assert_eq!(cs_bound_dim(10, 100).unwrap(), 47);
        assert_eq!(cs_bound_dim(1, 3).unwrap(), 3);
        // 2·5·ln 40 = 36.888…
        assert_eq!(cs_bound_dim(5, 200).unwrap(), 37);
        assert!(cs_bound_dim(100, 100).is_err());
        assert!(cs_bound_dim(0, 100).is_err());
    }

    #[test]
    fn scalar_mixing_is_unit() {
        let a = gen_mixing(1, 1, 42).unwrap();
        assert_eq!(a.matrix()[[0, 0]].abs(), 1.0);
    }

    #[test]
    fn mixing_is_deterministic_and_row_normalised() {
        assert_eq!(gen_mixing(2, 3, 0).unwrap(), gen_mixing(2, 3, 0).unwrap());
        let a = gen_mixing(47, 100, 7).unwrap();
        for row in a.matrix().rows() {
            assert!((row.dot(&row).sqrt() - 1.0).abs() <= 1e-9);
        }
        assert!(gen_mixing(3, 2, 0).is_err());
    }

    #[test]
    fn ood_supports_live_in_upper_half() {
        let cfg = GenConfig::new(6, 2, 500, 3);
        let a = gen_mixing(3, 6, 3).unwrap();
        let ds = sample_split(&cfg, &a, Split::OodTest).unwrap();
        for i in 0..ds.len() {
            let s = ds.support(i);
            assert_eq!(s.len(), 2);
            assert_eq!(s[0], 0);
            assert!(s[1] >= 3 && s[1] <= 5);
        }
    }

    #[test]
    fn k_one_case_a_activates_only_the_first_latent() {
        let cfg = GenConfig::new(10, 1, 400, 1);
        let a = gen_mixing(4, 10, 1).unwrap();
        let ds = sample_split(&cfg, &a, Split::IdTrain).unwrap();
        for i in 0..ds.len() {
            let s = ds.support(i);
            assert_eq!(s.len(), 1);
        }
        assert!((0..ds.len()).any(|i| ds.support(i) == vec![0]));
    }

    #[test]
    fn first_latent_active_half_the_time_in_distribution() {
        let cfg = GenConfig::new(20, 3, 100_000, 11);
        let a = gen_mixing(8, 20, 11).unwrap();
        let ds = sample_split(&cfg, &a, Split::IdTrain).unwrap();
        let active = ds.z.column(0).iter().filter(|&&v| v != 0.0).count();
        let freq = active as f64 / ds.len() as f64;
        assert!((freq - 0.5).abs() <= 0.01, "P(z1 active) = {freq}");
    }

    #[test]
    fn invalid_configurations() {
        let a = gen_mixing(3, 7, 0).unwrap();
        assert!(sample_split(&GenConfig::new(7, 2, 10, 0), &a, Split::IdTrain).is_err());
        let a = gen_mixing(3, 6, 0).unwrap();
        assert!(sample_split(&GenConfig::new(6, 4, 10, 0), &a, Split::IdTrain).is_err());
        assert!(GenConfig::new(100, 10, 0, 0).validate().is_err());
        assert!(GenConfig::new(100, 10, 5, 0).validate().is_ok());
    }

    #[test]
    fn csv_header_layout() {
        let cfg = GenConfig::new(4, 1, 2, 0);
        let a = gen_mixing(2, 4, 0).unwrap();
        let ds = sample_split(&cfg, &a, Split::IdTest).unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "sample_id,split,z_1,z_2,z_3,z_4,y_1,y_2,label");
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first.len(), 9);
        assert_eq!(first[1], "id_test");
    }
}
