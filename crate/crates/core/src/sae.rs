//! Shallow sparse autoencoders with a linear decoder.
//!
//! The encoder is a single pass `h = σ(W_enc (y − b_pre) + b_enc)`; the
//! matching-pursuit variant instead unrolls `T` pursuit steps against the
//! decoder. Training minimises `mean ‖y − ŷ‖² + γ·mean ‖h‖₁` with Adam,
//! keeping decoder columns on the unit sphere.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::io::{read_matrix_csv, read_vector_csv, write_matrix_csv, write_vector_csv};
use crate::linalg::all_finite;
use crate::metrics::dict_diagnostics;
use crate::rng::stream;
use crate::synthgen::MixingMatrix;
use crate::{seed_of, LabError, Result};

/// Width of the rectangular kernel used for the JumpReLU threshold gradient.
pub const JUMP_BANDWIDTH: f64 = 1e-3;
pub const JUMP_THETA_INIT: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SaeKind {
    Relu,
    JumpRelu,
    TopK { k: usize },
    Mp { steps: usize },
}

impl SaeKind {
    pub fn name(&self) -> &'static str {
        match self {
            SaeKind::Relu => "relu",
            SaeKind::JumpRelu => "jumprelu",
            SaeKind::TopK { .. } => "topk",
            SaeKind::Mp { .. } => "mp",
        }
    }

    /// Whether the ℓ1 penalty is part of the training loss.
    pub fn uses_l1(&self) -> bool {
        matches!(self, SaeKind::Relu | SaeKind::JumpRelu)
    }
}

impl fmt::Display for SaeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SaeKind {
    type Err = LabError;

    /// Parses `relu`, `jumprelu`, `topk:<k>` and `mp:<steps>`.
    fn from_str(s: &str) -> Result<Self> {
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        let count = |a: Option<&str>| -> Result<usize> {
            a.ok_or_else(|| LabError::invalid(format!("{s:?} needs a count, e.g. {head}:10")))?
                .parse()
                .map_err(|_| LabError::invalid(format!("bad count in {s:?}")))
        };
        match head {
            "relu" => Ok(SaeKind::Relu),
            "jumprelu" => Ok(SaeKind::JumpRelu),
            "topk" => Ok(SaeKind::TopK { k: count(arg)? }),
            "mp" => Ok(SaeKind::Mp { steps: count(arg)? }),
            _ => Err(LabError::invalid(format!("unknown SAE kind {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaeTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub gamma_reg: f64,
    pub seed: u64,
    /// Decoder cosine against the truth is traced every this many epochs
    /// (and always at the last epoch).
    pub trace_every: usize,
}

impl Default for SaeTrainConfig {
    fn default() -> Self {
        SaeTrainConfig { epochs: 200, batch_size: 256, learning_rate: 1e-3, gamma_reg: 1e-4, seed: 0, trace_every: 1 }
    }
}

impl SaeTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.trace_every == 0 {
            return Err(LabError::invalid("epochs, batch_size and trace_every must be at least 1"));
        }
        if !(self.learning_rate > 0.0) || !(self.gamma_reg >= 0.0) {
            return Err(LabError::invalid("learning_rate must be positive and gamma_reg non-negative"));
        }
        Ok(())
    }

    pub fn gamma_for(&self, kind: SaeKind) -> f64 {
        if kind.uses_l1() {
            self.gamma_reg
        } else {
            0.0
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SaeModel {
    /// d_h × d_y.
    pub w_enc: Array2<f64>,
    pub b_enc: Array1<f64>,
    /// d_y × d_h with unit-norm columns.
    pub w_dec: Array2<f64>,
    pub b_pre: Array1<f64>,
    /// Per-unit JumpReLU thresholds; unused by the other kinds.
    pub theta: Array1<f64>,
    pub kind: SaeKind,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SaeGrads {
    pub w_enc: Array2<f64>,
    pub b_enc: Array1<f64>,
    pub w_dec: Array2<f64>,
    pub b_pre: Array1<f64>,
    pub theta: Array1<f64>,
}

struct MpCache {
    atoms: Vec<Vec<usize>>,
    coeffs: Vec<Vec<f64>>,
    /// `residuals[t]` holds every row's residual after `t` steps.
    residuals: Vec<Array2<f64>>,
}

struct Forward {
    x: Array2<f64>,
    pre: Array2<f64>,
    h: Array2<f64>,
    mp: Option<MpCache>,
}

/// Indices of the `k` largest positive entries, ties to the smaller index.
fn top_k_positive(v: ArrayView1<f64>, k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).filter(|&j| v[j] > 0.0).collect();
    if idx.len() > k {
        let cmp = |a: &usize, b: &usize| v[*b].total_cmp(&v[*a]).then(a.cmp(b));
        if k > 0 {
            idx.select_nth_unstable_by(k - 1, cmp);
        }
        idx.truncate(k);
    }
    idx
}

impl SaeModel {
    /// Random initialisation: unit-norm Gaussian decoder columns, encoder
    /// entries uniform in `±1/√d_y`, zero biases.
    pub fn init(d_y: usize, d_h: usize, kind: SaeKind, seed: u64) -> Result<Self> {
        if d_y == 0 || d_h == 0 {
            return Err(LabError::invalid("SAE dimensions must be positive"));
        }
        match kind {
            SaeKind::TopK { k } if k == 0 || k > d_h => {
                return Err(LabError::invalid(format!("TopK needs 1 <= k <= d_h, got k={k}")));
            }
            SaeKind::Mp { steps: 0 } => return Err(LabError::invalid("MP needs at least one step")),
            _ => {}
        }
        let mut rng = stream(seed_of!(seed, "sae-init"));
        let mut w_dec = Array2::from_shape_simple_fn((d_y, d_h), || rng.sample::<f64, _>(StandardNormal));
        for mut c in w_dec.columns_mut() {
            let n = c.dot(&c).sqrt();
            c /= n;
        }
        let bound = 1.0 / (d_y as f64).sqrt();
        let w_enc = Array2::from_shape_simple_fn((d_h, d_y), || rng.random_range(-bound..bound));
        Ok(SaeModel {
            w_enc,
            b_enc: Array1::zeros(d_h),
            w_dec,
            b_pre: Array1::zeros(d_y),
            theta: Array1::from_elem(d_h, JUMP_THETA_INIT),
            kind,
        })
    }

    pub fn obs_dim(&self) -> usize {
        self.w_dec.nrows()
    }

    pub fn code_dim(&self) -> usize {
        self.w_dec.ncols()
    }

    fn check_input(&self, y: ArrayView2<f64>) -> Result<()> {
        if y.ncols() != self.obs_dim() {
            return Err(LabError::invalid(format!("input has {} columns, model expects {}", y.ncols(), self.obs_dim())));
        }
        Ok(())
    }

    fn forward(&self, y: ArrayView2<f64>) -> Forward {
        let x = &y - &self.b_pre;
        let (n, d_h) = (x.nrows(), self.code_dim());
        match self.kind {
            SaeKind::Mp { steps } => {
                let (h, cache) = self.pursue(&x, steps);
                Forward { x, pre: Array2::zeros((0, d_h)), h, mp: Some(cache) }
            }
            kind => {
                let pre = x.dot(&self.w_enc.t()) + &self.b_enc;
                let mut h = Array2::zeros((n, d_h));
                for (mut hr, pr) in h.rows_mut().into_iter().zip(pre.rows()) {
                    match kind {
                        SaeKind::Relu => hr.zip_mut_with(&pr, |o, &p| *o = p.max(0.0)),
                        SaeKind::JumpRelu => {
                            for ((o, &p), &t) in hr.iter_mut().zip(pr.iter()).zip(self.theta.iter()) {
                                *o = if p > t { p } else { 0.0 };
                            }
                        }
                        SaeKind::TopK { k } => {
                            for j in top_k_positive(pr, k) {
                                hr[j] = pr[j];
                            }
                        }
                        SaeKind::Mp { .. } => unreachable!(),
                    }
                }
                Forward { x, pre, h, mp: None }
            }
        }
    }

    fn pursue(&self, x: &Array2<f64>, steps: usize) -> (Array2<f64>, MpCache) {
        let (n, d_h) = (x.nrows(), self.code_dim());
        let mut r = x.clone();
        let mut h = Array2::zeros((n, d_h));
        let mut cache = MpCache { atoms: vec![Vec::new(); n], coeffs: vec![Vec::new(); n], residuals: vec![r.clone()] };
        let mut live = vec![true; n];
        for _ in 0..steps {
            let scores = r.dot(&self.w_dec);
            for i in 0..n {
                if !live[i] {
                    continue;
                }
                if r.row(i).iter().all(|&v| v == 0.0) {
                    live[i] = false;
                    continue;
                }
                let s = scores.row(i);
                let mut best = 0;
                for (j, &v) in s.iter().enumerate() {
                    if v > s[best] {
                        best = j;
                    }
                }
                let c = s[best];
                r.row_mut(i).scaled_add(-c, &self.w_dec.column(best));
                h[[i, best]] += c;
                cache.atoms[i].push(best);
                cache.coeffs[i].push(c);
            }
            cache.residuals.push(r.clone());
        }
        (h, cache)
    }

    /// Codes for every row of `y`.
    pub fn encode_batch(&self, y: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(y)?;
        Ok(self.forward(y).h)
    }

    pub fn encode(&self, y: ArrayView1<f64>) -> Result<Array1<f64>> {
        let y2 = y.insert_axis(Axis(0));
        Ok(self.encode_batch(y2)?.row(0).to_owned())
    }

    pub fn decode_batch(&self, h: ArrayView2<f64>) -> Array2<f64> {
        h.dot(&self.w_dec.t()) + &self.b_pre
    }

    pub fn decode(&self, h: ArrayView1<f64>) -> Array1<f64> {
        self.w_dec.dot(&h) + &self.b_pre
    }

    /// `mean ‖y − ŷ‖² + γ·mean ‖h‖₁` over the rows of `y`.
    pub fn loss(&self, y: ArrayView2<f64>, gamma: f64) -> Result<f64> {
        self.check_input(y)?;
        let fw = self.forward(y);
        Ok(self.loss_from(y, &fw, gamma).0)
    }

    fn loss_from(&self, y: ArrayView2<f64>, fw: &Forward, gamma: f64) -> (f64, Array2<f64>) {
        let b = y.nrows() as f64;
        let err = self.decode_batch(fw.h.view()) - y;
        let sq: f64 = err.iter().map(|v| v * v).sum();
        let l1: f64 = fw.h.iter().map(|v| v.abs()).sum();
        ((sq + gamma * l1) / b, err)
    }

    /// Loss and analytic gradients for a batch. The JumpReLU threshold uses
    /// a straight-through rectangular-kernel estimate; pursuit selections
    /// are treated as constants.
    pub fn loss_and_grads(&self, y: ArrayView2<f64>, gamma: f64) -> Result<(f64, SaeGrads)> {
        self.check_input(y)?;
        if y.nrows() == 0 {
            return Err(LabError::invalid("empty batch"));
        }
        let fw = self.forward(y);
        let (loss, err) = self.loss_from(y, &fw, gamma);
        let b = y.nrows() as f64;
        let ebar = err * (2.0 / b);
        let mut g_dec = ebar.t().dot(&fw.h);
        let mut g_pre = ebar.sum_axis(Axis(0));
        let mut dh = ebar.dot(&self.w_dec);
        if gamma > 0.0 {
            dh.zip_mut_with(&fw.h, |d, &v| {
                if v != 0.0 {
                    *d += gamma / b * v.signum();
                }
            });
        }
        let mut g_enc = Array2::zeros(self.w_enc.dim());
        let mut g_benc = Array1::zeros(self.code_dim());
        let mut g_theta = Array1::zeros(self.code_dim());
        match &fw.mp {
            Some(cache) => {
                for i in 0..y.nrows() {
                    let mut rbar = Array1::<f64>::zeros(self.obs_dim());
                    for t in (0..cache.atoms[i].len()).rev() {
                        let j = cache.atoms[i][t];
                        let c = cache.coeffs[i][t];
                        let d = self.w_dec.column(j);
                        let cbar = dh[[i, j]] - d.dot(&rbar);
                        let mut gcol = g_dec.column_mut(j);
                        gcol.scaled_add(-c, &rbar);
                        gcol.scaled_add(cbar, &cache.residuals[t].row(i));
                        rbar.scaled_add(cbar, &d);
                    }
                    g_pre -= &rbar;
                }
            }
            None => {
                let mut dpre = Array2::zeros(fw.pre.dim());
                for i in 0..y.nrows() {
                    for j in 0..self.code_dim() {
                        let p = fw.pre[[i, j]];
                        if fw.h[[i, j]] != 0.0 {
                            dpre[[i, j]] = dh[[i, j]];
                        }
                        if self.kind == SaeKind::JumpRelu {
                            let th = self.theta[j];
                            if ((p - th) / JUMP_BANDWIDTH).abs() <= 0.5 {
                                g_theta[j] -= dh[[i, j]] * th / JUMP_BANDWIDTH;
                            }
                        }
                    }
                }
                g_enc = dpre.t().dot(&fw.x);
                g_benc = dpre.sum_axis(Axis(0));
                g_pre -= &dpre.dot(&self.w_enc).sum_axis(Axis(0));
            }
        }
        if !loss.is_finite() {
            return Err(LabError::numeric(format!("SAE loss is not finite ({loss})")));
        }
        Ok((loss, SaeGrads { w_enc: g_enc, b_enc: g_benc, w_dec: g_dec, b_pre: g_pre, theta: g_theta }))
    }

    pub fn renormalise_decoder(&mut self) {
        for mut c in self.w_dec.columns_mut() {
            let n = c.dot(&c).sqrt();
            if n > 0.0 {
                c /= n;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        all_finite(
            self.w_enc
                .iter()
                .chain(self.b_enc.iter())
                .chain(self.w_dec.iter())
                .chain(self.b_pre.iter())
                .chain(self.theta.iter()),
        )
    }

    /// `{stem}.json` carries the kind and shapes; weights go to
    /// `{stem}_w_enc.csv`, `{stem}_b_enc.csv`, `{stem}_w_dec.csv`,
    /// `{stem}_b_pre.csv` and `{stem}_theta.csv`.
    pub fn save(&self, stem: &Path, cfg: Option<&SaeTrainConfig>) -> Result<()> {
        let header = CheckpointHeader { kind: self.kind, d_y: self.obs_dim(), d_h: self.code_dim(), config: cfg.cloned() };
        let json = serde_json::to_string_pretty(&header).map_err(|e| LabError::Format(e.to_string()))?;
        writeln!(std::fs::File::create(stem.with_extension("json"))?, "{json}")?;
        write_matrix_csv(&suffixed(stem, "w_enc"), self.w_enc.view())?;
        write_vector_csv(&suffixed(stem, "b_enc"), &self.b_enc)?;
        write_matrix_csv(&suffixed(stem, "w_dec"), self.w_dec.view())?;
        write_vector_csv(&suffixed(stem, "b_pre"), &self.b_pre)?;
        write_vector_csv(&suffixed(stem, "theta"), &self.theta)?;
        Ok(())
    }

    pub fn load(stem: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(stem.with_extension("json"))?;
        let header: CheckpointHeader = serde_json::from_str(&text).map_err(|e| LabError::Format(e.to_string()))?;
        let model = SaeModel {
            w_enc: read_matrix_csv(&suffixed(stem, "w_enc"))?,
            b_enc: read_vector_csv(&suffixed(stem, "b_enc"))?,
            w_dec: read_matrix_csv(&suffixed(stem, "w_dec"))?,
            b_pre: read_vector_csv(&suffixed(stem, "b_pre"))?,
            theta: read_vector_csv(&suffixed(stem, "theta"))?,
            kind: header.kind,
        };
        let (d_y, d_h) = (header.d_y, header.d_h);
        let ok = model.w_enc.dim() == (d_h, d_y)
            && model.w_dec.dim() == (d_y, d_h)
            && model.b_enc.len() == d_h
            && model.b_pre.len() == d_y
            && model.theta.len() == d_h;
        if !ok {
            return Err(LabError::Format(format!("checkpoint weights do not match header shape ({d_y}, {d_h})")));
        }
        Ok(model)
    }
}

fn suffixed(stem: &Path, part: &str) -> std::path::PathBuf {
    let name = stem.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    stem.with_file_name(format!("{name}_{part}.csv"))
}

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    kind: SaeKind,
    d_y: usize,
    d_h: usize,
    config: Option<SaeTrainConfig>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub mean_cosine: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainedSae {
    pub model: SaeModel,
    pub trace: Vec<EpochStats>,
}

impl TrainedSae {
    /// Trace as CSV `epoch,loss,mean_cosine` (empty cell when untraced).
    pub fn write_trace(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "epoch,loss,mean_cosine")?;
        for s in &self.trace {
            let cos = s.mean_cosine.map(crate::io::fmt_f64).unwrap_or_default();
            writeln!(w, "{},{},{}", s.epoch, crate::io::fmt_f64(s.loss), cos)?;
        }
        Ok(())
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl Adam {
    fn new(n: usize) -> Self {
        Adam { m: vec![0.0; n], v: vec![0.0; n] }
    }

    fn step<'a>(&mut self, params: impl Iterator<Item = &'a mut f64>, grads: impl Iterator<Item = &'a f64>, lr: f64, t: i32) {
        let c1 = 1.0 - BETA1.powi(t);
        let c2 = 1.0 - BETA2.powi(t);
        for (((p, &g), m), v) in params.zip(grads).zip(self.m.iter_mut()).zip(self.v.iter_mut()) {
            *m = BETA1 * *m + (1.0 - BETA1) * g;
            *v = BETA2 * *v + (1.0 - BETA2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
        }
    }
}

/// Mini-batch training from a seeded random initialisation with `d_h`
/// code units.
pub fn train_sae(y: ArrayView2<f64>, d_h: usize, kind: SaeKind, cfg: &SaeTrainConfig, truth: Option<&MixingMatrix>) -> Result<TrainedSae> {
    let model = SaeModel::init(y.ncols(), d_h, kind, cfg.seed)?;
    train_from(y, model, cfg, truth)
}

pub fn train_from(y: ArrayView2<f64>, mut model: SaeModel, cfg: &SaeTrainConfig, truth: Option<&MixingMatrix>) -> Result<TrainedSae> {
    cfg.validate()?;
    model.check_input(y)?;
    if y.nrows() == 0 {
        return Err(LabError::invalid("SAE training needs at least one sample"));
    }
    if !all_finite(y.iter()) {
        return Err(LabError::numeric("training data contains non-finite entries"));
    }
    let gamma = cfg.gamma_for(model.kind);
    let jump = model.kind == SaeKind::JumpRelu;
    let mut opt_enc = Adam::new(model.w_enc.len());
    let mut opt_benc = Adam::new(model.b_enc.len());
    let mut opt_dec = Adam::new(model.w_dec.len());
    let mut opt_pre = Adam::new(model.b_pre.len());
    let mut opt_theta = Adam::new(model.theta.len());
    let mut rng = stream(seed_of!(cfg.seed, "sae-batches"));
    let mut order: Vec<usize> = (0..y.nrows()).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);
    let mut t = 0i32;
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch = y.select(Axis(0), chunk);
            let (loss, mut g) = model.loss_and_grads(batch.view(), gamma).map_err(|e| match e {
                LabError::Numeric(m) => LabError::numeric(format!("SAE ({}) diverged at epoch {epoch}: {m}", model.kind)),
                other => other,
            })?;
            total += loss * chunk.len() as f64;
            for (mut gc, wc) in g.w_dec.columns_mut().into_iter().zip(model.w_dec.columns()) {
                let radial = gc.dot(&wc);
                gc.scaled_add(-radial, &wc);
            }
            t += 1;
            let lr = cfg.learning_rate;
            opt_enc.step(model.w_enc.iter_mut(), g.w_enc.iter(), lr, t);
            opt_benc.step(model.b_enc.iter_mut(), g.b_enc.iter(), lr, t);
            opt_dec.step(model.w_dec.iter_mut(), g.w_dec.iter(), lr, t);
            opt_pre.step(model.b_pre.iter_mut(), g.b_pre.iter(), lr, t);
            if jump {
                opt_theta.step(model.theta.iter_mut(), g.theta.iter(), lr, t);
                model.theta.mapv_inplace(|v| v.max(0.0));
            }
            model.renormalise_decoder();
        }
        if !model.is_finite() {
            return Err(LabError::numeric(format!("SAE ({}) parameters became non-finite at epoch {epoch}", model.kind)));
        }
        let mean_cosine = match truth {
            Some(a) if epoch % cfg.trace_every == 0 || epoch == cfg.epochs => {
                Some(dict_diagnostics(model.w_dec.view(), a.matrix().view())?.mean_cosine)
            }
            _ => None,
        };
        trace.push(EpochStats { epoch, loss: total / y.nrows() as f64, mean_cosine });
    }
    Ok(TrainedSae { model, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn toy(kind: SaeKind) -> SaeModel {
        SaeModel::init(5, 8, kind, 3).unwrap()
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("topk:10".parse::<SaeKind>().unwrap(), SaeKind::TopK { k: 10 });
        assert_eq!("mp:4".parse::<SaeKind>().unwrap(), SaeKind::Mp { steps: 4 });
        assert_eq!("jumprelu".parse::<SaeKind>().unwrap(), SaeKind::JumpRelu);
        assert!("topk".parse::<SaeKind>().is_err());
        assert!("gelu".parse::<SaeKind>().is_err());
    }

    #[test]
    fn topk_with_full_k_is_relu() {
        let y = array![[0.3, -1.0, 0.2, 0.5, 0.9], [1.0, 0.0, -0.4, 0.1, 0.2]];
        let mut relu = toy(SaeKind::Relu);
        relu.b_enc.fill(0.05);
        let mut topk = relu.clone();
        topk.kind = SaeKind::TopK { k: 8 };
        assert_eq!(relu.encode_batch(y.view()).unwrap(), topk.encode_batch(y.view()).unwrap());
        let mut jump = relu.clone();
        jump.kind = SaeKind::JumpRelu;
        jump.theta.fill(0.0);
        assert_eq!(relu.encode_batch(y.view()).unwrap(), jump.encode_batch(y.view()).unwrap());
    }

    #[test]
    fn decode_examples() {
        let m = toy(SaeKind::Relu);
        assert_eq!(m.decode(Array1::zeros(8).view()), m.b_pre);
        let mut e = Array1::zeros(8);
        e[3] = 1.0;
        assert_eq!(m.decode(e.view()), &m.w_dec.column(3) + &m.b_pre);
    }

    #[test]
    fn identity_round_trip() {
        let m = SaeModel {
            w_enc: Array2::eye(3),
            b_enc: Array1::zeros(3),
            w_dec: Array2::eye(3),
            b_pre: Array1::zeros(3),
            theta: Array1::zeros(3),
            kind: SaeKind::Relu,
        };
        let y = array![0.2, 0.0, 1.5];
        assert_eq!(m.decode(m.encode(y.view()).unwrap().view()), y);
    }

    #[test]
    fn topk_is_scale_covariant() {
        let m = toy(SaeKind::TopK { k: 3 });
        let y = array![[0.3, -1.0, 0.2, 0.5, 0.9]];
        let h1 = m.encode_batch(y.view()).unwrap();
        let h2 = m.encode_batch((&y * 3.0).view()).unwrap();
        let s1: Vec<bool> = h1.iter().map(|&v| v != 0.0).collect();
        let s2: Vec<bool> = h2.iter().map(|&v| v != 0.0).collect();
        assert_eq!(s1, s2);
        assert!(s1.iter().filter(|&&b| b).count() <= 3);
    }

    #[test]
    fn decoder_stays_on_the_sphere() {
        let a = crate::synthgen::gen_mixing(6, 12, 1).unwrap();
        let cfg = crate::synthgen::GenConfig::new(12, 2, 300, 1).with_obs_dim(6);
        let ds = crate::synthgen::sample_split(&cfg, &a, crate::synthgen::Split::IdTrain).unwrap();
        for kind in [SaeKind::Relu, SaeKind::JumpRelu, SaeKind::TopK { k: 2 }, SaeKind::Mp { steps: 2 }] {
            let tc = SaeTrainConfig { epochs: 3, batch_size: 64, ..Default::default() };
            let out = train_sae(ds.y.view(), 12, kind, &tc, Some(&a)).unwrap();
            for c in out.model.w_dec.columns() {
                assert!((c.dot(&c).sqrt() - 1.0).abs() <= 1e-6);
            }
            assert_eq!(out.trace.len(), 3);
            let again = train_sae(ds.y.view(), 12, kind, &tc, Some(&a)).unwrap();
            assert_eq!(out, again);
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m = toy(SaeKind::TopK { k: 2 });
        let stem = dir.path().join("model");
        m.save(&stem, Some(&SaeTrainConfig::default())).unwrap();
        assert_eq!(SaeModel::load(&stem).unwrap(), m);
    }
}
