//! One grid cell: a ground-truth dictionary, its data splits and the
//! models trained on them.

use std::collections::BTreeMap;
use std::time::Instant;

use ndarray::{Array2, ArrayView2};
use sparselab::dictlearn::{dl_fista, DictInit, DlConfig, LearnedDictionary};
use sparselab::metrics::{dict_diagnostics, mcc, per_feature_auc, support_metrics};
use sparselab::probes::{eval_accuracy, fit_logistic};
use sparselab::sae::{train_sae, SaeKind, SaeModel, TrainedSae};
use sparselab::seed_of;
use sparselab::solvers::{lstsq_refit_batch, FistaPlan, SolverConfig, StepSize};
use sparselab::synthgen::{gen_mixing, sample_split, sample_split_with_seed, Dataset, GenConfig, MixingMatrix, Split};

use crate::config::Settings;
use crate::error::Result;
use crate::records::MetricRow;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellKey {
    pub d_z: usize,
    pub k: usize,
    pub d_y: usize,
    pub p: usize,
}

pub struct CellData {
    pub key: CellKey,
    pub seed: u64,
    /// Seed from which all of this cell's data is derived. Independent of
    /// `p` and of the experiment.
    pub data_seed: u64,
    pub a: MixingMatrix,
    pub train: Dataset,
    pub id_test: Dataset,
    pub ood_test: Dataset,
    /// Separate ID sample used only to fit logistic probes.
    pub probe_train: Dataset,
}

impl CellData {
    pub fn generate(master_seed: u64, key: CellKey, seed: u64, settings: &Settings) -> Result<Self> {
        let data_seed = seed_of!(master_seed, "cell", key.d_z, key.k, key.d_y, seed);
        let a = gen_mixing(key.d_y, key.d_z, data_seed)?;
        let cfg = |n: usize| GenConfig::new(key.d_z, key.k, n, data_seed).with_obs_dim(key.d_y);
        let train = sample_split(&cfg(key.p), &a, Split::IdTrain)?;
        let id_test = sample_split(&cfg(settings.n_test), &a, Split::IdTest)?;
        let ood_test = sample_split(&cfg(settings.n_test), &a, Split::OodTest)?;
        let probe_train =
            sample_split_with_seed(&cfg(settings.n_probe), &a, Split::IdTrain, seed_of!(data_seed, "probe-train"))?;
        Ok(CellData { key, seed, data_seed, a, train, id_test, ood_test, probe_train })
    }
}

/// Codes of the three evaluation splits.
pub struct Codes {
    pub id: Array2<f64>,
    pub ood: Array2<f64>,
    pub probe: Array2<f64>,
}

impl Codes {
    pub fn from_fn(cell: &CellData, mut f: impl FnMut(ArrayView2<f64>) -> Result<Array2<f64>>) -> Result<Codes> {
        Ok(Codes { id: f(cell.id_test.y.view())?, ood: f(cell.ood_test.y.view())?, probe: f(cell.probe_train.y.view())? })
    }

    /// Like [`Codes::from_fn`], also handing `f` the matching rows of
    /// `prior`.
    pub fn from_fn_with(
        cell: &CellData,
        prior: &Codes,
        mut f: impl FnMut(ArrayView2<f64>, ArrayView2<f64>) -> Result<Array2<f64>>,
    ) -> Result<Codes> {
        Ok(Codes {
            id: f(cell.id_test.y.view(), prior.id.view())?,
            ood: f(cell.ood_test.y.view(), prior.ood.view())?,
            probe: f(cell.probe_train.y.view(), prior.probe.view())?,
        })
    }
}

/// Observations with the SAE's pre-bias removed, so that the decoder
/// columns alone explain them.
fn centred(y: ArrayView2<f64>, model: &SaeModel) -> Array2<f64> {
    &y - &model.b_pre
}

/// A cell's data plus lazily trained models, shared by all methods of
/// the cell.
pub struct CellContext<'a> {
    pub data: CellData,
    pub settings: &'a Settings,
    saes: BTreeMap<String, (TrainedSae, u64, f64)>,
    dl: Option<(LearnedDictionary, u64, f64)>,
}

impl<'a> CellContext<'a> {
    pub fn new(data: CellData, settings: &'a Settings) -> Self {
        CellContext { data, settings, saes: BTreeMap::new(), dl: None }
    }

    pub fn sae_seed(&self, kind: SaeKind) -> u64 {
        seed_of!(self.data.data_seed, "sae", kind.name(), self.data.key.p)
    }

    pub fn dl_seed(&self) -> u64 {
        seed_of!(self.data.data_seed, "dl", self.data.key.p)
    }

    /// Train (once) and return the SAE of `kind`, its seed and the
    /// training time in seconds.
    pub fn sae(&mut self, kind: SaeKind) -> Result<(&TrainedSae, u64, f64)> {
        let name = kind.to_string();
        if !self.saes.contains_key(&name) {
            let seed = self.sae_seed(kind);
            let cfg = self.settings.sae.train_config(seed);
            let t = Instant::now();
            let trained = train_sae(self.data.train.y.view(), self.data.key.d_z, kind, &cfg, Some(&self.data.a))?;
            self.saes.insert(name.clone(), (trained, seed, t.elapsed().as_secs_f64()));
        }
        let (m, s, t) = &self.saes[&name];
        Ok((m, *s, *t))
    }

    pub fn dl_config(&self, init: DictInit, rounds: usize) -> DlConfig {
        let s = self.settings;
        let mut cfg = DlConfig::new(self.data.key.d_z, s.dl_lambda, rounds, init);
        cfg.inner = cfg.inner.iters(s.dl_inner_iters);
        cfg.replace_coherence = s.dl_replace_coherence;
        cfg
    }

    /// Randomly initialised dictionary learning with the configured round
    /// count, trained once per cell.
    pub fn dl(&mut self) -> Result<(&LearnedDictionary, u64, f64)> {
        if self.dl.is_none() {
            let seed = self.dl_seed();
            let cfg = self.dl_config(DictInit::Random(seed), self.settings.dl_rounds);
            let t = Instant::now();
            let learned = dl_fista(self.data.train.y.view(), &cfg, Some(&self.data.a))?;
            self.dl = Some((learned, seed, t.elapsed().as_secs_f64()));
        }
        let (d, s, t) = self.dl.as_ref().expect("just set");
        Ok((d, *s, *t))
    }

    /// FISTA codes of every evaluation split under dictionary `d`.
    pub fn fista_codes(&self, d: ArrayView2<f64>, lambda: f64, iters: usize) -> Result<Codes> {
        let plan = FistaPlan::new(d, StepSize::Auto)?;
        let cfg = SolverConfig::with_lambda(lambda).iters(iters);
        Codes::from_fn(&self.data, |y| Ok(plan.solve_batch(y, &cfg, None)?.codes))
    }

    /// FISTA on the frozen decoder of `model`, cold or warm-started from
    /// `init`.
    pub fn frozen_codes(&self, model: &SaeModel, lambda: f64, iters: usize, init: Option<&Codes>) -> Result<Codes> {
        let plan = FistaPlan::new(model.w_dec.view(), StepSize::Auto)?;
        let cfg = SolverConfig::with_lambda(lambda).iters(iters);
        match init {
            None => Codes::from_fn(&self.data, |y| Ok(plan.solve_batch(centred(y, model).view(), &cfg, None)?.codes)),
            Some(init) => Codes::from_fn_with(&self.data, init, |y, h0| {
                Ok(plan.solve_batch(centred(y, model).view(), &cfg, Some(h0))?.codes)
            }),
        }
    }

    /// Least-squares magnitudes on the supports of `codes` under the
    /// frozen decoder of `model`.
    pub fn refit_codes(&self, model: &SaeModel, codes: &Codes) -> Result<Codes> {
        Codes::from_fn_with(&self.data, codes, |y, h| Ok(lstsq_refit_batch(centred(y, model).view(), model.w_dec.view(), h)?))
    }

    pub fn evaluate(&self, codes: &Codes, dictionary: Option<ArrayView2<f64>>) -> Result<MetricRow> {
        evaluate(&self.data, codes, dictionary, self.settings)
    }
}

/// Score codes against the cell's ground truth. Support and dictionary
/// metrics need the dictionary whose columns the codes refer to.
pub fn evaluate(cell: &CellData, codes: &Codes, dictionary: Option<ArrayView2<f64>>, settings: &Settings) -> Result<MetricRow> {
    let (mcc_id, _) = mcc(codes.id.view(), cell.id_test.z.view())?;
    let (mcc_ood, _) = mcc(codes.ood.view(), cell.ood_test.z.view())?;
    let auc = per_feature_auc(codes.id.view(), &cell.id_test.labels, codes.ood.view(), &cell.ood_test.labels)?;
    let probe = fit_logistic(codes.probe.view(), &cell.probe_train.labels, settings.probe_l2)?;
    let acc_id = eval_accuracy(&probe, codes.id.view(), &cell.id_test.labels)?;
    let acc_ood = eval_accuracy(&probe, codes.ood.view(), &cell.ood_test.labels)?;
    let mut row = MetricRow {
        mcc_id: Some(mcc_id),
        mcc_ood: Some(mcc_ood),
        auc_id: Some(auc.auc_id),
        auc_ood: Some(auc.auc_ood),
        acc_id: Some(acc_id),
        acc_ood: Some(acc_ood),
        ..Default::default()
    };
    if let Some(d) = dictionary {
        let diag = dict_diagnostics(d, cell.a.matrix().view())?;
        let s = support_metrics(codes.id.view(), cell.id_test.z.view(), &diag.matching)?;
        row.support_precision = Some(s.precision);
        row.support_recall = Some(s.recall);
        row.support_f1 = Some(s.f1);
        row.support_active = Some(s.mean_active);
        row.dict_cosine = Some(diag.mean_cosine);
        row.dict_angle = Some(diag.mean_angle);
        row.dict_norm_ratio = Some(diag.mean_norm_ratio);
    }
    Ok(row)
}
