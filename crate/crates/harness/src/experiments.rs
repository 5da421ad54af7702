//! Sweep drivers. Every grid cell is generated and evaluated in
//! isolation, so cells run in parallel and the sorted output does not
//! depend on scheduling.

use std::time::Instant;

use ndarray::ArrayView2;
use rayon::prelude::*;
use sparselab::dictlearn::{dl_fista_observed, DictInit};
use sparselab::probes::fit_ridge;
use sparselab::sae::{SaeKind, SaeModel};
use sparselab::synthgen::{critical_delta, cs_bound_dim};

use crate::cell::{CellContext, CellData, CellKey, Codes};
use crate::config::{Experiment, ExperimentConfig, Method};
use crate::error::{HarnessError, Result};
use crate::records::{sort_records, MetricRow, Record};

/// A planned grid cell. `skip` holds the reason an infeasible cell is not
/// run.
#[derive(Clone, Debug, PartialEq)]
pub struct CellPlan {
    pub key: CellKey,
    pub delta: Option<f64>,
    pub seed: u64,
    pub skip: Option<String>,
}

/// Expand the configured grid into cells, in grid order.
pub fn plan_cells(cfg: &ExperimentConfig) -> Result<Vec<CellPlan>> {
    if cfg.experiment == Experiment::TheoryGrid {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for d_z in cfg.d_z_values() {
        for &k in &cfg.grid.k {
            let mut dims: Vec<(usize, Option<f64>, Option<String>)> = Vec::new();
            if cfg.experiment.follows_cs_bound() {
                match cs_bound_dim(k, d_z) {
                    Ok(d_y) => dims.push((d_y, None, None)),
                    Err(e) => dims.push((0, None, Some(e.to_string()))),
                }
            } else {
                for &delta in &cfg.grid.delta {
                    let delta = if cfg.grid.delta_relative { delta * critical_delta(k, d_z) } else { delta };
                    let d_y = (delta * d_z as f64).round() as usize;
                    let reason = (d_y < 1).then(|| format!("delta={delta} gives d_y < 1 at d_z={d_z}"));
                    dims.push((d_y, Some(delta), reason));
                }
            }
            for (d_y, delta, reason) in dims {
                let reason = reason.or_else(|| infeasible(d_z, k));
                for p in cfg.p_values() {
                    for &seed in &cfg.seeds {
                        out.push(CellPlan { key: CellKey { d_z, k, d_y, p }, delta, seed, skip: reason.clone() });
                    }
                }
            }
        }
    }
    Ok(out)
}

fn infeasible(d_z: usize, k: usize) -> Option<String> {
    if d_z < 2 || d_z % 2 != 0 {
        return Some(format!("d_z={d_z} must be even and at least 2"));
    }
    if k == 0 || k > d_z / 2 {
        return Some(format!("k={k} must lie in 1..={}", d_z / 2));
    }
    None
}

/// One evaluated method in one cell.
struct Row {
    method: Method,
    variant: String,
    lambda: Option<f64>,
    round: Option<usize>,
    iters: Option<usize>,
    record_seed: u64,
    metrics: MetricRow,
    wall: f64,
}

impl Row {
    fn new(method: Method, variant: impl Into<String>, record_seed: u64, metrics: MetricRow, wall: f64) -> Self {
        Row { method, variant: variant.into(), lambda: None, round: None, iters: None, record_seed, metrics, wall }
    }

    fn lambda(mut self, v: f64) -> Self {
        self.lambda = Some(v);
        self
    }

    fn round(mut self, v: usize) -> Self {
        self.round = Some(v);
        self
    }

    fn iters(mut self, v: usize) -> Self {
        self.iters = Some(v);
        self
    }
}

/// Run every cell of the experiment and return the records sorted by
/// experiment, grid point, method and seed.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<Record>> {
    cfg.validate()?;
    if cfg.experiment == Experiment::TheoryGrid {
        return Err(HarnessError::config("theory_grid produces a grid table, not records"));
    }
    let plans = plan_cells(cfg)?;
    let per_cell: Vec<Vec<Record>> = plans.par_iter().map(|plan| run_cell(cfg, plan)).collect::<Result<_>>()?;
    let mut records: Vec<Record> = per_cell.into_iter().flatten().collect();
    sort_records(&mut records);
    Ok(records)
}

fn run_cell(cfg: &ExperimentConfig, plan: &CellPlan) -> Result<Vec<Record>> {
    let to_record = |row: Row| Record {
        experiment: cfg.experiment,
        method: row.method.name().to_string(),
        variant: row.variant,
        d_z: plan.key.d_z,
        k: plan.key.k,
        d_y: plan.key.d_y,
        p: plan.key.p,
        delta: plan.delta,
        lambda: row.lambda,
        round: row.round,
        iters: row.iters,
        seed: plan.seed,
        record_seed: row.record_seed,
        metrics: row.metrics,
        wall_time: row.wall,
    };
    if let Some(reason) = &plan.skip {
        eprintln!("warning: skipping {} cell {:?} seed {}: {reason}", cfg.experiment, plan.key, plan.seed);
        return Ok(cfg.methods.iter().map(|&m| to_record(Row::new(m, "skipped", 0, MetricRow::default(), 0.0))).collect());
    }
    let data = CellData::generate(cfg.master_seed, plan.key, plan.seed, &cfg.settings)?;
    let mut ctx = CellContext::new(data, &cfg.settings);
    let rows = match cfg.experiment {
        Experiment::WarmstartDecoder => warmstart_decoder_cell(cfg, &mut ctx)?,
        Experiment::WarmstartEncoder => warmstart_encoder_cell(cfg, &mut ctx)?,
        Experiment::LambdaSweep => lambda_sweep_cell(cfg, &mut ctx)?,
        Experiment::SupportRecovery => standard_cell(cfg, &mut ctx, true)?,
        _ => standard_cell(cfg, &mut ctx, false)?,
    };
    Ok(rows.into_iter().map(to_record).collect())
}

/// SAE kinds named in the method list, or all four when none is.
fn sae_kinds(cfg: &ExperimentConfig, ctx: &CellContext) -> Vec<(Method, SaeKind)> {
    let listed: Vec<Method> = cfg.methods.iter().copied().filter(|m| m.is_sae()).collect();
    let methods = if listed.is_empty() { Method::SAES.to_vec() } else { listed };
    methods.into_iter().map(|m| (m, sae_kind(m, ctx))).collect()
}

fn sae_kind(method: Method, ctx: &CellContext) -> SaeKind {
    let s = &ctx.settings.sae;
    let count = match method {
        Method::SaeTopK => s.topk_k.unwrap_or(ctx.data.key.k),
        Method::SaeMp => s.mp_steps.unwrap_or(ctx.data.key.k),
        _ => ctx.data.key.k,
    };
    method.sae_kind(count).expect("SAE method")
}

fn encoder_codes(ctx: &mut CellContext, kind: SaeKind) -> Result<(Codes, SaeModel, u64, f64)> {
    let (sae, seed, train_time) = ctx.sae(kind)?;
    let model = sae.model.clone();
    let codes = Codes::from_fn(&ctx.data, |y| Ok(model.encode_batch(y)?))?;
    Ok((codes, model, seed, train_time))
}

fn oracle_row(ctx: &CellContext, lambda: f64, iters: usize) -> Result<Row> {
    let t = Instant::now();
    let a = ctx.data.a.matrix().view();
    let codes = ctx.fista_codes(a, lambda, iters)?;
    let metrics = ctx.evaluate(&codes, Some(a))?;
    Ok(Row::new(Method::FistaOracle, "", ctx.data.data_seed, metrics, t.elapsed().as_secs_f64()).lambda(lambda).iters(iters))
}

fn standard_cell(cfg: &ExperimentConfig, ctx: &mut CellContext, with_lstsq: bool) -> Result<Vec<Row>> {
    let s = ctx.settings;
    let mut rows = Vec::new();
    let kinds = sae_kinds(cfg, ctx);
    for &method in &cfg.methods {
        match method {
            Method::FistaOracle => rows.push(oracle_row(ctx, s.infer_lambda, s.infer_iters)?),
            Method::DlFista => {
                let (dl, seed, train_time) = ctx.dl()?;
                let w = dl.w.clone();
                let t = Instant::now();
                let codes = ctx.fista_codes(w.view(), s.infer_lambda, s.infer_iters)?;
                let metrics = ctx.evaluate(&codes, Some(w.view()))?;
                let row = Row::new(method, "", seed, metrics, train_time + t.elapsed().as_secs_f64());
                rows.push(row.lambda(s.infer_lambda).iters(s.infer_iters).round(s.dl_rounds));
            }
            Method::LinearProbe => {
                let t = Instant::now();
                let probe = fit_ridge(ctx.data.train.y.view(), ctx.data.train.z.view(), s.ridge_alpha)?;
                let codes = Codes::from_fn(&ctx.data, |y| Ok(probe.predict(y)))?;
                let metrics = ctx.evaluate(&codes, None)?;
                rows.push(Row::new(method, "", ctx.data.data_seed, metrics, t.elapsed().as_secs_f64()));
            }
            m if m.is_sae() => {
                let kind = sae_kind(m, ctx);
                let t = Instant::now();
                let (codes, model, seed, train_time) = encoder_codes(ctx, kind)?;
                let metrics = ctx.evaluate(&codes, Some(model.w_dec.view()))?;
                rows.push(Row::new(m, "encoder", seed, metrics, train_time + t.elapsed().as_secs_f64()));
                if with_lstsq {
                    let t = Instant::now();
                    let refit = ctx.refit_codes(&model, &codes)?;
                    let metrics = ctx.evaluate(&refit, Some(model.w_dec.view()))?;
                    rows.push(Row::new(m, "lstsq_support", seed, metrics, t.elapsed().as_secs_f64()));
                }
            }
            Method::FrozenFista | Method::Refined => {
                for &(_, kind) in &kinds {
                    let (init, model, seed, _) = encoder_codes(ctx, kind)?;
                    let t = Instant::now();
                    let init = (method == Method::Refined).then_some(&init);
                    let codes = ctx.frozen_codes(&model, s.frozen_lambda, s.frozen_iters, init)?;
                    let metrics = ctx.evaluate(&codes, Some(model.w_dec.view()))?;
                    let row = Row::new(method, kind.name(), seed, metrics, t.elapsed().as_secs_f64());
                    rows.push(row.lambda(s.frozen_lambda).iters(s.frozen_iters));
                }
            }
            _ => unreachable!("all methods handled"),
        }
    }
    Ok(rows)
}

fn warmstart_decoder_cell(cfg: &ExperimentConfig, ctx: &mut CellContext) -> Result<Vec<Row>> {
    let s = ctx.settings;
    let mut rows = Vec::new();
    if cfg.methods.contains(&Method::FistaOracle) {
        rows.push(oracle_row(ctx, s.infer_lambda, s.infer_iters)?);
    }
    let mut inits: Vec<(String, DictInit, u64)> = Vec::new();
    for (m, kind) in sae_kinds(cfg, ctx) {
        if cfg.methods.contains(&m) {
            let (sae, seed, _) = ctx.sae(kind)?;
            inits.push((format!("init_{}", kind.name()), DictInit::FromDictionary(sae.model.w_dec.clone()), seed));
        }
    }
    if cfg.methods.contains(&Method::DlFista) {
        let seed = ctx.dl_seed();
        inits.push(("init_random".to_string(), DictInit::Random(seed), seed));
    }
    let checkpoints = &cfg.grid.rounds;
    let last = checkpoints.iter().copied().max().unwrap_or(0);
    for (variant, init, seed) in inits {
        let t = Instant::now();
        let mut eval_at = |round: usize, w: ArrayView2<f64>| -> Result<()> {
            if checkpoints.contains(&round) {
                let codes = ctx.fista_codes(w, s.infer_lambda, s.infer_iters)?;
                let metrics = ctx.evaluate(&codes, Some(w))?;
                let row = Row::new(Method::DlFista, variant.clone(), seed, metrics, t.elapsed().as_secs_f64());
                rows.push(row.lambda(s.infer_lambda).iters(s.infer_iters).round(round));
            }
            Ok(())
        };
        if last == 0 {
            let w = match &init {
                DictInit::FromDictionary(m) => m.clone(),
                DictInit::Random(seed) => sparselab::dictlearn::random_dictionary(ctx.data.key.d_y, ctx.data.key.d_z, *seed),
            };
            eval_at(0, w.view())?;
        } else {
            let dl_cfg = ctx.dl_config(init, last);
            let mut failure = None;
            dl_fista_observed(ctx.data.train.y.view(), &dl_cfg, Some(&ctx.data.a), |round, w| {
                eval_at(round, w).map_err(|e| {
                    let msg = e.to_string();
                    failure = Some(e);
                    sparselab::LabError::Numeric(msg)
                })
            })
            .map_err(|e| failure.take().unwrap_or(HarnessError::Lab(e)))?;
        }
    }
    Ok(rows)
}

fn warmstart_encoder_cell(cfg: &ExperimentConfig, ctx: &mut CellContext) -> Result<Vec<Row>> {
    let s = ctx.settings;
    let mut rows = Vec::new();
    for (m, kind) in sae_kinds(cfg, ctx) {
        let t = Instant::now();
        let (init, model, seed, train_time) = encoder_codes(ctx, kind)?;
        let w_dec = model.w_dec.view();
        if cfg.methods.contains(&m) {
            let metrics = ctx.evaluate(&init, Some(w_dec))?;
            rows.push(Row::new(m, "encoder", seed, metrics, train_time + t.elapsed().as_secs_f64()));
        }
        for &iters in &cfg.grid.iters {
            if cfg.methods.contains(&Method::FrozenFista) {
                let t = Instant::now();
                let codes = ctx.frozen_codes(&model, s.frozen_lambda, iters, None)?;
                let metrics = ctx.evaluate(&codes, Some(w_dec))?;
                let row = Row::new(Method::FrozenFista, kind.name(), seed, metrics, t.elapsed().as_secs_f64());
                rows.push(row.lambda(s.frozen_lambda).iters(iters));
            }
            if cfg.methods.contains(&Method::Refined) {
                let t = Instant::now();
                let codes = ctx.frozen_codes(&model, s.frozen_lambda, iters, Some(&init))?;
                let metrics = ctx.evaluate(&codes, Some(w_dec))?;
                let row = Row::new(Method::Refined, kind.name(), seed, metrics, t.elapsed().as_secs_f64());
                rows.push(row.lambda(s.frozen_lambda).iters(iters));
            }
        }
    }
    Ok(rows)
}

fn lambda_sweep_cell(cfg: &ExperimentConfig, ctx: &mut CellContext) -> Result<Vec<Row>> {
    let s = ctx.settings;
    let mut rows = Vec::new();
    let kinds = sae_kinds(cfg, ctx);
    for &(m, kind) in &kinds {
        if cfg.methods.contains(&m) {
            let t = Instant::now();
            let (codes, model, seed, train_time) = encoder_codes(ctx, kind)?;
            let metrics = ctx.evaluate(&codes, Some(model.w_dec.view()))?;
            rows.push(Row::new(m, "encoder", seed, metrics, train_time + t.elapsed().as_secs_f64()));
        }
    }
    for &lambda in &cfg.grid.lambda {
        if cfg.methods.contains(&Method::FistaOracle) {
            rows.push(oracle_row(ctx, lambda, s.infer_iters)?);
        }
        if cfg.methods.contains(&Method::DlFista) {
            let (dl, seed, _) = ctx.dl()?;
            let w = dl.w.clone();
            let t = Instant::now();
            let codes = ctx.fista_codes(w.view(), lambda, s.infer_iters)?;
            let metrics = ctx.evaluate(&codes, Some(w.view()))?;
            let row = Row::new(Method::DlFista, "", seed, metrics, t.elapsed().as_secs_f64());
            rows.push(row.lambda(lambda).iters(s.infer_iters).round(s.dl_rounds));
        }
        if cfg.methods.contains(&Method::FrozenFista) {
            for &(_, kind) in &kinds {
                let (_, model, seed, _) = encoder_codes(ctx, kind)?;
                let t = Instant::now();
                let codes = ctx.frozen_codes(&model, lambda, s.frozen_iters, None)?;
                let metrics = ctx.evaluate(&codes, Some(model.w_dec.view()))?;
                let row = Row::new(Method::FrozenFista, kind.name(), seed, metrics, t.elapsed().as_secs_f64());
                rows.push(row.lambda(lambda).iters(s.frozen_iters));
            }
        }
    }
    Ok(rows)
}
