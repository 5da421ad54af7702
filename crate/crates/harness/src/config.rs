//! Experiment configuration.
//!
//! A configuration is a JSON document carrying a `schema_version`. Every
//! field except `experiment` may be omitted, in which case the experiment's
//! built-in default is used. Command-line flags are applied on top.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sparselab::sae::{SaeKind, SaeTrainConfig};

use crate::error::{HarnessError, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    PhaseSweep,
    VaryLatents,
    VarySamples,
    VarySparsity,
    FrozenAblation,
    WarmstartDecoder,
    WarmstartEncoder,
    LambdaSweep,
    SupportRecovery,
    TheoryGrid,
}

impl Experiment {
    pub const ALL: [Experiment; 10] = [
        Experiment::PhaseSweep,
        Experiment::VaryLatents,
        Experiment::VarySamples,
        Experiment::VarySparsity,
        Experiment::FrozenAblation,
        Experiment::WarmstartDecoder,
        Experiment::WarmstartEncoder,
        Experiment::LambdaSweep,
        Experiment::SupportRecovery,
        Experiment::TheoryGrid,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::PhaseSweep => "phase_sweep",
            Experiment::VaryLatents => "vary_latents",
            Experiment::VarySamples => "vary_samples",
            Experiment::VarySparsity => "vary_sparsity",
            Experiment::FrozenAblation => "frozen_ablation",
            Experiment::WarmstartDecoder => "warmstart_decoder",
            Experiment::WarmstartEncoder => "warmstart_encoder",
            Experiment::LambdaSweep => "lambda_sweep",
            Experiment::SupportRecovery => "support_recovery",
            Experiment::TheoryGrid => "theory_grid",
        }
    }

    /// Grid parameter plotted on the horizontal axis of reports.
    pub fn x_axis(self) -> XAxis {
        match self {
            Experiment::PhaseSweep => XAxis::Delta,
            Experiment::VaryLatents | Experiment::FrozenAblation | Experiment::SupportRecovery => XAxis::LatentDim,
            Experiment::VarySamples => XAxis::Samples,
            Experiment::VarySparsity => XAxis::Sparsity,
            Experiment::WarmstartDecoder => XAxis::Round,
            Experiment::WarmstartEncoder => XAxis::Iters,
            Experiment::LambdaSweep | Experiment::TheoryGrid => XAxis::Lambda,
        }
    }

    /// Whether `d_y` is taken from the compressed-sensing bound rather
    /// than from an undersampling ratio.
    pub fn follows_cs_bound(self) -> bool {
        !matches!(self, Experiment::PhaseSweep | Experiment::TheoryGrid)
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| HarnessError::config(format!("unknown experiment {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum XAxis {
    Delta,
    LatentDim,
    Samples,
    Sparsity,
    Round,
    Iters,
    Lambda,
}

impl XAxis {
    pub fn column(self) -> &'static str {
        match self {
            XAxis::Delta => "delta",
            XAxis::LatentDim => "d_z",
            XAxis::Samples => "p",
            XAxis::Sparsity => "k",
            XAxis::Round => "round",
            XAxis::Iters => "iters",
            XAxis::Lambda => "lambda",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            XAxis::Delta => "undersampling ratio delta = d_y / d_z (dimensionless)",
            XAxis::LatentDim => "latent dimension d_z (count, log scale)",
            XAxis::Samples => "training samples p (count, log scale)",
            XAxis::Sparsity => "active latents k (count)",
            XAxis::Round => "dictionary-learning round (count)",
            XAxis::Iters => "FISTA iterations (count, log scale)",
            XAxis::Lambda => "l1 weight lambda (dimensionless, log scale)",
        }
    }

    pub fn log_scale(self) -> bool {
        matches!(self, XAxis::LatentDim | XAxis::Samples | XAxis::Iters | XAxis::Lambda)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    FistaOracle,
    DlFista,
    SaeRelu,
    SaeJumpRelu,
    SaeTopK,
    SaeMp,
    FrozenFista,
    Refined,
    LinearProbe,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::FistaOracle => "fista_oracle",
            Method::DlFista => "dl_fista",
            Method::SaeRelu => "sae_relu",
            Method::SaeJumpRelu => "sae_jumprelu",
            Method::SaeTopK => "sae_topk",
            Method::SaeMp => "sae_mp",
            Method::FrozenFista => "frozen_fista",
            Method::Refined => "refined",
            Method::LinearProbe => "linear_probe",
        }
    }

    pub fn is_sae(self) -> bool {
        matches!(self, Method::SaeRelu | Method::SaeJumpRelu | Method::SaeTopK | Method::SaeMp)
    }

    /// SAE variant with TopK's `k` and MP's step count set from `count`.
    pub fn sae_kind(self, count: usize) -> Option<SaeKind> {
        match self {
            Method::SaeRelu => Some(SaeKind::Relu),
            Method::SaeJumpRelu => Some(SaeKind::JumpRelu),
            Method::SaeTopK => Some(SaeKind::TopK { k: count }),
            Method::SaeMp => Some(SaeKind::Mp { steps: count }),
            _ => None,
        }
    }

    pub const SAES: [Method; 4] = [Method::SaeRelu, Method::SaeJumpRelu, Method::SaeTopK, Method::SaeMp];
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        use Method::*;
        [FistaOracle, DlFista, SaeRelu, SaeJumpRelu, SaeTopK, SaeMp, FrozenFista, Refined, LinearProbe]
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| HarnessError::config(format!("unknown method {s:?}")))
    }
}

/// Sweep axes. Each experiment reads the lists it needs and ignores the
/// rest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grid {
    pub d_z: Vec<usize>,
    pub k: Vec<usize>,
    /// Undersampling ratios for the phase sweep.
    pub delta: Vec<f64>,
    /// Read `delta` as multiples of `2ρ ln(1/ρ)` instead of absolute ratios.
    pub delta_relative: bool,
    pub p: Vec<usize>,
    pub lambda: Vec<f64>,
    /// Dictionary-learning rounds at which warm-start curves are sampled.
    pub rounds: Vec<usize>,
    /// FISTA iteration budgets for the encoder warm-start sweep.
    pub iters: Vec<usize>,
    /// Extra `d_z` values enabled by `--large`.
    pub large_d_z: Vec<usize>,
    /// Extra `p` values enabled by `--large`.
    pub large_p: Vec<usize>,
    /// `[min, max]` of φ for the theory grid, in radians.
    pub phi: [f64; 2],
    /// `[min, max]` of θ for the theory grid, in radians.
    pub theta: [f64; 2],
    /// Points per angle in the theory grid.
    pub points: usize,
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            d_z: vec![100],
            k: vec![10],
            delta: Vec::new(),
            delta_relative: false,
            p: vec![1000],
            lambda: Vec::new(),
            rounds: Vec::new(),
            iters: Vec::new(),
            large_d_z: Vec::new(),
            large_p: Vec::new(),
            phi: [0.35 * PI, 0.97 * PI],
            theta: [0.66 * PI, 0.97 * PI],
            points: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SaeSettings {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub gamma_reg: f64,
    /// TopK's `k`; the cell's latent sparsity when absent.
    pub topk_k: Option<usize>,
    /// MP step count; the cell's latent sparsity when absent.
    pub mp_steps: Option<usize>,
}

impl Default for SaeSettings {
    fn default() -> Self {
        let d = SaeTrainConfig::default();
        SaeSettings {
            epochs: d.epochs,
            batch_size: d.batch_size,
            learning_rate: d.learning_rate,
            gamma_reg: d.gamma_reg,
            topk_k: None,
            mp_steps: None,
        }
    }
}

impl SaeSettings {
    pub fn train_config(&self, seed: u64) -> SaeTrainConfig {
        SaeTrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            gamma_reg: self.gamma_reg,
            seed,
            trace_every: self.epochs,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub n_test: usize,
    /// Size of the separate ID sample the logistic probes are fitted on.
    pub n_probe: usize,
    /// λ for FISTA with the ground-truth or a learned dictionary at test
    /// time.
    pub infer_lambda: f64,
    pub infer_iters: usize,
    pub dl_lambda: f64,
    pub dl_rounds: usize,
    pub dl_inner_iters: usize,
    pub dl_replace_coherence: Option<f64>,
    /// λ and iteration budget for FISTA on a frozen SAE decoder.
    pub frozen_lambda: f64,
    pub frozen_iters: usize,
    pub probe_l2: f64,
    pub ridge_alpha: f64,
    pub sae: SaeSettings,
    /// Monte-Carlo samples per theory grid point.
    pub theory_samples: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            n_test: 2000,
            n_probe: 2000,
            infer_lambda: 0.01,
            infer_iters: 1000,
            dl_lambda: 0.1,
            dl_rounds: 150,
            dl_inner_iters: 100,
            dl_replace_coherence: Some(sparselab::dictlearn::DEFAULT_REPLACE_COHERENCE),
            frozen_lambda: 0.1,
            frozen_iters: 100,
            probe_l2: sparselab::probes::DEFAULT_LOGISTIC_L2,
            ridge_alpha: sparselab::probes::DEFAULT_RIDGE_ALPHA,
            sae: SaeSettings::default(),
            theory_samples: 1_000_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub experiment: Experiment,
    pub master_seed: u64,
    pub grid: Grid,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    pub settings: Settings,
    /// Include the `large_*` grid values.
    pub large: bool,
}

/// On-disk form: everything but `experiment` may be omitted.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    schema_version: u32,
    experiment: Experiment,
    master_seed: Option<u64>,
    grid: Option<serde_json::Value>,
    methods: Option<Vec<Method>>,
    seeds: Option<Vec<u64>>,
    output_dir: Option<PathBuf>,
    settings: Option<serde_json::Value>,
    large: Option<bool>,
}

const ALL_CODERS: [Method; 7] = [
    Method::FistaOracle,
    Method::DlFista,
    Method::SaeRelu,
    Method::SaeJumpRelu,
    Method::SaeTopK,
    Method::SaeMp,
    Method::LinearProbe,
];

impl ExperimentConfig {
    pub fn default_for(experiment: Experiment) -> Self {
        let mut grid = Grid::default();
        let mut settings = Settings::default();
        let saes = Method::SAES.to_vec();
        let with = |extra: &[Method]| -> Vec<Method> { extra.iter().copied().chain(saes.iter().copied()).collect() };
        let methods = match experiment {
            Experiment::PhaseSweep => {
                grid.d_z = vec![50, 100, 200];
                grid.k = vec![3, 5, 10];
                grid.delta = vec![0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.4, 0.5, 0.6, 0.8, 1.0];
                settings.infer_lambda = 0.1;
                with(&[Method::FistaOracle])
            }
            Experiment::VaryLatents => {
                grid.d_z = vec![50, 100, 500, 1000];
                grid.large_d_z = vec![5000, 10000];
                ALL_CODERS.to_vec()
            }
            Experiment::VarySamples => {
                grid.p = vec![100, 1000, 10000];
                grid.large_p = vec![100000];
                ALL_CODERS.to_vec()
            }
            Experiment::VarySparsity => {
                grid.d_z = vec![1000];
                grid.k = vec![3, 5, 10, 20];
                ALL_CODERS.to_vec()
            }
            Experiment::FrozenAblation => {
                grid.large_d_z = vec![5000];
                with(&[Method::FistaOracle, Method::DlFista, Method::FrozenFista, Method::Refined])
            }
            Experiment::WarmstartDecoder => {
                grid.rounds = vec![0, 1, 2, 5, 10, 20, 50, 100, 150];
                with(&[Method::FistaOracle, Method::DlFista])
            }
            Experiment::WarmstartEncoder => {
                grid.iters = vec![1, 2, 5, 10, 20, 50, 100];
                with(&[Method::FrozenFista, Method::Refined])
            }
            Experiment::LambdaSweep => {
                grid.lambda = vec![0.001, 0.003, 0.01, 0.03, 0.1, 0.2, 0.5, 1.0, 2.0];
                with(&[Method::FistaOracle, Method::FrozenFista])
            }
            Experiment::SupportRecovery => {
                grid.d_z = vec![100, 1000];
                grid.large_d_z = vec![5000];
                with(&[Method::FistaOracle, Method::FrozenFista])
            }
            Experiment::TheoryGrid => Vec::new(),
        };
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            experiment,
            master_seed: 0,
            grid,
            methods,
            seeds: (0..5).collect(),
            output_dir: PathBuf::from("results"),
            settings,
            large: false,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ConfigFile = serde_json::from_str(text).map_err(|e| HarnessError::config(e.to_string()))?;
        if file.schema_version != SCHEMA_VERSION {
            return Err(HarnessError::config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                file.schema_version
            )));
        }
        let mut cfg = ExperimentConfig::default_for(file.experiment);
        if let Some(v) = file.master_seed {
            cfg.master_seed = v;
        }
        if let Some(g) = file.grid {
            cfg.grid = merge(&cfg.grid, g)?;
        }
        if let Some(m) = file.methods {
            cfg.methods = m;
        }
        if let Some(s) = file.seeds {
            cfg.seeds = s;
        }
        if let Some(o) = file.output_dir {
            cfg.output_dir = o;
        }
        if let Some(s) = file.settings {
            cfg.settings = merge(&cfg.settings, s)?;
        }
        if let Some(l) = file.large {
            cfg.large = l;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::config(format!("cannot read {}: {e}", path.display())))?;
        ExperimentConfig::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serialises")
    }

    pub fn d_z_values(&self) -> Vec<usize> {
        extended(&self.grid.d_z, &self.grid.large_d_z, self.large)
    }

    pub fn p_values(&self) -> Vec<usize> {
        extended(&self.grid.p, &self.grid.large_p, self.large)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(HarnessError::config(format!("{}: {msg}", self.experiment)));
        if self.schema_version != SCHEMA_VERSION {
            return bad("unsupported schema_version");
        }
        if self.seeds.is_empty() {
            return bad("seeds must not be empty");
        }
        let g = &self.grid;
        if self.experiment == Experiment::TheoryGrid {
            if g.points == 0 || self.settings.theory_samples == 0 {
                return bad("theory grid needs points >= 1 and theory_samples >= 1");
            }
            if !(g.phi[0] <= g.phi[1] && g.theta[0] <= g.theta[1]) {
                return bad("phi and theta ranges must be [min, max]");
            }
            return Ok(());
        }
        if self.methods.is_empty() {
            return bad("methods must not be empty");
        }
        if g.d_z.is_empty() || g.k.is_empty() || g.p.is_empty() {
            return bad("grid.d_z, grid.k and grid.p must not be empty");
        }
        if g.p.iter().chain(&g.large_p).any(|&p| p == 0) {
            return bad("grid.p values must be positive");
        }
        match self.experiment {
            Experiment::PhaseSweep if g.delta.is_empty() => return bad("grid.delta must not be empty"),
            Experiment::LambdaSweep if g.lambda.is_empty() => return bad("grid.lambda must not be empty"),
            Experiment::WarmstartDecoder if g.rounds.is_empty() => return bad("grid.rounds must not be empty"),
            Experiment::WarmstartEncoder if g.iters.is_empty() || g.iters.contains(&0) => {
                return bad("grid.iters must be non-empty and positive")
            }
            _ => {}
        }
        if g.delta.iter().chain(&g.lambda).any(|v| !(v.is_finite() && *v > 0.0)) {
            return bad("grid.delta and grid.lambda values must be positive");
        }
        let s = &self.settings;
        if s.n_test < 2 || s.n_probe < 2 {
            return bad("n_test and n_probe must be at least 2");
        }
        if [s.infer_lambda, s.dl_lambda, s.frozen_lambda].iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return bad("lambdas must be positive");
        }
        if s.infer_iters == 0 || s.frozen_iters == 0 || s.dl_inner_iters == 0 || s.dl_rounds == 0 {
            return bad("iteration and round counts must be positive");
        }
        if !(s.probe_l2 >= 0.0 && s.ridge_alpha >= 0.0) {
            return bad("probe_l2 and ridge_alpha must be non-negative");
        }
        s.sae.train_config(0).validate().map_err(|e| HarnessError::config(e.to_string()))?;
        Ok(())
    }
}

fn extended(base: &[usize], large: &[usize], on: bool) -> Vec<usize> {
    let mut v = base.to_vec();
    if on {
        v.extend(large.iter().copied().filter(|x| !base.contains(x)));
    }
    v
}

/// Overlay the fields present in `patch` on `base`.
fn merge<T: Serialize + serde::de::DeserializeOwned>(base: &T, patch: serde_json::Value) -> Result<T> {
    let mut value = serde_json::to_value(base).expect("configuration serialises");
    overlay(&mut value, patch);
    serde_json::from_value(value).map_err(|e| HarnessError::config(e.to_string()))
}

fn overlay(base: &mut serde_json::Value, patch: serde_json::Value) {
    match (base, patch) {
        (serde_json::Value::Object(b), serde_json::Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => overlay(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        for e in Experiment::ALL {
            let cfg = ExperimentConfig::default_for(e);
            cfg.validate().unwrap();
            let back = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
            assert_eq!(back, cfg);
        }
    }

    #[test]
    fn partial_file_overrides_only_named_fields() {
        let cfg = ExperimentConfig::from_json(
            r#"{"schema_version": 1, "experiment": "vary_samples", "grid": {"p": [100]}, "settings": {"sae": {"epochs": 3}}}"#,
        )
        .unwrap();
        assert_eq!(cfg.grid.p, vec![100]);
        assert_eq!(cfg.grid.d_z, vec![100]);
        assert_eq!(cfg.settings.sae.epochs, 3);
        assert_eq!(cfg.settings.sae.batch_size, 256);
    }

    #[test]
    fn wrong_schema_and_unknown_fields_are_config_errors() {
        let e = ExperimentConfig::from_json(r#"{"schema_version": 9, "experiment": "phase_sweep"}"#).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let e = ExperimentConfig::from_json(r#"{"schema_version": 1, "experiment": "phase_sweep", "grid": {"dz": [1]}}"#)
            .unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let e = ExperimentConfig::from_json(r#"{"schema_version": 1, "experiment": "phase_sweep", "seeds": []}"#).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn large_flag_appends_values() {
        let mut cfg = ExperimentConfig::default_for(Experiment::VarySamples);
        assert_eq!(cfg.p_values(), vec![100, 1000, 10000]);
        cfg.large = true;
        assert_eq!(cfg.p_values(), vec![100, 1000, 10000, 100000]);
    }
}
