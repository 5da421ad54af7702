use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sparselab::synthgen::cs_bound_dim;
use sparselab_harness::cell::CellKey;
use sparselab_harness::config::{Experiment, ExperimentConfig, Settings};
use sparselab_harness::error::{HarnessError, Result};

/// Sparse inference under superposition: synthetic benchmarks comparing
/// per-sample sparse coding, dictionary learning and sparse autoencoders.
#[derive(Parser)]
#[command(name = "sparselab", version)]
struct Cli {
    /// JSON experiment configuration; flags below override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (defaults to the number of CPUs).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Include the large grid values (d_z up to 10000, p up to 100000).
    #[arg(long, global = true)]
    large: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write one cell's mixing matrix and data splits as CSV.
    GenData {
        #[arg(long)]
        d_z: usize,
        #[arg(long)]
        k: usize,
        /// Observation dimension; the compressed-sensing bound when omitted.
        #[arg(long)]
        d_y: Option<usize>,
        #[arg(long, default_value_t = 1000)]
        p: usize,
        #[arg(long, default_value_t = 2000)]
        n_test: usize,
    },
    /// Oracle and SAE recovery versus undersampling ratio.
    Phase,
    /// Recovery versus latent dimension.
    VaryLatents,
    /// Recovery versus number of training samples.
    VarySamples,
    /// Recovery versus number of active latents.
    VarySparsity,
    /// SAE encoder versus FISTA on the frozen SAE decoder.
    Frozen,
    /// Dictionary learning initialised from SAE decoders.
    WarmstartDecoder,
    /// FISTA initialised from SAE encoder codes.
    WarmstartEncoder,
    /// Frozen-decoder and oracle FISTA across l1 weights.
    LambdaSweep,
    /// Support precision and recall of SAE codes.
    Support,
    /// Analytic versus simulated OOD accuracy of the planar toy model.
    TheoryGrid,
    /// Rebuild per-metric CSV and SVG reports from records files.
    Report {
        /// Directory holding `*_records.csv` files (defaults to --out).
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

impl Command {
    fn experiment(&self) -> Option<Experiment> {
        Some(match self {
            Command::Phase => Experiment::PhaseSweep,
            Command::VaryLatents => Experiment::VaryLatents,
            Command::VarySamples => Experiment::VarySamples,
            Command::VarySparsity => Experiment::VarySparsity,
            Command::Frozen => Experiment::FrozenAblation,
            Command::WarmstartDecoder => Experiment::WarmstartDecoder,
            Command::WarmstartEncoder => Experiment::WarmstartEncoder,
            Command::LambdaSweep => Experiment::LambdaSweep,
            Command::Support => Experiment::SupportRecovery,
            Command::TheoryGrid => Experiment::TheoryGrid,
            Command::GenData { .. } | Command::Report { .. } => return None,
        })
    }
}

fn resolve_config(cli: &Cli, experiment: Experiment) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let cfg = ExperimentConfig::load(path)?;
            if cfg.experiment != experiment {
                return Err(HarnessError::config(format!(
                    "{} configures {}, but the subcommand runs {experiment}",
                    path.display(),
                    cfg.experiment
                )));
            }
            cfg
        }
        None => ExperimentConfig::default_for(experiment),
    };
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if cli.large {
        cfg.large = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(HarnessError::config("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| HarnessError::config(e.to_string()))?;
    }
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("results"));
    let written = match &cli.command {
        Command::GenData { d_z, k, d_y, p, n_test } => {
            let d_y = match d_y {
                Some(v) => *v,
                None => cs_bound_dim(*k, *d_z)?,
            };
            let settings = Settings { n_test: *n_test, ..Settings::default() };
            sparselab_harness::generate_data(cli.seed.unwrap_or(0), CellKey { d_z: *d_z, k: *k, d_y, p: *p }, 0, &settings, &out)?
        }
        Command::Report { input } => sparselab_harness::report_from_dir(input.as_ref().unwrap_or(&out), &out)?,
        cmd => {
            let experiment = cmd.experiment().expect("experiment subcommand");
            let cfg = resolve_config(cli, experiment)?;
            sparselab_harness::run_to_dir(&cfg)?
        }
    };
    for path in written {
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
