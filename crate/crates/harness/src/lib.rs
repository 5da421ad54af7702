//! Experiment harness for `sparselab`: configurable sweeps over synthetic
//! superposition data, deterministic CSV records, per-metric summaries and
//! SVG charts.

pub mod cell;
pub mod config;
pub mod error;
pub mod experiments;
pub mod records;
pub mod report;
pub mod svg;
pub mod theory_grid;

use std::fs;
use std::path::{Path, PathBuf};

use sparselab::synthgen::Dataset;

use crate::cell::{CellData, CellKey};
use crate::config::{Experiment, ExperimentConfig, Settings};
use crate::error::Result;

pub use crate::error::HarnessError;

/// Run an experiment and write its artefacts to `cfg.output_dir`:
/// the sorted records, a timing table, the resolved configuration and the
/// per-metric report. Returns the written paths.
pub fn run_to_dir(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let config_path = dir.join(format!("{}_config.json", cfg.experiment.name()));
    fs::write(&config_path, cfg.to_json() + "\n")?;
    written.push(config_path);
    if cfg.experiment == Experiment::TheoryGrid {
        let points = theory_grid::run_theory_grid(cfg)?;
        let path = dir.join("theory_grid.csv");
        theory_grid::write_theory_csv(fs::File::create(&path)?, &points)?;
        written.push(path);
        return Ok(written);
    }
    let records = experiments::run_experiment(cfg)?;
    let path = records::records_path(dir, cfg.experiment);
    records::write_records(fs::File::create(&path)?, &records)?;
    written.push(path);
    let path = records::timing_path(dir, cfg.experiment);
    records::write_timing(fs::File::create(&path)?, &records)?;
    written.push(path);
    written.extend(report::emit_report(&records, dir, true)?);
    Ok(written)
}

/// Regenerate reports from every `*_records.csv` in `input`.
pub fn report_from_dir(input: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(input)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.file_name().is_some_and(|n| n.to_string_lossy().ends_with("_records.csv")))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(HarnessError::config(format!("no *_records.csv files in {}", input.display())));
    }
    let mut all = Vec::new();
    for f in files {
        all.extend(records::read_records(fs::File::open(f)?)?);
    }
    report::emit_report(&all, out, true)
}

/// Write the mixing matrix and the train, ID-test and OOD-test splits of
/// one cell as CSV files.
pub fn generate_data(master_seed: u64, key: CellKey, seed: u64, settings: &Settings, out: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out)?;
    let cell = CellData::generate(master_seed, key, seed, settings)?;
    let mut written = Vec::new();
    let path = out.join("mixing.csv");
    sparselab::io::write_matrix_csv(&path, cell.a.matrix().view())?;
    written.push(path);
    let splits: [(&str, &Dataset); 3] = [("train", &cell.train), ("id_test", &cell.id_test), ("ood_test", &cell.ood_test)];
    for (name, ds) in splits {
        let path = out.join(format!("{name}.csv"));
        let mut f = std::io::BufWriter::new(fs::File::create(&path)?);
        ds.write_csv(&mut f)?;
        written.push(path);
    }
    Ok(written)
}
