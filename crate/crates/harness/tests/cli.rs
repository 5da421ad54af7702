use std::fs;
use std::path::Path;
use std::process::Command;

use sparselab_harness::config::{Experiment, ExperimentConfig, Method};
use sparselab_harness::records::read_records;

fn sparselab(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_sparselab")).args(args).output().expect("binary runs")
}

fn tiny(experiment: Experiment, out: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default_for(experiment);
    cfg.grid.d_z = vec![20];
    cfg.grid.k = vec![3];
    cfg.grid.p = vec![200];
    cfg.grid.large_d_z.clear();
    cfg.grid.large_p.clear();
    cfg.seeds = vec![0, 1];
    cfg.settings.n_test = 200;
    cfg.settings.n_probe = 200;
    cfg.settings.sae.epochs = 3;
    cfg.settings.dl_rounds = 3;
    cfg.output_dir = out.to_path_buf();
    cfg
}

fn write_config(dir: &Path, cfg: &ExperimentConfig) -> String {
    let path = dir.join("config.json");
    fs::write(&path, cfg.to_json()).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn one_row_per_grid_point_method_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny(Experiment::VarySamples, dir.path());
    cfg.grid.p = vec![100, 200];
    cfg.methods = vec![Method::FistaOracle, Method::SaeTopK, Method::LinearProbe];
    let config = write_config(dir.path(), &cfg);
    let out = sparselab(&["vary-samples", "--config", &config]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let records = read_records(fs::File::open(dir.path().join("vary_samples_records.csv")).unwrap()).unwrap();
    assert_eq!(records.len(), 2 * 3 * 2);
    let d_y = sparselab::synthgen::cs_bound_dim(3, 20).unwrap();
    assert!(records.iter().all(|r| r.d_y == d_y && r.metrics.mcc_id.is_some()));
    for name in ["vary_samples_config.json", "vary_samples_timing.csv", "vary_samples_mcc_id.csv", "vary_samples_mcc_id.svg"] {
        assert!(dir.path().join(name).exists(), "missing {name}");
    }
}

#[test]
fn reruns_are_byte_identical() {
    let outputs: Vec<Vec<u8>> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap();
            let mut cfg = tiny(Experiment::FrozenAblation, dir.path());
            cfg.methods = vec![Method::DlFista, Method::SaeRelu, Method::FrozenFista, Method::Refined];
            let config = write_config(dir.path(), &cfg);
            let out = sparselab(&["frozen", "--config", &config, "--threads", "2"]);
            assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
            fs::read(dir.path().join("frozen_ablation_records.csv")).unwrap()
        })
        .collect();
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn seed_flag_changes_the_data() {
    let read = |seed: &str| {
        let dir = tempfile::tempdir().unwrap();
        let out = sparselab(&["gen-data", "--d-z", "20", "--k", "3", "--p", "50", "--n-test", "20", "--seed", seed, "--out", dir.path().to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        fs::read_to_string(dir.path().join("mixing.csv")).unwrap()
    };
    assert_eq!(read("4"), read("4"));
    assert_ne!(read("4"), read("5"));
}

#[test]
fn configuration_errors_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(Experiment::VarySamples, dir.path());
    let config = write_config(dir.path(), &cfg);
    assert_eq!(sparselab(&["phase", "--config", &config]).status.code(), Some(2));

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"experiment": "phase_sweep", "no_such_field": 1}"#).unwrap();
    assert_eq!(sparselab(&["phase", "--config", bad.to_str().unwrap()]).status.code(), Some(2));

    assert_eq!(sparselab(&["gen-data", "--d-z", "20", "--k", "30"]).status.code(), Some(2));
}

#[test]
fn report_rebuilds_summaries_from_records() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny(Experiment::LambdaSweep, dir.path());
    cfg.grid.lambda = vec![0.01, 0.1];
    cfg.methods = vec![Method::FistaOracle];
    let config = write_config(dir.path(), &cfg);
    assert!(sparselab(&["lambda-sweep", "--config", &config]).status.success());
    let summary = fs::read(dir.path().join("lambda_sweep_mcc_id.csv")).unwrap();
    let out_dir = dir.path().join("again");
    let out = sparselab(&["report", "--input", dir.path().to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read(out_dir.join("lambda_sweep_mcc_id.csv")).unwrap(), summary);
}
