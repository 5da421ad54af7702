//! Result rows and their CSV form.

use std::cmp::Ordering;
use std::path::{Path, PathBuf};

use sparselab::io::fmt_f64;

use crate::config::Experiment;
use crate::error::{HarnessError, Result};

/// Evaluation metrics of one method in one cell. Absent values are left
/// empty in CSV output.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricRow {
    pub mcc_id: Option<f64>,
    pub mcc_ood: Option<f64>,
    pub auc_id: Option<f64>,
    pub auc_ood: Option<f64>,
    pub acc_id: Option<f64>,
    pub acc_ood: Option<f64>,
    pub support_precision: Option<f64>,
    pub support_recall: Option<f64>,
    pub support_f1: Option<f64>,
    /// Mean number of active code entries per ID sample.
    pub support_active: Option<f64>,
    pub dict_cosine: Option<f64>,
    /// Mean matched column angle in radians.
    pub dict_angle: Option<f64>,
    pub dict_norm_ratio: Option<f64>,
}

/// `(column, split)` of each metric, in CSV order.
pub const METRICS: [(&str, &str, &str); 13] = [
    ("mcc_id", "mcc", "id"),
    ("mcc_ood", "mcc", "ood"),
    ("auc_id", "auc", "id"),
    ("auc_ood", "auc", "ood"),
    ("acc_id", "acc", "id"),
    ("acc_ood", "acc", "ood"),
    ("support_precision", "support_precision", "id"),
    ("support_recall", "support_recall", "id"),
    ("support_f1", "support_f1", "id"),
    ("support_active", "support_active", "id"),
    ("dict_cosine", "dict_cosine", "model"),
    ("dict_angle", "dict_angle", "model"),
    ("dict_norm_ratio", "dict_norm_ratio", "model"),
];

impl MetricRow {
    pub fn values(&self) -> [Option<f64>; 13] {
        [
            self.mcc_id,
            self.mcc_ood,
            self.auc_id,
            self.auc_ood,
            self.acc_id,
            self.acc_ood,
            self.support_precision,
            self.support_recall,
            self.support_f1,
            self.support_active,
            self.dict_cosine,
            self.dict_angle,
            self.dict_norm_ratio,
        ]
    }

    pub fn from_values(v: [Option<f64>; 13]) -> Self {
        MetricRow {
            mcc_id: v[0],
            mcc_ood: v[1],
            auc_id: v[2],
            auc_ood: v[3],
            acc_id: v[4],
            acc_ood: v[5],
            support_precision: v[6],
            support_recall: v[7],
            support_f1: v[8],
            support_active: v[9],
            dict_cosine: v[10],
            dict_angle: v[11],
            dict_norm_ratio: v[12],
        }
    }

    pub fn get(&self, column: &str) -> Option<f64> {
        METRICS.iter().position(|m| m.0 == column).and_then(|i| self.values()[i])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub experiment: Experiment,
    pub method: String,
    pub variant: String,
    pub d_z: usize,
    pub k: usize,
    pub d_y: usize,
    pub p: usize,
    pub delta: Option<f64>,
    pub lambda: Option<f64>,
    pub round: Option<usize>,
    pub iters: Option<usize>,
    pub seed: u64,
    /// Seed that drove the method's own randomness.
    pub record_seed: u64,
    pub metrics: MetricRow,
    pub wall_time: f64,
}

const KEY_COLUMNS: [&str; 13] =
    ["experiment", "method", "variant", "d_z", "k", "d_y", "p", "delta", "lambda", "round", "iters", "seed", "record_seed"];

fn cmp_opt_f64(a: Option<f64>, b: Option<f64>) -> Ordering {
    match (a, b) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (a, b) => a.is_some().cmp(&b.is_some()),
    }
}

impl Record {
    /// Order by experiment, grid point, method and seed.
    pub fn sort_cmp(&self, other: &Record) -> Ordering {
        self.experiment
            .cmp(&other.experiment)
            .then(self.d_z.cmp(&other.d_z))
            .then(self.k.cmp(&other.k))
            .then(self.d_y.cmp(&other.d_y))
            .then(self.p.cmp(&other.p))
            .then(cmp_opt_f64(self.delta, other.delta))
            .then(cmp_opt_f64(self.lambda, other.lambda))
            .then(self.round.cmp(&other.round))
            .then(self.iters.cmp(&other.iters))
            .then(self.method.cmp(&other.method))
            .then(self.variant.cmp(&other.variant))
            .then(self.seed.cmp(&other.seed))
    }

    fn key_fields(&self) -> Vec<String> {
        let of = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        let ou = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
        vec![
            self.experiment.name().to_string(),
            self.method.clone(),
            self.variant.clone(),
            self.d_z.to_string(),
            self.k.to_string(),
            self.d_y.to_string(),
            self.p.to_string(),
            of(self.delta),
            of(self.lambda),
            ou(self.round),
            ou(self.iters),
            self.seed.to_string(),
            self.record_seed.to_string(),
        ]
    }
}

pub fn sort_records(records: &mut [Record]) {
    records.sort_by(Record::sort_cmp);
}

pub fn records_path(dir: &Path, experiment: Experiment) -> PathBuf {
    dir.join(format!("{}_records.csv", experiment.name()))
}

pub fn timing_path(dir: &Path, experiment: Experiment) -> PathBuf {
    dir.join(format!("{}_timing.csv", experiment.name()))
}

/// Write the records as CSV. Wall-clock times go to a separate file so
/// the records file is reproducible byte for byte.
pub fn write_records(w: impl std::io::Write, records: &[Record]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let header: Vec<&str> = KEY_COLUMNS.iter().copied().chain(METRICS.iter().map(|m| m.0)).collect();
    out.write_record(&header)?;
    for r in records {
        let mut fields = r.key_fields();
        fields.extend(r.metrics.values().iter().map(|v| v.map(fmt_f64).unwrap_or_default()));
        out.write_record(&fields)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_timing(w: impl std::io::Write, records: &[Record]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let header: Vec<&str> = KEY_COLUMNS.iter().copied().chain(["wall_time"]).collect();
    out.write_record(&header)?;
    for r in records {
        let mut fields = r.key_fields();
        fields.push(fmt_f64(r.wall_time));
        out.write_record(&fields)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_records(r: impl std::io::Read) -> Result<Vec<Record>> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers()?.clone();
    let expected: Vec<&str> = KEY_COLUMNS.iter().copied().chain(METRICS.iter().map(|m| m.0)).collect();
    if header.iter().collect::<Vec<_>>() != expected {
        return Err(HarnessError::config("records file has an unexpected header"));
    }
    let mut out = Vec::new();
    for (line, row) in rdr.records().enumerate() {
        let row = row?;
        let bad = |what: &str| HarnessError::config(format!("records row {}: bad {what}", line + 2));
        let int = |i: usize| row[i].parse::<usize>().map_err(|_| bad(KEY_COLUMNS[i]));
        let opt_int = |i: usize| -> Result<Option<usize>> {
            if row[i].is_empty() {
                Ok(None)
            } else {
                row[i].parse().map(Some).map_err(|_| bad(KEY_COLUMNS[i]))
            }
        };
        let opt_f = |i: usize, name: &str| -> Result<Option<f64>> {
            if row[i].is_empty() {
                Ok(None)
            } else {
                row[i].parse().map(Some).map_err(|_| bad(name))
            }
        };
        let mut metrics = [None; 13];
        for (j, m) in METRICS.iter().enumerate() {
            metrics[j] = opt_f(KEY_COLUMNS.len() + j, m.0)?;
        }
        out.push(Record {
            experiment: row[0].parse()?,
            method: row[1].to_string(),
            variant: row[2].to_string(),
            d_z: int(3)?,
            k: int(4)?,
            d_y: int(5)?,
            p: int(6)?,
            delta: opt_f(7, "delta")?,
            lambda: opt_f(8, "lambda")?,
            round: opt_int(9)?,
            iters: opt_int(10)?,
            seed: row[11].parse().map_err(|_| bad("seed"))?,
            record_seed: row[12].parse().map_err(|_| bad("record_seed"))?,
            metrics: MetricRow::from_values(metrics),
            wall_time: 0.0,
        });
    }
    Ok(out)
}
