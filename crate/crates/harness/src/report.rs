//! Per-metric summaries of record sets, as CSV tables and SVG charts.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use sparselab::io::fmt_f64;

use crate::config::{Experiment, XAxis};
use crate::error::Result;
use crate::records::{Record, METRICS};
use crate::svg::{line_chart, Chart, Series};

/// Aggregate over seeds of one series at one x value. `x` is `None` for
/// reference rows that do not depend on the swept parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryPoint {
    pub series: String,
    pub method: String,
    pub variant: String,
    pub x: Option<f64>,
    pub n: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

pub fn x_value(r: &Record, axis: XAxis) -> Option<f64> {
    match axis {
        XAxis::Delta => r.delta,
        XAxis::LatentDim => Some(r.d_z as f64),
        XAxis::Samples => Some(r.p as f64),
        XAxis::Sparsity => Some(r.k as f64),
        XAxis::Round => r.round.map(|v| v as f64),
        XAxis::Iters => r.iters.map(|v| v as f64),
        XAxis::Lambda => r.lambda,
    }
}

/// Series label: method and variant, plus every grid dimension other than
/// the x axis that takes more than one value in `records`.
fn series_labeler(records: &[&Record], axis: XAxis) -> impl Fn(&Record) -> String {
    let varies = |f: &dyn Fn(&Record) -> String| {
        let mut vals: Vec<String> = records.iter().map(|r| f(r)).collect();
        vals.sort();
        vals.dedup();
        vals.len() > 1
    };
    let mut dims: Vec<(&'static str, fn(&Record) -> String)> = Vec::new();
    let candidates: [(&'static str, fn(&Record) -> String, bool); 4] = [
        ("d_z", |r| r.d_z.to_string(), axis == XAxis::LatentDim),
        ("k", |r| r.k.to_string(), axis == XAxis::Sparsity),
        ("p", |r| r.p.to_string(), axis == XAxis::Samples),
        ("d_y", |r| r.d_y.to_string(), matches!(axis, XAxis::Delta | XAxis::LatentDim | XAxis::Sparsity)),
    ];
    for (name, f, is_axis) in candidates {
        if !is_axis && varies(&f) {
            dims.push((name, f));
        }
    }
    move |r: &Record| {
        let mut s = r.method.clone();
        if !r.variant.is_empty() {
            s.push('/');
            s.push_str(&r.variant);
        }
        for (name, f) in &dims {
            s.push_str(&format!(" {name}={}", f(r)));
        }
        s
    }
}

/// Mean, min and max over seeds of `column` for each series and x value.
pub fn summarise(records: &[Record], experiment: Experiment, column: &str) -> Vec<SummaryPoint> {
    let axis = experiment.x_axis();
    let rel: Vec<&Record> = records.iter().filter(|r| r.experiment == experiment && r.variant != "skipped").collect();
    let label = series_labeler(&rel, axis);
    let mut groups: BTreeMap<(String, Option<u64>), (String, String, Option<f64>, Vec<f64>)> = BTreeMap::new();
    for r in rel {
        let Some(v) = r.metrics.get(column) else { continue };
        let x = x_value(r, axis);
        let key = (label(r), x.map(|v| v.to_bits()));
        groups.entry(key).or_insert_with(|| (r.method.clone(), r.variant.clone(), x, Vec::new())).3.push(v);
    }
    let mut out: Vec<SummaryPoint> = groups
        .into_iter()
        .map(|((series, _), (method, variant, x, vals))| SummaryPoint {
            series,
            method,
            variant,
            x,
            n: vals.len(),
            mean: vals.iter().sum::<f64>() / vals.len() as f64,
            min: vals.iter().copied().fold(f64::INFINITY, f64::min),
            max: vals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
        .collect();
    out.sort_by(|a, b| {
        a.series.cmp(&b.series).then(match (a.x, b.x) {
            (Some(p), Some(q)) => p.total_cmp(&q),
            (p, q) => p.is_some().cmp(&q.is_some()),
        })
    });
    out
}

fn write_summary_csv(path: &Path, axis: XAxis, points: &[SummaryPoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["series", "method", "variant", axis.column(), "n", "mean", "min", "max"])?;
    for p in points {
        w.write_record([
            p.series.clone(),
            p.method.clone(),
            p.variant.clone(),
            p.x.map(fmt_f64).unwrap_or_default(),
            p.n.to_string(),
            fmt_f64(p.mean),
            fmt_f64(p.min),
            fmt_f64(p.max),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn y_label(metric: &str) -> &'static str {
    match metric {
        "mcc" => "MCC (dimensionless)",
        "auc" => "AUC (dimensionless)",
        "acc" => "accuracy (fraction)",
        "support_precision" => "support precision (fraction)",
        "support_recall" => "support recall (fraction)",
        "support_f1" => "support F1 (fraction)",
        "support_active" => "active units per sample (count)",
        "dict_cosine" => "matched column cosine (dimensionless)",
        "dict_angle" => "matched column angle (rad)",
        "dict_norm_ratio" => "column norm ratio (dimensionless)",
        _ => "value",
    }
}

fn unit_range(metric: &str) -> bool {
    !matches!(metric, "support_active" | "dict_angle" | "dict_norm_ratio")
}

/// Write `{experiment}_{metric}_{split}.csv` and `.svg` for every metric
/// present in the records and return the written paths.
pub fn emit_report(records: &[Record], out_dir: &Path, svg: bool) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let mut experiments: Vec<Experiment> = records.iter().map(|r| r.experiment).collect();
    experiments.sort();
    experiments.dedup();
    let mut written = Vec::new();
    for e in experiments {
        let axis = e.x_axis();
        for (column, metric, split) in METRICS {
            let points = summarise(records, e, column);
            if points.is_empty() {
                continue;
            }
            let stem = out_dir.join(format!("{}_{metric}_{split}", e.name()));
            let csv_path = stem.with_extension("csv");
            write_summary_csv(&csv_path, axis, &points)?;
            written.push(csv_path);
            if svg {
                let svg_path = stem.with_extension("svg");
                fs::write(&svg_path, chart_for(e, metric, split, &points))?;
                written.push(svg_path);
            }
        }
    }
    Ok(written)
}

fn chart_for(e: Experiment, metric: &str, split: &str, points: &[SummaryPoint]) -> String {
    let mut series: Vec<Series> = Vec::new();
    for p in points {
        if series.last().map_or(true, |s| s.name != p.series) {
            series.push(Series { name: p.series.clone(), points: Vec::new(), reference: None });
        }
        let s = series.last_mut().expect("pushed");
        match p.x {
            Some(x) => s.points.push((x, p.mean, p.min, p.max)),
            None => s.reference = Some(p.mean),
        }
    }
    let axis = e.x_axis();
    line_chart(&Chart {
        title: format!("{} / {metric} / {split}", e.name()),
        x_label: axis.label().to_string(),
        y_label: y_label(metric).to_string(),
        log_x: axis.log_scale(),
        y_unit_range: unit_range(metric),
        series,
    })
}
