//! Analytic versus simulated OOD accuracy of the planar toy model over a
//! grid of angles.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use sparselab::io::fmt_f64;
use sparselab::seed_of;
use sparselab::theory::{analytic_ood_accuracy, case1_accuracy, case2_accuracy, classify_case, simulate_ood_accuracy, ToyGeometry};

use crate::config::ExperimentConfig;
use crate::error::Result;

/// Grid points closer than this (in radians) to a degenerate configuration
/// are left out.
pub const DEGENERACY_MARGIN: f64 = 0.02;

#[derive(Clone, Debug, PartialEq)]
pub struct TheoryPoint {
    pub phi: f64,
    pub theta: f64,
    pub case: u8,
    pub acc_analytic: f64,
    pub acc_simulated: f64,
    pub n: usize,
}

fn lerp(range: [f64; 2], i: usize, n: usize) -> f64 {
    if n == 1 {
        range[0]
    } else {
        range[0] + (range[1] - range[0]) * i as f64 / (n - 1) as f64
    }
}

fn well_posed(phi: f64, theta: f64) -> bool {
    let m = DEGENERACY_MARGIN;
    phi > m && phi < PI - m && theta > m && theta < PI - m && phi + theta > PI + m
}

pub fn run_theory_grid(cfg: &ExperimentConfig) -> Result<Vec<TheoryPoint>> {
    cfg.validate()?;
    let g = &cfg.grid;
    let n = cfg.settings.theory_samples;
    let cells: Vec<(usize, usize, f64, f64)> = (0..g.points)
        .flat_map(|i| (0..g.points).map(move |j| (i, j)))
        .map(|(i, j)| (i, j, lerp(g.phi, i, g.points), lerp(g.theta, j, g.points)))
        .filter(|&(_, _, phi, theta)| well_posed(phi, theta))
        .collect();
    cells
        .into_par_iter()
        .map(|(i, j, phi, theta)| {
            let geom = ToyGeometry::new(phi, theta)?;
            let case = classify_case(&geom)?.case.number();
            let acc_analytic = analytic_ood_accuracy(&geom)?;
            let acc_simulated = simulate_ood_accuracy(&geom, n, seed_of!(cfg.master_seed, "theory", i, j))?;
            Ok(TheoryPoint { phi, theta, case, acc_analytic, acc_simulated, n })
        })
        .collect()
}

pub fn write_theory_csv(mut w: impl Write, points: &[TheoryPoint]) -> Result<()> {
    writeln!(w, "phi,theta,case,acc_analytic,acc_simulated,n")?;
    for p in points {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            fmt_f64(p.phi),
            fmt_f64(p.theta),
            p.case,
            fmt_f64(p.acc_analytic),
            fmt_f64(p.acc_simulated),
            p.n
        )?;
    }
    Ok(())
}

/// Largest gap between the two accuracy formulas along the case boundary
/// `φ + θ/2 = π`, probed at `n` values of θ.
pub fn boundary_gap(n: usize) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let theta = lerp([0.05 * PI, 0.95 * PI], i, n);
        let geom = ToyGeometry::new(PI - theta / 2.0, theta)?;
        worst = worst.max((case1_accuracy(&geom) - case2_accuracy(&geom)).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Experiment;

    #[test]
    fn small_grid_agrees_with_simulation() {
        let mut cfg = ExperimentConfig::default_for(Experiment::TheoryGrid);
        cfg.grid.points = 3;
        cfg.settings.theory_samples = 200_000;
        let pts = run_theory_grid(&cfg).unwrap();
        assert_eq!(pts.len(), 9);
        for p in &pts {
            assert!((p.acc_analytic - p.acc_simulated).abs() < 0.01, "{p:?}");
        }
        let mut buf = Vec::new();
        write_theory_csv(&mut buf, &pts).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("phi,theta,case,acc_analytic,acc_simulated,n\n"));
    }

    #[test]
    fn formulas_meet_on_the_boundary() {
        assert!(boundary_gap(101).unwrap() < 1e-12);
    }
}
