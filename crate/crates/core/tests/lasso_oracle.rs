//! Exhaustive enumeration as an independent check of FISTA on tiny problems.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sparselab::solvers::{exhaustive_lasso, fista, SolverConfig};
use sparselab::synthgen::cs_bound_dim;

struct Instance {
    d: Array2<f64>,
    y: Array1<f64>,
}

/// Random unit-column dictionary with `d_h ≤ 12` atoms, `d_y` at the CS
/// bound and a `k ≤ 2` sparse nonnegative code.
fn instances(n: usize, seed: u64) -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let d_h = rng.random_range(6..=12);
            let k = rng.random_range(1..=2);
            let d_y = cs_bound_dim(k, d_h).unwrap();
            let mut d = Array2::from_shape_simple_fn((d_y, d_h), || rng.sample::<f64, _>(StandardNormal));
            for mut c in d.columns_mut() {
                let norm = c.dot(&c).sqrt();
                c /= norm;
            }
            let mut z = Array1::zeros(d_h);
            for j in rand::seq::index::sample(&mut rng, d_h, k) {
                z[j] = rng.random_range(0.2..1.0);
            }
            let y = d.dot(&z);
            Instance { d, y }
        })
        .collect()
}

const LAMBDA: f64 = 0.05;

fn agreement(max_support: Option<usize>) -> f64 {
    let cases = instances(200, 2024);
    let cfg = SolverConfig::with_lambda(LAMBDA).iters(20_000);
    let mut agree = 0;
    for inst in &cases {
        let limit = max_support.unwrap_or(inst.d.nrows());
        let oracle = exhaustive_lasso(inst.y.view(), inst.d.view(), LAMBDA, limit).unwrap();
        let code = fista(inst.y.view(), inst.d.view(), &cfg, None).unwrap();
        if code.support == oracle.support {
            agree += 1;
        }
    }
    agree as f64 / cases.len() as f64
}

#[test]
fn fista_support_matches_exhaustive_lasso() {
    let rate = agreement(None);
    println!("support agreement with the exact minimiser: {rate}");
    assert!(rate >= 0.95, "agreement {rate}");
}

#[test]
fn two_atom_search_misses_wider_optima() {
    // With d_y at the bound the Lasso optimum sometimes spreads over more
    // than two atoms; a search capped at two atoms cannot see those.
    let rate = agreement(Some(2));
    println!("support agreement with the two-atom search: {rate}");
    assert!(rate <= agreement(None));
}

#[test]
fn fista_objective_is_close_to_exact_minimum() {
    let cfg = SolverConfig::with_lambda(LAMBDA).iters(20_000);
    for inst in instances(50, 7) {
        let oracle = exhaustive_lasso(inst.y.view(), inst.d.view(), LAMBDA, inst.d.nrows()).unwrap();
        let code = fista(inst.y.view(), inst.d.view(), &cfg, None).unwrap();
        assert!(code.objective >= oracle.objective - 1e-9, "{} vs {}", code.objective, oracle.objective);
        assert!(code.objective <= oracle.objective + 1e-5, "{} vs {}", code.objective, oracle.objective);
    }
}
