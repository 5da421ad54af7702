use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparselab::sae::{SaeKind, SaeModel};

const EPS: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn toy_batch() -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    Array2::from_shape_simple_fn((6, 5), || rng.random_range(-1.0..1.0))
}

fn toy_model(kind: SaeKind) -> SaeModel {
    let mut m = SaeModel::init(5, 8, kind, 23).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    m.b_enc.mapv_inplace(|_| rng.random_range(-0.1..0.2));
    m.b_pre.mapv_inplace(|_| rng.random_range(-0.2..0.2));
    m.theta.mapv_inplace(|_| rng.random_range(0.0..0.1));
    m
}

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

/// Largest relative error between analytic gradients and central
/// differences over the selected parameter blocks.
fn check(kind: SaeKind, gamma: f64, blocks: &[&str]) -> f64 {
    let y = toy_batch();
    let model = toy_model(kind);
    let (_, g) = model.loss_and_grads(y.view(), gamma).unwrap();
    let mut worst = 0.0f64;
    let loss_at = |m: &SaeModel, y: ArrayView2<f64>| m.loss(y, gamma).unwrap();
    for &block in blocks {
        let n = match block {
            "w_enc" => model.w_enc.len(),
            "b_enc" => model.b_enc.len(),
            "w_dec" => model.w_dec.len(),
            "b_pre" => model.b_pre.len(),
            _ => unreachable!(),
        };
        for idx in 0..n {
            let mut plus = model.clone();
            let mut minus = model.clone();
            let (p, q, analytic) = match block {
                "w_enc" => (
                    &mut plus.w_enc.as_slice_mut().unwrap()[idx],
                    &mut minus.w_enc.as_slice_mut().unwrap()[idx],
                    g.w_enc.as_slice().unwrap()[idx],
                ),
                "b_enc" => (&mut plus.b_enc[idx], &mut minus.b_enc[idx], g.b_enc[idx]),
                "w_dec" => (
                    &mut plus.w_dec.as_slice_mut().unwrap()[idx],
                    &mut minus.w_dec.as_slice_mut().unwrap()[idx],
                    g.w_dec.as_slice().unwrap()[idx],
                ),
                "b_pre" => (&mut plus.b_pre[idx], &mut minus.b_pre[idx], g.b_pre[idx]),
                _ => unreachable!(),
            };
            *p += EPS;
            *q -= EPS;
            let numeric = (loss_at(&plus, y.view()) - loss_at(&minus, y.view())) / (2.0 * EPS);
            worst = worst.max(rel_err(analytic, numeric));
        }
    }
    worst
}

const ALL: [&str; 4] = ["w_enc", "b_enc", "w_dec", "b_pre"];

#[test]
fn relu_gradients_match_finite_differences() {
    let err = check(SaeKind::Relu, 1e-2, &ALL);
    assert!(err <= TOL, "max relative error {err:e}");
}

#[test]
fn topk_gradients_match_finite_differences() {
    let err = check(SaeKind::TopK { k: 3 }, 0.0, &ALL);
    assert!(err <= TOL, "max relative error {err:e}");
}

#[test]
fn jumprelu_smooth_parameter_gradients_match_finite_differences() {
    let err = check(SaeKind::JumpRelu, 1e-2, &ALL);
    assert!(err <= TOL, "max relative error {err:e}");
}

#[test]
fn mp_gradients_match_finite_differences() {
    let err = check(SaeKind::Mp { steps: 3 }, 0.0, &["w_dec", "b_pre"]);
    assert!(err <= TOL, "max relative error {err:e}");
}
