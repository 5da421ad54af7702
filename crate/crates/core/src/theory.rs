//! Two-dimensional toy model of compositional shift.
//!
//! Three concept directions live in the plane: `A₁ = (2, 0)`, a unit vector
//! `A₂` at angle `φ` above the axis and a unit vector `A₃` at angle `θ`
//! below it. A perfect in-distribution classifier separates
//! `z₁ > 0.5` with the line through `A₁/2` parallel to `A₂`. Out of
//! distribution, samples `y = z₁A₁ + z₃A₃` with `z₁, z₃ ~ U(0, 1)` appear,
//! and the part of the OOD parallelogram that falls on the wrong side of
//! that line is misclassified.
//!
//! With `s = sin(φ + θ − π)`:
//!
//! * when `φ + θ/2 > π` the error region is a triangle with a vertex at
//!   `A₁` and the accuracy is `1/2 + sin φ / (4s)` ([`Case::Case1`]);
//! * otherwise the triangle is clipped by the far edge of the parallelogram
//!   and the accuracy is `1 − s / (4 sin φ)` ([`Case::Case2`]).

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::stream;
use crate::{LabError, Result};

/// Minimum |sin(φ + θ − π)| accepted by [`analytic_ood_accuracy`].
pub const DEGENERACY_GUARD: f64 = 1e-6;

const BOUNDARY_EPS: f64 = 1e-12;

/// Area of a triangle with unit base and base angles `a` and `b`.
pub fn triangle_area(a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) {
        return Err(LabError::invalid(format!("angles must be positive, got {a}, {b}")));
    }
    if a + b >= PI {
        return Err(LabError::invalid(format!("angles sum to {} >= pi", a + b)));
    }
    Ok(a.sin() * b.sin() / (2.0 * (a + b).sin()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToyGeometry {
    pub phi: f64,
    pub theta: f64,
}

impl ToyGeometry {
    pub fn new(phi: f64, theta: f64) -> Result<Self> {
        let g = ToyGeometry { phi, theta };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.phi > 0.0 && self.phi < PI && self.theta > 0.0 && self.theta < PI && self.phi + self.theta > PI;
        if !ok {
            return Err(LabError::invalid(format!(
                "need 0 < phi, theta < pi and phi + theta > pi, got phi={}, theta={}",
                self.phi, self.theta
            )));
        }
        Ok(())
    }

    fn s(&self) -> f64 {
        (self.phi + self.theta - PI).sin()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Case {
    Case1,
    Case2,
}

impl Case {
    pub fn number(self) -> u8 {
        match self {
            Case::Case1 => 1,
            Case::Case2 => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseSplit {
    pub case: Case,
    /// `φ + θ/2 = π` up to rounding; such points are reported as Case 2.
    pub boundary: bool,
}

pub fn classify_case(g: &ToyGeometry) -> Result<CaseSplit> {
    g.validate()?;
    let gap = g.phi + 0.5 * g.theta - PI;
    if gap.abs() <= BOUNDARY_EPS {
        return Ok(CaseSplit { case: Case::Case2, boundary: true });
    }
    let case = if gap > 0.0 { Case::Case1 } else { Case::Case2 };
    Ok(CaseSplit { case, boundary: false })
}

/// Accuracy from the triangle-at-`A₁` formula, valid in Case 1.
pub fn case1_accuracy(g: &ToyGeometry) -> f64 {
    let alpha = g.theta.sin();
    let alpha1 = g.phi.sin() * g.theta.sin() / (2.0 * g.s());
    0.5 + alpha1 / (2.0 * alpha)
}

/// Accuracy from the clipped-triangle formula, valid in Case 2.
pub fn case2_accuracy(g: &ToyGeometry) -> f64 {
    let alpha = g.theta.sin();
    let alpha2 = g.theta.sin() * g.s() / (2.0 * g.phi.sin());
    1.0 - alpha2 / (2.0 * alpha)
}

pub fn analytic_ood_accuracy(g: &ToyGeometry) -> Result<f64> {
    let split = classify_case(g)?;
    if g.s().abs() < DEGENERACY_GUARD {
        return Err(LabError::DegenerateGeometry(format!(
            "sin(phi + theta - pi) = {:e} is below the guard {DEGENERACY_GUARD:e}",
            g.s()
        )));
    }
    Ok(match split.case {
        Case::Case1 => case1_accuracy(g),
        Case::Case2 => case2_accuracy(g),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Embedding {
    /// `A₂` above the axis, `A₃` below.
    Standard,
    /// Reflection of [`Embedding::Standard`] across the horizontal axis.
    Mirrored,
}

pub fn simulate_ood_accuracy(g: &ToyGeometry, n: usize, seed: u64) -> Result<f64> {
    simulate_ood_accuracy_in(g, n, seed, Embedding::Standard)
}

pub fn simulate_ood_accuracy_in(g: &ToyGeometry, n: usize, seed: u64, embedding: Embedding) -> Result<f64> {
    g.validate()?;
    if n == 0 {
        return Err(LabError::invalid("simulation needs at least one sample"));
    }
    let flip = match embedding {
        Embedding::Standard => 1.0,
        Embedding::Mirrored => -1.0,
    };
    let a3 = (g.theta.cos(), -flip * g.theta.sin());
    // Normal of the decision line, oriented towards A₁.
    let normal = (g.phi.sin(), -flip * g.phi.cos());
    let mut rng = stream(seed);
    let mut correct = 0usize;
    for _ in 0..n {
        let z1: f64 = rng.random();
        let z3: f64 = rng.random();
        let y = (2.0 * z1 + z3 * a3.0, z3 * a3.1);
        let predicted = normal.0 * (y.0 - 1.0) + normal.1 * y.1 > 0.0;
        if predicted == (z1 > 0.5) {
            correct += 1;
        }
    }
    Ok(correct as f64 / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle_area_examples() {
        assert!((triangle_area(PI / 2.0, PI / 4.0).unwrap() - 0.5).abs() < 1e-12);
        assert!((triangle_area(PI / 3.0, PI / 3.0).unwrap() - 0.75 / 3f64.sqrt()).abs() < 1e-12);
        assert_eq!(triangle_area(0.4, 1.1).unwrap(), triangle_area(1.1, 0.4).unwrap());
        assert!(triangle_area(2.0, 1.2).is_err());
    }

    #[test]
    fn case_split() {
        let g = ToyGeometry::new(0.6 * PI, 0.7 * PI).unwrap();
        assert_eq!(classify_case(&g).unwrap().case, Case::Case2);
        let g = ToyGeometry::new(0.75 * PI, 0.75 * PI).unwrap();
        assert_eq!(classify_case(&g).unwrap().case, Case::Case1);
        assert!(ToyGeometry::new(0.3 * PI, 0.3 * PI).is_err());
    }

    #[test]
    fn analytic_reference_values() {
        let g = ToyGeometry::new(0.6 * PI, 0.7 * PI).unwrap();
        let expect = 1.0 - (0.3 * PI).sin() / (4.0 * (0.6 * PI).sin());
        assert!((analytic_ood_accuracy(&g).unwrap() - expect).abs() < 1e-12);
        assert!((expect - 0.78734).abs() < 1e-5);
        let g = ToyGeometry::new(0.75 * PI, 0.75 * PI).unwrap();
        let expect = 0.5 + (0.75 * PI).sin() / (4.0 * (0.5 * PI).sin());
        assert!((analytic_ood_accuracy(&g).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn guard_near_degeneracy() {
        let g = ToyGeometry { phi: 0.5 * PI + 1e-8, theta: 0.5 * PI };
        assert!(matches!(analytic_ood_accuracy(&g), Err(LabError::DegenerateGeometry(_))));
    }

    #[test]
    fn single_sample_is_zero_or_one() {
        let g = ToyGeometry::new(0.6 * PI, 0.7 * PI).unwrap();
        let v = simulate_ood_accuracy(&g, 1, 9).unwrap();
        assert!(v == 0.0 || v == 1.0);
        assert_eq!(simulate_ood_accuracy(&g, 1000, 9).unwrap(), simulate_ood_accuracy(&g, 1000, 9).unwrap());
    }

    #[test]
    fn mirrored_embedding_is_identical() {
        let g = ToyGeometry::new(0.7 * PI, 0.8 * PI).unwrap();
        assert_eq!(
            simulate_ood_accuracy_in(&g, 20_000, 4, Embedding::Standard).unwrap(),
            simulate_ood_accuracy_in(&g, 20_000, 4, Embedding::Mirrored).unwrap()
        );
    }

    #[test]
    fn boundary_continuity() {
        for theta in [0.5 * PI, 0.7 * PI, 0.9 * PI] {
            for off in [-1e-4, 1e-4] {
                let g = ToyGeometry { phi: PI - 0.5 * theta + off, theta };
                assert!((case1_accuracy(&g) - case2_accuracy(&g)).abs() <= 1e-3);
            }
        }
    }
}
