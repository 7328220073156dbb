//! Numerical checks of the R-transform and S-transform identities.

use num_complex::Complex64;
use serde::Serialize;

use super::multiplicative::{free_multiplicative_cauchy, MultiplicativeConfig};
use super::operator::{free_additive_cauchy, SubordinationConfig};
use crate::error::{invalid, Result};
use crate::transforms::{r_transform_numeric, s_transform_numeric, CauchyEvaluator};

type C = Complex64;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub points: Vec<(f64, f64)>,
    /// Transform of the convolution at each point.
    pub combined: Vec<(f64, f64)>,
    /// Sum (or product) of the individual transforms.
    pub composed: Vec<(f64, f64)>,
    pub max_abs_error: f64,
}

impl IdentityCheck {
    fn build(points: &[C], combined: Vec<C>, composed: Vec<C>) -> Self {
        let max_abs_error = combined.iter().zip(&composed).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        let pair = |v: &[C]| v.iter().map(|c| (c.re, c.im)).collect();
        Self { points: pair(points), combined: pair(&combined), composed: pair(&composed), max_abs_error }
    }
}

/// The law of `a ⊞ b` as an evaluator.
pub fn additive_evaluator(a: &CauchyEvaluator, b: &CauchyEvaluator) -> CauchyEvaluator {
    let (ma, mb) = (a.mean(), b.mean());
    let m2 = a.second_moment() + b.second_moment() + 2.0 * ma * mb;
    let (a2, b2) = (a.clone(), b.clone());
    let cfg = SubordinationConfig::default();
    CauchyEvaluator::custom(move |z| free_additive_cauchy(&a2, &b2, z, &cfg), ma + mb, m2)
}

/// The law of `a ⊠ b` as an evaluator.
pub fn multiplicative_evaluator(a: &CauchyEvaluator, b: &CauchyEvaluator) -> CauchyEvaluator {
    let (ma, mb) = (a.mean(), b.mean());
    let m2 = a.second_moment() * mb * mb + ma * ma * b.second_moment() - ma * ma * mb * mb;
    let (a2, b2) = (a.clone(), b.clone());
    let cfg = MultiplicativeConfig::default();
    CauchyEvaluator::custom(move |z| free_multiplicative_cauchy(&a2, &b2, z, &cfg), ma * mb, m2)
}

/// Compares `R_{a⊞b}(w)` with `R_a(w) + R_b(w)` at each point.
pub fn verify_r_additivity(a: &CauchyEvaluator, b: &CauchyEvaluator, points: &[C]) -> Result<IdentityCheck> {
    if points.is_empty() {
        return Err(invalid("no test points"));
    }
    let ab = additive_evaluator(a, b);
    let mut combined = Vec::new();
    let mut composed = Vec::new();
    for &w in points {
        combined.push(r_transform_numeric(&ab, w)?);
        composed.push(r_transform_numeric(a, w)? + r_transform_numeric(b, w)?);
    }
    Ok(IdentityCheck::build(points, combined, composed))
}

/// Compares `S_{a⊠b}(z)` with `S_a(z)·S_b(z)` at each point.
pub fn verify_s_multiplication(a: &CauchyEvaluator, b: &CauchyEvaluator, points: &[C]) -> Result<IdentityCheck> {
    if points.is_empty() {
        return Err(invalid("no test points"));
    }
    let ab = multiplicative_evaluator(a, b);
    let mut combined = Vec::new();
    let mut composed = Vec::new();
    for &z in points {
        combined.push(s_transform_numeric(&ab, z)?);
        composed.push(s_transform_numeric(a, z)? * s_transform_numeric(b, z)?);
    }
    Ok(IdentityCheck::build(points, combined, composed))
}
