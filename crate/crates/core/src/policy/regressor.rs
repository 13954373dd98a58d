//! Degree-4 polynomial regression on the ROI features.
//!
//! The basis is a bias plus the powers 1..=4 of each feature separately
//! (no cross terms): 21 terms in the order
//! `[1, f1, f1², f1³, f1⁴, f2, …, f5⁴]`.

use nalgebra::{DMatrix, DVector};

use super::features::FeatureVector;
use crate::error::{DsaError, Result};

pub const DEGREE: usize = 4;
pub const BASIS_LEN: usize = 1 + FeatureVector::LEN * DEGREE;

/// Ridge term added to the normal equations.
pub const RIDGE_LAMBDA: f64 = 1e-6;

/// Refinement sweeps applied after the ridge solve. Each sweep shrinks the
/// ridge bias in well-determined directions by a factor of λ/(σ²+λ) and
/// leaves null-space directions untouched.
const REFINEMENT_SWEEPS: usize = 3;

pub type Weights = [f64; BASIS_LEN];

pub fn polynomial_expand(features: &FeatureVector) -> [f64; BASIS_LEN] {
    let mut basis = [0.0; BASIS_LEN];
    basis[0] = 1.0;
    for (i, &x) in features.0.iter().enumerate() {
        let mut p = 1.0;
        for d in 0..DEGREE {
            p *= x;
            basis[1 + i * DEGREE + d] = p;
        }
    }
    basis
}

pub fn predict(weights: &Weights, features: &FeatureVector) -> f64 {
    polynomial_expand(features).iter().zip(weights).map(|(b, w)| b * w).sum()
}

/// Least-squares weights for `samples`, regularized by [`RIDGE_LAMBDA`].
pub fn fit_regressor(samples: &[(FeatureVector, f64)]) -> Result<Weights> {
    if samples.is_empty() {
        return Err(DsaError::Empty("regressor needs at least one sample"));
    }
    if let Some((_, t)) = samples.iter().find(|(_, t)| !t.is_finite()) {
        return Err(DsaError::InvalidModel(format!("non-finite regression target {t}")));
    }
    let n = samples.len();
    let x = DMatrix::from_fn(n, BASIS_LEN, |r, c| polynomial_expand(&samples[r].0)[c]);
    let y = DVector::from_iterator(n, samples.iter().map(|(_, t)| *t));

    let xt = x.transpose();
    let mut normal = &xt * &x;
    for i in 0..BASIS_LEN {
        normal[(i, i)] += RIDGE_LAMBDA;
    }
    let solver = normal
        .cholesky()
        .ok_or_else(|| DsaError::InvalidModel("regularized normal matrix is not positive definite".into()))?;

    let mut w = solver.solve(&(&xt * &y));
    for _ in 0..REFINEMENT_SWEEPS {
        let residual = &y - &x * &w;
        w += solver.solve(&(&xt * residual));
    }

    let mut out = [0.0; BASIS_LEN];
    out.copy_from_slice(w.as_slice());
    if out.iter().any(|v| !v.is_finite()) {
        return Err(DsaError::InvalidModel("regression produced non-finite weights".into()));
    }
    Ok(out)
}
