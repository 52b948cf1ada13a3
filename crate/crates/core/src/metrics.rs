//! Privacy-breach criteria: relative Euclidean error, minimum normalized
//! absolute difference (MED) and cosine distance.
//!
//! For estimates with the same norm as the truth, `1 - cos = rel² / 2`, so a
//! cosine breach at `ε` is a Euclidean breach at `√(2ε)`. Any Euclidean
//! breach at `ε` is also a MED breach at `ε` because the smallest per-entry
//! relative error never exceeds the overall relative error.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Outcome of one criterion: the measured quantity and whether it is within `ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub value: f64,
    pub breached: bool,
}

fn check_dims(x: &DVector<f64>, estimate: &DVector<f64>) -> Result<()> {
    if x.len() != estimate.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            actual: estimate.len(),
        });
    }
    Ok(())
}

/// `‖x̂ - x‖ ≤ ‖x‖ ε`, reported with the relative error `‖x̂ - x‖ / ‖x‖`.
pub fn eps_breach(x: &DVector<f64>, estimate: &DVector<f64>, eps: f64) -> Result<Criterion> {
    check_dims(x, estimate)?;
    let norm = x.norm();
    if norm == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let diff = (estimate - x).norm();
    Ok(Criterion {
        value: diff / norm,
        breached: diff <= norm * eps,
    })
}

/// Normalized absolute difference; `|â|` when `a == 0`.
pub fn nad(a: f64, estimate: f64) -> f64 {
    if a == 0.0 {
        estimate.abs()
    } else {
        (a - estimate).abs() / a.abs()
    }
}

/// Smallest per-attribute NAD compared against `ε`.
pub fn med_breach(x: &DVector<f64>, estimate: &DVector<f64>, eps: f64) -> Result<Criterion> {
    check_dims(x, estimate)?;
    let min = x
        .iter()
        .zip(estimate.iter())
        .map(|(&a, &b)| nad(a, b))
        .fold(f64::INFINITY, f64::min);
    Ok(Criterion {
        value: min,
        breached: min <= eps,
    })
}

/// `1 - xᵀx̂ / (‖x‖‖x̂‖) ≤ ε`. The gap lies in `[0, 2]`.
pub fn cos_breach(x: &DVector<f64>, estimate: &DVector<f64>, eps: f64) -> Result<Criterion> {
    check_dims(x, estimate)?;
    let nx = x.norm();
    let ne = estimate.norm();
    if nx == 0.0 {
        return Err(Error::ZeroNorm);
    }
    if ne == 0.0 {
        return Err(Error::invalid(
            "cosine distance is undefined for a zero estimate",
        ));
    }
    let gap = 1.0 - x.dot(estimate) / (nx * ne);
    Ok(Criterion {
        value: gap,
        breached: gap <= eps,
    })
}

/// All three criteria for one estimate at a common threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BreachOutcome {
    pub relative_euclid: f64,
    pub min_nad: f64,
    pub cos_gap: f64,
    pub eps_breach: bool,
    pub med_breach: bool,
    pub cos_breach: bool,
}

pub fn evaluate(x: &DVector<f64>, estimate: &DVector<f64>, eps: f64) -> Result<BreachOutcome> {
    let e = eps_breach(x, estimate, eps)?;
    let m = med_breach(x, estimate, eps)?;
    let c = cos_breach(x, estimate, eps)?;
    Ok(BreachOutcome {
        relative_euclid: e.value,
        min_nad: m.value,
        cos_gap: c.value,
        eps_breach: e.breached,
        med_breach: m.breached,
        cos_breach: c.breached,
    })
}
