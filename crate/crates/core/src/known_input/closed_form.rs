//! Closed-form probability that a uniformly chosen member of the constraint
//! set yields an ε-breach.
//!
//! With `d = n - k` unconstrained dimensions the estimate error is the
//! distance between `z` and a uniformly random point on the sphere of radius
//! `‖z‖` in `R^d`, where `‖z‖ = ‖V_perpᵀ y‖`. The probability is the surface
//! fraction of the cap `{p : ‖p - z‖ ≤ ‖y‖ε}`, evaluated with the `GR` / `SI`
//! recursions below.

use std::f64::consts::{FRAC_2_SQRT_PI, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `Γ((m + 2) / 2) / Γ((m + 1) / 2)` for `m ≥ 1`.
pub fn gamma_ratio(m: u32) -> Result<f64> {
    if m < 1 {
        return Err(Error::invalid("gamma_ratio is defined for m >= 1"));
    }
    let (mut value, mut at) = if m % 2 == 1 {
        (PI.sqrt() / 2.0, 1)
    } else {
        (FRAC_2_SQRT_PI, 2)
    };
    while at < m {
        at += 2;
        value *= at as f64 / (at as f64 - 1.0);
    }
    Ok(value)
}

/// `∫_0^{arccos z} sin^{m-1}(θ) dθ` for `z ∈ [0, 1]`, `m ≥ 1`.
pub fn sine_integral(z: f64, m: u32) -> Result<f64> {
    if !(0.0..=1.0).contains(&z) {
        return Err(Error::invalid(format!(
            "sine_integral needs z in [0, 1], got {z}"
        )));
    }
    if m < 1 {
        return Err(Error::invalid("sine_integral is defined for m >= 1"));
    }
    let (mut value, mut at) = if m % 2 == 1 {
        (z.acos(), 1)
    } else {
        (1.0 - z, 2)
    };
    let s2 = 1.0 - z * z;
    while at < m {
        at += 2;
        let k = at as f64;
        value = (k - 2.0) / (k - 1.0) * value - z * s2.powf((k - 2.0) / 2.0) / (k - 1.0);
    }
    // The recursion subtracts nearly equal terms when z is close to 1.
    Ok(value.max(0.0))
}

/// Quantities the attacker can compute for a candidate released record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BreachProbabilityInputs {
    /// `‖y_j‖`.
    pub y_norm: f64,
    /// `‖V_perpᵀ y_j‖`, the distance from the record to the linked span.
    pub complement_norm: f64,
    pub eps: f64,
    /// `n - k`.
    pub codim: usize,
}

impl BreachProbabilityInputs {
    pub fn new(y_norm: f64, complement_norm: f64, eps: f64, codim: usize) -> Result<Self> {
        if !(y_norm >= 0.0 && complement_norm >= 0.0 && eps >= 0.0) {
            return Err(Error::invalid(
                "breach probability inputs must be nonnegative",
            ));
        }
        if complement_norm > y_norm + 1e-9 * y_norm.max(1.0) {
            return Err(Error::invalid(format!(
                "complement norm {complement_norm} exceeds record norm {y_norm}"
            )));
        }
        Ok(BreachProbabilityInputs {
            y_norm,
            complement_norm,
            eps,
            codim,
        })
    }
}

/// `ρ`, the probability of an ε-breach under a uniform choice from the constraint set.
pub fn breach_probability(b: &BreachProbabilityInputs) -> f64 {
    let d = b.codim;
    let reach = b.y_norm * b.eps;
    let r = b.complement_norm;
    if d == 0 || reach >= 2.0 * r {
        return 1.0;
    }
    if d == 1 {
        return 0.5;
    }
    // t = (reach / (r√2))², cos of the cap's half-angle is 1 - t.
    let t = (reach / (r * std::f64::consts::SQRT_2)).powi(2);
    if t > 1.0 {
        // More than a hemisphere: one minus the antipodal cap.
        1.0 - cap_fraction(t - 1.0, d)
    } else {
        cap_fraction(1.0 - t, d)
    }
}

/// Surface fraction of the cap `{θ ≤ arccos(cos_angle)}` on the unit sphere in `R^d`, `d ≥ 2`.
fn cap_fraction(cos_angle: f64, d: usize) -> f64 {
    let cos_angle = cos_angle.clamp(0.0, 1.0);
    if d == 2 {
        return cos_angle.acos() / PI;
    }
    let d32 = d as u32;
    // The surface element on S^{d-1} at polar angle θ is ∝ sin^{d-2}θ, so the
    // integral is SI(·, d - 1); the normalizing constant is
    // (d-1) Γ((d+2)/2) / (d √π Γ((d+1)/2)).
    let coef = (d as f64 - 1.0) * gamma_ratio(d32).expect("d >= 3") / (d as f64 * PI.sqrt());
    let si = sine_integral(cos_angle, d32 - 1).expect("argument clamped to [0, 1]");
    (coef * si).clamp(0.0, 1.0)
}
