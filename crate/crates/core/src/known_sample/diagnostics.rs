//! Predictors of how well the PCA attack can work: how well separated the
//! eigenvalues are, and how distinguishable the sign-flipped versions of a
//! Gaussian are from the original.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{eigen_sorted, DEFAULT_DISTINCT_TOL};

/// Smallest ratio `λ_i / λ_{i+1}` over the descending eigenvalues; equal
/// to the minimum over all pairs `i < j`.
pub fn min_eigen_ratio(sigma: &DMatrix<f64>) -> Result<f64> {
    let eig = eigen_sorted(sigma, DEFAULT_DISTINCT_TOL)?;
    let smallest = *eig.values.last().expect("eigen_sorted rejects empty input");
    if smallest <= 0.0 {
        return Err(Error::invalid(format!(
            "eigen-ratio needs positive eigenvalues, smallest is {smallest:e}"
        )));
    }
    Ok(eig
        .values
        .windows(2)
        .map(|w| w[0] / w[1])
        .fold(f64::INFINITY, f64::min))
}

/// Symmetric KL divergence between two Gaussians sharing `sigma`:
/// `(μ_g − μ_h)ᵀ Σ⁻¹ (μ_g − μ_h)`.
pub fn sym_kl_gaussian(
    mu_g: &DVector<f64>,
    mu_h: &DVector<f64>,
    sigma: &DMatrix<f64>,
) -> Result<f64> {
    let n = sigma.nrows();
    if sigma.ncols() != n || mu_g.len() != n || mu_h.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: mu_g.len().max(mu_h.len()),
        });
    }
    let chol = sigma
        .clone()
        .cholesky()
        .ok_or_else(|| Error::invalid("covariance is singular or not positive definite"))?;
    let delta = mu_g - mu_h;
    Ok(delta.dot(&chol.solve(&delta)).max(0.0))
}

/// `Inv(f)` for `f = N(αμ, Σ)`: the smallest symmetric KL divergence between
/// `f` and a copy of it mirrored along a nonempty set of eigenvectors of `Σ`.
///
/// Mirroring along the set `F` moves the mean by `−2 Σ_{k∈F} (z_kᵀαμ) z_k`, so
/// the divergence is `α² Σ_{k∈F} 4 (z_kᵀμ)² / λ_k` and the minimum is attained
/// by a single flip.
pub fn invariance_gaussian(mu: &DVector<f64>, alpha: f64, sigma: &DMatrix<f64>) -> Result<f64> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::invalid("alpha must be finite and nonnegative"));
    }
    if mu.len() != sigma.nrows() {
        return Err(Error::DimensionMismatch {
            expected: sigma.nrows(),
            actual: mu.len(),
        });
    }
    let eig = eigen_sorted(sigma, DEFAULT_DISTINCT_TOL)?;
    if eig.degenerate {
        return Err(Error::invalid("covariance has repeated eigenvalues"));
    }
    if eig.values.iter().any(|&l| l <= 0.0) {
        return Err(Error::invalid("covariance is singular"));
    }
    let proj = eig.vectors.tr_mul(mu);
    let single = proj
        .iter()
        .zip(&eig.values)
        .map(|(c, l)| 4.0 * c * c / l)
        .fold(f64::INFINITY, f64::min);
    Ok(alpha * alpha * single)
}
