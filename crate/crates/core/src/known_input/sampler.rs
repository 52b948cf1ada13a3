use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{
    haar_orthogonal, orthogonality_defect, orthonormal_basis, OrthonormalBasisPair,
};

/// Uniform sampler over every orthogonal `M` with `M Xq = Yq`.
///
/// Members are parameterized by `P ∈ O(n - k)` through
/// `L(P) = (M Uk) Ukᵀ + V_perp P U_perpᵀ`, whose inverse is
/// `M ↦ V_perpᵀ M U_perp`. `M Uk` is recovered as `Yq A` with `Xq A = Uk`,
/// so the secret itself is never needed.
#[derive(Debug, Clone)]
pub struct ConstraintSetSampler {
    pub inputs: OrthonormalBasisPair,
    pub outputs: OrthonormalBasisPair,
    /// `M Uk`, an `n x k` matrix with orthonormal columns.
    pub mapped_span: DMatrix<f64>,
}

impl ConstraintSetSampler {
    pub fn new(xq: &DMatrix<f64>, yq: &DMatrix<f64>, rank_tol: f64) -> Result<Self> {
        if xq.shape() != yq.shape() {
            return Err(Error::invalid(format!(
                "linked inputs are {:?} but linked outputs are {:?}",
                xq.shape(),
                yq.shape()
            )));
        }
        // An orthogonal map between the two exists iff their Gram matrices agree.
        let gx = xq.transpose() * xq;
        let gy = yq.transpose() * yq;
        let scale = gx.amax().max(f64::MIN_POSITIVE);
        let gram_gap = (&gx - &gy).amax();
        if gram_gap > 1e-6 * scale {
            return Err(Error::Infeasible(format!(
                "inner products differ by {:e} (relative {:e})",
                gram_gap,
                gram_gap / scale
            )));
        }

        let inputs = orthonormal_basis(xq, rank_tol)?;
        let outputs = orthonormal_basis(yq, rank_tol)?;
        if inputs.rank() != outputs.rank() {
            return Err(Error::Infeasible(format!(
                "linked inputs have rank {} but outputs have rank {}",
                inputs.rank(),
                outputs.rank()
            )));
        }

        let svd = xq.clone().svd(true, true);
        let top = svd.singular_values.max();
        let pinv = svd
            .pseudo_inverse(rank_tol * top)
            .map_err(|e| Error::invalid(e.to_string()))?;
        let solve = pinv * &inputs.span;
        let mapped_span = yq * solve;
        let defect = orthogonality_defect(&mapped_span);
        if defect > 1e-6 {
            return Err(Error::Infeasible(format!(
                "recovered image of the linked span is not orthonormal (defect {defect:e})"
            )));
        }
        Ok(ConstraintSetSampler {
            inputs,
            outputs,
            mapped_span,
        })
    }

    pub fn dim(&self) -> usize {
        self.inputs.dim()
    }

    pub fn rank(&self) -> usize {
        self.inputs.rank()
    }

    pub fn codim(&self) -> usize {
        self.inputs.codim()
    }

    /// `L(P)`. For `codim == 0` the second term is the zero matrix.
    pub fn map(&self, p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let d = self.codim();
        if p.shape() != (d, d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: p.nrows(),
            });
        }
        let fixed = &self.mapped_span * self.inputs.span.transpose();
        if d == 0 {
            return Ok(fixed);
        }
        Ok(fixed + &self.outputs.complement * p * self.inputs.complement.transpose())
    }

    /// `L⁻¹(M) = V_perpᵀ M U_perp`.
    pub fn inverse(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        self.outputs.complement.transpose() * m * &self.inputs.complement
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DMatrix<f64> {
        let p = haar_orthogonal(self.codim(), rng);
        self.map(&p)
            .expect("Haar draw has the complement dimension")
    }

    /// `‖V_perpᵀ y‖`.
    pub fn complement_norm(&self, y: &DVector<f64>) -> f64 {
        if self.codim() == 0 {
            return 0.0;
        }
        self.outputs.complement.tr_mul(y).norm()
    }
}
