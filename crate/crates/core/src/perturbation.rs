//! Rigid-motion perturbation of a private dataset: `y_{π(i)} = M x_i + v`.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{haar_orthogonal, orthogonality_defect, DataMatrix};

/// The data owner's secret `x ↦ Mx + v` with `M` orthogonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigidMotion {
    pub matrix: DMatrix<f64>,
    pub translation: DVector<f64>,
}

impl RigidMotion {
    pub fn new(matrix: DMatrix<f64>, translation: DVector<f64>) -> Result<Self> {
        let n = matrix.nrows();
        if matrix.ncols() != n {
            return Err(Error::invalid("motion matrix must be square"));
        }
        if translation.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: translation.len(),
            });
        }
        let defect = orthogonality_defect(&matrix);
        if defect > 1e-10 {
            return Err(Error::invalid(format!(
                "motion matrix is not orthogonal (defect {defect:e})"
            )));
        }
        Ok(RigidMotion {
            matrix,
            translation,
        })
    }

    pub fn identity(n: usize) -> Self {
        RigidMotion {
            matrix: DMatrix::identity(n, n),
            translation: DVector::zeros(n),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_orthogonal_only(&self) -> bool {
        self.translation.iter().all(|&v| v == 0.0)
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.matrix * x + &self.translation
    }

    /// `Mᵀ(y - v)`.
    pub fn invert(&self, y: &DVector<f64>) -> DVector<f64> {
        self.matrix.tr_mul(&(y - &self.translation))
    }
}

/// Draws a Haar-uniform `M` and, when requested, a Gaussian translation with
/// per-entry standard deviation `translation_scale`.
pub fn generate_rigid_motion<R: Rng + ?Sized>(
    n: usize,
    with_translation: bool,
    translation_scale: f64,
    rng: &mut R,
) -> Result<RigidMotion> {
    if n == 0 {
        return Err(Error::invalid("motion dimension must be at least 1"));
    }
    if !(translation_scale >= 0.0 && translation_scale.is_finite()) {
        return Err(Error::invalid(
            "translation scale must be finite and nonnegative",
        ));
    }
    let matrix = haar_orthogonal(n, rng);
    let translation = if with_translation && translation_scale > 0.0 {
        DVector::from_fn(n, |_, _| {
            translation_scale * rng.sample::<f64, _>(StandardNormal)
        })
    } else {
        DVector::zeros(n)
    };
    Ok(RigidMotion {
        matrix,
        translation,
    })
}

/// Ten times the mean record norm.
pub fn default_translation_scale(x: &DataMatrix) -> f64 {
    let total: f64 = x.column_iter().map(|c| c.norm()).sum();
    10.0 * total / x.records() as f64
}

/// Secret bijection on record indices: record `i` is released at position `map[i]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordPermutation {
    map: Vec<usize>,
}

impl RecordPermutation {
    pub fn new(map: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; map.len()];
        for &j in &map {
            if j >= map.len() || seen[j] {
                return Err(Error::invalid("record permutation is not a bijection"));
            }
            seen[j] = true;
        }
        Ok(RecordPermutation { map })
    }

    pub fn identity(m: usize) -> Self {
        RecordPermutation {
            map: (0..m).collect(),
        }
    }

    pub fn random<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Self {
        let mut map: Vec<usize> = (0..m).collect();
        map.shuffle(rng);
        RecordPermutation { map }
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Released position of private record `i`.
    pub fn image(&self, i: usize) -> usize {
        self.map[i]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.map
    }

    pub fn inverse(&self) -> RecordPermutation {
        let mut inv = vec![0; self.map.len()];
        for (i, &j) in self.map.iter().enumerate() {
            inv[j] = i;
        }
        RecordPermutation { map: inv }
    }
}

/// Releases `Y` with column `perm(i)` equal to `M x_i + v`.
pub fn perturb(
    x: &DataMatrix,
    motion: &RigidMotion,
    perm: &RecordPermutation,
) -> Result<DataMatrix> {
    if motion.dim() != x.attributes() {
        return Err(Error::DimensionMismatch {
            expected: x.attributes(),
            actual: motion.dim(),
        });
    }
    if perm.len() != x.records() {
        return Err(Error::DimensionMismatch {
            expected: x.records(),
            actual: perm.len(),
        });
    }
    let mut moved = &motion.matrix * x.as_matrix();
    for mut col in moved.column_iter_mut() {
        col += &motion.translation;
    }
    let mut y = DMatrix::zeros(x.attributes(), x.records());
    for (i, col) in moved.column_iter().enumerate() {
        y.set_column(perm.image(i), &col);
    }
    // A translation can in principle land a record on the origin.
    DataMatrix::new(y)
}
