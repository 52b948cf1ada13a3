//! Numerical kernels shared by both attacks: orthonormal bases and their
//! complements, Haar-uniform orthogonal sampling, sample covariance and a
//! sorted, sign-canonical symmetric eigendecomposition.

use std::ops::Deref;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Default relative singular-value threshold used to decide numerical rank.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;
/// Default relative eigen-gap below which two eigenvalues are treated as equal.
pub const DEFAULT_DISTINCT_TOL: f64 = 1e-6;
/// Entries at or below this magnitude are skipped when choosing an eigenvector sign.
pub const SIGN_ZERO_TOL: f64 = 1e-12;

/// A dataset stored with one record per column and one attribute per row.
///
/// Every record must be finite and non-zero.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix(DMatrix<f64>);

impl DataMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() == 0 || entries.ncols() == 0 {
            return Err(Error::invalid(format!(
                "data matrix must be non-empty, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("data matrix contains non-finite entries"));
        }
        if let Some(j) = entries
            .column_iter()
            .position(|c| c.iter().all(|&v| v == 0.0))
        {
            return Err(Error::invalid(format!("record {j} is the zero vector")));
        }
        Ok(DataMatrix(entries))
    }

    /// Builds a matrix from row-major records (one `Vec` per record).
    pub fn from_records(records: &[Vec<f64>]) -> Result<Self> {
        let m = records.len();
        let n = records.first().map_or(0, Vec::len);
        if let Some((j, r)) = records.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(Error::invalid(format!(
                "record {j} has {} attributes, expected {n}",
                r.len()
            )));
        }
        DataMatrix::new(DMatrix::from_fn(n, m, |i, j| records[j][i]))
    }

    pub fn attributes(&self) -> usize {
        self.0.nrows()
    }

    pub fn records(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn record(&self, j: usize) -> DVector<f64> {
        self.0.column(j).into_owned()
    }

    /// Records in row-major order, the inverse of [`DataMatrix::from_records`].
    pub fn to_records(&self) -> Vec<Vec<f64>> {
        self.0
            .column_iter()
            .map(|c| c.iter().copied().collect())
            .collect()
    }
}

impl Deref for DataMatrix {
    type Target = DMatrix<f64>;

    fn deref(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// Orthonormal bases of a column space and of its orthogonal complement.
#[derive(Debug, Clone)]
pub struct OrthonormalBasisPair {
    /// `n x k`, spans the column space.
    pub span: DMatrix<f64>,
    /// `n x (n - k)`, spans the orthogonal complement.
    pub complement: DMatrix<f64>,
}

impl OrthonormalBasisPair {
    pub fn rank(&self) -> usize {
        self.span.ncols()
    }

    pub fn dim(&self) -> usize {
        self.span.nrows()
    }

    pub fn codim(&self) -> usize {
        self.complement.ncols()
    }
}

/// Column-space basis of `m` plus a basis of its complement.
///
/// Numerical rank counts singular values above `rank_tol` times the largest one.
pub fn orthonormal_basis(m: &DMatrix<f64>, rank_tol: f64) -> Result<OrthonormalBasisPair> {
    let n = m.nrows();
    if n == 0 || m.ncols() == 0 {
        return Err(Error::invalid("orthonormal_basis needs a non-empty matrix"));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("matrix contains non-finite entries"));
    }

    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors were requested");
    let sv = &svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    let top = order.first().map_or(0.0, |&i| sv[i]);
    let k = if top > 0.0 {
        order.iter().filter(|&&i| sv[i] > rank_tol * top).count()
    } else {
        0
    };

    let mut span = DMatrix::zeros(n, k);
    for (c, &i) in order.iter().take(k).enumerate() {
        span.set_column(c, &u.column(i));
    }
    let complement = complement_of(&span);
    Ok(OrthonormalBasisPair { span, complement })
}

/// Orthonormal basis of the complement of `Col(span)`, where `span` already
/// has orthonormal columns. The projector `I - span spanᵀ` has eigenvalues in
/// {0, 1}; its unit eigenspace is the complement.
fn complement_of(span: &DMatrix<f64>) -> DMatrix<f64> {
    let n = span.nrows();
    let k = span.ncols();
    if k == n {
        return DMatrix::zeros(n, 0);
    }
    if k == 0 {
        return DMatrix::identity(n, n);
    }
    let projector = DMatrix::identity(n, n) - span * span.transpose();
    let eig = projector.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut out = DMatrix::zeros(n, n - k);
    for (c, &i) in order.iter().take(n - k).enumerate() {
        out.set_column(c, &eig.eigenvectors.column(i));
    }
    out
}

/// Draws an orthogonal matrix from the Haar (uniform) distribution on `O(dim)`.
///
/// QR of a standard Gaussian matrix, with each column of `Q` multiplied by
/// the sign of the matching diagonal entry of `R`. `dim == 0` yields the
/// empty matrix.
pub fn haar_orthogonal<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DMatrix<f64> {
    if dim == 0 {
        return DMatrix::zeros(0, 0);
    }
    let gaussian = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = gaussian.qr();
    let r = qr.r();
    let mut q = qr.q();
    for (i, mut col) in q.column_iter_mut().enumerate() {
        if r[(i, i)] < 0.0 {
            col.neg_mut();
        }
    }
    q
}

/// Unbiased sample covariance over the columns of `d`.
pub fn sample_covariance(d: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let m = d.ncols();
    if m < 2 {
        return Err(Error::InsufficientData { needed: 2, got: m });
    }
    let mean = column_mean(d);
    let mut centered = d.clone();
    for mut col in centered.column_iter_mut() {
        col -= &mean;
    }
    let mut cov = &centered * centered.transpose() / (m as f64 - 1.0);
    // Exact symmetry, the product above can differ in the last bit.
    let sym = (&cov + cov.transpose()) * 0.5;
    cov.copy_from(&sym);
    Ok(cov)
}

pub fn column_mean(d: &DMatrix<f64>) -> DVector<f64> {
    d.column_mean()
}

/// Eigenvalues in descending order with matching sign-canonical eigenvectors.
#[derive(Debug, Clone)]
pub struct EigenModel {
    pub values: Vec<f64>,
    /// Column `i` is the unit eigenvector of `values[i]`.
    pub vectors: DMatrix<f64>,
    /// Smallest `(λ_i - λ_{i+1}) / |λ_1|`; infinite for `n == 1`.
    pub min_relative_gap: f64,
    /// Set when `min_relative_gap` falls below the requested distinctness tolerance.
    pub degenerate: bool,
}

impl EigenModel {
    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Symmetric eigendecomposition, sorted descending, with every eigenvector
/// flipped so that its first entry above [`SIGN_ZERO_TOL`] is positive.
pub fn eigen_sorted(sigma: &DMatrix<f64>, distinct_tol: f64) -> Result<EigenModel> {
    let n = sigma.nrows();
    if n == 0 || sigma.ncols() != n {
        return Err(Error::invalid(format!(
            "eigen_sorted needs a non-empty square matrix, got {}x{}",
            n,
            sigma.ncols()
        )));
    }
    if sigma.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("matrix contains non-finite entries"));
    }
    let scale = sigma.amax().max(1.0);
    let asym = (sigma - sigma.transpose()).amax();
    if asym > 1e-10 * scale {
        return Err(Error::invalid(format!(
            "matrix is not symmetric (max asymmetry {asym:e})"
        )));
    }

    let eig = sigma.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (c, &i) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(i).into_owned();
        v.normalize_mut();
        canonicalize_sign(&mut v);
        vectors.set_column(c, &v);
    }

    let lead = values[0].abs().max(f64::MIN_POSITIVE);
    let min_relative_gap = values
        .windows(2)
        .map(|w| (w[0] - w[1]) / lead)
        .fold(f64::INFINITY, f64::min);
    Ok(EigenModel {
        values,
        vectors,
        min_relative_gap,
        degenerate: min_relative_gap < distinct_tol,
    })
}

/// Picks the lexicographically larger of `v` and `-v`.
pub fn canonicalize_sign(v: &mut DVector<f64>) {
    if let Some(first) = v.iter().find(|x| x.abs() > SIGN_ZERO_TOL) {
        if *first < 0.0 {
            v.neg_mut();
        }
    }
}

/// Columns of `m` selected by index, in the given order.
pub fn select_columns(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), idx.len(), |i, c| m[(i, idx[c])])
}

/// `[a | b]`.
pub fn hstack(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(a.nrows(), b.nrows());
    let mut out = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((0, a.ncols()), b.shape()).copy_from(b);
    out
}

/// `max |AᵀA - I|`.
pub fn orthogonality_defect(a: &DMatrix<f64>) -> f64 {
    let k = a.ncols();
    (a.transpose() * a - DMatrix::<f64>::identity(k, k)).amax()
}
