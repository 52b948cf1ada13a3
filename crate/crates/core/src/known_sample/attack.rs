use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::diagnostics::min_eigen_ratio;
use super::signs::{
    score_signs, sign_search, SignEvaluation, SignMatrix, SignSearchOptions, SignSearchResult,
};
use crate::error::{Error, Result};
use crate::linalg::{
    column_mean, eigen_sorted, sample_covariance, EigenModel, DEFAULT_DISTINCT_TOL,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PcaOptions {
    pub search: SignSearchOptions,
    /// Relative eigen-gap below which a warning is attached.
    pub distinct_tol: f64,
    /// Translated variant only: choose between `D★` and `-D★` by testing the
    /// centered sample against the centered release.
    pub resolve_reflection: bool,
}

impl Default for PcaOptions {
    fn default() -> Self {
        PcaOptions {
            search: SignSearchOptions::default(),
            distinct_tol: DEFAULT_DISTINCT_TOL,
            resolve_reflection: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PcaDiagnostics {
    /// `None` when the covariance has a nonpositive eigenvalue.
    pub sample_min_eigen_ratio: Option<f64>,
    pub release_min_eigen_ratio: Option<f64>,
    pub sample_eigenvalues: Vec<f64>,
    pub release_eigenvalues: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Column means used to undo an unknown translation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimates {
    pub sample: DVector<f64>,
    pub release: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaAttackResult {
    /// `M̂ = Ŵ D★ Ẑᵀ`.
    pub estimator: DMatrix<f64>,
    pub signs: SignMatrix,
    pub p_value: f64,
    pub statistic: f64,
    /// One recovered record per released column.
    pub estimates: DMatrix<f64>,
    /// Randomly chosen released column reported as the headline estimate.
    pub headline: usize,
    pub sign_table: Vec<SignEvaluation>,
    pub diagnostics: PcaDiagnostics,
    /// Present for the translated variant.
    pub means: Option<MeanEstimates>,
    /// Scores of `D★` and `-D★` on centered data, when the reflection check ran.
    pub reflection: Vec<SignEvaluation>,
}

impl PcaAttackResult {
    pub fn headline_estimate(&self) -> DVector<f64> {
        self.estimates.column(self.headline).into_owned()
    }
}

/// Known-sample attack on `Y = M_T X` (no translation). `s` is an
/// independent sample from the distribution of `X`.
pub fn pca_attack_orthogonal<R: Rng + ?Sized>(
    s: &DMatrix<f64>,
    y: &DMatrix<f64>,
    opts: &PcaOptions,
    rng: &mut R,
) -> Result<PcaAttackResult> {
    let (fit, diagnostics) = estimate_map(s, y, opts, rng)?;
    let (estimator, search) = (fit.estimator, fit.search);
    let estimates = estimator.tr_mul(y);
    let headline = rng.random_range(0..y.ncols());
    Ok(PcaAttackResult {
        estimator,
        signs: search.best,
        p_value: search.p_value,
        statistic: search.statistic,
        estimates,
        headline,
        sign_table: search.table,
        diagnostics,
        means: None,
        reflection: Vec::new(),
    })
}

/// Known-sample attack on `Y = M_T X + v_T`.
///
/// Differences of disjoint record pairs cancel the translation and keep the
/// eigenvectors, so `M̂` comes from the orthogonal attack on the difference
/// matrices; records are then estimated as `M̂ᵀ(y − μ̂_Y) + μ̂_S`.
///
/// Difference data is symmetric about the origin, so it cannot tell `D★` from
/// `-D★`. With `resolve_reflection` the two are compared once more on the
/// centered records, which keep any asymmetry of the distribution.
pub fn pca_attack_general<R: Rng + ?Sized>(
    s: &DMatrix<f64>,
    y: &DMatrix<f64>,
    opts: &PcaOptions,
    rng: &mut R,
) -> Result<PcaAttackResult> {
    let got = s.ncols().min(y.ncols());
    if got < 4 {
        return Err(Error::InsufficientData { needed: 4, got });
    }
    let s_diff = paired_differences(s, rng);
    let y_diff = paired_differences(y, rng);
    let (fit, diagnostics) = estimate_map(&s_diff, &y_diff, opts, rng)?;
    let MapFit {
        mut estimator,
        mut search,
        w,
        z,
    } = fit;

    let mu_s = column_mean(s);
    let mu_y = column_mean(y);
    let centered = subtract_mean(y, &mu_y);
    let mut reflection = Vec::new();
    if opts.resolve_reflection {
        let candidates = [search.best.clone(), search.best.negated()];
        let check = score_signs(
            &w,
            &z,
            &subtract_mean(s, &mu_s),
            &centered,
            &candidates,
            &opts.search,
            rng,
        )?;
        if check.best != search.best {
            estimator.neg_mut();
            search.best = check.best.clone();
        }
        reflection = check.table;
    }
    let mut estimates = estimator.tr_mul(&centered);
    for mut c in estimates.column_iter_mut() {
        c += &mu_s;
    }
    let headline = rng.random_range(0..y.ncols());
    Ok(PcaAttackResult {
        estimator,
        signs: search.best,
        p_value: search.p_value,
        statistic: search.statistic,
        estimates,
        headline,
        sign_table: search.table,
        diagnostics,
        means: Some(MeanEstimates {
            sample: mu_s,
            release: mu_y,
        }),
        reflection,
    })
}

fn subtract_mean(d: &DMatrix<f64>, mu: &DVector<f64>) -> DMatrix<f64> {
    let mut out = d.clone();
    for mut c in out.column_iter_mut() {
        c -= mu;
    }
    out
}

/// Columns `d_i − d_{h+i}` for `i < h = ⌊k/2⌋`, after discarding one random
/// column when the count `k` is odd.
pub fn paired_differences<R: Rng + ?Sized>(d: &DMatrix<f64>, rng: &mut R) -> DMatrix<f64> {
    let mut cols: Vec<usize> = (0..d.ncols()).collect();
    if cols.len() % 2 == 1 {
        cols.remove(rng.random_range(0..cols.len()));
    }
    let h = cols.len() / 2;
    DMatrix::from_fn(d.nrows(), h, |r, i| d[(r, cols[i])] - d[(r, cols[h + i])])
}

struct MapFit {
    estimator: DMatrix<f64>,
    search: SignSearchResult,
    w: DMatrix<f64>,
    z: DMatrix<f64>,
}

fn estimate_map<R: Rng + ?Sized>(
    s: &DMatrix<f64>,
    y: &DMatrix<f64>,
    opts: &PcaOptions,
    rng: &mut R,
) -> Result<(MapFit, PcaDiagnostics)> {
    if s.nrows() != y.nrows() {
        return Err(Error::DimensionMismatch {
            expected: y.nrows(),
            actual: s.nrows(),
        });
    }
    let cov_s = sample_covariance(s)?;
    let cov_y = sample_covariance(y)?;
    let z = eigen_sorted(&cov_s, opts.distinct_tol)?;
    let w = eigen_sorted(&cov_y, opts.distinct_tol)?;
    let diagnostics = diagnose(&cov_s, &z, &cov_y, &w, opts.distinct_tol);
    let search = sign_search(&w.vectors, &z.vectors, s, y, &opts.search, rng)?;
    let estimator = search.best.scale_columns(&w.vectors) * z.vectors.transpose();
    Ok((
        MapFit {
            estimator,
            search,
            w: w.vectors,
            z: z.vectors,
        },
        diagnostics,
    ))
}

fn diagnose(
    cov_s: &DMatrix<f64>,
    z: &EigenModel,
    cov_y: &DMatrix<f64>,
    w: &EigenModel,
    tol: f64,
) -> PcaDiagnostics {
    let mut warnings = Vec::new();
    for (name, model) in [("sample", z), ("release", w)] {
        if model.degenerate {
            warnings.push(format!(
                "{name} covariance has nearly repeated eigenvalues (relative gap {:.3e} < {tol:e}); \
                 eigenvector matching is unreliable",
                model.min_relative_gap
            ));
        }
    }
    PcaDiagnostics {
        sample_min_eigen_ratio: min_eigen_ratio(cov_s).ok(),
        release_min_eigen_ratio: min_eigen_ratio(cov_y).ok(),
        sample_eigenvalues: z.values.clone(),
        release_eigenvalues: w.values.clone(),
        warnings,
    }
}
