use std::collections::HashSet;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::config::{DataSpec, MixtureComponent};
use crate::error::{Error, Result};
use crate::linalg::{sample_covariance, DataMatrix};

/// Reads a numeric CSV whose rows are records. `columns` picks attributes
/// by 0-based index; `dedup` drops repeated records, keeping the first.
pub fn ingest_csv(
    path: &Path,
    has_header: bool,
    dedup: bool,
    columns: Option<&[usize]>,
) -> Result<DataMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let parse_err = |row: usize, column: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        row,
        column,
        message,
    };
    let first_row = if has_header { 2 } else { 1 };
    let mut width: Option<usize> = None;
    let mut records: Vec<Vec<f64>> = Vec::new();
    let mut seen: HashSet<Vec<u64>> = HashSet::new();
    for (k, result) in reader.records().enumerate() {
        let row = first_row + k;
        let rec = result?;
        if rec.iter().all(|c| c.is_empty()) {
            continue;
        }
        match width {
            None => width = Some(rec.len()),
            Some(w) if w != rec.len() => {
                return Err(parse_err(
                    row,
                    rec.len().min(w) + 1,
                    format!("expected {w} fields, found {}", rec.len()),
                ))
            }
            Some(_) => {}
        }
        let picked: Vec<usize> = match columns {
            Some(c) => c.to_vec(),
            None => (0..rec.len()).collect(),
        };
        let mut values = Vec::with_capacity(picked.len());
        for &c in &picked {
            let cell = rec
                .get(c)
                .ok_or_else(|| parse_err(row, c + 1, format!("column {} out of range", c + 1)))?;
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_err(row, c + 1, format!("not a number: {cell:?}")))?;
            if !v.is_finite() {
                return Err(parse_err(row, c + 1, format!("not finite: {cell:?}")));
            }
            values.push(v);
        }
        if dedup && !seen.insert(values.iter().map(|v| (v + 0.0).to_bits()).collect()) {
            continue;
        }
        records.push(values);
    }
    if records.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    DataMatrix::from_records(&records)
}

/// Draws `records` points from N(mean, cov) using an eigen square root of
/// `cov`, which also handles singular covariances.
pub fn sample_gaussian<R: Rng + ?Sized>(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    records: usize,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let factor = covariance_factor(cov)?;
    let n = mean.len();
    if factor.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: factor.nrows(),
        });
    }
    let z = DMatrix::from_fn(n, records, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut out = factor * z;
    for mut c in out.column_iter_mut() {
        c += mean;
    }
    Ok(out)
}

/// `L` with `L Lᵀ = cov`.
pub fn covariance_factor(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = cov.nrows();
    if cov.ncols() != n || n == 0 {
        return Err(Error::invalid("covariance must be square and non-empty"));
    }
    let scale = cov.amax().max(f64::MIN_POSITIVE);
    if (cov - cov.transpose()).amax() > 1e-10 * scale {
        return Err(Error::invalid("covariance must be symmetric"));
    }
    let eig = cov.clone().symmetric_eigen();
    if let Some(&neg) = eig.eigenvalues.iter().find(|&&l| l < -1e-9 * scale) {
        return Err(Error::invalid(format!(
            "covariance is not positive semidefinite (eigenvalue {neg:e})"
        )));
    }
    let mut factor = eig.eigenvectors;
    for (j, l) in eig.eigenvalues.iter().enumerate() {
        let s = l.max(0.0).sqrt();
        factor.column_mut(j).scale_mut(s);
    }
    Ok(factor)
}

fn to_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let n = rows.len();
    DMatrix::from_fn(n, n, |i, j| rows[i][j])
}

/// A synthetic source of records that can be sampled repeatedly.
#[derive(Debug, Clone)]
pub enum Generator {
    Gaussian {
        mean: DVector<f64>,
        factor: DMatrix<f64>,
    },
    Mixture {
        weights: Vec<f64>,
        means: Vec<DVector<f64>>,
        factors: Vec<DMatrix<f64>>,
    },
    LetterLike(LetterLike),
}

impl Generator {
    /// Builds the generator for synthetic data; `None` for CSV input.
    /// `RandomGaussian` draws its parameters from `rng`.
    pub fn from_spec<R: Rng + ?Sized>(spec: &DataSpec, rng: &mut R) -> Result<Option<Self>> {
        Ok(Some(match spec {
            DataSpec::Csv { .. } => return Ok(None),
            DataSpec::Gaussian {
                mean, covariance, ..
            } => Generator::Gaussian {
                mean: DVector::from_column_slice(mean),
                factor: covariance_factor(&to_matrix(covariance))?,
            },
            DataSpec::Mixture { components, .. } => {
                let mut weights = Vec::new();
                let mut means = Vec::new();
                let mut factors = Vec::new();
                for MixtureComponent {
                    weight,
                    mean,
                    covariance,
                } in components
                {
                    weights.push(*weight);
                    means.push(DVector::from_column_slice(mean));
                    factors.push(covariance_factor(&to_matrix(covariance))?);
                }
                Generator::Mixture {
                    weights,
                    means,
                    factors,
                }
            }
            DataSpec::RandomGaussian { dim, .. } => {
                let mean = DVector::from_fn(*dim, |_, _| rng.sample::<f64, _>(StandardNormal));
                let draws =
                    DMatrix::from_fn(*dim, *dim, |_, _| rng.sample::<f64, _>(StandardNormal));
                let cov = if *dim >= 2 {
                    sample_covariance(&draws)?
                } else {
                    DMatrix::identity(1, 1)
                };
                Generator::Gaussian {
                    mean,
                    factor: covariance_factor(&cov)?,
                }
            }
            DataSpec::LetterLike { .. } => Generator::LetterLike(LetterLike::new(rng)),
        }))
    }

    pub fn dim(&self) -> usize {
        match self {
            Generator::Gaussian { mean, .. } => mean.len(),
            Generator::Mixture { means, .. } => means[0].len(),
            Generator::LetterLike(_) => LETTER_ATTRIBUTES,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, records: usize, rng: &mut R) -> Result<DMatrix<f64>> {
        let n = self.dim();
        match self {
            Generator::Gaussian { mean, factor } => {
                let z = DMatrix::from_fn(n, records, |_, _| rng.sample::<f64, _>(StandardNormal));
                let mut out = factor * z;
                for mut c in out.column_iter_mut() {
                    c += mean;
                }
                Ok(out)
            }
            Generator::Mixture {
                weights,
                means,
                factors,
            } => {
                let pick = WeightedIndex::new(weights)
                    .map_err(|e| Error::invalid(format!("mixture weights: {e}")))?;
                let mut out = DMatrix::zeros(n, records);
                for j in 0..records {
                    let k = pick.sample(rng);
                    let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
                    out.set_column(j, &(&means[k] + &factors[k] * z));
                }
                Ok(out)
            }
            Generator::LetterLike(g) => Ok(g.sample(records, rng)),
        }
    }
}

pub const LETTER_ATTRIBUTES: usize = 16;
const LETTER_CLASSES: usize = 26;
const LETTER_MEAN: [f64; LETTER_ATTRIBUTES] = [
    4.02, 7.04, 5.12, 5.37, 3.51, 6.90, 7.50, 4.63, 5.18, 8.28, 6.45, 7.93, 3.05, 8.34, 3.69, 7.80,
];
const LETTER_STD: [f64; LETTER_ATTRIBUTES] = [
    1.91, 3.30, 2.01, 2.26, 2.19, 2.03, 2.33, 2.70, 2.38, 2.49, 2.63, 2.08, 2.33, 1.55, 2.57, 1.62,
];

/// Integer attributes in `[0, 15]`: one prototype per class with a shared
/// size factor driving the first five attributes, plus small per-record
/// noise before rounding, which leaves many records close to each other.
#[derive(Debug, Clone)]
pub struct LetterLike {
    prototypes: Vec<[f64; LETTER_ATTRIBUTES]>,
}

impl LetterLike {
    pub fn new<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let prototypes = (0..LETTER_CLASSES)
            .map(|_| {
                let mut p = [0.0; LETTER_ATTRIBUTES];
                for (a, v) in p.iter_mut().enumerate() {
                    let z: f64 = rng.sample(StandardNormal);
                    *v = LETTER_MEAN[a] + 0.8 * LETTER_STD[a] * z;
                }
                p
            })
            .collect();
        LetterLike { prototypes }
    }

    pub fn sample<R: Rng + ?Sized>(&self, records: usize, rng: &mut R) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(LETTER_ATTRIBUTES, records);
        for j in 0..records {
            let proto = &self.prototypes[rng.random_range(0..LETTER_CLASSES)];
            let size: f64 = rng.sample(StandardNormal);
            for a in 0..LETTER_ATTRIBUTES {
                let z: f64 = rng.sample(StandardNormal);
                let shared = if a < 5 {
                    0.5 * LETTER_STD[a] * size
                } else {
                    0.0
                };
                let v = proto[a] + shared + 0.35 * LETTER_STD[a] * z;
                out[(a, j)] = v.round().clamp(0.0, 15.0);
            }
        }
        out
    }
}

/// Writes the columns of `m` as CSV rows.
pub fn write_records_csv<W: std::io::Write>(m: &DMatrix<f64>, sink: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(sink);
    for c in m.column_iter() {
        w.write_record(c.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Keeps the first occurrence of each distinct column.
pub fn dedup_columns(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut seen = HashSet::new();
    let keep: Vec<usize> = (0..m.ncols())
        .filter(|&j| {
            seen.insert(
                m.column(j)
                    .iter()
                    .map(|v| (v + 0.0).to_bits())
                    .collect::<Vec<_>>(),
            )
        })
        .collect();
    crate::linalg::select_columns(m, &keep)
}
