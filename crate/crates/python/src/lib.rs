//! Python bindings. Records travel as lists of rows (one list of floats per
//! record); the results come back as plain dicts.

use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rigidleak_core::harness::{render, run_experiment, ExperimentConfig, ReportFormat};
use rigidleak_core::known_input::{self, BreachProbabilityInputs, KnownInputOptions};
use rigidleak_core::known_sample::{self, PcaOptions};
use rigidleak_core::linalg::DataMatrix;
use rigidleak_core::perturbation::{
    default_translation_scale, generate_rigid_motion, RecordPermutation,
};
use rigidleak_core::{metrics, perturbation, Error};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(_) => PyIOError::new_err(e.to_string()),
        Error::TimeBudget(_) | Error::AttackInfeasible(_) | Error::Infeasible(_) => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn columns(records: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    Ok(DataMatrix::from_records(records)
        .map_err(to_py)?
        .into_inner())
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.column_iter()
        .map(|c| c.iter().copied().collect())
        .collect()
}

fn vector(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

fn square(m: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let n = m.len();
    if m.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("matrix must be square"));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| m[i][j]))
}

/// Release `records` under a seeded random rigid motion and record shuffle.
#[pyfunction]
#[pyo3(signature = (records, seed, with_translation=false, translation_scale=None, identity_permutation=false))]
fn perturb<'py>(
    py: Python<'py>,
    records: Vec<Vec<f64>>,
    seed: u64,
    with_translation: bool,
    translation_scale: Option<f64>,
    identity_permutation: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let x = DataMatrix::from_records(&records).map_err(to_py)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = translation_scale.unwrap_or_else(|| default_translation_scale(&x));
    let motion =
        generate_rigid_motion(x.attributes(), with_translation, scale, &mut rng).map_err(to_py)?;
    let perm = if identity_permutation {
        RecordPermutation::identity(x.records())
    } else {
        RecordPermutation::random(x.records(), &mut rng)
    };
    let y = perturbation::perturb(&x, &motion, &perm).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("released", y.to_records())?;
    out.set_item(
        "matrix",
        (0..motion.dim())
            .map(|i| motion.matrix.row(i).iter().copied().collect::<Vec<f64>>())
            .collect::<Vec<_>>(),
    )?;
    out.set_item("translation", vector(&motion.translation))?;
    out.set_item("permutation", perm.as_slice().to_vec())?;
    Ok(out)
}

/// Link `known` records to `released` and estimate the most exposed other record.
#[pyfunction]
#[pyo3(signature = (known, released, epsilon, seed, with_translation=false))]
fn known_input_attack<'py>(
    py: Python<'py>,
    known: Vec<Vec<f64>>,
    released: Vec<Vec<f64>>,
    epsilon: f64,
    seed: u64,
    with_translation: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let (xa, y) = (columns(&known)?, columns(&released)?);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let opts = KnownInputOptions::default();
    let r = if with_translation {
        known_input::known_input_attack_general(&xa, &y, epsilon, &opts, &mut rng)
    } else {
        known_input::known_input_attack(&xa, &y, epsilon, &opts, &mut rng)
    }
    .map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("linked", r.link.assignment.pairs().to_vec())?;
    out.set_item("rank", r.rank)?;
    out.set_item("codim", r.codim)?;
    out.set_item("chosen", r.chosen)?;
    out.set_item("anchor", r.anchor)?;
    out.set_item("rho", r.rho)?;
    out.set_item("estimate", vector(&r.estimate))?;
    Ok(out)
}

/// Recover the motion from an independent `sample` and invert every released record.
#[pyfunction]
#[pyo3(signature = (sample, released, seed, with_translation=false, permutations=None))]
fn known_sample_attack<'py>(
    py: Python<'py>,
    sample: Vec<Vec<f64>>,
    released: Vec<Vec<f64>>,
    seed: u64,
    with_translation: bool,
    permutations: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let (s, y) = (columns(&sample)?, columns(&released)?);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut opts = PcaOptions::default();
    if let Some(p) = permutations {
        opts.search.permutations = p;
    }
    let r = if with_translation {
        known_sample::pca_attack_general(&s, &y, &opts, &mut rng)
    } else {
        known_sample::pca_attack_orthogonal(&s, &y, &opts, &mut rng)
    }
    .map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("signs", r.signs.signs().to_vec())?;
    out.set_item("p_value", r.p_value)?;
    out.set_item("statistic", r.statistic)?;
    out.set_item("estimates", rows(&r.estimates))?;
    out.set_item("headline", r.headline)?;
    out.set_item("warnings", r.diagnostics.warnings.clone())?;
    Ok(out)
}

/// Breach criteria for one estimate of one private record.
#[pyfunction]
fn evaluate<'py>(
    py: Python<'py>,
    record: Vec<f64>,
    estimate: Vec<f64>,
    epsilon: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let o = metrics::evaluate(
        &DVector::from_vec(record),
        &DVector::from_vec(estimate),
        epsilon,
    )
    .map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("relative_euclid", o.relative_euclid)?;
    out.set_item("min_nad", o.min_nad)?;
    out.set_item("cos_gap", o.cos_gap)?;
    out.set_item("eps_breach", o.eps_breach)?;
    out.set_item("med_breach", o.med_breach)?;
    out.set_item("cos_breach", o.cos_breach)?;
    Ok(out)
}

#[pyfunction]
fn breach_probability(
    y_norm: f64,
    complement_norm: f64,
    epsilon: f64,
    codim: usize,
) -> PyResult<f64> {
    let b = BreachProbabilityInputs::new(y_norm, complement_norm, epsilon, codim).map_err(to_py)?;
    Ok(known_input::breach_probability(&b))
}

#[pyfunction]
fn min_eigen_ratio(covariance: Vec<Vec<f64>>) -> PyResult<f64> {
    known_sample::min_eigen_ratio(&square(&covariance)?).map_err(to_py)
}

#[pyfunction]
fn invariance_gaussian(mean: Vec<f64>, alpha: f64, covariance: Vec<Vec<f64>>) -> PyResult<f64> {
    known_sample::invariance_gaussian(&DVector::from_vec(mean), alpha, &square(&covariance)?)
        .map_err(to_py)
}

/// Run a TOML experiment configuration; returns the report as CSV or JSON text.
#[pyfunction]
#[pyo3(signature = (config, seed=None, format="json"))]
fn experiment(config: &str, seed: Option<u64>, format: &str) -> PyResult<String> {
    let mut cfg = ExperimentConfig::from_toml_str(config).map_err(to_py)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let format: ReportFormat = format.parse().map_err(to_py)?;
    let report = run_experiment(&cfg).map_err(to_py)?;
    let bytes = render(&report, format).map_err(to_py)?;
    String::from_utf8(bytes).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pymodule]
fn rigidleak(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(perturb, m)?)?;
    m.add_function(wrap_pyfunction!(known_input_attack, m)?)?;
    m.add_function(wrap_pyfunction!(known_sample_attack, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(breach_probability, m)?)?;
    m.add_function(wrap_pyfunction!(min_eigen_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(invariance_gaussian, m)?)?;
    m.add_function(wrap_pyfunction!(experiment, m)?)?;
    Ok(())
}
