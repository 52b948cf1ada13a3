use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{AttackSpec, DataSpec, ExperimentConfig};
use super::data::{dedup_columns, ingest_csv, Generator};
use crate::error::{Error, Result};
use crate::known_input::{
    known_input_attack, known_input_attack_general, KnownInputOptions, LinkingOptions,
};
use crate::known_sample::{pca_attack_general, pca_attack_orthogonal, PcaOptions};
use crate::linalg::{select_columns, DataMatrix, DEFAULT_RANK_TOL};
use crate::metrics::{eps_breach, evaluate, BreachOutcome};
use crate::perturbation::{
    default_translation_scale, generate_rigid_motion, perturb, RecordPermutation,
};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Infeasible,
}

/// Why a repetition produced no estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reason {
    NoUniqueLink,
    BudgetExhausted,
    InconsistentLink,
    InsufficientData,
    SearchBudget,
    ZeroNorm,
    InvalidInput,
}

impl Reason {
    fn of(e: &Error) -> Reason {
        match e {
            Error::TimeBudget(_) => Reason::BudgetExhausted,
            Error::AttackInfeasible(_) => Reason::NoUniqueLink,
            Error::Infeasible(_) => Reason::InconsistentLink,
            Error::InsufficientData { .. } => Reason::InsufficientData,
            Error::SearchBudget { .. } => Reason::SearchBudget,
            Error::ZeroNorm => Reason::ZeroNorm,
            _ => Reason::InvalidInput,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Reason::NoUniqueLink => "no_unique_link",
            Reason::BudgetExhausted => "budget_exhausted",
            Reason::InconsistentLink => "inconsistent_link",
            Reason::InsufficientData => "insufficient_data",
            Reason::SearchBudget => "search_budget",
            Reason::ZeroNorm => "zero_norm",
            Reason::InvalidInput => "invalid_input",
        }
    }
}

/// Seconds spent per phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub attack_secs: f64,
    pub total_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionRow {
    /// Index into the sweep.
    pub point: usize,
    /// Sweep value: number of known inputs or sample ratio.
    pub parameter: f64,
    pub repetition: usize,
    pub status: Status,
    pub reason: Option<Reason>,
    /// Linked known inputs.
    pub linked: Option<usize>,
    /// Known-sample size.
    pub sample_size: Option<usize>,
    pub rho: Option<f64>,
    /// Released index of the headline estimate.
    pub chosen_record: Option<usize>,
    pub relative_error: Option<f64>,
    pub min_nad: Option<f64>,
    pub cos_gap: Option<f64>,
    pub eps_breach: bool,
    pub med_breach: bool,
    pub cos_breach: bool,
    pub p_value: Option<f64>,
    pub min_eigen_ratio: Option<f64>,
    /// Fraction of all released records whose estimate is an ε-breach.
    pub record_breach_fraction: Option<f64>,
    pub timings: Option<Timings>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl MeanStd {
    /// Sample mean and standard deviation (divisor `count - 1`); `None` when empty.
    pub fn of(values: &[f64]) -> Option<MeanStd> {
        if values.is_empty() {
            return None;
        }
        let count = values.len();
        let mean = values.iter().sum::<f64>() / count as f64;
        let std = if count > 1 {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (count - 1) as f64)
                .sqrt()
        } else {
            0.0
        };
        Some(MeanStd { mean, std, count })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub point: usize,
    pub parameter: f64,
    pub repetitions: usize,
    pub feasible: usize,
    pub eps_breach_fraction: f64,
    pub med_breach_fraction: f64,
    pub cos_breach_fraction: f64,
    pub rho: Option<MeanStd>,
    pub linked: Option<MeanStd>,
    pub record_breach_fraction: Option<MeanStd>,
    pub p_value: Option<MeanStd>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub attack: String,
    pub config: ExperimentConfig,
    /// Attributes and records of the private dataset.
    pub attributes: usize,
    pub records: usize,
    pub rows: Vec<RepetitionRow>,
    pub aggregates: Vec<AggregateRow>,
}

/// Aggregates per sweep point, in sweep order.
pub fn aggregate(rows: &[RepetitionRow], sweep: &[f64]) -> Vec<AggregateRow> {
    sweep
        .iter()
        .enumerate()
        .map(|(point, &parameter)| {
            let here: Vec<&RepetitionRow> = rows.iter().filter(|r| r.point == point).collect();
            let reps = here.len();
            let frac = |f: fn(&RepetitionRow) -> bool| {
                if reps == 0 {
                    0.0
                } else {
                    here.iter().filter(|r| f(r)).count() as f64 / reps as f64
                }
            };
            let collect = |f: fn(&RepetitionRow) -> Option<f64>| {
                MeanStd::of(&here.iter().filter_map(|r| f(r)).collect::<Vec<_>>())
            };
            AggregateRow {
                point,
                parameter,
                repetitions: reps,
                feasible: here.iter().filter(|r| r.status == Status::Ok).count(),
                eps_breach_fraction: frac(|r| r.eps_breach),
                med_breach_fraction: frac(|r| r.med_breach),
                cos_breach_fraction: frac(|r| r.cos_breach),
                rho: collect(|r| r.rho),
                linked: collect(|r| r.linked.map(|v| v as f64)),
                record_breach_fraction: collect(|r| r.record_breach_fraction),
                p_value: collect(|r| r.p_value),
            }
        })
        .collect()
}

/// Options that do not change results.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    pub timings: bool,
}

/// Stream of the derived generator for a repetition. Stream 0 builds the
/// dataset; all sweep points of one repetition share a stream, so they are
/// compared on the same secrets.
fn stream_for(repetition: usize) -> u64 {
    1 + repetition as u64
}

fn derived_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

struct Source {
    x: DMatrix<f64>,
    generator: Option<Generator>,
}

fn load_source(cfg: &ExperimentConfig) -> Result<Source> {
    let mut rng = derived_rng(cfg.seed, 0);
    let generator = Generator::from_spec(&cfg.data, &mut rng)?;
    let x = match (&cfg.data, &generator) {
        (
            DataSpec::Csv {
                path,
                has_header,
                dedup,
                columns,
            },
            _,
        ) => ingest_csv(path, *has_header, *dedup, columns.as_deref())?.into_inner(),
        (DataSpec::LetterLike { records }, Some(g)) => {
            dedup_columns(&g.sample(*records, &mut rng)?)
        }
        (
            DataSpec::Gaussian { records, .. }
            | DataSpec::Mixture { records, .. }
            | DataSpec::RandomGaussian { records, .. },
            Some(g),
        ) => g.sample(*records, &mut rng)?,
        _ => unreachable!("synthetic specs always build a generator"),
    };
    DataMatrix::new(x.clone())?;
    Ok(Source { x, generator })
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run_experiment_with(cfg, RunOptions::default())
}

pub fn run_experiment_with(cfg: &ExperimentConfig, opts: RunOptions) -> Result<ExperimentReport> {
    cfg.validate()?;
    let source = load_source(cfg)?;
    let sweep = cfg.attack.sweep();
    let jobs: Vec<(usize, usize)> = (0..sweep.len())
        .flat_map(|p| (0..cfg.repetitions).map(move |r| (p, r)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(point, rep)| {
            let mut rng = derived_rng(cfg.seed, stream_for(rep));
            let start = Instant::now();
            let mut row = run_one(cfg, &source, point, sweep[point], rep, &mut rng)?;
            if opts.timings {
                let t = row.timings.get_or_insert_with(Timings::default);
                t.total_secs = start.elapsed().as_secs_f64();
            } else {
                row.timings = None;
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let aggregates = aggregate(&rows, &sweep);
    Ok(ExperimentReport {
        schema_version: REPORT_SCHEMA_VERSION,
        attack: cfg.attack.name().to_string(),
        config: cfg.clone(),
        attributes: source.x.nrows(),
        records: source.x.ncols(),
        rows,
        aggregates,
    })
}

fn blank_row(point: usize, parameter: f64, repetition: usize) -> RepetitionRow {
    RepetitionRow {
        point,
        parameter,
        repetition,
        status: Status::Ok,
        reason: None,
        linked: None,
        sample_size: None,
        rho: None,
        chosen_record: None,
        relative_error: None,
        min_nad: None,
        cos_gap: None,
        eps_breach: false,
        med_breach: false,
        cos_breach: false,
        p_value: None,
        min_eigen_ratio: None,
        record_breach_fraction: None,
        timings: None,
    }
}

fn infeasible(mut row: RepetitionRow, e: &Error) -> RepetitionRow {
    row.status = Status::Infeasible;
    row.reason = Some(Reason::of(e));
    row
}

fn record_outcome(row: &mut RepetitionRow, chosen: usize, o: &BreachOutcome) {
    row.chosen_record = Some(chosen);
    row.relative_error = Some(o.relative_euclid);
    row.min_nad = Some(o.min_nad);
    row.cos_gap = Some(o.cos_gap);
    row.eps_breach = o.eps_breach;
    row.med_breach = o.med_breach;
    row.cos_breach = o.cos_breach;
}

fn run_one(
    cfg: &ExperimentConfig,
    source: &Source,
    point: usize,
    parameter: f64,
    repetition: usize,
    rng: &mut ChaCha8Rng,
) -> Result<RepetitionRow> {
    let row = blank_row(point, parameter, repetition);
    match &cfg.attack {
        AttackSpec::KnownInput {
            known_inputs,
            link_tol,
            rank_tol,
            budget_secs,
        } => {
            let a = known_inputs[point];
            let mut opts = KnownInputOptions::default();
            opts.linking = LinkingOptions {
                tol: link_tol.unwrap_or(opts.linking.tol),
                lengths_preserved: !cfg.perturbation.with_translation,
                budget: budget_secs.map(Duration::from_secs_f64),
            };
            opts.rank_tol = rank_tol.unwrap_or(DEFAULT_RANK_TOL);
            known_input_rep(cfg, &source.x, a, &opts, row, rng)
        }
        AttackSpec::KnownSample {
            sample_ratios,
            permutations,
            pooled_cap,
        } => {
            let mut opts = PcaOptions::default();
            if let Some(p) = permutations {
                opts.search.permutations = *p;
            }
            if let Some(c) = pooled_cap {
                opts.search.pooled_cap = *c;
            }
            known_sample_rep(cfg, source, sample_ratios[point], &opts, row, rng)
        }
    }
}

struct Release {
    y: DMatrix<f64>,
    perm: RecordPermutation,
}

fn release(cfg: &ExperimentConfig, x: &DMatrix<f64>, rng: &mut ChaCha8Rng) -> Result<Release> {
    let data = DataMatrix::new(x.clone())?;
    let p = &cfg.perturbation;
    let scale = p
        .translation_scale
        .unwrap_or_else(|| default_translation_scale(&data));
    let motion = generate_rigid_motion(x.nrows(), p.with_translation, scale, rng)?;
    let perm = if p.identity_permutation {
        RecordPermutation::identity(x.ncols())
    } else {
        RecordPermutation::random(x.ncols(), rng)
    };
    let y = perturb(&data, &motion, &perm)?.into_inner();
    Ok(Release { y, perm })
}

/// `a` records taken in a random order, skipping any that is linearly
/// dependent on those already taken while fewer than `n` are held. The order
/// depends only on the stream, so larger `a` extends smaller `a`.
fn pick_known_inputs(x: &DMatrix<f64>, a: usize, rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
    let m = x.ncols();
    if a > m {
        return Err(Error::InsufficientData { needed: a, got: m });
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(rng);
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut picked = Vec::with_capacity(a);
    let mut skipped = Vec::new();
    for &j in &order {
        if picked.len() == a {
            break;
        }
        if basis.len() == x.nrows() {
            picked.push(j);
            continue;
        }
        let v = x.column(j).into_owned();
        let mut r = v.clone();
        for q in &basis {
            r -= q * q.dot(&r);
        }
        let norm = r.norm();
        if norm > DEFAULT_RANK_TOL.sqrt() * v.norm().max(f64::MIN_POSITIVE) {
            basis.push(r / norm);
            picked.push(j);
        } else {
            skipped.push(j);
        }
    }
    // Fewer independent records than requested: fill up with the skipped ones.
    picked.extend(skipped.into_iter().take(a - picked.len()));
    Ok(picked)
}

fn known_input_rep(
    cfg: &ExperimentConfig,
    x: &DMatrix<f64>,
    a: usize,
    opts: &KnownInputOptions,
    mut row: RepetitionRow,
    rng: &mut ChaCha8Rng,
) -> Result<RepetitionRow> {
    let rel = release(cfg, x, rng)?;
    let known = match pick_known_inputs(x, a, rng) {
        Ok(k) => k,
        Err(e) => return Ok(infeasible(row, &e)),
    };
    let xa = select_columns(x, &known);
    let started = Instant::now();
    let attempt = if cfg.perturbation.with_translation {
        known_input_attack_general(&xa, &rel.y, cfg.epsilon, opts, rng)
    } else {
        known_input_attack(&xa, &rel.y, cfg.epsilon, opts, rng)
    };
    let report = match attempt {
        Ok(r) => r,
        Err(e @ (Error::AttackInfeasible(_) | Error::Infeasible(_) | Error::TimeBudget(_))) => {
            let mut row = infeasible(row, &e);
            row.linked = Some(0);
            row.rho = Some(0.0);
            return Ok(row);
        }
        Err(e) => return Err(e),
    };
    row.timings = Some(Timings {
        attack_secs: started.elapsed().as_secs_f64(),
        total_secs: 0.0,
    });
    row.linked = Some(report.link.subset.len());
    row.rho = Some(report.rho);
    let truth = x
        .column(rel.perm.inverse().image(report.chosen))
        .into_owned();
    match evaluate(&truth, &report.estimate, cfg.epsilon) {
        Ok(o) => record_outcome(&mut row, report.chosen, &o),
        Err(e) => return Ok(infeasible(row, &e)),
    }
    Ok(row)
}

fn known_sample_rep(
    cfg: &ExperimentConfig,
    source: &Source,
    ratio: f64,
    opts: &PcaOptions,
    mut row: RepetitionRow,
    rng: &mut ChaCha8Rng,
) -> Result<RepetitionRow> {
    let m_total = source.x.ncols();
    let q = ((ratio * m_total as f64).round() as usize).max(1);
    // Synthetic sources get a fresh independent sample; a fixed dataset is
    // split. Either way the secrets are drawn first and every sweep point of a
    // repetition sees the same secrets and nested samples.
    let (x, s, rel) = match &source.generator {
        Some(g) => {
            let rel = release(cfg, &source.x, rng)?;
            (source.x.clone(), g.sample(q, rng)?, rel)
        }
        None => {
            if q + 2 > m_total {
                let e = Error::InsufficientData {
                    needed: q + 2,
                    got: m_total,
                };
                return Ok(infeasible(row, &e));
            }
            let mut order: Vec<usize> = (0..m_total).collect();
            order.shuffle(rng);
            let (sample, rest) = order.split_at(q);
            let mut rest = rest.to_vec();
            rest.sort_unstable();
            let x = select_columns(&source.x, &rest);
            let rel = release(cfg, &x, rng)?;
            (x, select_columns(&source.x, sample), rel)
        }
    };
    row.sample_size = Some(s.ncols());
    let started = Instant::now();
    let attempt = if cfg.perturbation.with_translation {
        pca_attack_general(&s, &rel.y, opts, rng)
    } else {
        pca_attack_orthogonal(&s, &rel.y, opts, rng)
    };
    let result = match attempt {
        Ok(r) => r,
        Err(e @ (Error::InsufficientData { .. } | Error::SearchBudget { .. })) => {
            return Ok(infeasible(row, &e))
        }
        Err(e) => return Err(e),
    };
    row.timings = Some(Timings {
        attack_secs: started.elapsed().as_secs_f64(),
        total_secs: 0.0,
    });
    row.p_value = Some(result.p_value);
    row.min_eigen_ratio = result.diagnostics.sample_min_eigen_ratio;

    let inv = rel.perm.inverse();
    let mut breached = 0usize;
    for j in 0..rel.y.ncols() {
        let truth = x.column(inv.image(j)).into_owned();
        let est = result.estimates.column(j).into_owned();
        if eps_breach(&truth, &est, cfg.epsilon).is_ok_and(|c| c.breached) {
            breached += 1;
        }
    }
    row.record_breach_fraction = Some(breached as f64 / rel.y.ncols() as f64);
    let truth = x.column(inv.image(result.headline)).into_owned();
    match evaluate(&truth, &result.headline_estimate(), cfg.epsilon) {
        Ok(o) => record_outcome(&mut row, result.headline, &o),
        Err(e) => return Ok(infeasible(row, &e)),
    }
    Ok(row)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_std_matches_hand_values() {
        let s = MeanStd::of(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(s.mean, 2.5);
        assert!((s.std - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(MeanStd::of(&[7.0]).unwrap().std, 0.0);
        assert!(MeanStd::of(&[]).is_none());
    }

    #[test]
    fn repetition_streams_avoid_the_dataset_stream() {
        let streams: std::collections::HashSet<u64> = (0..50).map(stream_for).collect();
        assert_eq!(streams.len(), 50);
        assert!(!streams.contains(&0));
    }

    #[test]
    fn reasons_map_from_errors() {
        assert_eq!(
            Reason::of(&Error::AttackInfeasible("no uniquely valid subset".into())),
            Reason::NoUniqueLink
        );
        assert_eq!(
            Reason::of(&Error::SearchBudget { dim: 30, cap: 20 }),
            Reason::SearchBudget
        );
    }
}
