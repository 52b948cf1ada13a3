use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::closed_form::{breach_probability, BreachProbabilityInputs};
use super::linking::{find_maximal_uniquely_valid, LinkResult, LinkingOptions};
use super::sampler::ConstraintSetSampler;
use crate::error::{Error, Result};
use crate::linalg::{select_columns, DEFAULT_RANK_TOL};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnownInputOptions {
    pub linking: LinkingOptions,
    pub rank_tol: f64,
}

impl Default for KnownInputOptions {
    fn default() -> Self {
        KnownInputOptions {
            linking: LinkingOptions::default(),
            rank_tol: DEFAULT_RANK_TOL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateRho {
    /// Released-record index.
    pub record: usize,
    /// Released index of the anchor record, for translated releases.
    pub anchor: Option<usize>,
    pub rho: f64,
}

/// Result of one known-input attack.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BreachReport {
    pub link: LinkResult,
    /// Rank of the linked inputs (of their differences, for translated releases).
    pub rank: usize,
    pub codim: usize,
    /// Released record whose pre-image is estimated.
    pub chosen: usize,
    pub anchor: Option<usize>,
    pub estimate: DVector<f64>,
    /// `ρ(ε)`, the largest per-record breach probability.
    pub rho: f64,
    /// Every unlinked candidate, in scan order.
    pub table: Vec<CandidateRho>,
    /// The sampled member of the constraint set.
    pub estimator: DMatrix<f64>,
}

/// Links the known inputs, then estimates the released record with the
/// highest breach probability. Assumes no translation.
pub fn known_input_attack<R: Rng + ?Sized>(
    xa: &DMatrix<f64>,
    y: &DMatrix<f64>,
    eps: f64,
    opts: &KnownInputOptions,
    rng: &mut R,
) -> Result<BreachReport> {
    let mut linking = opts.linking;
    linking.lengths_preserved = true;
    let link = find_maximal_uniquely_valid(xa, y, linking)?;
    if link.budget_exhausted {
        return Err(Error::TimeBudget(linking.budget.unwrap_or_default()));
    }
    if link.subset.is_empty() {
        return Err(Error::AttackInfeasible(
            "no uniquely valid subset of the known inputs".into(),
        ));
    }
    let xq = select_columns(xa, &link.assignment.domain());
    attack_linked(&xq, y, link, eps, opts.rank_tol, rng)
}

/// The estimation half of the attack for inputs already linked to
/// `link.assignment.outputs()` (in the same column order as `xq`).
pub fn attack_linked<R: Rng + ?Sized>(
    xq: &DMatrix<f64>,
    y: &DMatrix<f64>,
    link: LinkResult,
    eps: f64,
    rank_tol: f64,
    rng: &mut R,
) -> Result<BreachReport> {
    check_eps(eps)?;
    let outputs = link.assignment.outputs();
    if outputs.len() != xq.ncols() || outputs.is_empty() {
        return Err(Error::invalid(
            "linked inputs and outputs must be non-empty and match",
        ));
    }
    let yq = select_columns(y, &outputs);
    let sampler = ConstraintSetSampler::new(xq, &yq, rank_tol)?;

    let mut table = Vec::new();
    for j in (0..y.ncols()).filter(|j| !outputs.contains(j)) {
        let yj = y.column(j).into_owned();
        let rho = rho_for(&sampler, &yj, eps)?;
        table.push(CandidateRho {
            record: j,
            anchor: None,
            rho,
        });
    }
    let best = argmax_rho(&table)
        .ok_or_else(|| Error::AttackInfeasible("every released record is linked".into()))?;
    let estimator = sampler.sample(rng);
    let estimate = estimator.tr_mul(&y.column(best.record));
    Ok(BreachReport {
        link,
        rank: sampler.rank(),
        codim: sampler.codim(),
        chosen: best.record,
        anchor: None,
        estimate,
        rho: best.rho,
        table,
        estimator,
    })
}

/// Variant for releases with an unknown translation: linking ignores
/// lengths, and each linked record in turn serves as an anchor whose
/// differences to the others are related by the orthogonal part alone.
pub fn known_input_attack_general<R: Rng + ?Sized>(
    xa: &DMatrix<f64>,
    y: &DMatrix<f64>,
    eps: f64,
    opts: &KnownInputOptions,
    rng: &mut R,
) -> Result<BreachReport> {
    let mut linking = opts.linking;
    linking.lengths_preserved = false;
    let link = find_maximal_uniquely_valid(xa, y, linking)?;
    if link.budget_exhausted {
        return Err(Error::TimeBudget(linking.budget.unwrap_or_default()));
    }
    if link.subset.len() < 2 {
        return Err(Error::AttackInfeasible(format!(
            "need at least 2 linked records, found {}",
            link.subset.len()
        )));
    }
    let xq = select_columns(xa, &link.assignment.domain());
    attack_linked_general(&xq, y, link, eps, opts.rank_tol, rng)
}

pub fn attack_linked_general<R: Rng + ?Sized>(
    xq: &DMatrix<f64>,
    y: &DMatrix<f64>,
    link: LinkResult,
    eps: f64,
    rank_tol: f64,
    rng: &mut R,
) -> Result<BreachReport> {
    check_eps(eps)?;
    let outputs = link.assignment.outputs();
    let q = outputs.len();
    if q != xq.ncols() {
        return Err(Error::invalid("linked inputs and outputs must match"));
    }
    if q < 2 {
        return Err(Error::AttackInfeasible(format!(
            "need at least 2 linked records, found {q}"
        )));
    }

    // The last linked record first, then the rest in order; ties keep the earlier anchor.
    let anchors = std::iter::once(q - 1).chain(0..q - 1);
    let mut table = Vec::new();
    let mut best: Option<(CandidateRho, usize, ConstraintSetSampler)> = None;
    for a in anchors {
        let (xd, yd) = differences(xq, y, &outputs, a);
        let sampler = ConstraintSetSampler::new(&xd, &yd, rank_tol)?;
        let y_anchor = y.column(outputs[a]);
        let mut local: Vec<CandidateRho> = Vec::new();
        for j in (0..y.ncols()).filter(|j| !outputs.contains(j)) {
            let dj = y.column(j) - y_anchor;
            local.push(CandidateRho {
                record: j,
                anchor: Some(outputs[a]),
                rho: rho_for(&sampler, &dj, eps)?,
            });
        }
        if let Some(top) = argmax_rho(&local) {
            if best.as_ref().is_none_or(|(b, _, _)| top.rho > b.rho) {
                best = Some((top, a, sampler));
            }
        }
        table.extend(local);
    }
    let (top, a, sampler) =
        best.ok_or_else(|| Error::AttackInfeasible("every released record is linked".into()))?;
    let estimator = sampler.sample(rng);
    let dj = y.column(top.record) - y.column(outputs[a]);
    let estimate = xq.column(a) + estimator.tr_mul(&dj);
    Ok(BreachReport {
        link,
        rank: sampler.rank(),
        codim: sampler.codim(),
        chosen: top.record,
        anchor: top.anchor,
        estimate,
        rho: top.rho,
        table,
        estimator,
    })
}

/// Columns `x_i - x_anchor` and `y_{α(i)} - y_{α(anchor)}` for every other linked `i`.
fn differences(
    xq: &DMatrix<f64>,
    y: &DMatrix<f64>,
    outputs: &[usize],
    anchor: usize,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let others: Vec<usize> = (0..outputs.len()).filter(|&i| i != anchor).collect();
    let n = xq.nrows();
    let mut xd = DMatrix::zeros(n, others.len());
    let mut yd = DMatrix::zeros(n, others.len());
    for (c, &i) in others.iter().enumerate() {
        xd.set_column(c, &(xq.column(i) - xq.column(anchor)));
        yd.set_column(c, &(y.column(outputs[i]) - y.column(outputs[anchor])));
    }
    (xd, yd)
}

fn rho_for(sampler: &ConstraintSetSampler, y: &DVector<f64>, eps: f64) -> Result<f64> {
    let y_norm = y.norm();
    // Rounding can push the projection a hair past the full norm.
    let complement = sampler.complement_norm(y).min(y_norm);
    let inputs = BreachProbabilityInputs::new(y_norm, complement, eps, sampler.codim())?;
    Ok(breach_probability(&inputs))
}

/// Highest ρ, earliest entry on ties.
fn argmax_rho(table: &[CandidateRho]) -> Option<CandidateRho> {
    table.iter().copied().fold(None, |best, c| match best {
        Some(b) if b.rho >= c.rho => Some(b),
        _ => Some(c),
    })
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::invalid(format!(
            "epsilon must be finite and nonnegative, got {eps}"
        )));
    }
    Ok(())
}
