//! Linking known private records to their released counterparts.
//!
//! An assignment maps known-input indices to released-record indices and is
//! valid when every pairwise distance (and, for purely orthogonal releases,
//! every record length) agrees. A subset of the known inputs is uniquely
//! valid when exactly one valid assignment exists on it; the attacker wants
//! the largest such subset.

use std::time::{Duration, Instant};

use itertools::Itertools;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default relative tolerance for length and distance equality.
pub const DEFAULT_LINK_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkingOptions {
    pub tol: f64,
    /// `false` drops the length test, for releases that include a translation.
    pub lengths_preserved: bool,
    /// Wall-clock budget for the maximal-subset search.
    pub budget: Option<Duration>,
}

impl Default for LinkingOptions {
    fn default() -> Self {
        LinkingOptions {
            tol: DEFAULT_LINK_TOL,
            lengths_preserved: true,
            budget: None,
        }
    }
}

/// Injective map from known-input indices to released-record indices,
/// kept sorted by input index.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pairs: Vec<(usize, usize)>,
}

impl Assignment {
    pub fn empty() -> Self {
        Assignment::default()
    }

    pub fn from_pairs(mut pairs: Vec<(usize, usize)>) -> Result<Self> {
        pairs.sort_unstable();
        let inputs_unique = pairs.windows(2).all(|w| w[0].0 != w[1].0);
        let outputs_unique = pairs.iter().map(|p| p.1).all_unique();
        if !inputs_unique || !outputs_unique {
            return Err(Error::invalid("assignment is not injective"));
        }
        Ok(Assignment { pairs })
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn domain(&self) -> Vec<usize> {
        self.pairs.iter().map(|p| p.0).collect()
    }

    pub fn outputs(&self) -> Vec<usize> {
        self.pairs.iter().map(|p| p.1).collect()
    }

    pub fn get(&self, input: usize) -> Option<usize> {
        self.pairs
            .binary_search_by_key(&input, |p| p.0)
            .ok()
            .map(|k| self.pairs[k].1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Validity {
    Unique(Assignment),
    NotUnique,
    /// No assignment satisfies the constraints. Cannot happen for an exact
    /// release but can for noisy inputs or a tolerance that is too tight.
    NoValidAssignment,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkResult {
    pub subset: Vec<usize>,
    pub assignment: Assignment,
    /// The search stopped at the time budget; `subset` is then empty.
    pub budget_exhausted: bool,
    /// Every subset with more known inputs than this was checked and is not
    /// uniquely valid. Meaningful progress when the budget ran out.
    pub ruled_out_above: usize,
}

/// Search state over known inputs `xa` (columns) and the release `y`.
pub struct Linker<'a> {
    xa: &'a DMatrix<f64>,
    y: &'a DMatrix<f64>,
    opts: LinkingOptions,
    x_norms: Vec<f64>,
    y_norms: Vec<f64>,
    /// Released indices sorted by norm, for range lookups.
    y_by_norm: Vec<usize>,
    /// Magnitudes below this are compared in absolute terms.
    floor: f64,
}

impl<'a> Linker<'a> {
    pub fn new(xa: &'a DMatrix<f64>, y: &'a DMatrix<f64>, opts: LinkingOptions) -> Result<Self> {
        if xa.nrows() != y.nrows() {
            return Err(Error::DimensionMismatch {
                expected: y.nrows(),
                actual: xa.nrows(),
            });
        }
        if opts.tol.is_nan() || opts.tol < 0.0 {
            return Err(Error::invalid("linking tolerance must be nonnegative"));
        }
        let x_norms: Vec<f64> = xa.column_iter().map(|c| c.norm()).collect();
        let y_norms: Vec<f64> = y.column_iter().map(|c| c.norm()).collect();
        let mut y_by_norm: Vec<usize> = (0..y.ncols()).collect();
        y_by_norm.sort_by(|&a, &b| y_norms[a].total_cmp(&y_norms[b]));
        let scale = x_norms
            .iter()
            .chain(y_norms.iter())
            .fold(0.0f64, |acc, &v| acc.max(v));
        Ok(Linker {
            xa,
            y,
            opts,
            x_norms,
            y_norms,
            y_by_norm,
            floor: 1e-6 * scale,
        })
    }

    pub fn known_inputs(&self) -> usize {
        self.xa.ncols()
    }

    fn close(&self, a: f64, b: f64) -> bool {
        (a - b).abs() <= self.opts.tol * a.max(b).max(self.floor)
    }

    fn x_dist(&self, i: usize, j: usize) -> f64 {
        (self.xa.column(i) - self.xa.column(j)).norm()
    }

    fn y_dist(&self, i: usize, j: usize) -> f64 {
        (self.y.column(i) - self.y.column(j)).norm()
    }

    fn extends(&self, partial: &[(usize, usize)], i_hat: usize, j: usize) -> bool {
        partial
            .iter()
            .all(|&(i1, j1)| self.close(self.x_dist(i1, i_hat), self.y_dist(j1, j)))
    }

    /// Released records that can extend `partial` (a valid assignment) at `i_hat`.
    fn candidates_for(&self, partial: &[(usize, usize)], i_hat: usize) -> Vec<usize> {
        let used = |j: usize| partial.iter().any(|p| p.1 == j);
        let mut out: Vec<usize> = if self.opts.lengths_preserved {
            let target = self.x_norms[i_hat];
            let slack = self.opts.tol * target.max(self.floor);
            let lo = self
                .y_by_norm
                .partition_point(|&j| self.y_norms[j] < target - slack * 2.0);
            self.y_by_norm[lo..]
                .iter()
                .copied()
                .take_while(|&j| self.y_norms[j] <= target + slack * 2.0)
                .filter(|&j| self.close(target, self.y_norms[j]))
                .filter(|&j| !used(j) && self.extends(partial, i_hat, j))
                .collect()
        } else {
            (0..self.y.ncols())
                .filter(|&j| !used(j) && self.extends(partial, i_hat, j))
                .collect()
        };
        out.sort_unstable();
        out
    }

    pub fn candidate_set(&self, alpha: &Assignment, i_hat: usize) -> Vec<usize> {
        self.candidates_for(alpha.pairs(), i_hat)
    }

    pub fn is_uniquely_valid(&self, subset: &[usize]) -> Validity {
        self.uniquely_valid_until(subset, None)
            .unwrap_or(Validity::NotUnique)
    }

    /// `None` when the deadline passes mid-search.
    fn uniquely_valid_until(
        &self,
        subset: &[usize],
        deadline: Option<Instant>,
    ) -> Option<Validity> {
        let mut order = subset.to_vec();
        order.sort_unstable();
        order.dedup();
        let mut search = Search {
            linker: self,
            order: &order,
            partial: Vec::with_capacity(order.len()),
            found: 0,
            first: None,
            deadline,
            timed_out: false,
        };
        search.descend();
        if search.timed_out {
            return None;
        }
        Some(match search.found {
            0 => Validity::NoValidAssignment,
            1 => Validity::Unique(Assignment {
                pairs: search.first.expect("one assignment was recorded"),
            }),
            _ => Validity::NotUnique,
        })
    }

    /// Pairs of known inputs that coincide; no subset holding both can be
    /// uniquely valid because swapping their images is always valid too.
    fn duplicate_pairs(&self) -> Vec<(usize, usize)> {
        let a = self.xa.ncols();
        (0..a)
            .tuple_combinations()
            .filter(|&(i, j)| {
                self.close(self.x_norms[i], self.x_norms[j]) && self.close(self.x_dist(i, j), 0.0)
            })
            .collect()
    }

    /// Level-wise descent from all known inputs down to singletons, subsets
    /// at each level in lexicographic order.
    pub fn find_maximal_uniquely_valid(&self) -> LinkResult {
        let deadline = self.opts.budget.map(|b| Instant::now() + b);
        let a = self.xa.ncols();
        let dups = self.duplicate_pairs();
        for level in (1..=a).rev() {
            for subset in (0..a).combinations(level) {
                if dups
                    .iter()
                    .any(|(i, j)| subset.contains(i) && subset.contains(j))
                {
                    continue;
                }
                match self.uniquely_valid_until(&subset, deadline) {
                    Some(Validity::Unique(assignment)) => {
                        return LinkResult {
                            subset,
                            assignment,
                            budget_exhausted: false,
                            ruled_out_above: level,
                        }
                    }
                    Some(_) => {}
                    None => {
                        return LinkResult {
                            subset: Vec::new(),
                            assignment: Assignment::empty(),
                            budget_exhausted: true,
                            ruled_out_above: level,
                        }
                    }
                }
            }
        }
        LinkResult {
            subset: Vec::new(),
            assignment: Assignment::empty(),
            budget_exhausted: false,
            ruled_out_above: 0,
        }
    }
}

/// Depth-first enumeration of valid assignments, extending the partial
/// assignment one known input at a time in ascending index order and
/// stopping once a second complete assignment turns up.
struct Search<'s, 'a> {
    linker: &'s Linker<'a>,
    order: &'s [usize],
    partial: Vec<(usize, usize)>,
    found: usize,
    first: Option<Vec<(usize, usize)>>,
    deadline: Option<Instant>,
    timed_out: bool,
}

impl Search<'_, '_> {
    fn descend(&mut self) {
        if self.found > 1 || self.timed_out {
            return;
        }
        if let Some(d) = self.deadline {
            if Instant::now() > d {
                self.timed_out = true;
                return;
            }
        }
        let depth = self.partial.len();
        if depth == self.order.len() {
            self.found += 1;
            if self.found == 1 {
                let mut pairs = self.partial.clone();
                pairs.sort_unstable();
                self.first = Some(pairs);
            }
            return;
        }
        let i_hat = self.order[depth];
        for j in self.linker.candidates_for(&self.partial, i_hat) {
            self.partial.push((i_hat, j));
            self.descend();
            self.partial.pop();
            if self.found > 1 || self.timed_out {
                return;
            }
        }
    }
}

/// Released records that could be the image of known input `i_hat`, given the
/// valid partial assignment `alpha`.
pub fn candidate_set(
    xa: &DMatrix<f64>,
    y: &DMatrix<f64>,
    alpha: &Assignment,
    i_hat: usize,
    opts: LinkingOptions,
) -> Result<Vec<usize>> {
    Ok(Linker::new(xa, y, opts)?.candidate_set(alpha, i_hat))
}

pub fn is_uniquely_valid(
    subset: &[usize],
    xa: &DMatrix<f64>,
    y: &DMatrix<f64>,
    opts: LinkingOptions,
) -> Result<Validity> {
    if let Some(&bad) = subset.iter().find(|&&i| i >= xa.ncols()) {
        return Err(Error::invalid(format!(
            "known-input index {bad} out of range"
        )));
    }
    Ok(Linker::new(xa, y, opts)?.is_uniquely_valid(subset))
}

pub fn find_maximal_uniquely_valid(
    xa: &DMatrix<f64>,
    y: &DMatrix<f64>,
    opts: LinkingOptions,
) -> Result<LinkResult> {
    if xa.ncols() == 0 {
        return Err(Error::invalid("at least one known input is required"));
    }
    Ok(Linker::new(xa, y, opts)?.find_maximal_uniquely_valid())
}
