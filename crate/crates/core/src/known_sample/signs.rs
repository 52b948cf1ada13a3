use nalgebra::DMatrix;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::energy::{check_samples, cross, pairwise, PooledDistances, DEFAULT_PERMUTATIONS};
use crate::error::{Error, Result};
use crate::linalg::select_columns;

/// Diagonal of a sign matrix: every entry is exactly `+1` or `-1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<i8>", into = "Vec<i8>")]
pub struct SignMatrix {
    signs: Vec<i8>,
}

impl SignMatrix {
    pub fn new(signs: Vec<i8>) -> Result<Self> {
        if let Some(bad) = signs.iter().find(|&&s| s != 1 && s != -1) {
            return Err(Error::invalid(format!(
                "sign entries must be +1 or -1, got {bad}"
            )));
        }
        Ok(SignMatrix { signs })
    }

    pub fn identity(n: usize) -> Self {
        SignMatrix { signs: vec![1; n] }
    }

    /// The `index`-th sign vector in lexicographic order (`-1 < +1`):
    /// bit `n - 1 - i` of `index` set means entry `i` is `+1`.
    pub fn from_index(index: u64, n: usize) -> Self {
        let signs = (0..n)
            .map(|i| if index >> (n - 1 - i) & 1 == 1 { 1 } else { -1 })
            .collect();
        SignMatrix { signs }
    }

    pub fn index(&self) -> u64 {
        self.signs
            .iter()
            .fold(0u64, |acc, &s| (acc << 1) | u64::from(s == 1))
    }

    pub fn dim(&self) -> usize {
        self.signs.len()
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            self.dim(),
            self.signs.iter().map(|&s| f64::from(s)),
        ))
    }

    /// `-D`.
    pub fn negated(&self) -> Self {
        SignMatrix {
            signs: self.signs.iter().map(|s| -s).collect(),
        }
    }

    /// `m · D`, flipping the columns of `m` where the sign is negative.
    pub fn scale_columns(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = m.clone();
        for (j, &s) in self.signs.iter().enumerate() {
            if s == -1 {
                out.column_mut(j).neg_mut();
            }
        }
        out
    }
}

impl TryFrom<Vec<i8>> for SignMatrix {
    type Error = Error;
    fn try_from(v: Vec<i8>) -> Result<Self> {
        SignMatrix::new(v)
    }
}

impl From<SignMatrix> for Vec<i8> {
    fn from(s: SignMatrix) -> Vec<i8> {
        s.signs
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignSearchOptions {
    pub permutations: usize,
    /// Largest pooled sample used per test; larger inputs are subsampled once.
    pub pooled_cap: usize,
    /// Largest dimension searched exhaustively.
    pub max_dim: usize,
}

impl Default for SignSearchOptions {
    fn default() -> Self {
        SignSearchOptions {
            permutations: DEFAULT_PERMUTATIONS,
            pooled_cap: 2000,
            max_dim: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignEvaluation {
    pub signs: SignMatrix,
    pub statistic: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignSearchResult {
    pub best: SignMatrix,
    pub p_value: f64,
    pub statistic: f64,
    /// One entry per sign vector, in lexicographic order.
    pub table: Vec<SignEvaluation>,
}

/// Scores `Ŵ D Ẑᵀ S` against `Y` for every sign matrix `D`.
///
/// Every candidate uses the same permutation stream, so candidates are
/// compared on identical relabelings. The winner has the largest p-value;
/// ties go to the smaller statistic, then the lexicographically smaller
/// sign vector.
pub fn sign_search<R: Rng + ?Sized>(
    w: &DMatrix<f64>,
    z: &DMatrix<f64>,
    s: &DMatrix<f64>,
    y: &DMatrix<f64>,
    opts: &SignSearchOptions,
    rng: &mut R,
) -> Result<SignSearchResult> {
    let n = w.nrows();
    if w.shape() != (n, n) || z.shape() != (n, n) {
        return Err(Error::invalid(
            "eigenvector matrices must be square and of equal size",
        ));
    }
    check_samples(s, y)?;
    if s.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: s.nrows(),
        });
    }
    if n > opts.max_dim || n >= 63 {
        return Err(Error::SearchBudget {
            dim: n,
            cap: opts.max_dim,
        });
    }
    if opts.pooled_cap < 4 {
        return Err(Error::invalid("pooled_cap must be at least 4"));
    }

    let candidates: Vec<SignMatrix> = (0..1u64 << n)
        .map(|i| SignMatrix::from_index(i, n))
        .collect();
    score_signs(w, z, s, y, &candidates, opts, rng)
}

/// Scores the given sign matrices the way `sign_search` scores all of them.
/// `candidates` must be non-empty; the table keeps their order.
pub fn score_signs<R: Rng + ?Sized>(
    w: &DMatrix<f64>,
    z: &DMatrix<f64>,
    s: &DMatrix<f64>,
    y: &DMatrix<f64>,
    candidates: &[SignMatrix],
    opts: &SignSearchOptions,
    rng: &mut R,
) -> Result<SignSearchResult> {
    check_samples(s, y)?;
    let n = w.ncols();
    if s.nrows() != n || z.shape() != (n, n) || w.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: s.nrows(),
        });
    }
    if candidates.is_empty() || candidates.iter().any(|c| c.dim() != n) {
        return Err(Error::invalid(
            "sign candidates must be non-empty and match the dimension",
        ));
    }
    let (s, y) = subsample(s, y, opts.pooled_cap, rng);
    let stream_seed: u64 = rng.random();
    // Orthogonal maps preserve distances within S, so only the cross block depends on D.
    let within_s = pairwise(&s);
    let within_y = pairwise(&y);
    let zt_s = z.tr_mul(&s);

    let table: Vec<SignEvaluation> = candidates
        .par_iter()
        .map(|signs| {
            let mapped = signs.scale_columns(w) * &zt_s;
            let pooled = PooledDistances::from_blocks(
                s.ncols(),
                &within_s,
                y.ncols(),
                &within_y,
                &cross(&mapped, &y),
            );
            let mut perm_rng = ChaCha8Rng::seed_from_u64(stream_seed);
            let out = pooled.test(opts.permutations, &mut perm_rng);
            SignEvaluation {
                signs: signs.clone(),
                statistic: out.statistic,
                p_value: out.p_value,
            }
        })
        .collect();

    let best = table
        .iter()
        .reduce(|best, c| {
            let better = c.p_value > best.p_value
                || (c.p_value == best.p_value && c.statistic < best.statistic)
                || (c.p_value == best.p_value
                    && c.statistic == best.statistic
                    && c.signs < best.signs);
            if better {
                c
            } else {
                best
            }
        })
        .expect("candidates are non-empty")
        .clone();
    Ok(SignSearchResult {
        best: best.signs,
        p_value: best.p_value,
        statistic: best.statistic,
        table,
    })
}

/// Keeps at most `cap / 2` columns of `s` and fills the rest of `cap` from `y`.
fn subsample<R: Rng + ?Sized>(
    s: &DMatrix<f64>,
    y: &DMatrix<f64>,
    cap: usize,
    rng: &mut R,
) -> (DMatrix<f64>, DMatrix<f64>) {
    if s.ncols() + y.ncols() <= cap {
        return (s.clone(), y.clone());
    }
    let keep_s = s.ncols().min(cap / 2);
    let keep_y = y.ncols().min(cap - keep_s);
    let pick = |m: &DMatrix<f64>, k: usize, rng: &mut R| {
        if k == m.ncols() {
            return m.clone();
        }
        let mut idx = index::sample(rng, m.ncols(), k).into_vec();
        idx.sort_unstable();
        select_columns(m, &idx)
    };
    let s = pick(s, keep_s, rng);
    let y = pick(y, keep_y, rng);
    (s, y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_order_is_lexicographic() {
        let all: Vec<SignMatrix> = (0..8).map(|i| SignMatrix::from_index(i, 3)).collect();
        assert_eq!(all[0].signs(), &[-1, -1, -1]);
        assert_eq!(all[7].signs(), &[1, 1, 1]);
        assert!(all.windows(2).all(|w| w[0] < w[1]));
        for (i, s) in all.iter().enumerate() {
            assert_eq!(s.index(), i as u64);
        }
        assert_eq!(SignMatrix::identity(3).index(), 7);
    }

    #[test]
    fn entries_must_be_unit_signs() {
        assert!(SignMatrix::new(vec![1, 0, -1]).is_err());
        assert!(serde_json::from_str::<SignMatrix>("[1,2]").is_err());
        let s: SignMatrix = serde_json::from_str("[1,-1]").unwrap();
        assert_eq!(s.index(), 2);
    }

    #[test]
    fn scale_columns_is_right_multiplication() {
        let m = DMatrix::from_fn(3, 3, |i, j| (i * 3 + j) as f64 + 1.0);
        let d = SignMatrix::new(vec![1, -1, -1]).unwrap();
        assert_eq!(d.scale_columns(&m), &m * d.to_matrix());
    }

    #[test]
    fn negation_flips_every_entry() {
        let d = SignMatrix::new(vec![1, -1, 1]).unwrap();
        assert_eq!(d.negated().signs(), &[-1, 1, -1]);
        assert_eq!(
            d.to_matrix() + d.negated().to_matrix(),
            DMatrix::zeros(3, 3)
        );
    }

    #[test]
    fn scoring_a_subset_matches_the_full_table() {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s = DMatrix::from_fn(2, 30, |i, j| ((i + 1) * j) as f64 % 7.0 - (j % 3) as f64);
        let y = DMatrix::from_fn(2, 40, |i, j| ((i + 2) * j) as f64 % 5.0);
        let w = DMatrix::identity(2, 2);
        let opts = SignSearchOptions {
            permutations: 29,
            ..SignSearchOptions::default()
        };
        let full = sign_search(&w, &w, &s, &y, &opts, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let pick = [SignMatrix::from_index(3, 2), SignMatrix::from_index(0, 2)];
        let part = score_signs(
            &w,
            &w,
            &s,
            &y,
            &pick,
            &opts,
            &mut ChaCha8Rng::seed_from_u64(1),
        )
        .unwrap();
        assert_eq!(part.table[0], full.table[3]);
        assert_eq!(part.table[1], full.table[0]);
        assert!(score_signs(&w, &w, &s, &y, &[], &opts, &mut rng).is_err());
        assert!(score_signs(&w, &w, &s, &y, &[SignMatrix::identity(3)], &opts, &mut rng).is_err());
    }
}
