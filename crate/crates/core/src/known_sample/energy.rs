//! Energy-distance two-sample test with a label-permutation p-value.
//!
//! All statistics are V-statistics over ordered pairs (the zero diagonal is
//! included in the within-group means). The pooled distance matrix is built
//! once per test; each permutation only needs the within-group sum of the
//! smaller group, because with row sums `R` and grand total `T`
//!
//! ```text
//! C   = Σ_{i∈G} R_i − W_G        (cross sum)
//! W_H = T − W_G − 2C
//! ```

use nalgebra::DMatrix;
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_PERMUTATIONS: usize = 199;

/// Observed statistic and its permutation p-value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyOutcome {
    pub statistic: f64,
    pub p_value: f64,
}

/// Symmetric distance matrix over a pooled sample whose first `p` points
/// form the first group.
#[derive(Debug, Clone)]
pub struct PooledDistances {
    p: usize,
    total_points: usize,
    dist: Vec<f64>,
    row_sums: Vec<f64>,
    total: f64,
}

impl PooledDistances {
    /// Pools the columns of `a` and `b`.
    pub fn new(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<Self> {
        check_samples(a, b)?;
        let within_a = pairwise(a);
        let within_b = pairwise(b);
        Ok(Self::from_blocks(
            a.ncols(),
            &within_a,
            b.ncols(),
            &within_b,
            &cross(a, b),
        ))
    }

    /// Assembles the pooled matrix from precomputed blocks, each row-major:
    /// `within_a` is `p x p`, `within_b` is `r x r`, `cross_ab` is `p x r`.
    pub fn from_blocks(
        p: usize,
        within_a: &[f64],
        r: usize,
        within_b: &[f64],
        cross_ab: &[f64],
    ) -> Self {
        let n = p + r;
        let mut dist = vec![0.0; n * n];
        for i in 0..p {
            dist[i * n..i * n + p].copy_from_slice(&within_a[i * p..(i + 1) * p]);
            dist[i * n + p..(i + 1) * n].copy_from_slice(&cross_ab[i * r..(i + 1) * r]);
        }
        for k in 0..r {
            let row = (p + k) * n;
            for i in 0..p {
                dist[row + i] = cross_ab[i * r + k];
            }
            dist[row + p..row + n].copy_from_slice(&within_b[k * r..(k + 1) * r]);
        }
        let row_sums: Vec<f64> = dist.chunks_exact(n).map(|row| row.iter().sum()).collect();
        let total = row_sums.iter().sum();
        PooledDistances {
            p,
            total_points: n,
            dist,
            row_sums,
            total,
        }
    }

    fn within(&self, members: &[usize]) -> f64 {
        let n = self.total_points;
        let mut s = 0.0;
        for (k, &i) in members.iter().enumerate() {
            let row = &self.dist[i * n..(i + 1) * n];
            for &j in &members[k + 1..] {
                s += row[j];
            }
        }
        2.0 * s
    }

    /// Statistic for the split where `members` (of size `size_g`) is one group.
    fn statistic_for(&self, members: &[usize], size_g: usize) -> f64 {
        let size_h = self.total_points - size_g;
        let w_g = self.within(members);
        let c = members.iter().map(|&i| self.row_sums[i]).sum::<f64>() - w_g;
        let w_h = self.total - w_g - 2.0 * c;
        let (g, h) = (size_g as f64, size_h as f64);
        g * h / (g + h) * (2.0 * c / (g * h) - w_g / (g * g) - w_h / (h * h))
    }

    pub fn observed(&self) -> f64 {
        let first: Vec<usize> = (0..self.p).collect();
        self.statistic_for(&first, self.p)
    }

    /// Permutation p-value `(1 + #{E_perm ≥ E_obs}) / (B + 1)`.
    pub fn test<R: Rng + ?Sized>(&self, permutations: usize, rng: &mut R) -> EnergyOutcome {
        let observed = self.observed();
        let small = self.p.min(self.total_points - self.p);
        let slack = 1e-10 * observed.abs().max(f64::MIN_POSITIVE);
        let mut at_least = 0usize;
        for _ in 0..permutations {
            let members = index::sample(rng, self.total_points, small).into_vec();
            if self.statistic_for(&members, small) >= observed - slack {
                at_least += 1;
            }
        }
        EnergyOutcome {
            statistic: observed,
            p_value: (1 + at_least) as f64 / (permutations + 1) as f64,
        }
    }
}

/// `ℰ = pr/(p+r) · (2·mean‖a−b‖ − mean‖a−a′‖ − mean‖b−b′‖)`.
pub fn energy_statistic(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    Ok(PooledDistances::new(a, b)?.observed())
}

/// Energy two-sample test of the columns of `a` against the columns of `b`.
pub fn energy_two_sample_p<R: Rng + ?Sized>(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    permutations: usize,
    rng: &mut R,
) -> Result<EnergyOutcome> {
    Ok(PooledDistances::new(a, b)?.test(permutations, rng))
}

pub(crate) fn check_samples(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<()> {
    if a.nrows() != b.nrows() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            actual: b.nrows(),
        });
    }
    let got = a.ncols().min(b.ncols());
    if got < 2 {
        return Err(Error::InsufficientData { needed: 2, got });
    }
    Ok(())
}

/// Row-major `p x p` Euclidean distances between the columns of `a`.
pub(crate) fn pairwise(a: &DMatrix<f64>) -> Vec<f64> {
    let p = a.ncols();
    let mut out = vec![0.0; p * p];
    for i in 0..p {
        let ai = a.column(i);
        for j in i + 1..p {
            let d = distance(ai.as_slice(), a.column(j).as_slice());
            out[i * p + j] = d;
            out[j * p + i] = d;
        }
    }
    out
}

/// Row-major `p x r` distances from columns of `a` to columns of `b`.
pub(crate) fn cross(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    let (p, r) = (a.ncols(), b.ncols());
    let mut out = Vec::with_capacity(p * r);
    for i in 0..p {
        let ai = a.column(i);
        for k in 0..r {
            out.push(distance(ai.as_slice(), b.column(k).as_slice()));
        }
    }
    out
}

fn distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(n: usize, m: usize, shift: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(n, m, |_, _| {
            let z: f64 = StandardNormal.sample(rng);
            z + shift
        })
    }

    /// Direct V-statistic over all ordered pairs.
    fn naive(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        let mean = |x: &DMatrix<f64>, y: &DMatrix<f64>| {
            let mut s = 0.0;
            for i in 0..x.ncols() {
                for j in 0..y.ncols() {
                    s += (x.column(i) - y.column(j)).norm();
                }
            }
            s / (x.ncols() * y.ncols()) as f64
        };
        let (p, r) = (a.ncols() as f64, b.ncols() as f64);
        p * r / (p + r) * (2.0 * mean(a, b) - mean(a, a) - mean(b, b))
    }

    #[test]
    fn statistic_matches_direct_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = gaussian(3, 7, 0.0, &mut rng);
        let b = gaussian(3, 11, 0.5, &mut rng);
        let fast = energy_statistic(&a, &b).unwrap();
        assert!((fast - naive(&a, &b)).abs() < 1e-10 * naive(&a, &b).abs().max(1.0));
    }

    #[test]
    fn identical_samples_never_reject() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = gaussian(2, 20, 0.0, &mut rng);
        let out = energy_two_sample_p(&a, &a, 99, &mut rng).unwrap();
        assert!(out.statistic.abs() < 1e-10);
        assert!(out.p_value > 1.0 / 100.0);
        assert!(out.p_value >= 0.5);
    }

    #[test]
    fn far_apart_samples_get_the_minimum_p_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = gaussian(2, 50, 0.0, &mut rng);
        let b = gaussian(2, 50, 100.0, &mut rng);
        let out = energy_two_sample_p(&a, &b, 199, &mut rng).unwrap();
        assert_eq!(out.p_value, 1.0 / 200.0);
    }

    #[test]
    fn unequal_group_sizes_permute_the_smaller_side() {
        // Both branches of the subset draw agree with a direct recomputation.
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = gaussian(2, 9, 0.0, &mut rng);
        let b = gaussian(2, 4, 0.0, &mut rng);
        let pooled = PooledDistances::new(&a, &b).unwrap();
        let members = vec![1, 5, 8, 12];
        let mut g = DMatrix::zeros(2, 4);
        let mut h = DMatrix::zeros(2, 9);
        let all = DMatrix::from_fn(2, 13, |i, j| if j < 9 { a[(i, j)] } else { b[(i, j - 9)] });
        let mut hk = 0;
        for j in 0..13 {
            if let Some(k) = members.iter().position(|&x| x == j) {
                g.set_column(k, &all.column(j));
            } else {
                h.set_column(hk, &all.column(j));
                hk += 1;
            }
        }
        let direct = naive(&g, &h);
        assert!((pooled.statistic_for(&members, 4) - direct).abs() < 1e-10);
    }

    #[test]
    fn too_few_points_is_an_error() {
        let a = DMatrix::from_element(2, 1, 0.0);
        let b = DMatrix::from_element(2, 5, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            energy_two_sample_p(&a, &b, 9, &mut rng),
            Err(Error::InsufficientData { needed: 2, got: 1 })
        ));
    }
}
