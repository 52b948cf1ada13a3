#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

pub fn gaussian_matrix<R: Rng + ?Sized>(
    n: usize,
    m: usize,
    shift: f64,
    rng: &mut R,
) -> DMatrix<f64> {
    DMatrix::from_fn(n, m, |_, _| shift + normal(rng))
}

pub fn gaussian_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(n, |_, _| normal(rng))
}

/// Haar orthogonal matrix via QR of a Gaussian matrix with the sign fix on R's diagonal.
pub fn haar<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let g = gaussian_matrix(n, n, 0.0, rng);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Uniform point on the sphere of radius `r` in `R^d`.
pub fn sphere_point<R: Rng + ?Sized>(d: usize, r: f64, rng: &mut R) -> DVector<f64> {
    let g = gaussian_vector(d, rng);
    let norm = g.norm();
    g * (r / norm)
}

/// `Σ = Q diag(λ) Qᵀ` with the given eigenvalues and a Haar `Q`.
pub fn spd_with_eigenvalues<R: Rng + ?Sized>(
    values: &[f64],
    rng: &mut R,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let q = haar(values.len(), rng);
    let d = DMatrix::from_diagonal(&DVector::from_column_slice(values));
    let sigma = &q * d * q.transpose();
    ((&sigma + sigma.transpose()) * 0.5, q)
}

/// Released matrix with `y[:, perm[i]] = M x_i + v`.
pub struct Release {
    pub y: DMatrix<f64>,
    pub m: DMatrix<f64>,
    pub v: DVector<f64>,
    pub perm: Vec<usize>,
}

pub fn release<R: Rng + ?Sized>(x: &DMatrix<f64>, translation: f64, rng: &mut R) -> Release {
    let n = x.nrows();
    let m = haar(n, rng);
    let v = gaussian_vector(n, rng) * translation;
    let mut perm: Vec<usize> = (0..x.ncols()).collect();
    perm.shuffle(rng);
    let mut y = DMatrix::zeros(n, x.ncols());
    for (i, &j) in perm.iter().enumerate() {
        let col = &m * x.column(i) + &v;
        y.set_column(j, &col);
    }
    Release { y, m, v, perm }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-12)
}

/// Every injective map from `subset` into the released columns that keeps
/// all pairwise distances (and lengths, when `lengths` is set).
pub fn brute_force_assignments(
    xa: &DMatrix<f64>,
    y: &DMatrix<f64>,
    subset: &[usize],
    lengths: bool,
    tol: f64,
) -> Vec<Vec<(usize, usize)>> {
    let mut out = Vec::new();
    let mut images = Vec::new();
    fn rec(
        xa: &DMatrix<f64>,
        y: &DMatrix<f64>,
        subset: &[usize],
        lengths: bool,
        tol: f64,
        images: &mut Vec<usize>,
        out: &mut Vec<Vec<(usize, usize)>>,
    ) {
        if images.len() == subset.len() {
            let ok = (0..subset.len()).all(|p| {
                let xi = xa.column(subset[p]);
                let yi = y.column(images[p]);
                (!lengths || close(xi.norm(), yi.norm(), tol))
                    && (0..p).all(|q| {
                        close(
                            (xi - xa.column(subset[q])).norm(),
                            (yi - y.column(images[q])).norm(),
                            tol,
                        )
                    })
            });
            if ok {
                let mut pairs: Vec<(usize, usize)> =
                    subset.iter().copied().zip(images.iter().copied()).collect();
                pairs.sort_unstable();
                out.push(pairs);
            }
            return;
        }
        for j in 0..y.ncols() {
            if !images.contains(&j) {
                images.push(j);
                rec(xa, y, subset, lengths, tol, images, out);
                images.pop();
            }
        }
    }
    rec(xa, y, subset, lengths, tol, &mut images, &mut out);
    out
}

/// Adaptive Simpson quadrature.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn step<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        m: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        step(f, a, fa, m, fm, lm, flm, left, tol / 2.0, depth - 1)
            + step(f, m, fm, b, fb, rm, frm, right, tol / 2.0, depth - 1)
    }
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    step(f, a, fa, b, fb, m, fm, whole, tol, 50)
}

/// `KL(N(μ0, Σ0) ‖ N(μ1, Σ1))`.
pub fn gaussian_kl(
    mu0: &DVector<f64>,
    s0: &DMatrix<f64>,
    mu1: &DVector<f64>,
    s1: &DMatrix<f64>,
) -> f64 {
    let n = mu0.len() as f64;
    let s1_inv = s1.clone().try_inverse().unwrap();
    let d = mu1 - mu0;
    0.5 * ((&s1_inv * s0).trace() + d.dot(&(&s1_inv * &d)) - n
        + (s1.determinant() / s0.determinant()).ln())
}

/// Data whose distribution is far from symmetric along every axis.
pub fn skewed_sample<R: Rng + ?Sized>(scales: &[f64], m: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(scales.len(), m, |i, _| {
        let e: f64 = rng.sample(rand_distr::Exp1);
        scales[i] * (e - 1.0)
    })
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.amax()
}

/// Two-Gaussian mixture: weight 0.2 on `N((10,10,10), [[1,1.5,0.5],[1.5,3,2.5],[0.5,2.5,75]])`,
/// 0.8 on `N((20,30,40), diag(0.1,2,40))`.
pub fn mixture_sample<R: Rng + ?Sized>(m: usize, rng: &mut R) -> DMatrix<f64> {
    let c1 = DMatrix::from_row_slice(3, 3, &[1.0, 1.5, 0.5, 1.5, 3.0, 2.5, 0.5, 2.5, 75.0]);
    let l1 = c1.cholesky().unwrap().l();
    let l2 = DMatrix::from_diagonal(&DVector::from_vec(vec![
        0.1f64.sqrt(),
        2f64.sqrt(),
        40f64.sqrt(),
    ]));
    let (m1, m2) = (
        DVector::from_vec(vec![10.0, 10.0, 10.0]),
        DVector::from_vec(vec![20.0, 30.0, 40.0]),
    );
    let mut out = DMatrix::zeros(3, m);
    for j in 0..m {
        let g = gaussian_vector(3, rng);
        let col = if rng.random::<f64>() < 0.2 {
            &l1 * g + &m1
        } else {
            &l2 * g + &m2
        };
        out.set_column(j, &col);
    }
    out
}
