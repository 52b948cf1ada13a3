mod common;

use common::{gaussian_vector, rng, sphere_point};
use nalgebra::DVector;
use rand::Rng;
use rigidleak_core::metrics::{cos_breach, eps_breach, evaluate, med_breach, nad};
use rigidleak_core::Error;

fn equal_norm_pair(r: &mut impl Rng) -> (DVector<f64>, DVector<f64>) {
    let n = r.random_range(1..=20);
    let x = gaussian_vector(n, r) * r.random_range(0.1..100.0);
    let e = sphere_point(n, x.norm(), r);
    (x, e)
}

#[test]
fn cosine_gap_is_half_the_squared_relative_error() {
    let mut r = rng(1);
    for _ in 0..1000 {
        let (x, e) = equal_norm_pair(&mut r);
        let o = evaluate(&x, &e, 0.1).unwrap();
        assert!(
            (o.cos_gap - o.relative_euclid.powi(2) / 2.0).abs() <= 1e-12,
            "{o:?}"
        );
        assert!((0.0..=2.0 + 1e-12).contains(&o.cos_gap));
    }
}

#[test]
fn min_nad_never_exceeds_relative_error() {
    let mut r = rng(2);
    for _ in 0..1000 {
        let n = r.random_range(1..=20);
        let x = gaussian_vector(n, &mut r);
        let e = &x + gaussian_vector(n, &mut r) * r.random_range(0.0..3.0);
        let o = evaluate(&x, &e, 0.1).unwrap();
        assert!(o.min_nad <= o.relative_euclid * (1.0 + 1e-12), "{o:?}");
        if o.eps_breach {
            assert!(o.med_breach);
        }
    }
}

#[test]
fn euclidean_and_cosine_breaches_agree_at_matched_thresholds() {
    let mut r = rng(3);
    let mut compared = 0;
    for _ in 0..1000 {
        let (x, e) = equal_norm_pair(&mut r);
        let eps = r.random_range(0.0..2.0);
        let c = cos_breach(&x, &e, eps).unwrap();
        if (c.value - eps).abs() < 1e-9 {
            continue;
        }
        let d = eps_breach(&x, &e, (2.0 * eps).sqrt()).unwrap();
        assert_eq!(d.breached, c.breached, "eps {eps}: {d:?} {c:?}");
        compared += 1;
    }
    assert!(compared > 990);
}

#[test]
fn zero_entries_use_the_absolute_estimate() {
    assert_eq!(nad(0.0, -0.25), 0.25);
    let x = DVector::from_vec(vec![0.0, 4.0]);
    let e = DVector::from_vec(vec![0.05, 1.0]);
    let m = med_breach(&x, &e, 0.1).unwrap();
    assert_eq!(m.value, 0.05);
    assert!(m.breached);
}

#[test]
fn degenerate_inputs_are_errors() {
    let z = DVector::zeros(3);
    let x = DVector::from_vec(vec![1.0, 2.0, 3.0]);
    assert!(matches!(eps_breach(&z, &x, 0.1), Err(Error::ZeroNorm)));
    assert!(cos_breach(&x, &z, 0.1).is_err());
    assert!(matches!(
        evaluate(&x, &DVector::zeros(2), 0.1),
        Err(Error::DimensionMismatch { .. })
    ));
}
