mod common;

use common::{integrate, rng, sphere_point};
use rand::Rng;
use rigidleak_core::known_input::{
    breach_probability, gamma_ratio, sine_integral, BreachProbabilityInputs,
};
use statrs::function::gamma::ln_gamma;

#[test]
fn gamma_ratio_matches_log_gamma() {
    for m in 1..=50u32 {
        let x = f64::from(m);
        let oracle = (ln_gamma((x + 2.0) / 2.0) - ln_gamma((x + 1.0) / 2.0)).exp();
        let got = gamma_ratio(m).unwrap();
        assert!(
            (got - oracle).abs() <= 1e-12 * oracle,
            "m={m}: {got} vs {oracle}"
        );
    }
}

#[test]
fn sine_integral_matches_quadrature() {
    for m in 1..=12u32 {
        for k in 0..=10 {
            let z = f64::from(k) / 10.0;
            let f = |t: f64| t.sin().powi(m as i32 - 1);
            let oracle = integrate(&f, 0.0, z.acos(), 1e-13);
            let got = sine_integral(z, m).unwrap();
            assert!(
                (got - oracle).abs() <= 1e-8,
                "z={z} m={m}: {got} vs {oracle}"
            );
        }
    }
}

#[test]
fn gamma_ratio_recurrence() {
    // GR(m) GR(m-1) = Γ((m+2)/2) / Γ(m/2) = m / 2.
    for m in 2..=40u32 {
        let prod = gamma_ratio(m).unwrap() * gamma_ratio(m - 1).unwrap();
        assert!((prod - f64::from(m) / 2.0).abs() < 1e-11 * f64::from(m));
    }
}

/// Fraction of uniform points `p` on the sphere of radius `‖z‖` with `‖p − z‖ ≤ reach`.
fn monte_carlo(codim: usize, r: f64, reach: f64, draws: usize, rng: &mut impl Rng) -> f64 {
    let mut z = nalgebra::DVector::zeros(codim);
    z[0] = r;
    let hits = (0..draws)
        .filter(|_| (sphere_point(codim, r, rng) - &z).norm() <= reach)
        .count();
    hits as f64 / draws as f64
}

#[test]
fn breach_probability_matches_monte_carlo() {
    let mut rng = rng(21);
    for _ in 0..40 {
        let codim = rng.random_range(2..=6usize);
        let y_norm = rng.random_range(0.5..5.0);
        let r = y_norm * rng.random_range(0.05..1.0);
        let eps = rng.random_range(0.01..2.0);
        let rho = breach_probability(&BreachProbabilityInputs::new(y_norm, r, eps, codim).unwrap());
        let mc = monte_carlo(codim, r, y_norm * eps, 20_000, &mut rng);
        // Four binomial standard errors at the worst case p = 1/2.
        assert!((rho - mc).abs() <= 0.015, "codim={codim} rho={rho} mc={mc}");
    }
}

#[test]
fn codim_one_is_a_coin_flip_until_full_reach() {
    let at =
        |eps: f64| breach_probability(&BreachProbabilityInputs::new(2.0, 1.0, eps, 1).unwrap());
    assert_eq!(at(0.1), 0.5);
    assert_eq!(at(0.999), 0.5);
    assert_eq!(at(1.0), 1.0);
}

#[test]
fn zero_complement_is_certain() {
    for codim in 0..5 {
        let b = BreachProbabilityInputs::new(3.0, 0.0, 0.01, codim).unwrap();
        assert_eq!(breach_probability(&b), 1.0);
    }
}

#[test]
fn hemisphere_boundary_is_continuous() {
    // reach = r√2 puts the cap boundary on the equator.
    for codim in 2..=8 {
        let r = 1.0;
        let below =
            BreachProbabilityInputs::new(10.0, r, (2f64.sqrt() - 1e-9) / 10.0, codim).unwrap();
        let above =
            BreachProbabilityInputs::new(10.0, r, (2f64.sqrt() + 1e-9) / 10.0, codim).unwrap();
        let (lo, hi) = (breach_probability(&below), breach_probability(&above));
        assert!(
            (lo - 0.5).abs() < 1e-6 && (hi - 0.5).abs() < 1e-6,
            "codim={codim}: {lo} {hi}"
        );
    }
}
