use std::f64::consts::{FRAC_PI_2, PI};

use proptest::prelude::*;
use rodflow::quadrature::integrate;
use rodflow::specialfn::complete_e;
use rodflow::{clamped_cosine_length, complete_k, figure_eight_modulus, incomplete_e, jacobi_am_cn};

fn k_oracle(m: f64) -> f64 {
    integrate(
        |t: f64| 1.0 / (1.0 - m * t.sin().powi(2)).sqrt(),
        0.0,
        FRAC_PI_2,
        16,
        1e-13,
    )
}

fn e_oracle(phi: f64, m: f64) -> f64 {
    integrate(|t: f64| (1.0 - m * t.sin().powi(2)).sqrt(), 0.0, phi, 32, 1e-13)
}

#[test]
fn complete_integral_examples() {
    assert!((complete_k(0.0f64).unwrap() - FRAC_PI_2).abs() < 1e-15);
    let m: f64 = figure_eight_modulus();
    assert!((complete_k(m).unwrap() - 2.321).abs() < 1e-3);
    assert!((complete_k(-2.0f64).unwrap() - k_oracle(-2.0)).abs() < 1e-10);
    assert!(complete_k(1.0f64).is_err() && complete_k(1.5f64).is_err());
}

#[test]
fn incomplete_integral_examples() {
    assert!((incomplete_e(FRAC_PI_2, 0.0f64).unwrap() - FRAC_PI_2).abs() < 1e-15);
    for m in [-2.0f64, 0.0, 0.3, 0.9] {
        assert_eq!(incomplete_e(0.0, m).unwrap(), 0.0);
    }
    let l = 4.0 * 2f64.sqrt() * incomplete_e(FRAC_PI_2, -2.0f64).unwrap();
    assert!((l - 12.357).abs() < 1e-3, "{l}");
    assert!((clamped_cosine_length::<f64>().unwrap() - l).abs() < 1e-12);
    assert!(incomplete_e(FRAC_PI_2, 1.5f64).is_err());
}

#[test]
fn jacobi_examples() {
    for m in [0.0f64, 0.3, 0.82, 0.99] {
        let (am, cn) = jacobi_am_cn(0.0, m).unwrap();
        assert_eq!((am, cn), (0.0, 1.0));
        let k = complete_k(m).unwrap();
        assert!(jacobi_am_cn(k, m).unwrap().1.abs() < 1e-10);
        let (a0, _) = jacobi_am_cn(0.37, m).unwrap();
        let (a4, _) = jacobi_am_cn(0.37 + 4.0 * k, m).unwrap();
        assert!((a4 - a0 - 2.0 * PI).abs() < 1e-10);
    }
    for u in [0.0f64, 0.5, 2.0, 7.0] {
        assert!((jacobi_am_cn(u, 0.0).unwrap().1 - u.cos()).abs() < 1e-14);
    }
    assert!(jacobi_am_cn(0.5f64, -0.1).is_err() && jacobi_am_cn(0.5f64, 1.0).is_err());
}

#[test]
fn figure_eight_modulus_is_the_root() {
    let m: f64 = figure_eight_modulus();
    assert!(m > 0.8261 && m < 0.8262, "{m}");
    assert!((2.0 * complete_e(m).unwrap() - complete_k(m).unwrap()).abs() < 1e-10);
}

#[test]
fn grid_against_quadrature() {
    for i in 0..100 {
        let m = -2.0 + 2.95 * i as f64 / 99.0;
        assert!((complete_k(m).unwrap() - k_oracle(m)).abs() < 1e-9, "K({m})");
        let phi = 0.05 + 3.0 * (i as f64 / 99.0);
        if m * phi.sin().powi(2) < 1.0 {
            assert!(
                (incomplete_e(phi, m).unwrap() - e_oracle(phi, m)).abs() < 1e-9,
                "E({phi}, {m})"
            );
        }
    }
    // am inverts the incomplete integral of the first kind
    for i in 0..100 {
        let m = 0.95 * i as f64 / 99.0;
        let u = 4.0 * complete_k(m).unwrap() * (i as f64 + 0.5) / 100.0;
        let (am, cn) = jacobi_am_cn(u, m).unwrap();
        let f = integrate(|t: f64| 1.0 / (1.0 - m * t.sin().powi(2)).sqrt(), 0.0, am, 32, 1e-13);
        assert!((f - u).abs() < 1e-9, "am({u}, {m})");
        assert!((cn - am.cos()).abs() < 1e-12);
    }
}

proptest! {
    #[test]
    fn monotone_in_the_parameter(a in -3.0f64..0.99, b in -3.0f64..0.99) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assume!(hi - lo > 1e-9);
        prop_assert!(complete_k(lo).unwrap() < complete_k(hi).unwrap());
        prop_assert!(complete_e(lo).unwrap() > complete_e(hi).unwrap());
        if lo >= 0.0 {
            prop_assert!(complete_e(lo).unwrap() <= FRAC_PI_2 + 1e-15);
        }
    }
}
