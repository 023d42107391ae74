//! Elliptic integrals and Jacobi elliptic functions in the parameter
//! convention `m = k²`.

use crate::error::{Result, RodError};
use crate::scalar::Real;

const MAX_ITER: usize = 64;

fn agm<T: Real>(mut a: T, mut b: T) -> T {
    for _ in 0..MAX_ITER {
        let an = (a + b) / T::lit(2.0);
        let bn = (a * b).sqrt();
        let done = (a - b).abs() <= T::epsilon() * a;
        a = an;
        b = bn;
        if done {
            break;
        }
    }
    a
}

/// Complete elliptic integral of the first kind, `K(m) = π / (2 AGM(1, √(1−m)))`.
pub fn complete_k<T: Real>(m: T) -> Result<T> {
    if !(m < T::one()) {
        return Err(RodError::Domain(format!("K(m) needs m < 1, got {m}")));
    }
    Ok(T::FRAC_PI_2() / agm(T::one(), (T::one() - m).sqrt()))
}

/// Carlson's symmetric integral `R_F(x, y, z)`.
fn carlson_rf<T: Real>(mut x: T, mut y: T, mut z: T) -> T {
    let third = T::one() / T::lit(3.0);
    for _ in 0..MAX_ITER {
        let lam = (x * y).sqrt() + (y * z).sqrt() + (z * x).sqrt();
        x = (x + lam) / T::lit(4.0);
        y = (y + lam) / T::lit(4.0);
        z = (z + lam) / T::lit(4.0);
        let mu = (x + y + z) * third;
        let dev = ((x - mu).abs()).max((y - mu).abs()).max((z - mu).abs()) / mu;
        if dev < T::epsilon().powf(T::lit(1.0 / 6.0)) * T::lit(0.1) {
            break;
        }
    }
    let mu = (x + y + z) * third;
    let (dx, dy, dz) = (T::one() - x / mu, T::one() - y / mu, T::one() - z / mu);
    let e2 = dx * dy - dz * dz;
    let e3 = dx * dy * dz;
    (T::one() - e2 / T::lit(10.0) + e3 / T::lit(14.0) + e2 * e2 / T::lit(24.0) - T::lit(3.0) * e2 * e3 / T::lit(44.0))
        / mu.sqrt()
}

/// Carlson's symmetric integral `R_D(x, y, z)`.
fn carlson_rd<T: Real>(mut x: T, mut y: T, mut z: T) -> T {
    let mut sum = T::zero();
    let mut fac = T::one();
    for _ in 0..MAX_ITER {
        let lam = (x * y).sqrt() + (y * z).sqrt() + (z * x).sqrt();
        sum = sum + fac / (z.sqrt() * (z + lam));
        fac = fac / T::lit(4.0);
        x = (x + lam) / T::lit(4.0);
        y = (y + lam) / T::lit(4.0);
        z = (z + lam) / T::lit(4.0);
        let mu = (x + y + T::lit(3.0) * z) / T::lit(5.0);
        let dev = ((x - mu).abs()).max((y - mu).abs()).max((z - mu).abs()) / mu;
        if dev < T::epsilon().powf(T::lit(1.0 / 6.0)) * T::lit(0.1) {
            break;
        }
    }
    let mu = (x + y + T::lit(3.0) * z) / T::lit(5.0);
    let (dx, dy, dz) = (T::one() - x / mu, T::one() - y / mu, T::one() - z / mu);
    let ea = dx * dy;
    let eb = dz * dz;
    let ec = ea - eb;
    let ed = ea - T::lit(6.0) * eb;
    let ef = ed + ec + ec;
    let s1 = ed * (-T::lit(3.0 / 14.0) + T::lit(9.0 / 88.0) * ed - T::lit(4.5 / 26.0) * dz * ef);
    let s2 = dz * (T::lit(1.0 / 6.0) * ef + dz * (-T::lit(9.0 / 22.0) * ec + dz * T::lit(3.0 / 26.0) * ea));
    T::lit(3.0) * sum + fac * (T::one() + s1 + s2) / (mu * mu.sqrt())
}

/// `E(φ, m)` for `|φ| ≤ π/2`.
fn e_reduced<T: Real>(phi: T, m: T) -> T {
    let (s, c) = phi.sin_cos();
    let y = T::one() - m * s * s;
    let c2 = c * c;
    s * carlson_rf(c2, y, T::one()) - m / T::lit(3.0) * s * s * s * carlson_rd(c2, y, T::one())
}

/// Incomplete elliptic integral of the second kind `E(φ, m) = ∫₀^φ √(1 − m sin²t) dt`.
/// Negative `m` is supported.
pub fn incomplete_e<T: Real>(phi: T, m: T) -> Result<T> {
    if !phi.is_finite() || !m.is_finite() {
        return Err(RodError::Domain("non-finite argument".into()));
    }
    let pi = T::PI();
    let k = (phi / pi).round();
    let r = phi - k * pi;
    let sr = r.sin();
    if m * sr * sr >= T::one() || (k != T::zero() && m >= T::one()) {
        return Err(RodError::Domain(format!(
            "E(φ, m) needs m sin²φ < 1 (φ = {phi}, m = {m})"
        )));
    }
    let mut val = e_reduced(r, m);
    if k != T::zero() {
        val = val + T::lit(2.0) * k * e_reduced(T::FRAC_PI_2(), m);
    }
    Ok(val)
}

/// Complete elliptic integral of the second kind.
pub fn complete_e<T: Real>(m: T) -> Result<T> {
    if !(m <= T::one()) {
        return Err(RodError::Domain(format!("E(m) needs m ≤ 1, got {m}")));
    }
    Ok(e_reduced(T::FRAC_PI_2(), m))
}

/// Jacobi amplitude, `sn`, `cn`, `dn` by the descending Landen transformation.
pub(crate) fn jacobi<T: Real>(u: T, m: T) -> Result<(T, T, T, T)> {
    if !(m >= T::zero() && m < T::one()) || !u.is_finite() {
        return Err(RodError::Domain(format!("Jacobi functions need 0 ≤ m < 1, got {m}")));
    }
    let mut a = [T::zero(); MAX_ITER + 1];
    let mut c = [T::zero(); MAX_ITER + 1];
    a[0] = T::one();
    let mut b = (T::one() - m).sqrt();
    c[0] = m.sqrt();
    let mut n = 0;
    while c[n].abs() > T::epsilon() && n < MAX_ITER {
        let an = (a[n] + b) / T::lit(2.0);
        c[n + 1] = (a[n] - b) / T::lit(2.0);
        b = (a[n] * b).sqrt();
        a[n + 1] = an;
        n += 1;
    }
    let mut phi = T::lit(2.0).powi(n as i32) * a[n] * u;
    for j in (1..=n).rev() {
        let arg = (c[j] / a[j] * phi.sin()).max(-T::one()).min(T::one());
        phi = (phi + arg.asin()) / T::lit(2.0);
    }
    let (sn, cn) = phi.sin_cos();
    let dn = (T::one() - m * sn * sn).sqrt();
    Ok((phi, sn, cn, dn))
}

/// Jacobi amplitude `am(u, m)` and elliptic cosine `cn(u, m)`.
pub fn jacobi_am_cn<T: Real>(u: T, m: T) -> Result<(T, T)> {
    let (am, _, cn, _) = jacobi(u, m)?;
    Ok((am, cn))
}

/// The parameter `m ∈ (0, 1)` with `2E(m) = K(m)`, for which the elastic
/// figure-eight closes up.
pub fn figure_eight_modulus<T: Real>() -> T {
    let f = |m: T| T::lit(2.0) * complete_e(m).unwrap() - complete_k(m).unwrap();
    let (mut lo, mut hi) = (T::lit(0.5), T::lit(0.99));
    for _ in 0..200 {
        let mid = (lo + hi) / T::lit(2.0);
        if f(mid) > T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= T::epsilon() {
            break;
        }
    }
    (lo + hi) / T::lit(2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn k_oracle(m: f64) -> f64 {
        integrate(
            |t: f64| 1.0 / (1.0 - m * t.sin().powi(2)).sqrt(),
            0.0,
            FRAC_PI_2,
            8,
            1e-14,
        )
    }

    fn e_oracle(phi: f64, m: f64) -> f64 {
        integrate(|t: f64| (1.0 - m * t.sin().powi(2)).sqrt(), 0.0, phi, 16, 1e-14)
    }

    #[test]
    fn complete_k_examples() {
        assert!((complete_k(0.0).unwrap() - FRAC_PI_2).abs() < 1e-15);
        assert!((complete_k(-2.0).unwrap() - k_oracle(-2.0)).abs() < 1e-10);
        assert!(complete_k(1.0).is_err());
        assert!(complete_k(1.5).is_err());
    }

    #[test]
    fn incomplete_e_examples() {
        assert!((incomplete_e(FRAC_PI_2, 0.0).unwrap() - FRAC_PI_2).abs() < 1e-15);
        for m in [-3.0, -0.5, 0.0, 0.4, 0.9] {
            assert_eq!(incomplete_e(0.0, m).unwrap(), 0.0);
        }
        let l = 4.0 * 2f64.sqrt() * incomplete_e(FRAC_PI_2, -2.0).unwrap();
        assert!((l - 12.357).abs() < 1e-3, "{l}");
        assert!(incomplete_e(FRAC_PI_2, 1.5).is_err());
    }

    #[test]
    fn grid_against_quadrature() {
        for i in 0..100 {
            let phi = -4.0 + 8.0 * i as f64 / 99.0;
            let m = -2.5 + 3.4 * ((i * 37) % 100) as f64 / 99.0;
            let e = incomplete_e(phi, m).unwrap();
            let o = e_oracle(phi, m);
            assert!((e - o).abs() < 1e-9 * (1.0 + o.abs()), "phi={phi} m={m}: {e} vs {o}");
            let k = complete_k(m).unwrap();
            assert!((k - k_oracle(m)).abs() < 1e-9 * k);
        }
    }

    #[test]
    fn jacobi_examples() {
        for m in [0.0f64, 0.3, 0.826, 0.99] {
            let (am, cn) = jacobi_am_cn(0.0, m).unwrap();
            assert_eq!(am, 0.0);
            assert_eq!(cn, 1.0);
            let k = complete_k(m).unwrap();
            assert!(jacobi_am_cn::<f64>(k, m).unwrap().1.abs() < 1e-12);
            let (a0, _) = jacobi_am_cn(0.7, m).unwrap();
            let (a4, _) = jacobi_am_cn(0.7 + 4.0 * k, m).unwrap();
            assert!((a4 - a0 - 2.0 * PI).abs() < 1e-10);
        }
        for i in 0..50 {
            let u = i as f64 * 0.3;
            assert!((jacobi_am_cn(u, 0.0).unwrap().1 - u.cos()).abs() < 1e-14);
        }
        assert!(jacobi_am_cn(1.0, 1.0).is_err());
        assert!(jacobi_am_cn(1.0, -0.1).is_err());
    }

    #[test]
    fn amplitude_inverts_first_kind_integral() {
        // F(am(u), m) = u, with F from quadrature
        let m = 0.826;
        let k = complete_k(m).unwrap();
        for i in 0..100 {
            let u = 4.0 * k * i as f64 / 99.0;
            let (am, _) = jacobi_am_cn(u, m).unwrap();
            let f = integrate(|t: f64| 1.0 / (1.0 - m * t.sin().powi(2)).sqrt(), 0.0, am, 32, 1e-14);
            assert!((f - u).abs() < 1e-9, "u = {u}: {f}");
        }
    }

    #[test]
    fn figure_eight_root() {
        let m: f64 = figure_eight_modulus();
        assert!(m > 0.8261 && m < 0.8262, "{m}");
        let k = complete_k(m).unwrap();
        assert!((2.0 * complete_e(m).unwrap() - k).abs() < 1e-10);
        assert!((k - 2.321).abs() < 1e-3);
    }

    #[test]
    fn monotone_in_m() {
        let mut pk = 0.0;
        let mut pe = f64::INFINITY;
        for i in 0..100 {
            let m = i as f64 / 100.0;
            let k = complete_k(m).unwrap();
            let e = complete_e(m).unwrap();
            assert!(k > pk && e < pe && e <= FRAC_PI_2 + 1e-15);
            pk = k;
            pe = e;
        }
    }

    #[test]
    fn single_precision_works() {
        let k: f32 = complete_k(0.5f32).unwrap();
        assert!((k as f64 - complete_k(0.5f64).unwrap()).abs() < 1e-5);
    }
}
