//! Fixed Gauss–Legendre rules on `[0, 1]` and an adaptive Simpson integrator.

use crate::scalar::Real;

/// Gauss–Legendre nodes and weights on `[0, 1]` for `n` in `1..=5`.
pub fn gauss_legendre<T: Real>(n: usize) -> (Vec<T>, Vec<T>) {
    let (x, w): (&[f64], &[f64]) = match n {
        1 => (&[0.0], &[2.0]),
        2 => (&[-0.577_350_269_189_625_8, 0.577_350_269_189_625_8], &[1.0, 1.0]),
        3 => (
            &[-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4],
            &[5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0],
        ),
        4 => (
            &[
                -0.861_136_311_594_052_6,
                -0.339_981_043_584_856_3,
                0.339_981_043_584_856_3,
                0.861_136_311_594_052_6,
            ],
            &[
                0.347_854_845_137_453_9,
                0.652_145_154_862_546_1,
                0.652_145_154_862_546_1,
                0.347_854_845_137_453_9,
            ],
        ),
        5 => (
            &[
                -0.906_179_845_938_664,
                -0.538_469_310_105_683,
                0.0,
                0.538_469_310_105_683,
                0.906_179_845_938_664,
            ],
            &[
                0.236_926_885_056_189_1,
                0.478_628_670_499_366_5,
                0.568_888_888_888_888_9,
                0.478_628_670_499_366_5,
                0.236_926_885_056_189_1,
            ],
        ),
        _ => panic!("Gauss rule with {n} points not tabulated"),
    };
    let half = T::lit(0.5);
    (
        x.iter().map(|&v| half * (T::lit(v) + T::one())).collect(),
        w.iter().map(|&v| half * T::lit(v)).collect(),
    )
}

/// Three-point rule, exact for polynomials up to degree 5.
pub fn gauss3<T: Real>() -> ([T; 3], [T; 3]) {
    let (x, w) = gauss_legendre::<T>(3);
    ([x[0], x[1], x[2]], [w[0], w[1], w[2]])
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<T: Real>(f: &impl Fn(T) -> T, a: T, b: T, tol: T) -> T {
    #[allow(clippy::too_many_arguments)]
    fn rec<T: Real>(f: &impl Fn(T) -> T, a: T, b: T, fa: T, fm: T, fb: T, whole: T, tol: T, depth: u32) -> T {
        let two = T::lit(2.0);
        let m = (a + b) / two;
        let lm = (a + m) / two;
        let rm = (m + b) / two;
        let flm = f(lm);
        let frm = f(rm);
        let six = T::lit(6.0);
        let left = (m - a) / six * (fa + T::lit(4.0) * flm + fm);
        let right = (b - m) / six * (fm + T::lit(4.0) * frm + fb);
        let delta = left + right - whole;
        // stop once the correction is at roundoff level of the piece itself
        let floor = T::epsilon() * T::lit(8.0) * (left.abs() + right.abs());
        if depth == 0 || delta.abs() <= T::lit(15.0) * tol || delta.abs() <= floor {
            left + right + delta / T::lit(15.0)
        } else {
            rec(f, a, m, fa, flm, fm, left, tol / two, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, tol / two, depth - 1)
        }
    }
    let fa = f(a);
    let fb = f(b);
    let m = (a + b) / T::lit(2.0);
    let fm = f(m);
    let whole = (b - a) / T::lit(6.0) * (fa + T::lit(4.0) * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 24)
}

/// Adaptive Simpson over `pieces` equal subintervals (guards against
/// oscillatory integrands fooling the first refinement test).
pub fn integrate<T: Real>(f: impl Fn(T) -> T, a: T, b: T, pieces: usize, tol: T) -> T {
    let n = T::from_usize_lossy(pieces);
    (0..pieces)
        .map(|i| {
            let lo = a + (b - a) * T::from_usize_lossy(i) / n;
            let hi = a + (b - a) * T::from_usize_lossy(i + 1) / n;
            adaptive_simpson(&f, lo, hi, tol / n)
        })
        .sum()
}
