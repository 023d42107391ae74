//! Tangent-point energy and its first variation.
//!
//! The energy is `(1/(2^q q)) ∬ r(y(s̃), y(s))^{-q} ds ds̃` where `r` is the
//! radius of the circle tangent to the curve at `y(s̃)` through `y(s)`. Using
//! `1/(2r) = |u × t|/|u|²` with `u = y(s) − y(s̃)` the integrand becomes
//! `(1/q) (|u × t|/|u|²)^q`. Both integrals run over Gauss points of every
//! element pair; points closer than `cutoff` in parameter distance are skipped.

use crate::error::{Result, RodError};
use crate::mesh::{hermite_shape, HermiteCurve, Mesh1D, CURVE_DOFS_PER_NODE};
use crate::quadrature::gauss3;
use crate::scalar::Real;
use crate::vec3::Vec3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TangentPointParams<T> {
    pub q: T,
    pub rho: T,
    /// Half-width of the excluded diagonal strip, in parameter units.
    pub cutoff: T,
}

impl<T: Real> TangentPointParams<T> {
    /// Strip half-width `2 h_max`.
    pub fn new(q: T, rho: T, h_max: T) -> Self {
        TangentPointParams {
            q,
            rho,
            cutoff: T::lit(2.0) * h_max,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q > T::lit(2.0)) {
            return Err(RodError::param(
                "q",
                format!("tangent-point exponent must exceed 2, got {}", self.q),
            ));
        }
        if !(self.rho >= T::zero()) {
            return Err(RodError::param("rho", "must be non-negative"));
        }
        Ok(())
    }
}

/// Radius of the circle tangent to `t_p` at `p` passing through `x`.
/// Infinite when `x − p` is parallel to `t_p`.
pub fn tp_radius<T: Real>(p: Vec3<T>, t_p: Vec3<T>, x: Vec3<T>) -> Result<T> {
    let u = x - p;
    let u2 = u.norm_sq();
    if u2 == T::zero() {
        return Err(RodError::Domain("tangent-point radius needs x != p".into()));
    }
    let c = u.cross(&t_p.normalized()).norm();
    if c == T::zero() {
        return Ok(T::infinity());
    }
    Ok(u2 / (T::lit(2.0) * c))
}

struct QuadPoint<T> {
    element: usize,
    param: T,
    y: Vec3<T>,
    dy: Vec3<T>,
    weight: T,
    val: [T; 4],
    d1: [T; 4],
}

fn quad_points<T: Real>(curve: &HermiteCurve<T>, mesh: &Mesh1D<T>) -> Vec<QuadPoint<T>> {
    let (gx, gw) = gauss3::<T>();
    let mut pts = Vec::with_capacity(mesh.num_elements() * 3);
    for e in 0..mesh.num_elements() {
        let h = mesh.h(e);
        let q = curve.element_dofs(mesh, e);
        for g in 0..3 {
            let s = hermite_shape(gx[g], h);
            let mut y = Vec3::zero();
            let mut dy = Vec3::zero();
            for i in 0..4 {
                y += q[i] * s.val[i];
                dy += q[i] * s.d1[i];
            }
            pts.push(QuadPoint {
                element: e,
                param: mesh.nodes()[e] + gx[g] * h,
                y,
                dy,
                weight: gw[g] * h,
                val: s.val,
                d1: s.d1,
            });
        }
    }
    pts
}

/// `x^(k)` for a squared norm, with integer fast paths.
struct Power<T> {
    exp: T,
    int: Option<i32>,
}

impl<T: Real> Power<T> {
    fn new(exp: T) -> Self {
        let r = exp.round();
        let int = ((exp - r).abs() < T::lit(1e-12) && r.abs() < T::lit(64.0)).then(|| r.to_i32().unwrap_or(0));
        Power { exp, int }
    }

    #[inline]
    fn of(&self, x: T) -> T {
        match self.int {
            Some(k) => x.powi(k),
            None => x.powf(self.exp),
        }
    }
}

fn evaluate<T: Real>(
    curve: &HermiteCurve<T>,
    mesh: &Mesh1D<T>,
    params: &TangentPointParams<T>,
    want_grad: bool,
) -> Result<(T, Option<Vec<T>>)> {
    params.validate()?;
    let pts = quad_points(curve, mesh);
    let q = params.q;
    let half = T::lit(0.5);
    let pow_c = Power::new(q * half);
    let pow_u = Power::new(-q);
    let pow_a = Power::new((T::one() - q) * half);
    let inv_q = T::one() / q;
    // per point: |a|^(1-q) and |y'|
    let a_fac: Vec<T> = pts.iter().map(|p| pow_a.of(p.dy.norm_sq())).collect();
    let speed: Vec<T> = pts.iter().map(|p| p.dy.norm()).collect();
    let m = pts.len();
    let mut g_pos = vec![Vec3::zero(); if want_grad { m } else { 0 }];
    let mut g_der = vec![Vec3::zero(); if want_grad { m } else { 0 }];
    let mut energy = T::zero();
    for (ip, p) in pts.iter().enumerate() {
        let a = p.dy;
        let a2 = a.norm_sq();
        let mut row = T::zero();
        let mut gp_pos = Vec3::zero();
        let mut gp_der = Vec3::zero();
        for (ix, x) in pts.iter().enumerate() {
            if mesh.in_strip(p.param, x.param, params.cutoff) {
                continue;
            }
            let u = x.y - p.y;
            let u2 = u.norm_sq();
            if !(u2 > T::zero()) {
                return Err(RodError::NonFiniteContribution(p.element, x.element));
            }
            let c = u.cross(&a);
            let c2 = c.norm_sq();
            if c2 == T::zero() {
                continue;
            }
            let f = inv_q * pow_c.of(c2) * pow_u.of(u2) * a_fac[ip] * speed[ix] * x.weight * p.weight;
            if !f.is_finite() {
                return Err(RodError::NonFiniteContribution(p.element, x.element));
            }
            row = row + f;
            if want_grad {
                let du = a.cross(&c) * (q / c2) - u * (T::lit(2.0) * q / u2);
                let da = c.cross(&u) * (q / c2) + a * ((T::one() - q) / a2);
                let de = x.dy / (speed[ix] * speed[ix]);
                let du = du * f;
                g_pos[ix] += du;
                g_der[ix] += de * f;
                gp_pos -= du;
                gp_der += da * f;
            }
        }
        energy = energy + row;
        if want_grad {
            g_pos[ip] += gp_pos;
            g_der[ip] += gp_der;
        }
    }
    if !energy.is_finite() {
        return Err(RodError::NonFiniteContribution(0, 0));
    }
    if !want_grad {
        return Ok((energy, None));
    }
    let mut grad = vec![T::zero(); curve.len() * CURVE_DOFS_PER_NODE];
    for (k, p) in pts.iter().enumerate() {
        let (na, nb) = mesh.element_curve_nodes(p.element);
        for i in 0..4 {
            let v = g_pos[k] * p.val[i] + g_der[k] * p.d1[i];
            let node = if i < 2 { na } else { nb };
            let base = node * CURVE_DOFS_PER_NODE + (i % 2) * 3;
            for c in 0..3 {
                grad[base + c] = grad[base + c] + v[c];
            }
        }
    }
    Ok((energy, Some(grad)))
}

/// Unweighted tangent-point energy of the curve.
pub fn tp_energy<T: Real>(curve: &HermiteCurve<T>, mesh: &Mesh1D<T>, params: &TangentPointParams<T>) -> Result<T> {
    evaluate(curve, mesh, params, false).map(|(e, _)| e)
}

/// Gradient of [`tp_energy`] with respect to all curve dofs (natural order).
pub fn tp_gradient<T: Real>(
    curve: &HermiteCurve<T>,
    mesh: &Mesh1D<T>,
    params: &TangentPointParams<T>,
) -> Result<Vec<T>> {
    tp_energy_and_gradient(curve, mesh, params).map(|(_, g)| g)
}

pub fn tp_energy_and_gradient<T: Real>(
    curve: &HermiteCurve<T>,
    mesh: &Mesh1D<T>,
    params: &TangentPointParams<T>,
) -> Result<(T, Vec<T>)> {
    evaluate(curve, mesh, params, true).map(|(e, g)| (e, g.expect("gradient requested")))
}

fn strand_samples<T: Real>(curve: &HermiteCurve<T>, mesh: &Mesh1D<T>, per_element: usize) -> Vec<(T, Vec3<T>)> {
    let per = per_element.max(1);
    let mut samples = Vec::with_capacity(mesh.num_elements() * per + 1);
    for e in 0..mesh.num_elements() {
        for k in 0..per {
            let xi = T::from_usize_lossy(k) / T::from_usize_lossy(per);
            let [y, _, _] = curve.eval_element(mesh, e, xi);
            samples.push((mesh.nodes()[e] + xi * mesh.h(e), y));
        }
    }
    if !mesh.periodic() {
        let e = mesh.num_elements() - 1;
        let [y, _, _] = curve.eval_element(mesh, e, T::one());
        samples.push((mesh.length(), y));
    }
    samples
}

/// Smallest distance between curve points whose parameters are at least
/// `window` apart, sampled at `per_element` points per element.
pub fn min_strand_distance<T: Real>(curve: &HermiteCurve<T>, mesh: &Mesh1D<T>, window: T, per_element: usize) -> T {
    let samples = strand_samples(curve, mesh, per_element);
    let mut best = T::infinity();
    for i in 0..samples.len() {
        for j in i + 1..samples.len() {
            if !mesh.in_strip(samples[i].0, samples[j].0, window) {
                best = best.min((samples[i].1 - samples[j].1).norm_sq());
            }
        }
    }
    best.sqrt()
}

/// Like [`min_strand_distance`] but over the whole update from `before` to
/// `after`, with every sample point moving on the straight line between its
/// two positions (which is what one explicit step does to the dofs). Strands
/// passing through each other within one step are caught this way. Element
/// pairs whose bounding spheres are farther apart than the best distance so
/// far are skipped, so the cost is close to linear for well separated strands.
pub fn min_swept_distance<T: Real>(
    before: &HermiteCurve<T>,
    after: &HermiteCurve<T>,
    mesh: &Mesh1D<T>,
    window: T,
    per_element: usize,
) -> T {
    let a = strand_samples(before, mesh, per_element);
    let b = strand_samples(after, mesh, per_element);
    let per = per_element.max(1);
    let ne = mesh.num_elements();
    // sample index ranges and bounding spheres (both time levels) per element
    let range = |e: usize| {
        let hi = if e + 1 == ne { a.len() } else { (e + 1) * per };
        e * per..hi
    };
    let spheres: Vec<(Vec3<T>, T)> = (0..ne)
        .map(|e| {
            let r = range(e);
            let k = T::from_usize_lossy(2 * r.len());
            let mut c = Vec3::zero();
            for i in r.clone() {
                c += a[i].1 + b[i].1;
            }
            c = c / k;
            let rad = r
                .clone()
                .map(|i| (a[i].1 - c).norm().max((b[i].1 - c).norm()))
                .fold(T::zero(), T::max);
            (c, rad)
        })
        .collect();
    let mut best = T::infinity();
    for e in 0..ne {
        for f in e..ne {
            let (ce, re) = spheres[e];
            let (cf, rf) = spheres[f];
            if (ce - cf).norm() - re - rf >= best {
                continue;
            }
            for i in range(e) {
                for j in range(f) {
                    if j <= i || mesh.in_strip(a[i].0, a[j].0, window) {
                        continue;
                    }
                    let d0 = a[i].1 - a[j].1;
                    let dv = (b[i].1 - b[j].1) - d0;
                    let vv = dv.norm_sq();
                    let t = if vv > T::zero() {
                        (-d0.dot(&dv) / vv).max(T::zero()).min(T::one())
                    } else {
                        T::zero()
                    };
                    best = best.min((d0 + dv * t).norm());
                }
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn radius_examples() {
        let r = tp_radius(Vec3::zero(), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)).unwrap();
        assert_relative_eq!(r, 0.5);
        let r: f64 = tp_radius(Vec3::zero(), Vec3::new(1.0, 0.0, 0.0), Vec3::new(2.0, 0.0, 0.0)).unwrap();
        assert!(r.is_infinite());
        assert!(tp_radius(Vec3::<f64>::zero(), Vec3::unit(0), Vec3::zero()).is_err());
        // circle of radius 3
        let pt = |s: f64| Vec3::new(3.0 * s.cos(), 3.0 * s.sin(), 0.0);
        let tan = |s: f64| Vec3::new(-s.sin(), s.cos(), 0.0);
        for (a, b) in [(0.1, 2.0), (1.0, 4.5), (3.0, 0.2)] {
            assert_relative_eq!(tp_radius(pt(a), tan(a), pt(b)).unwrap(), 3.0, max_relative = 1e-12);
        }
        let _ = PI;
    }

    #[test]
    fn straight_segment_has_zero_energy() {
        let mesh = Mesh1D::<f64>::uniform(1.0, 10, false).unwrap();
        let t = Vec3::new(0.0, 0.6, 0.8);
        let curve = HermiteCurve::new(mesh.nodes().iter().map(|&s| t * s).collect(), vec![t; 11]);
        let p = TangentPointParams::new(4.0, 1.0, mesh.h_max());
        // |u × t| is pure roundoff here
        assert!(tp_energy(&curve, &mesh, &p).unwrap() < 1e-40);
        assert!(tp_gradient(&curve, &mesh, &p).unwrap().iter().all(|g| g.abs() < 1e-30));
    }

    #[test]
    fn coincident_points_are_reported() {
        let mesh = Mesh1D::<f64>::uniform(4.0, 8, false).unwrap();
        // fold the curve back so that nodes 1 and 7 coincide at a Gauss point grid would be hard;
        // instead collapse all positions onto one point
        let curve = HermiteCurve::new(vec![Vec3::zero(); 9], vec![Vec3::zero(); 9]);
        let p = TangentPointParams::new(4.0, 1.0, mesh.h_max());
        assert!(matches!(
            tp_energy(&curve, &mesh, &p),
            Err(RodError::NonFiniteContribution(_, _))
        ));
    }

    #[test]
    fn q_must_exceed_two() {
        let mesh = Mesh1D::<f64>::uniform(1.0, 4, true).unwrap();
        let curve = HermiteCurve::new(vec![Vec3::zero(); 4], vec![Vec3::unit(0); 4]);
        let p = TangentPointParams::new(2.0, 1.0, mesh.h_max());
        assert!(tp_energy(&curve, &mesh, &p).is_err());
    }
}
