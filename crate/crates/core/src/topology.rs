//! Total twist, twist-rate profile, writhe, linking number and the
//! Călugăreanu residual `Lk − Tw − Wr`.
//!
//! The twist density is that of the normalised frame: with `b̂ = b/|b|` and
//! `d̂ = (y' × b)/|y' × b|` it is `b̂'·d̂ = b'·d̂/|b|`, which stays exact for a
//! frame rotating at a constant rate even though the affine director is
//! shorter than one between nodes.

use std::f64::consts::PI;

use crate::error::{Result, RodError};
use crate::mesh::{DirectorField, HermiteCurve, Mesh1D};
use crate::quadrature::gauss3;
use crate::rod::{energy_breakdown_with_tp, FlowConfig, RodState};
use crate::scalar::Real;
use crate::vec3::Vec3;

#[inline]
fn twist_density<T: Real>(dy: Vec3<T>, b: Vec3<T>, db: Vec3<T>) -> T {
    let d = dy.cross(&b);
    let dn = d.norm();
    let bn = b.norm();
    if dn == T::zero() || bn == T::zero() {
        return T::zero();
    }
    db.dot(&d) / (dn * bn)
}

/// Element integrals `∫_e b̂'·d̂ dx` (three-point Gauss rule).
fn element_twist<T: Real>(state: &RodState<T>) -> Vec<T> {
    let (gx, gw) = gauss3::<T>();
    let mesh = &state.mesh;
    (0..mesh.num_elements())
        .map(|e| {
            let h = mesh.h(e);
            (0..3)
                .map(|g| {
                    let [_, dy, _] = state.curve.eval_element(mesh, e, gx[g]);
                    let [b, db] = state.director.eval_element(mesh, e, gx[g]);
                    gw[g] * h * twist_density(dy, b, db)
                })
                .sum()
        })
        .collect()
}

/// Number of director rotations about the centerline, `(1/2π)∫ b̂'·d̂`.
pub fn total_twist<T: Real>(state: &RodState<T>) -> T {
    element_twist(state).into_iter().sum::<T>() / T::lit(2.0 * PI)
}

/// Total twist restricted to the parameter window `[a, b]` (rounded outward to
/// whole elements is *not* done; partial elements use a rescaled Gauss rule).
pub fn twist_between<T: Real>(state: &RodState<T>, a: T, b: T) -> Result<T> {
    let mesh = &state.mesh;
    if !(a <= b) || a < T::zero() || b > mesh.length() {
        return Err(RodError::Domain(format!("window [{a}, {b}] invalid")));
    }
    let (gx, gw) = gauss3::<T>();
    let mut s = T::zero();
    for e in 0..mesh.num_elements() {
        let (z0, z1) = (mesh.nodes()[e], mesh.nodes()[e + 1]);
        let lo = z0.max(a);
        let hi = z1.min(b);
        if hi <= lo {
            continue;
        }
        let h = mesh.h(e);
        for g in 0..3 {
            let x = lo + gx[g] * (hi - lo);
            let xi = (x - z0) / h;
            let [_, dy, _] = state.curve.eval_element(mesh, e, xi);
            let [bb, db] = state.director.eval_element(mesh, e, xi);
            s = s + gw[g] * (hi - lo) * twist_density(dy, bb, db);
        }
    }
    Ok(s / T::lit(2.0 * PI))
}

/// Mean twist rate on every element.
pub fn twist_rate_profile<T: Real>(state: &RodState<T>) -> Vec<T> {
    let mesh = &state.mesh;
    element_twist(state)
        .into_iter()
        .enumerate()
        .map(|(e, t)| t / mesh.h(e))
        .collect()
}

/// `(2π²/L)·Tw²` divided by the twisting energy; `None` when the twisting
/// energy is not positive (rough states can make the discrete value negative).
pub fn uniformity_quotient<T: Real>(state: &RodState<T>, kappa: T) -> Option<T> {
    let cfg = FlowConfig::new(kappa, T::one(), state.mesh.h_max());
    let twisting = energy_breakdown_with_tp(state, &cfg, T::zero()).twisting;
    uniformity_from(state.mesh.length(), total_twist(state), twisting)
}

pub(crate) fn uniformity_from<T: Real>(length: T, tw: T, twisting: T) -> Option<T> {
    if !(twisting > T::epsilon() * T::lit(1e3)) || !twisting.is_finite() {
        return None;
    }
    Some(T::lit(2.0 * PI * PI) / length * tw * tw / twisting)
}

/// Writhe of a closed Hermite curve by the Gauss double integral with the
/// parameter strip `|x − x̃| < 2 h_max` removed.
pub fn writhe<T: Real>(curve: &HermiteCurve<T>, mesh: &Mesh1D<T>) -> Result<T> {
    if !mesh.periodic() {
        return Err(RodError::NotClosed);
    }
    let (gx, gw) = gauss3::<T>();
    let mut pts = Vec::with_capacity(mesh.num_elements() * 3);
    for e in 0..mesh.num_elements() {
        for g in 0..3 {
            let [y, dy, _] = curve.eval_element(mesh, e, gx[g]);
            pts.push((mesh.nodes()[e] + gx[g] * mesh.h(e), y, dy, gw[g] * mesh.h(e)));
        }
    }
    let cutoff = T::lit(2.0) * mesh.h_max();
    let sep_tol = T::lit(1e-6);
    let mut s = T::zero();
    for i in 0..pts.len() {
        let mut row = T::zero();
        for j in i + 1..pts.len() {
            if mesh.in_strip(pts[i].0, pts[j].0, cutoff) {
                continue;
            }
            let u = pts[i].1 - pts[j].1;
            let r = u.norm();
            if r < sep_tol {
                return Err(RodError::NotDisjoint(r.as_f64()));
            }
            row = row + Vec3::triple(&u, &pts[i].2, &pts[j].2) / (r * r * r) * pts[j].3;
        }
        s = s + row * pts[i].3;
    }
    // the integrand is symmetric in (x, x̃); only i < j was summed
    Ok(s * T::lit(2.0) / T::lit(4.0 * PI))
}

/// Linking number as a real number and its nearest integer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkingNumber<T> {
    pub raw: T,
    pub rounded: i64,
}

/// Closest distance between segments `[p, q]` and `[r, s]`.
fn segment_distance<T: Real>(p: Vec3<T>, q: Vec3<T>, r: Vec3<T>, s: Vec3<T>) -> T {
    let d1 = q - p;
    let d2 = s - r;
    let w = p - r;
    let a = d1.norm_sq();
    let e = d2.norm_sq();
    let f = d2.dot(&w);
    let (zero, one) = (T::zero(), T::one());
    let (sc, tc);
    if a <= T::epsilon() && e <= T::epsilon() {
        return w.norm();
    }
    if a <= T::epsilon() {
        sc = zero;
        tc = (f / e).max(zero).min(one);
    } else {
        let c = d1.dot(&w);
        if e <= T::epsilon() {
            tc = zero;
            sc = (-c / a).max(zero).min(one);
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let mut s0 = if denom > zero {
                ((b * f - c * e) / denom).max(zero).min(one)
            } else {
                zero
            };
            let mut t0 = (b * s0 + f) / e;
            if t0 < zero {
                t0 = zero;
                s0 = (-c / a).max(zero).min(one);
            } else if t0 > one {
                t0 = one;
                s0 = ((b - c) / a).max(zero).min(one);
            }
            sc = s0;
            tc = t0;
        }
    }
    (w + d1 * sc - d2 * tc).norm()
}

/// Signed solid angle subtended by a pair of segments; summing over all pairs
/// of two closed polygons and dividing by `4π` gives their Gauss linking integral.
fn segment_pair_angle<T: Real>(p1: Vec3<T>, p2: Vec3<T>, p3: Vec3<T>, p4: Vec3<T>) -> T {
    let r13 = p3 - p1;
    let r14 = p4 - p1;
    let r23 = p3 - p2;
    let r24 = p4 - p2;
    let n1 = r13.cross(&r14).normalized();
    let n2 = r14.cross(&r24).normalized();
    let n3 = r24.cross(&r23).normalized();
    let n4 = r23.cross(&r13).normalized();
    let clamp = |v: T| v.max(-T::one()).min(T::one());
    let omega =
        clamp(n1.dot(&n2)).asin() + clamp(n2.dot(&n3)).asin() + clamp(n3.dot(&n4)).asin() + clamp(n4.dot(&n1)).asin();
    let r12 = p2 - p1;
    let r34 = p4 - p3;
    let sign = r34.cross(&r12).dot(&r13);
    if sign > T::zero() {
        omega
    } else if sign < T::zero() {
        -omega
    } else {
        T::zero()
    }
}

/// Gauss linking integral of two closed polygons (vertex lists, last vertex
/// joined to the first), evaluated exactly segment pair by segment pair.
pub fn polyline_linking_number<T: Real>(a: &[Vec3<T>], b: &[Vec3<T>]) -> Result<T> {
    if a.len() < 3 || b.len() < 3 {
        return Err(RodError::param("polyline", "closed polygons need at least 3 vertices"));
    }
    let (na, nb) = (a.len(), b.len());
    let mut total = T::zero();
    let mut min_dist = T::infinity();
    for i in 0..na {
        let (p1, p2) = (a[i], a[(i + 1) % na]);
        let mut row = T::zero();
        for j in 0..nb {
            let (p3, p4) = (b[j], b[(j + 1) % nb]);
            let d = segment_distance(p1, p2, p3, p4);
            min_dist = min_dist.min(d);
            if d <= T::zero() {
                return Err(RodError::NotDisjoint(0.0));
            }
            row = row + segment_pair_angle(p1, p2, p3, p4);
        }
        total = total + row;
    }
    let scale = a.iter().chain(b).fold(T::zero(), |m, v| m.max(v.max_abs()));
    if min_dist <= T::lit(1e-12) * scale.max(T::one()) {
        return Err(RodError::NotDisjoint(min_dist.as_f64()));
    }
    Ok(total / T::lit(4.0 * PI))
}

/// Subdivisions per element used when flattening Hermite curves into polygons.
pub const POLYGON_SUBDIVISION: usize = 4;

/// Linking number of the centerline with its push-off `y + offset·b`.
pub fn linking_number<T: Real>(
    curve: &HermiteCurve<T>,
    director: &DirectorField<T>,
    mesh: &Mesh1D<T>,
    offset: T,
) -> Result<LinkingNumber<T>> {
    if !mesh.periodic() {
        return Err(RodError::NotClosed);
    }
    let n = director.len();
    let gap = (director.dir[0] - director.dir[n - 1]).norm();
    if gap > T::lit(1e-6) {
        return Err(RodError::Domain(format!(
            "frame does not close up (|b(0) − b(L)| = {gap})"
        )));
    }
    if !(offset > T::zero()) {
        return Err(RodError::param("offset", "must be positive"));
    }
    let per = POLYGON_SUBDIVISION;
    let mut base = Vec::with_capacity(mesh.num_elements() * per);
    let mut push = Vec::with_capacity(mesh.num_elements() * per);
    for e in 0..mesh.num_elements() {
        for k in 0..per {
            let xi = T::from_usize_lossy(k) / T::from_usize_lossy(per);
            let [y, _, _] = curve.eval_element(mesh, e, xi);
            let [b, _] = director.eval_element(mesh, e, xi);
            base.push(y);
            push.push(y + b * offset);
        }
    }
    let raw = polyline_linking_number(&base, &push)?;
    Ok(LinkingNumber {
        raw,
        rounded: raw.round().to_i64().unwrap_or(0),
    })
}

/// Default push-off distance, `0.05 · min element length`.
pub fn default_offset<T: Real>(mesh: &Mesh1D<T>) -> T {
    T::lit(0.05) * mesh.h_min()
}

/// `Lk − Tw − Wr` for a closed framed curve.
pub fn calugareanu_residual<T: Real>(state: &RodState<T>, offset: T) -> Result<T> {
    let lk = linking_number(&state.curve, &state.director, &state.mesh, offset)?;
    let wr = writhe(&state.curve, &state.mesh)?;
    Ok(lk.raw - total_twist(state) - wr)
}

/// One-shot topology summary of a state. Closed-curve quantities are `None`
/// for open rods or frames that do not close.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TopologyReport<T> {
    pub total_twist: T,
    pub writhe: Option<T>,
    pub linking_number: Option<LinkingNumber<T>>,
    pub calugareanu_residual: Option<T>,
    pub uniformity_quotient: Option<T>,
}

pub fn topology_report<T: Real>(state: &RodState<T>, kappa: T, offset: T) -> TopologyReport<T> {
    let tw = total_twist(state);
    let wr = writhe(&state.curve, &state.mesh).ok();
    let lk = linking_number(&state.curve, &state.director, &state.mesh, offset).ok();
    let residual = match (lk, wr) {
        (Some(l), Some(w)) => Some(l.raw - tw - w),
        _ => None,
    };
    TopologyReport {
        total_twist: tw,
        writhe: wr,
        linking_number: lk,
        calugareanu_residual: residual,
        uniformity_quotient: uniformity_quotient(state, kappa),
    }
}
