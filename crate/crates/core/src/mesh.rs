//! One-dimensional partition, cubic Hermite curves, piecewise affine directors
//! and assembly of the constant bilinear forms.
//!
//! Curve degrees of freedom are `[p_x, p_y, p_z, d_x, d_y, d_z]` per curve node,
//! where `p` is the position and `d` the parameter derivative. On a periodic
//! mesh the last node is folded onto node 0. Director degrees of freedom are
//! the three components per mesh node; the director always lives on all
//! `N + 1` nodes because its end values are clamped independently.

use std::sync::Arc;

use crate::band::{DofMap, SymBand};
use crate::error::{Result, RodError};
use crate::rod::RodState;
use crate::scalar::Real;
use crate::vec3::Vec3;

pub const CURVE_DOFS_PER_NODE: usize = 6;
pub const DIRECTOR_DOFS_PER_NODE: usize = 3;

/// Partition `0 = z_0 < ... < z_N = L` of the parameter interval.
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh1D<T> {
    nodes: Vec<T>,
    periodic: bool,
    h_max: T,
    h_min: T,
}

impl<T: Real> Mesh1D<T> {
    pub fn from_nodes(nodes: Vec<T>, periodic: bool) -> Result<Self> {
        if nodes.len() < 4 {
            return Err(RodError::InvalidMesh(format!(
                "need at least 3 elements, got {}",
                nodes.len().saturating_sub(1)
            )));
        }
        if nodes[0] != T::zero() {
            return Err(RodError::InvalidMesh("first node must be 0".into()));
        }
        let mut h_max = T::zero();
        let mut h_min = T::infinity();
        for w in nodes.windows(2) {
            let h = w[1] - w[0];
            if !(h > T::zero()) || !h.is_finite() {
                return Err(RodError::InvalidMesh("nodes must be strictly increasing".into()));
            }
            h_max = h_max.max(h);
            h_min = h_min.min(h);
        }
        Ok(Mesh1D {
            nodes,
            periodic,
            h_max,
            h_min,
        })
    }

    /// Uniform partition of `[0, L]` into `n` elements.
    pub fn uniform(length: T, n: usize, periodic: bool) -> Result<Self> {
        if !(length > T::zero()) || !length.is_finite() {
            return Err(RodError::InvalidMesh(format!("length must be positive, got {length}")));
        }
        if n < 3 {
            return Err(RodError::InvalidMesh(format!("need N >= 3 elements, got {n}")));
        }
        let nf = T::from_usize_lossy(n);
        let mut nodes: Vec<T> = (0..=n).map(|i| length * T::from_usize_lossy(i) / nf).collect();
        nodes[n] = length;
        Self::from_nodes(nodes, periodic)
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn periodic(&self) -> bool {
        self.periodic
    }

    pub fn h_max(&self) -> T {
        self.h_max
    }

    pub fn h_min(&self) -> T {
        self.h_min
    }

    pub fn length(&self) -> T {
        self.nodes[self.nodes.len() - 1]
    }

    pub fn num_elements(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Number of distinct curve nodes (`N` when periodic, `N + 1` otherwise).
    pub fn num_curve_nodes(&self) -> usize {
        if self.periodic {
            self.num_elements()
        } else {
            self.nodes.len()
        }
    }

    pub fn num_director_nodes(&self) -> usize {
        self.nodes.len()
    }

    #[inline]
    pub fn h(&self, e: usize) -> T {
        self.nodes[e + 1] - self.nodes[e]
    }

    /// Curve node carrying the dofs of mesh node `i`.
    #[inline]
    pub fn curve_node(&self, i: usize) -> usize {
        if self.periodic && i == self.num_elements() {
            0
        } else {
            i
        }
    }

    /// Curve nodes at the two ends of element `e`.
    #[inline]
    pub fn element_curve_nodes(&self, e: usize) -> (usize, usize) {
        (e, self.curve_node(e + 1))
    }

    pub fn curve_dof_map(&self) -> DofMap {
        if self.periodic {
            DofMap::interleaved(self.num_curve_nodes(), CURVE_DOFS_PER_NODE)
        } else {
            DofMap::sequential(self.num_curve_nodes(), CURVE_DOFS_PER_NODE)
        }
    }

    pub fn director_dof_map(&self) -> DofMap {
        DofMap::sequential(self.num_director_nodes(), DIRECTOR_DOFS_PER_NODE)
    }

    /// Locates `x` as `(element, local coordinate in [0,1])`. Periodic meshes
    /// wrap `x` into `[0, L)`; open meshes reject points outside `[0, L]`.
    pub fn locate(&self, x: T) -> Result<(usize, T)> {
        let l = self.length();
        let x = if self.periodic {
            let r = x % l;
            if r < T::zero() {
                r + l
            } else {
                r
            }
        } else {
            let tol = T::epsilon() * l * T::lit(16.0);
            if x < -tol || x > l + tol || !x.is_finite() {
                return Err(RodError::Domain(format!("x = {x} outside [0, {l}]")));
            }
            x.max(T::zero()).min(l)
        };
        let ne = self.num_elements();
        // first node strictly greater than x
        let idx = self.nodes.partition_point(|&z| z <= x);
        let e = idx.saturating_sub(1).min(ne - 1);
        let xi = ((x - self.nodes[e]) / self.h(e)).max(T::zero()).min(T::one());
        Ok((e, xi))
    }

    /// Trapezoidal weights of the lumped pairing, one per mesh node.
    pub fn lumped_weights(&self) -> Vec<T> {
        let half = T::lit(0.5);
        let mut w = vec![T::zero(); self.nodes.len()];
        for e in 0..self.num_elements() {
            let h = self.h(e);
            w[e] = w[e] + half * h;
            w[e + 1] = w[e + 1] + half * h;
        }
        w
    }

    /// Periodic (or plain) parameter distance between two points.
    pub fn param_distance(&self, a: T, b: T) -> T {
        let d = (a - b).abs();
        if self.periodic {
            d.min(self.length() - d)
        } else {
            d
        }
    }

    /// `param_distance(a, b) < width`, with pairs lying on the strip boundary
    /// up to roundoff counted as outside. Gauss points of elements a fixed
    /// number of elements apart sit exactly on such boundaries, and deciding
    /// them by rounding would break shift invariance.
    pub fn in_strip(&self, a: T, b: T, width: T) -> bool {
        self.param_distance(a, b) < width - T::lit(1e-9) * self.h_min()
    }
}

/// Values and derivatives of the four Hermite shape functions on an element of
/// length `h`, for local dofs ordered `(p0, d0, p1, d1)`. Derivatives are with
/// respect to the physical parameter.
#[derive(Clone, Copy, Debug)]
pub struct HermiteShape<T> {
    pub val: [T; 4],
    pub d1: [T; 4],
    pub d2: [T; 4],
}

pub fn hermite_shape<T: Real>(xi: T, h: T) -> HermiteShape<T> {
    let one = T::one();
    let two = T::lit(2.0);
    let three = T::lit(3.0);
    let four = T::lit(4.0);
    let six = T::lit(6.0);
    let xi2 = xi * xi;
    let xi3 = xi2 * xi;
    let val = [
        one - three * xi2 + two * xi3,
        h * (xi - two * xi2 + xi3),
        three * xi2 - two * xi3,
        h * (xi3 - xi2),
    ];
    let d1 = [
        (six * xi2 - six * xi) / h,
        one - four * xi + three * xi2,
        (six * xi - six * xi2) / h,
        three * xi2 - two * xi,
    ];
    let h2 = h * h;
    let d2 = [
        (T::lit(12.0) * xi - six) / h2,
        (six * xi - four) / h,
        (six - T::lit(12.0) * xi) / h2,
        (six * xi - two) / h,
    ];
    HermiteShape { val, d1, d2 }
}

/// C¹ piecewise cubic curve given by nodal positions and parameter derivatives.
#[derive(Clone, Debug, PartialEq)]
pub struct HermiteCurve<T> {
    pub pos: Vec<Vec3<T>>,
    pub der: Vec<Vec3<T>>,
}

impl<T: Real> HermiteCurve<T> {
    pub fn new(pos: Vec<Vec3<T>>, der: Vec<Vec3<T>>) -> Self {
        assert_eq!(pos.len(), der.len());
        HermiteCurve { pos, der }
    }

    pub fn len(&self) -> usize {
        self.pos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pos.is_empty()
    }

    /// Local dofs `(p0, d0, p1, d1)` of element `e`.
    #[inline]
    pub fn element_dofs(&self, mesh: &Mesh1D<T>, e: usize) -> [Vec3<T>; 4] {
        let (a, b) = mesh.element_curve_nodes(e);
        [self.pos[a], self.der[a], self.pos[b], self.der[b]]
    }

    /// `(y, y', y'')` at local coordinate `xi` of element `e`.
    pub fn eval_element(&self, mesh: &Mesh1D<T>, e: usize, xi: T) -> [Vec3<T>; 3] {
        let q = self.element_dofs(mesh, e);
        let s = hermite_shape(xi, mesh.h(e));
        let mut out = [Vec3::zero(); 3];
        for i in 0..4 {
            out[0] += q[i] * s.val[i];
            out[1] += q[i] * s.d1[i];
            out[2] += q[i] * s.d2[i];
        }
        out
    }

    /// Flat dof vector in natural order `node * 6 + (0..3 position, 3..6 derivative)`.
    pub fn to_dofs(&self) -> Vec<T> {
        let mut v = Vec::with_capacity(self.len() * CURVE_DOFS_PER_NODE);
        for (p, d) in self.pos.iter().zip(&self.der) {
            v.extend_from_slice(&p.0);
            v.extend_from_slice(&d.0);
        }
        v
    }

    pub fn from_dofs(v: &[T]) -> Self {
        assert_eq!(v.len() % CURVE_DOFS_PER_NODE, 0);
        let n = v.len() / CURVE_DOFS_PER_NODE;
        let mut pos = Vec::with_capacity(n);
        let mut der = Vec::with_capacity(n);
        for c in v.chunks_exact(CURVE_DOFS_PER_NODE) {
            pos.push(Vec3::new(c[0], c[1], c[2]));
            der.push(Vec3::new(c[3], c[4], c[5]));
        }
        HermiteCurve { pos, der }
    }
}

/// Piecewise affine director field with one value per mesh node.
#[derive(Clone, Debug, PartialEq)]
pub struct DirectorField<T> {
    pub dir: Vec<Vec3<T>>,
}

impl<T: Real> DirectorField<T> {
    pub fn new(dir: Vec<Vec3<T>>) -> Self {
        DirectorField { dir }
    }

    pub fn len(&self) -> usize {
        self.dir.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dir.is_empty()
    }

    /// `(b, b')` at local coordinate `xi` of element `e`.
    #[inline]
    pub fn eval_element(&self, mesh: &Mesh1D<T>, e: usize, xi: T) -> [Vec3<T>; 2] {
        let (b0, b1) = (self.dir[e], self.dir[e + 1]);
        [b0 * (T::one() - xi) + b1 * xi, (b1 - b0) / mesh.h(e)]
    }

    pub fn to_dofs(&self) -> Vec<T> {
        self.dir.iter().flat_map(|b| b.0).collect()
    }

    pub fn from_dofs(v: &[T]) -> Self {
        assert_eq!(v.len() % DIRECTOR_DOFS_PER_NODE, 0);
        DirectorField {
            dir: v
                .chunks_exact(DIRECTOR_DOFS_PER_NODE)
                .map(|c| Vec3::new(c[0], c[1], c[2]))
                .collect(),
        }
    }
}

/// Pointwise values of a rod: curve with two derivatives, director with one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointValues<T> {
    pub y: Vec3<T>,
    pub dy: Vec3<T>,
    pub ddy: Vec3<T>,
    pub b: Vec3<T>,
    pub db: Vec3<T>,
}

/// Evaluates curve and director at parameter `x`. At interior nodes the
/// director derivative is the limit from the right (from the left at `x = L`).
pub fn eval_state<T: Real>(
    curve: &HermiteCurve<T>,
    director: &DirectorField<T>,
    mesh: &Mesh1D<T>,
    x: T,
) -> Result<PointValues<T>> {
    let (e, xi) = mesh.locate(x)?;
    let [y, dy, ddy] = curve.eval_element(mesh, e, xi);
    let [b, db] = director.eval_element(mesh, e, xi);
    Ok(PointValues { y, dy, ddy, b, db })
}

/// Element mean of the piecewise affine director.
pub fn qh_average<T: Real>(director: &DirectorField<T>, mesh: &Mesh1D<T>, e: usize) -> Result<Vec3<T>> {
    if e >= mesh.num_elements() {
        return Err(RodError::Domain(format!(
            "element {e} out of range 0..{}",
            mesh.num_elements()
        )));
    }
    Ok((director.dir[e] + director.dir[e + 1]) * T::lit(0.5))
}

/// Nodal interpolation of smooth data: Hermite interpolation of the curve and
/// affine interpolation of the director. `curve` returns `(y(x), y'(x))`.
pub fn interpolate_smooth<T, C, D>(curve: C, director: D, mesh: Arc<Mesh1D<T>>) -> RodState<T>
where
    T: Real,
    C: Fn(T) -> (Vec3<T>, Vec3<T>),
    D: Fn(T) -> Vec3<T>,
{
    let nodes = mesh.nodes();
    let (pos, der): (Vec<_>, Vec<_>) = (0..mesh.num_curve_nodes()).map(|i| curve(nodes[i])).unzip();
    let dir = nodes.iter().map(|&z| director(z)).collect();
    RodState::new(mesh, HermiteCurve { pos, der }, DirectorField { dir })
}

/// Weights of the combined metric `(v,w)_⋆ = a0 (v,w) + a1 (v',w') + a2 (v'',w'')`
/// on curve dofs and `(r,s)_† = c0 (r,s) + c1 (r',s')` on director dofs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricWeights<T> {
    pub star: [T; 3],
    pub dagger: [T; 2],
}

impl<T: Real> Default for MetricWeights<T> {
    fn default() -> Self {
        MetricWeights {
            star: [T::one(); 3],
            dagger: [T::one(); 2],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FormKind<T> {
    /// `∫ v'' · w''` on curve dofs.
    Bending,
    /// `∫ r' · s'` on director dofs.
    H1Stiffness,
    /// `∫ I_h[r · s]` on director dofs (trapezoidal lumping).
    LumpedPairing,
    /// Curve metric with the given weights.
    StarMetric(MetricWeights<T>),
    /// Director metric with the given weights.
    DaggerMetric(MetricWeights<T>),
    /// Any linear combination assembled by the flow.
    Combination,
}

/// Symmetric banded matrix acting on curve or director dof vectors in natural order.
#[derive(Clone, Debug, PartialEq)]
pub struct FormMatrix<T> {
    pub kind: FormKind<T>,
    map: DofMap,
    band: SymBand<T>,
}

impl<T: Real> FormMatrix<T> {
    pub fn from_parts(kind: FormKind<T>, map: DofMap, band: SymBand<T>) -> Self {
        assert_eq!(map.len(), band.dim());
        FormMatrix { kind, map, band }
    }

    pub fn dim(&self) -> usize {
        self.band.dim()
    }

    pub fn map(&self) -> &DofMap {
        &self.map
    }

    pub fn band(&self) -> &SymBand<T> {
        &self.band
    }

    pub fn band_mut(&mut self) -> &mut SymBand<T> {
        &mut self.band
    }

    /// Entry `(i, j)` in natural numbering.
    pub fn get(&self, i: usize, j: usize) -> T {
        self.band.get(self.map.position(i), self.map.position(j))
    }

    /// Adds to entry `(i, j)` and its mirror, natural numbering.
    pub fn add(&mut self, i: usize, j: usize, v: T) {
        self.band.add(self.map.position(i), self.map.position(j), v);
    }

    pub fn apply(&self, x: &[T]) -> Vec<T> {
        let y = self.band.matvec(&self.map.to_positions(x));
        self.map.to_natural(&y)
    }

    /// Quadratic form `xᵀ A x`.
    pub fn quad(&self, x: &[T]) -> T {
        self.apply(x).iter().zip(x).map(|(a, b)| *a * *b).sum()
    }

    pub fn inner(&self, x: &[T], y: &[T]) -> T {
        self.apply(x).iter().zip(y).map(|(a, b)| *a * *b).sum()
    }

    pub fn combine(&self, s: T, other: &FormMatrix<T>, t: T) -> FormMatrix<T> {
        assert_eq!(self.map, other.map);
        let mut band = self.band.scaled(s);
        band.axpy(t, &other.band);
        FormMatrix {
            kind: FormKind::Combination,
            map: self.map.clone(),
            band,
        }
    }
}

/// Exact element matrices of the scalar Hermite basis `(p0, d0, p1, d1)`.
pub(crate) fn hermite_element_matrices<T: Real>(h: T) -> [[[T; 4]; 4]; 3] {
    let l = T::lit;
    let h2 = h * h;
    let h3 = h2 * h;
    let m = h / l(420.0);
    let mass = [
        [l(156.0) * m, l(22.0) * h * m, l(54.0) * m, l(-13.0) * h * m],
        [l(22.0) * h * m, l(4.0) * h2 * m, l(13.0) * h * m, l(-3.0) * h2 * m],
        [l(54.0) * m, l(13.0) * h * m, l(156.0) * m, l(-22.0) * h * m],
        [l(-13.0) * h * m, l(-3.0) * h2 * m, l(-22.0) * h * m, l(4.0) * h2 * m],
    ];
    let s = T::one() / (l(30.0) * h);
    let stiff = [
        [l(36.0) * s, l(3.0) * h * s, l(-36.0) * s, l(3.0) * h * s],
        [l(3.0) * h * s, l(4.0) * h2 * s, l(-3.0) * h * s, -h2 * s],
        [l(-36.0) * s, l(-3.0) * h * s, l(36.0) * s, l(-3.0) * h * s],
        [l(3.0) * h * s, -h2 * s, l(-3.0) * h * s, l(4.0) * h2 * s],
    ];
    let b = T::one() / h3;
    let bend = [
        [l(12.0) * b, l(6.0) * h * b, l(-12.0) * b, l(6.0) * h * b],
        [l(6.0) * h * b, l(4.0) * h2 * b, l(-6.0) * h * b, l(2.0) * h2 * b],
        [l(-12.0) * b, l(-6.0) * h * b, l(12.0) * b, l(-6.0) * h * b],
        [l(6.0) * h * b, l(2.0) * h2 * b, l(-6.0) * h * b, l(4.0) * h2 * b],
    ];
    [mass, stiff, bend]
}

/// Natural dof index of local Hermite dof `i` (0..4), component `c`.
#[inline]
pub(crate) fn hermite_local_index(a: usize, b: usize, i: usize, c: usize) -> usize {
    let node = if i < 2 { a } else { b };
    node * CURVE_DOFS_PER_NODE + (i % 2) * 3 + c
}

fn assemble_hermite<T: Real>(mesh: &Mesh1D<T>, kind: FormKind<T>, weights: [T; 3]) -> FormMatrix<T> {
    let map = mesh.curve_dof_map();
    let band = SymBand::zeros(map.len(), map.half_bandwidth());
    let mut form = FormMatrix { kind, map, band };
    for e in 0..mesh.num_elements() {
        let mats = hermite_element_matrices(mesh.h(e));
        let (a, b) = mesh.element_curve_nodes(e);
        for i in 0..4 {
            for j in 0..=i {
                let v = weights[0] * mats[0][i][j] + weights[1] * mats[1][i][j] + weights[2] * mats[2][i][j];
                if v == T::zero() {
                    continue;
                }
                for c in 0..3 {
                    let gi = hermite_local_index(a, b, i, c);
                    let gj = hermite_local_index(a, b, j, c);
                    form.add(gi, gj, v);
                }
            }
        }
    }
    form
}

fn assemble_linear<T: Real>(mesh: &Mesh1D<T>, kind: FormKind<T>, mass_w: T, stiff_w: T, lumped_w: T) -> FormMatrix<T> {
    let map = mesh.director_dof_map();
    let band = SymBand::zeros(map.len(), map.half_bandwidth());
    let mut form = FormMatrix { kind, map, band };
    let sixth = T::one() / T::lit(6.0);
    let half = T::lit(0.5);
    for e in 0..mesh.num_elements() {
        let h = mesh.h(e);
        let diag = mass_w * h * sixth * T::lit(2.0) + stiff_w / h + lumped_w * half * h;
        let off = mass_w * h * sixth - stiff_w / h;
        for c in 0..3 {
            let i = e * 3 + c;
            let j = (e + 1) * 3 + c;
            form.add(i, i, diag);
            form.add(j, j, diag);
            if off != T::zero() {
                form.add(j, i, off);
            }
        }
    }
    form
}

/// Assembles one of the constant forms with exact element integrals.
pub fn assemble_form<T: Real>(mesh: &Mesh1D<T>, kind: FormKind<T>) -> FormMatrix<T> {
    let (z, o) = (T::zero(), T::one());
    match kind {
        FormKind::Bending => assemble_hermite(mesh, kind, [z, z, o]),
        FormKind::StarMetric(w) => assemble_hermite(mesh, kind, w.star),
        FormKind::H1Stiffness => assemble_linear(mesh, kind, z, o, z),
        FormKind::LumpedPairing => assemble_linear(mesh, kind, z, z, o),
        FormKind::DaggerMetric(w) => assemble_linear(mesh, kind, w.dagger[0], w.dagger[1], z),
        FormKind::Combination => {
            let map = mesh.curve_dof_map();
            let band = SymBand::zeros(map.len(), map.half_bandwidth());
            FormMatrix { kind, map, band }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::gauss_legendre;
    use approx::assert_relative_eq;

    #[test]
    fn uniform_mesh_examples() {
        let m = Mesh1D::<f64>::uniform(1.0, 4, false).unwrap();
        assert_eq!(m.nodes(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        let m = Mesh1D::<f64>::uniform(2.0 * std::f64::consts::PI, 100, true).unwrap();
        assert!((m.h_max() - 0.0628).abs() < 5e-5);
        let m = Mesh1D::<f64>::uniform(2.0 * std::f64::consts::PI, 400, true).unwrap();
        assert!((m.h_max() - 0.0157).abs() < 5e-5);
        assert_eq!(m.num_curve_nodes(), 400);
        assert_eq!(m.num_director_nodes(), 401);
    }

    #[test]
    fn mesh_rejects_bad_input() {
        assert!(Mesh1D::<f64>::uniform(0.0, 10, false).is_err());
        assert!(Mesh1D::<f64>::uniform(-1.0, 10, false).is_err());
        assert!(Mesh1D::<f64>::uniform(1.0, 2, false).is_err());
        assert!(Mesh1D::<f64>::from_nodes(vec![0.0, 0.5, 0.4, 1.0, 2.0], false).is_err());
    }

    #[test]
    fn locate_wraps_only_when_periodic() {
        let open = Mesh1D::<f64>::uniform(1.0, 4, false).unwrap();
        assert!(open.locate(1.5).is_err());
        assert_eq!(open.locate(1.0).unwrap(), (3, 1.0));
        let per = Mesh1D::<f64>::uniform(1.0, 4, true).unwrap();
        let (e, xi) = per.locate(1.3).unwrap();
        assert_eq!(e, 1);
        assert_relative_eq!(xi, 0.2, epsilon = 1e-12);
    }

    #[test]
    fn hermite_nodal_conditions() {
        let h = 0.37f64;
        let s0 = hermite_shape(0.0, h);
        let s1 = hermite_shape(1.0, h);
        assert_relative_eq!(s0.val[0], 1.0);
        assert_relative_eq!(s0.d1[1], 1.0);
        assert_relative_eq!(s1.val[2], 1.0);
        assert_relative_eq!(s1.d1[3], 1.0);
        for i in [1, 2, 3] {
            assert!(s0.val[i].abs() < 1e-15);
        }
        for i in [0, 2, 3] {
            assert!(s0.d1[i].abs() < 1e-15);
        }
    }

    #[test]
    fn straight_line_and_linear_director() {
        let mesh = Mesh1D::<f64>::from_nodes(vec![0.0, 1.0, 2.0, 3.0], false).unwrap();
        let ex = Vec3::new(1.0, 0.0, 0.0);
        let curve = HermiteCurve::new((0..4).map(|i| ex * i as f64).collect(), vec![ex; 4]);
        let dir = DirectorField::new(vec![
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
            Vec3::new(0.0, 0.0, 1.0),
            Vec3::new(0.0, 0.0, 1.0),
        ]);
        let pv = eval_state(&curve, &dir, &mesh, 0.5).unwrap();
        assert_relative_eq!(pv.y.x(), 0.5, epsilon = 1e-15);
        assert!(pv.ddy.norm() < 1e-14);
        assert_relative_eq!(pv.b.y(), 0.5, epsilon = 1e-15);
        assert_relative_eq!(pv.b.z(), 0.5, epsilon = 1e-15);
        assert_eq!(pv.db, Vec3::new(0.0, -1.0, 1.0));
        // at a node the director derivative is taken from the right
        let at_node = eval_state(&curve, &dir, &mesh, 1.0).unwrap();
        assert_eq!(at_node.db, Vec3::zero());
        let at_end = eval_state(&curve, &dir, &mesh, 3.0).unwrap();
        assert_eq!(at_end.db, Vec3::zero());
    }

    #[test]
    fn qh_examples() {
        let mesh = Mesh1D::<f64>::uniform(1.0, 3, false).unwrap();
        let d = DirectorField::new(vec![
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
        ]);
        assert_eq!(qh_average(&d, &mesh, 0).unwrap(), Vec3::new(1.0, 0.0, 0.0));
        assert_eq!(qh_average(&d, &mesh, 1).unwrap(), Vec3::new(0.5, 0.5, 0.0));
        assert!(qh_average(&d, &mesh, 3).is_err());
    }

    #[test]
    fn element_matrices_match_gauss_quadrature() {
        let h = 0.7;
        let mats = hermite_element_matrices(h);
        let (pts, wts) = gauss_legendre::<f64>(5);
        for i in 0..4 {
            for j in 0..4 {
                let mut acc = [0.0; 3];
                for (x, w) in pts.iter().zip(&wts) {
                    let s = hermite_shape(*x, h);
                    acc[0] += w * h * s.val[i] * s.val[j];
                    acc[1] += w * h * s.d1[i] * s.d1[j];
                    acc[2] += w * h * s.d2[i] * s.d2[j];
                }
                for k in 0..3 {
                    assert_relative_eq!(mats[k][i][j], acc[k], epsilon = 1e-12, max_relative = 1e-12);
                }
            }
        }
    }

    #[test]
    fn h1_stiffness_single_element() {
        let mesh = Mesh1D::<f64>::from_nodes(vec![0.0, 0.5, 1.0, 1.5], false).unwrap();
        let k = assemble_form(&mesh, FormKind::H1Stiffness);
        assert_relative_eq!(k.get(0, 0), 2.0);
        assert_relative_eq!(k.get(3, 0), -2.0);
        assert_relative_eq!(k.get(3, 3), 4.0);
        assert_eq!(k.get(1, 0), 0.0);
    }

    #[test]
    fn lumped_pairing_is_trapezoidal() {
        let mesh = Mesh1D::<f64>::uniform(2.0, 4, false).unwrap();
        let m = assemble_form(&mesh, FormKind::LumpedPairing);
        let u: Vec<f64> = (0..15).map(|i| (i as f64 * 0.3).sin()).collect();
        let v: Vec<f64> = (0..15).map(|i| (i as f64 * 0.7).cos()).collect();
        let w = mesh.lumped_weights();
        let expect: f64 = (0..5)
            .map(|z| w[z] * (0..3).map(|c| u[3 * z + c] * v[3 * z + c]).sum::<f64>())
            .sum();
        assert_relative_eq!(m.inner(&u, &v), expect, epsilon = 1e-14);
        assert_eq!(w, vec![0.25, 0.5, 0.5, 0.5, 0.25]);
    }

    #[test]
    fn bending_kills_straight_lines() {
        {
            let mesh = Mesh1D::<f64>::uniform(3.0, 6, false).unwrap();
            let n = mesh.num_curve_nodes();
            let dir = Vec3::new(0.3, -0.2, 0.9);
            let curve = HermiteCurve::new((0..n).map(|i| dir * mesh.nodes()[i]).collect(), vec![dir; n]);
            let b = assemble_form(&mesh, FormKind::Bending);
            let r = b.apply(&curve.to_dofs());
            assert!(r.iter().all(|v| v.abs() < 1e-12));
            assert_relative_eq!(b.get(3, 10), b.get(10, 3));
        }
    }
}
