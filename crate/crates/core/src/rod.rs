//! Rod state, boundary conditions, flow parameters and the discrete energy
//! with its split into bending, twisting and penalty parts.

use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Result, RodError};
use crate::mesh::{
    assemble_form, hermite_shape, DirectorField, FormKind, FormMatrix, HermiteCurve, Mesh1D, MetricWeights,
    CURVE_DOFS_PER_NODE, DIRECTOR_DOFS_PER_NODE,
};
use crate::quadrature::gauss3;
use crate::scalar::Real;
use crate::selfavoid::{self, TangentPointParams};
use crate::vec3::Vec3;

/// Discrete framed curve: Hermite centerline plus piecewise affine director.
#[derive(Clone, Debug, PartialEq)]
pub struct RodState<T> {
    pub mesh: Arc<Mesh1D<T>>,
    pub curve: HermiteCurve<T>,
    pub director: DirectorField<T>,
}

impl<T: Real> RodState<T> {
    pub fn new(mesh: Arc<Mesh1D<T>>, curve: HermiteCurve<T>, director: DirectorField<T>) -> Self {
        assert_eq!(curve.len(), mesh.num_curve_nodes(), "curve node count");
        assert_eq!(director.len(), mesh.num_director_nodes(), "director node count");
        RodState { mesh, curve, director }
    }

    /// Tangent dof paired with director node `z`.
    #[inline]
    pub fn tangent_at(&self, z: usize) -> Vec3<T> {
        self.curve.der[self.mesh.curve_node(z)]
    }

    /// `(max_z ||y'(z)|² − 1|, max_z ||b(z)|² − 1|)`.
    pub fn unit_violation(&self) -> (T, T) {
        let one = T::one();
        let vy = self
            .curve
            .der
            .iter()
            .fold(T::zero(), |m, d| m.max((d.norm_sq() - one).abs()));
        let vb = self
            .director
            .dir
            .iter()
            .fold(T::zero(), |m, b| m.max((b.norm_sq() - one).abs()));
        (vy, vb)
    }

    /// `max_z |y'(z) · b(z)|`.
    pub fn orthogonality_violation(&self) -> T {
        (0..self.director.len()).fold(T::zero(), |m, z| {
            m.max(self.tangent_at(z).dot(&self.director.dir[z]).abs())
        })
    }

    /// Largest nodal deviation from the admissible set.
    pub fn admissibility_defect(&self) -> T {
        let (a, b) = self.unit_violation();
        a.max(b).max(self.orthogonality_violation())
    }

    pub fn is_finite(&self) -> bool {
        self.curve.pos.iter().chain(&self.curve.der).all(Vec3::is_finite)
            && self.director.dir.iter().all(Vec3::is_finite)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BcKind {
    /// Closed curve; director clamped at both ends of the parameter interval.
    Periodic,
    /// Curve position and tangent clamped at both ends; director clamped.
    ClampedBoth,
    /// Free curve ends; director clamped.
    ClampedDirectorOnly,
}

/// Boundary data: the targets of the linear boundary functional.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryCondition<T> {
    pub kind: BcKind,
    /// `[(y(0), y'(0)), (y(L), y'(L))]`, used when `kind == ClampedBoth`.
    pub curve_ends: [(Vec3<T>, Vec3<T>); 2],
    /// `[b(0), b(L)]`.
    pub director_ends: [Vec3<T>; 2],
}

impl<T: Real> BoundaryCondition<T> {
    /// Clamps whatever `kind` constrains to the current values of `state`.
    pub fn from_state(kind: BcKind, state: &RodState<T>) -> Self {
        let c = &state.curve;
        let last = c.len() - 1;
        let d = &state.director.dir;
        BoundaryCondition {
            kind,
            curve_ends: [(c.pos[0], c.der[0]), (c.pos[last], c.der[last])],
            director_ends: [d[0], d[d.len() - 1]],
        }
    }

    pub fn clamps_curve(&self) -> bool {
        self.kind == BcKind::ClampedBoth
    }

    /// Checks unit length and orthogonality of the constrained end values.
    pub fn validate(&self, tol: T) -> Result<()> {
        let one = T::one();
        for b in &self.director_ends {
            if (b.norm() - one).abs() > tol {
                return Err(RodError::param("director_ends", "director target is not a unit vector"));
            }
        }
        if self.clamps_curve() {
            for (i, (_, t)) in self.curve_ends.iter().enumerate() {
                if (t.norm() - one).abs() > tol {
                    return Err(RodError::param("curve_ends", "tangent target is not a unit vector"));
                }
                if t.dot(&self.director_ends[i]).abs() > tol {
                    return Err(RodError::param(
                        "curve_ends",
                        "tangent and director targets are not orthogonal",
                    ));
                }
            }
        }
        Ok(())
    }

    /// Max-norm mismatch between `state` and the boundary targets.
    pub fn residual(&self, state: &RodState<T>) -> T {
        let other = Self::from_state(self.kind, state);
        let mut r = T::zero();
        for i in 0..2 {
            r = r.max((other.director_ends[i] - self.director_ends[i]).max_abs());
            if self.clamps_curve() {
                r = r.max((other.curve_ends[i].0 - self.curve_ends[i].0).max_abs());
                r = r.max((other.curve_ends[i].1 - self.curve_ends[i].1).max_abs());
            }
        }
        r
    }
}

/// Parameters of the energy and of the descent iteration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowConfig<T> {
    /// Ratio of bending to torsion rigidity.
    pub kappa: T,
    /// Penalty parameter for `y' · b = 0`.
    pub epsilon: T,
    /// Step size.
    pub tau: T,
    /// Weight of the tangent-point energy.
    pub rho: T,
    /// Tangent-point exponent.
    pub q: T,
    pub eps_stop: T,
    pub max_steps: usize,
    pub metric: MetricWeights<T>,
}

impl<T: Real> FlowConfig<T> {
    /// Defaults for a mesh with maximal element length `h_max`: `τ = h_max/8`,
    /// `ε_stop = 1e-7`, `2·10⁵` steps, `q = 4`, no self-avoidance.
    pub fn new(kappa: T, epsilon: T, h_max: T) -> Self {
        FlowConfig {
            kappa,
            epsilon,
            tau: h_max / T::lit(8.0),
            rho: T::zero(),
            q: T::lit(4.0),
            eps_stop: T::lit(1e-7),
            max_steps: 200_000,
            metric: MetricWeights::default(),
        }
    }

    pub fn theta(&self) -> T {
        theta(self.kappa).unwrap_or_else(|_| T::nan())
    }

    pub fn validate(&self) -> Result<()> {
        let z = T::zero();
        let pos = |name: &'static str, v: T| {
            if v > z && v.is_finite() {
                Ok(())
            } else {
                Err(RodError::param(name, format!("must be positive, got {v}")))
            }
        };
        pos("kappa", self.kappa)?;
        pos("epsilon", self.epsilon)?;
        pos("tau", self.tau)?;
        pos("eps_stop", self.eps_stop)?;
        if !(self.rho >= z) {
            return Err(RodError::param(
                "rho",
                format!("must be non-negative, got {}", self.rho),
            ));
        }
        if !(self.q > T::lit(2.0)) {
            return Err(RodError::param("q", format!("must exceed 2, got {}", self.q)));
        }
        for w in self.metric.star.iter().chain(&self.metric.dagger) {
            if !(*w >= z) {
                return Err(RodError::param("metric", "weights must be non-negative"));
            }
        }
        if !(self.metric.star[0] > z && self.metric.dagger[0] > z) {
            return Err(RodError::param("metric", "L² weights must be positive"));
        }
        Ok(())
    }
}

/// Splitting parameter `min{κ/2, 1}`.
pub fn theta<T: Real>(kappa: T) -> Result<T> {
    if !(kappa > T::zero()) || !kappa.is_finite() {
        return Err(RodError::param("kappa", format!("must be positive, got {kappa}")));
    }
    Ok((kappa / T::lit(2.0)).min(T::one()))
}

/// Energy split as reported in diagnostics.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EnergyBreakdown<T> {
    pub bending: T,
    pub twisting: T,
    pub penalty: T,
    /// Unweighted tangent-point energy; zero when `rho == 0` (not evaluated).
    pub tangent_point: T,
    pub total: T,
}

/// Individual terms of the energy, for first variations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnergyTerm {
    /// `(κ/2)‖y''‖²`
    Bending,
    /// `(θ/2)‖b'‖²`
    DirectorStiffness,
    /// `(θ/2)‖Q_h b · y''‖²`, entering the energy with a minus sign.
    Concave,
    /// `((1−θ)/2)‖b' · (y' × Q_h b)‖²`
    Nonlinear,
    /// `(1/2ε) ∫ I_h[(y' · b)²]`
    Penalty,
    /// Unweighted tangent-point energy.
    TangentPoint,
}

impl FromStr for EnergyTerm {
    type Err = RodError;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "bending" => EnergyTerm::Bending,
            "stiffness" => EnergyTerm::DirectorStiffness,
            "G_h" | "g" | "concave" => EnergyTerm::Concave,
            "N_h" | "n" | "nonlinear" => EnergyTerm::Nonlinear,
            "penalty" => EnergyTerm::Penalty,
            "TP" | "tp" => EnergyTerm::TangentPoint,
            other => return Err(RodError::UnknownTerm(other.to_string())),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Field {
    Curve,
    Director,
}

/// Energies of the concave term `G` and nonlinear term `N` together with
/// whichever gradients were requested. Gradients are natural-order dof vectors.
#[derive(Clone, Debug, Default)]
pub struct TwistTerms<T> {
    pub g: T,
    pub n: T,
    pub g_curve: Option<Vec<T>>,
    pub g_director: Option<Vec<T>>,
    pub n_curve: Option<Vec<T>>,
    pub n_director: Option<Vec<T>>,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct TwistRequest {
    pub g_curve: bool,
    pub g_director: bool,
    pub n_curve: bool,
    pub n_director: bool,
}

/// Evaluates `G = (θ/2)∫(Q_h b·y'')²` and `N = ((1−θ)/2)∫(b'·(y'×Q_h b))²`
/// element by element with the three-point Gauss rule.
pub fn twist_terms<T: Real>(
    mesh: &Mesh1D<T>,
    curve: &HermiteCurve<T>,
    director: &DirectorField<T>,
    theta: T,
    req: TwistRequest,
) -> TwistTerms<T> {
    let (gx, gw) = gauss3::<T>();
    let half = T::lit(0.5);
    let one_m = T::one() - theta;
    let with_n = one_m > T::zero();
    let nc = curve.len() * CURVE_DOFS_PER_NODE;
    let nd = director.len() * DIRECTOR_DOFS_PER_NODE;
    let mut out = TwistTerms {
        g: T::zero(),
        n: T::zero(),
        g_curve: req.g_curve.then(|| vec![T::zero(); nc]),
        g_director: req.g_director.then(|| vec![T::zero(); nd]),
        n_curve: (req.n_curve).then(|| vec![T::zero(); nc]),
        n_director: (req.n_director).then(|| vec![T::zero(); nd]),
    };
    for e in 0..mesh.num_elements() {
        let h = mesh.h(e);
        let q = curve.element_dofs(mesh, e);
        let (na, nb) = mesh.element_curve_nodes(e);
        let (b0, b1) = (director.dir[e], director.dir[e + 1]);
        let qb = (b0 + b1) * half;
        let db = (b1 - b0) / h;
        let qb_x_db = qb.cross(&db);
        for g in 0..3 {
            let s = hermite_shape(gx[g], h);
            let mut dy = Vec3::zero();
            let mut ddy = Vec3::zero();
            for i in 0..4 {
                dy += q[i] * s.d1[i];
                ddy += q[i] * s.d2[i];
            }
            let wh = gw[g] * h;
            let a = qb.dot(&ddy);
            out.g = out.g + half * theta * wh * a * a;
            if let Some(grad) = out.g_curve.as_mut() {
                for i in 0..4 {
                    let v = qb * (theta * wh * a * s.d2[i]);
                    add_hermite(grad, na, nb, i, v);
                }
            }
            if let Some(grad) = out.g_director.as_mut() {
                let v = ddy * (theta * wh * a * half);
                add_dir(grad, e, v);
                add_dir(grad, e + 1, v);
            }
            if with_n {
                // g = b'·(y'×Qb) = y'·(Qb×b')
                let gv = dy.dot(&qb_x_db);
                out.n = out.n + half * one_m * wh * gv * gv;
                let c = one_m * wh * gv;
                if let Some(grad) = out.n_curve.as_mut() {
                    for i in 0..4 {
                        add_hermite(grad, na, nb, i, qb_x_db * (c * s.d1[i]));
                    }
                }
                if let Some(grad) = out.n_director.as_mut() {
                    let yq = dy.cross(&qb) / h;
                    let by = db.cross(&dy) * half;
                    add_dir(grad, e, (by - yq) * c);
                    add_dir(grad, e + 1, (by + yq) * c);
                }
            }
        }
    }
    out
}

#[inline]
fn add_hermite<T: Real>(grad: &mut [T], a: usize, b: usize, i: usize, v: Vec3<T>) {
    let node = if i < 2 { a } else { b };
    let base = node * CURVE_DOFS_PER_NODE + (i % 2) * 3;
    for c in 0..3 {
        grad[base + c] = grad[base + c] + v[c];
    }
}

#[inline]
fn add_dir<T: Real>(grad: &mut [T], z: usize, v: Vec3<T>) {
    for c in 0..3 {
        grad[3 * z + c] = grad[3 * z + c] + v[c];
    }
}

/// `(1/2ε) Σ_z w_z (y'(z)·b(z))²`.
pub fn penalty_energy<T: Real>(state: &RodState<T>, epsilon: T) -> T {
    let w = state.mesh.lumped_weights();
    let s: T = (0..w.len())
        .map(|z| {
            let p = state.tangent_at(z).dot(&state.director.dir[z]);
            w[z] * p * p
        })
        .sum();
    s / (T::lit(2.0) * epsilon)
}

/// Gradient of the penalty with respect to curve or director dofs.
pub fn penalty_gradient<T: Real>(state: &RodState<T>, epsilon: T, field: Field) -> Vec<T> {
    let mesh = &state.mesh;
    let w = mesh.lumped_weights();
    let mut grad = match field {
        Field::Curve => vec![T::zero(); state.curve.len() * CURVE_DOFS_PER_NODE],
        Field::Director => vec![T::zero(); state.director.len() * DIRECTOR_DOFS_PER_NODE],
    };
    for z in 0..w.len() {
        let t = state.tangent_at(z);
        let b = state.director.dir[z];
        let c = w[z] * t.dot(&b) / epsilon;
        match field {
            Field::Curve => {
                let base = mesh.curve_node(z) * CURVE_DOFS_PER_NODE + 3;
                for k in 0..3 {
                    grad[base + k] = grad[base + k] + c * b[k];
                }
            }
            Field::Director => add_dir(&mut grad, z, t * c),
        }
    }
    grad
}

fn bending_direct<T: Real>(state: &RodState<T>) -> T {
    let (gx, gw) = gauss3::<T>();
    let mesh = &state.mesh;
    let mut s = T::zero();
    for e in 0..mesh.num_elements() {
        for g in 0..3 {
            let [_, _, ddy] = state.curve.eval_element(mesh, e, gx[g]);
            s = s + gw[g] * mesh.h(e) * ddy.norm_sq();
        }
    }
    s
}

fn director_stiffness_direct<T: Real>(state: &RodState<T>) -> T {
    let mesh = &state.mesh;
    (0..mesh.num_elements())
        .map(|e| (state.director.dir[e + 1] - state.director.dir[e]).norm_sq() / mesh.h(e))
        .sum()
}

pub(crate) fn tp_params<T: Real>(state: &RodState<T>, cfg: &FlowConfig<T>) -> TangentPointParams<T> {
    TangentPointParams::new(cfg.q, cfg.rho, state.mesh.h_max())
}

/// Term-wise energy; the tangent-point term is evaluated only when `rho > 0`.
pub fn energy_breakdown<T: Real>(state: &RodState<T>, cfg: &FlowConfig<T>) -> Result<EnergyBreakdown<T>> {
    let tp = if cfg.rho > T::zero() {
        selfavoid::tp_energy(&state.curve, &state.mesh, &tp_params(state, cfg))?
    } else {
        T::zero()
    };
    Ok(energy_breakdown_with_tp(state, cfg, tp))
}

pub(crate) fn energy_breakdown_with_tp<T: Real>(state: &RodState<T>, cfg: &FlowConfig<T>, tp: T) -> EnergyBreakdown<T> {
    let theta = cfg.theta();
    let half = T::lit(0.5);
    let bending = half * cfg.kappa * bending_direct(state);
    let tt = twist_terms(
        &state.mesh,
        &state.curve,
        &state.director,
        theta,
        TwistRequest::default(),
    );
    let twisting = half * theta * director_stiffness_direct(state) - tt.g + tt.n;
    let penalty = penalty_energy(state, cfg.epsilon);
    EnergyBreakdown {
        bending,
        twisting,
        penalty,
        tangent_point: tp,
        total: bending + twisting + penalty + cfg.rho * tp,
    }
}

/// Value of a single energy term.
pub fn term_energy<T: Real>(term: EnergyTerm, state: &RodState<T>, cfg: &FlowConfig<T>) -> Result<T> {
    let theta = cfg.theta();
    let half = T::lit(0.5);
    Ok(match term {
        EnergyTerm::Bending => half * cfg.kappa * bending_direct(state),
        EnergyTerm::DirectorStiffness => half * theta * director_stiffness_direct(state),
        EnergyTerm::Concave => {
            twist_terms(
                &state.mesh,
                &state.curve,
                &state.director,
                theta,
                TwistRequest::default(),
            )
            .g
        }
        EnergyTerm::Nonlinear => {
            twist_terms(
                &state.mesh,
                &state.curve,
                &state.director,
                theta,
                TwistRequest::default(),
            )
            .n
        }
        EnergyTerm::Penalty => penalty_energy(state, cfg.epsilon),
        EnergyTerm::TangentPoint => selfavoid::tp_energy(&state.curve, &state.mesh, &tp_params(state, cfg))?,
    })
}

/// Gradient of a single energy term with respect to one field.
pub fn term_gradient<T: Real>(
    term: EnergyTerm,
    state: &RodState<T>,
    cfg: &FlowConfig<T>,
    field: Field,
) -> Result<Vec<T>> {
    let theta = cfg.theta();
    let mesh = &state.mesh;
    let zeros = |f: Field| match f {
        Field::Curve => vec![T::zero(); state.curve.len() * CURVE_DOFS_PER_NODE],
        Field::Director => vec![T::zero(); state.director.len() * DIRECTOR_DOFS_PER_NODE],
    };
    Ok(match (term, field) {
        (EnergyTerm::Bending, Field::Curve) => {
            let b = assemble_form(mesh, FormKind::Bending);
            b.apply(&state.curve.to_dofs())
                .into_iter()
                .map(|v| v * cfg.kappa)
                .collect()
        }
        (EnergyTerm::DirectorStiffness, Field::Director) => {
            let k = assemble_form(mesh, FormKind::H1Stiffness);
            k.apply(&state.director.to_dofs())
                .into_iter()
                .map(|v| v * theta)
                .collect()
        }
        (EnergyTerm::Bending, Field::Director)
        | (EnergyTerm::DirectorStiffness, Field::Curve)
        | (EnergyTerm::TangentPoint, Field::Director) => zeros(field),
        (EnergyTerm::Concave | EnergyTerm::Nonlinear, _) => {
            let req = TwistRequest {
                g_curve: term == EnergyTerm::Concave && field == Field::Curve,
                g_director: term == EnergyTerm::Concave && field == Field::Director,
                n_curve: term == EnergyTerm::Nonlinear && field == Field::Curve,
                n_director: term == EnergyTerm::Nonlinear && field == Field::Director,
            };
            let tt = twist_terms(mesh, &state.curve, &state.director, theta, req);
            tt.g_curve
                .or(tt.g_director)
                .or(tt.n_curve)
                .or(tt.n_director)
                .unwrap_or_else(|| zeros(field))
        }
        (EnergyTerm::Penalty, f) => penalty_gradient(state, cfg.epsilon, f),
        (EnergyTerm::TangentPoint, Field::Curve) => {
            selfavoid::tp_energy_and_gradient(&state.curve, mesh, &tp_params(state, cfg))?.1
        }
    })
}

/// First variation of `term` at `state` in `direction` (a curve or director dof vector).
pub fn directional_derivative<T: Real>(
    term: EnergyTerm,
    state: &RodState<T>,
    cfg: &FlowConfig<T>,
    direction: &[T],
    field: Field,
) -> Result<T> {
    let g = term_gradient(term, state, cfg, field)?;
    if g.len() != direction.len() {
        return Err(RodError::param(
            "direction",
            format!("expected {} entries, got {}", g.len(), direction.len()),
        ));
    }
    Ok(g.iter().zip(direction).map(|(a, b)| *a * *b).sum())
}

/// Constant forms of a flow on a fixed mesh.
#[derive(Clone, Debug)]
pub struct StepOperators<T> {
    pub star: FormMatrix<T>,
    pub bending: FormMatrix<T>,
    pub dagger: FormMatrix<T>,
    pub stiffness: FormMatrix<T>,
    /// `M⋆ + τκB`
    curve_base: FormMatrix<T>,
    /// `M† + τθK`
    director_base: FormMatrix<T>,
    weights: Vec<T>,
}

impl<T: Real> StepOperators<T> {
    pub fn new(mesh: &Mesh1D<T>, cfg: &FlowConfig<T>) -> Self {
        let star = assemble_form(mesh, FormKind::StarMetric(cfg.metric));
        let bending = assemble_form(mesh, FormKind::Bending);
        let dagger = assemble_form(mesh, FormKind::DaggerMetric(cfg.metric));
        let stiffness = assemble_form(mesh, FormKind::H1Stiffness);
        let curve_base = star.combine(T::one(), &bending, cfg.tau * cfg.kappa);
        let director_base = dagger.combine(T::one(), &stiffness, cfg.tau * cfg.theta());
        StepOperators {
            star,
            bending,
            dagger,
            stiffness,
            curve_base,
            director_base,
            weights: mesh.lumped_weights(),
        }
    }

    /// System matrix and right-hand side for the curve velocity. `tp_gradient`
    /// is the gradient of the unweighted tangent-point energy at `prev`
    /// (ignored when `rho == 0`).
    pub fn assemble_curve_step(
        &self,
        prev: &RodState<T>,
        cfg: &FlowConfig<T>,
        tp_gradient: Option<&[T]>,
    ) -> (FormMatrix<T>, Vec<T>) {
        let mesh = &prev.mesh;
        let theta = cfg.theta();
        let mut a = self.curve_base.clone();
        let s = cfg.tau / cfg.epsilon;
        for (z, &w) in self.weights.iter().enumerate() {
            let b = prev.director.dir[z];
            let base = mesh.curve_node(z) * CURVE_DOFS_PER_NODE + 3;
            for i in 0..3 {
                for j in 0..=i {
                    a.add(base + i, base + j, s * w * b[i] * b[j]);
                }
            }
        }
        let y = prev.curve.to_dofs();
        let by = self.bending.apply(&y);
        let pen = penalty_gradient(prev, cfg.epsilon, Field::Curve);
        let tt = twist_terms(
            mesh,
            &prev.curve,
            &prev.director,
            theta,
            TwistRequest {
                g_curve: true,
                n_curve: theta < T::one(),
                ..Default::default()
            },
        );
        let g = tt.g_curve.expect("requested");
        let mut rhs: Vec<T> = (0..y.len()).map(|i| -cfg.kappa * by[i] - pen[i] + g[i]).collect();
        if let Some(n) = tt.n_curve {
            for (r, v) in rhs.iter_mut().zip(n) {
                *r = *r - v;
            }
        }
        if cfg.rho > T::zero() {
            if let Some(tp) = tp_gradient {
                for (r, v) in rhs.iter_mut().zip(tp) {
                    *r = *r - cfg.rho * *v;
                }
            }
        }
        (a, rhs)
    }

    /// System matrix and right-hand side for the director velocity given the
    /// updated curve. The concave term uses `curve_new` when `θ = 1` and the
    /// previous curve otherwise.
    pub fn assemble_director_step(
        &self,
        prev: &RodState<T>,
        curve_new: &HermiteCurve<T>,
        cfg: &FlowConfig<T>,
    ) -> (FormMatrix<T>, Vec<T>) {
        let mesh = &prev.mesh;
        let theta = cfg.theta();
        let mut a = self.director_base.clone();
        let s = cfg.tau / cfg.epsilon;
        let inv_eps = T::one() / cfg.epsilon;
        let b = prev.director.to_dofs();
        let kb = self.stiffness.apply(&b);
        let mut rhs: Vec<T> = kb.iter().map(|v| -theta * *v).collect();
        for (z, &w) in self.weights.iter().enumerate() {
            let t = curve_new.der[mesh.curve_node(z)];
            for i in 0..3 {
                for j in 0..=i {
                    a.add(3 * z + i, 3 * z + j, s * w * t[i] * t[j]);
                }
            }
            let c = w * inv_eps * t.dot(&prev.director.dir[z]);
            for i in 0..3 {
                rhs[3 * z + i] = rhs[3 * z + i] - c * t[i];
            }
        }
        let full = theta >= T::one();
        let g_curve = if full { curve_new } else { &prev.curve };
        let tg = twist_terms(
            mesh,
            g_curve,
            &prev.director,
            theta,
            TwistRequest {
                g_director: true,
                ..Default::default()
            },
        );
        for (r, v) in rhs.iter_mut().zip(tg.g_director.expect("requested")) {
            *r = *r + v;
        }
        if !full {
            let tn = twist_terms(
                mesh,
                &prev.curve,
                &prev.director,
                theta,
                TwistRequest {
                    n_director: true,
                    ..Default::default()
                },
            );
            for (r, v) in rhs.iter_mut().zip(tn.n_director.expect("requested")) {
                *r = *r - v;
            }
        }
        (a, rhs)
    }
}
