//! Initial framed curves and the parameter sets of the reference experiments.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};

use crate::error::{Result, RodError};
use crate::mesh::{interpolate_smooth, Mesh1D};
use crate::rod::{BcKind, BoundaryCondition, FlowConfig, RodState};
use crate::scalar::Real;
use crate::specialfn::{complete_k, figure_eight_modulus, incomplete_e, jacobi};
use crate::vec3::Vec3;

/// Planar circle of length `length` with the director rotating at rate `beta`
/// (radians per unit length) about the tangent, starting from the inward normal.
pub fn make_circle_rod<T: Real>(length: T, n: usize, beta: T) -> Result<RodState<T>> {
    let mesh = Arc::new(Mesh1D::uniform(length, n, true)?);
    let r = length / T::lit(2.0 * PI);
    let ez = Vec3::unit(2);
    Ok(interpolate_smooth(
        |s: T| {
            let (sn, cs) = (s / r).sin_cos();
            (Vec3::new(r * cs, r * sn, T::zero()), Vec3::new(-sn, cs, T::zero()))
        },
        |s: T| {
            let (sn, cs) = (s / r).sin_cos();
            let inward = Vec3::new(-cs, -sn, T::zero());
            let (sb, cb) = (beta * s).sin_cos();
            inward * cb + ez * sb
        },
        mesh,
    ))
}

/// Cumulative rotation angle of a piecewise constant rate. `rates` lists
/// `(end, rate)` with increasing ends; the last end must be `length`.
fn piecewise_angle<T: Real>(rates: &[(T, T)], s: T) -> T {
    let mut angle = T::zero();
    let mut start = T::zero();
    for &(end, rate) in rates {
        if s <= end {
            return angle + rate * (s - start);
        }
        angle = angle + rate * (end - start);
        start = end;
    }
    angle
}

/// Straight rod along `e_x` with director `cos φ e_y + sin φ e_z`, where `φ`
/// integrates a piecewise constant twist rate.
pub fn make_straight_piecewise_twist<T: Real>(length: T, n: usize, rates: &[(T, T)]) -> Result<RodState<T>> {
    let tol = T::lit(1e-12) * length;
    let mut prev = T::zero();
    for &(end, _) in rates {
        if !(end > prev) {
            return Err(RodError::param("rates", "interval ends must increase"));
        }
        prev = end;
    }
    if rates.is_empty() || (prev - length).abs() > tol {
        return Err(RodError::param("rates", "intervals must cover [0, L]"));
    }
    let mesh = Arc::new(Mesh1D::uniform(length, n, false)?);
    let ex = Vec3::unit(0);
    Ok(interpolate_smooth(
        |s: T| (ex * s, ex),
        |s: T| {
            let (sp, cp) = piecewise_angle(rates, s).sin_cos();
            Vec3::new(T::zero(), cp, sp)
        },
        mesh,
    ))
}

/// Out-of-plane perturbation `z += a sin(ω s)` with `ω = 2π·frequency/L`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Perturbation<T> {
    pub amplitude: T,
    pub frequency: T,
}

/// Adds `amplitude·sin(frequency·2π s/L)` to the third coordinate of the nodal
/// positions (and the matching derivative), renormalises the nodal tangents
/// and re-orthonormalises the director against them.
pub fn perturb_out_of_plane<T: Real>(state: &RodState<T>, amplitude: T, frequency: T) -> RodState<T> {
    if amplitude == T::zero() {
        return state.clone();
    }
    let mesh = &state.mesh;
    let omega = frequency * T::lit(2.0 * PI) / mesh.length();
    let mut out = state.clone();
    for c in 0..out.curve.len() {
        let s = mesh.nodes()[c];
        let (sn, cs) = (omega * s).sin_cos();
        out.curve.pos[c][2] = out.curve.pos[c][2] + amplitude * sn;
        out.curve.der[c][2] = out.curve.der[c][2] + amplitude * omega * cs;
        out.curve.der[c] = out.curve.der[c].normalized();
    }
    for z in 0..out.director.len() {
        let t = out.tangent_at(z);
        let b = out.director.dir[z];
        out.director.dir[z] = (b - t * t.dot(&b)).normalized();
    }
    out
}

/// Arclength-parametrised elastic figure-eight `(2E(am(s)) − s, 2√m cn(s), 0)`
/// on `[0, 4K(m)]` with the twist-free director `e_z`.
pub fn figure_eight_rod<T: Real>(n: usize) -> Result<RodState<T>> {
    let m: T = figure_eight_modulus();
    let k = complete_k(m)?;
    let length = T::lit(4.0) * k;
    let mesh = Arc::new(Mesh1D::uniform(length, n, true)?);
    let sm = m.sqrt();
    let two = T::lit(2.0);
    let nodes = mesh.nodes().to_vec();
    let mut pos = Vec::with_capacity(n);
    let mut der = Vec::with_capacity(n);
    for &s in nodes.iter().take(mesh.num_curve_nodes()) {
        let (am, sn, cn, dn) = jacobi(s, m)?;
        let e = incomplete_e(am, m)?;
        pos.push(Vec3::new(two * e - s, two * sm * cn, T::zero()));
        der.push(Vec3::new(two * dn * dn - T::one(), -two * sm * sn * dn, T::zero()));
    }
    let dir = vec![Vec3::unit(2); mesh.num_director_nodes()];
    Ok(RodState::new(
        mesh,
        crate::mesh::HermiteCurve::new(pos, der),
        crate::mesh::DirectorField::new(dir),
    ))
}

/// Arclength of the cosine curve `(t/√2, cos t − 1)` from 0 to `t`.
fn cosine_arclength<T: Real>(t: T) -> Result<T> {
    Ok(incomplete_e(t, T::lit(-2.0))? / T::lit(2.0).sqrt())
}

/// Parameter `t` with arclength `s` (Newton on the arclength function).
fn cosine_parameter<T: Real>(s: T, total: T) -> Result<T> {
    let t_end = T::lit(4.0 * PI);
    let mut t = s / total * t_end;
    for _ in 0..50 {
        let f = cosine_arclength(t)? - s;
        let speed = (T::lit(0.5) + t.sin().powi(2)).sqrt();
        let dt = f / speed;
        t = t - dt;
        if dt.abs() <= T::epsilon() * T::lit(4.0) * (T::one() + t.abs()) {
            break;
        }
    }
    Ok(t)
}

/// Total length `4√2 E(π/2, −2)` of the clamped cosine curve.
pub fn clamped_cosine_length<T: Real>() -> Result<T> {
    cosine_arclength(T::lit(4.0 * PI))
}

/// Open planar curve `(t/√2, cos t − 1, 0)`, `t ∈ [0, 4π]`, resampled at
/// equispaced arclength nodes. The director starts at `e_z` and rotates about
/// the tangent at rate `beta` per unit of `t`.
pub fn clamped_cosine_rod<T: Real>(n: usize, beta: T) -> Result<RodState<T>> {
    let length = clamped_cosine_length::<T>()?;
    let mesh = Arc::new(Mesh1D::uniform(length, n, false)?);
    let r2 = T::lit(2.0).sqrt();
    let ez = Vec3::unit(2);
    let mut pos = Vec::with_capacity(n + 1);
    let mut der = Vec::with_capacity(n + 1);
    let mut dir = Vec::with_capacity(n + 1);
    for &s in mesh.nodes() {
        let t = cosine_parameter(s, length)?;
        let (st, ct) = t.sin_cos();
        pos.push(Vec3::new(t / r2, ct - T::one(), T::zero()));
        let tan = Vec3::new(T::one() / r2, -st, T::zero()).normalized();
        der.push(tan);
        let side = tan.cross(&ez);
        let (sb, cb) = (beta * t).sin_cos();
        dir.push(ez * cb + side * sb);
    }
    Ok(RodState::new(
        mesh,
        crate::mesh::HermiteCurve::new(pos, der),
        crate::mesh::DirectorField::new(dir),
    ))
}

/// Named experiment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ScenarioId {
    /// Straight clamped rod, twist rate 4 on `[0, π/2]`, untwisted beyond.
    Uniframe,
    /// Twisted circle at `κ = 3/2` with the given twist rate.
    Michell(f64),
    /// Circle twisted five times at `κ = 2`.
    Overtwist,
    /// Figure-eight with the given `κ`.
    FigureEight(f64),
    /// Clamped cosine curve with twist rate 4.
    Clamped,
    /// Overtwisted circle with self-avoidance.
    ImperA,
    /// Clamped cosine curve with self-avoidance.
    ImperB,
}

pub const DEFAULT_MICHELL_BETA: f64 = 4.2;
pub const DEFAULT_F8_KAPPA: f64 = 0.7;

impl ScenarioId {
    /// All scenario names, with default parameters for the families.
    pub fn all() -> [ScenarioId; 7] {
        [
            ScenarioId::Uniframe,
            ScenarioId::Michell(DEFAULT_MICHELL_BETA),
            ScenarioId::Overtwist,
            ScenarioId::FigureEight(DEFAULT_F8_KAPPA),
            ScenarioId::Clamped,
            ScenarioId::ImperA,
            ScenarioId::ImperB,
        ]
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioId::Uniframe => write!(f, "uniframe"),
            ScenarioId::Michell(b) => write!(f, "michell({b})"),
            ScenarioId::Overtwist => write!(f, "overtwist"),
            ScenarioId::FigureEight(k) => write!(f, "f8({k})"),
            ScenarioId::Clamped => write!(f, "clamped"),
            ScenarioId::ImperA => write!(f, "imper_a"),
            ScenarioId::ImperB => write!(f, "imper_b"),
        }
    }
}

impl FromStr for ScenarioId {
    type Err = RodError;

    /// Accepts `name`, `name(x)`, `name:x` and `name=x` for the families.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let unknown = || RodError::UnknownScenario(s.to_string());
        let (head, arg) = match s.find(['(', ':', '=']) {
            Some(i) => {
                let rest = s[i + 1..].trim_end_matches(')');
                if s[i..].starts_with('(') != s.ends_with(')') {
                    return Err(unknown());
                }
                (&s[..i], Some(rest.trim()))
            }
            None => (s, None),
        };
        let num = |default: f64| -> Result<f64> {
            match arg {
                None => Ok(default),
                Some(a) => match a.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(v),
                    _ => Err(unknown()),
                },
            }
        };
        let plain = |id: ScenarioId| if arg.is_none() { Ok(id) } else { Err(unknown()) };
        match head.to_ascii_lowercase().as_str() {
            "uniframe" => plain(ScenarioId::Uniframe),
            "michell" => Ok(ScenarioId::Michell(num(DEFAULT_MICHELL_BETA)?)),
            "overtwist" => plain(ScenarioId::Overtwist),
            "f8" | "figure8" | "figure_eight" => Ok(ScenarioId::FigureEight(num(DEFAULT_F8_KAPPA)?)),
            "clamped" => plain(ScenarioId::Clamped),
            "imper_a" => plain(ScenarioId::ImperA),
            "imper_b" => plain(ScenarioId::ImperB),
            _ => Err(unknown()),
        }
    }
}

/// Fully specified experiment: initial state, parameters and boundary data.
#[derive(Clone, Debug)]
pub struct Scenario<T> {
    pub id: ScenarioId,
    pub state: RodState<T>,
    pub config: FlowConfig<T>,
    pub bc: BoundaryCondition<T>,
    /// Initial twist rate (per unit arclength, or per unit of the original
    /// parameter for the clamped cosine curve).
    pub beta_ini: T,
    /// Perturbation already applied to `state`.
    pub perturbation: Option<Perturbation<T>>,
}

impl<T: Real> Scenario<T> {
    pub fn name(&self) -> String {
        self.id.to_string()
    }
}

/// Default number of elements of a scenario.
pub fn default_elements(id: ScenarioId) -> usize {
    match id {
        ScenarioId::Uniframe => 100,
        ScenarioId::ImperA => 800,
        _ => 400,
    }
}

/// The standard perturbation of closed curves: amplitude `1/1000`, seven waves.
pub fn standard_perturbation<T: Real>() -> Perturbation<T> {
    Perturbation {
        amplitude: T::lit(1e-3),
        frequency: T::lit(7.0),
    }
}

/// Builds the named experiment with its reference parameters.
pub fn build_scenario<T: Real>(name: &str) -> Result<Scenario<T>> {
    build_scenario_with(name.parse()?, None)
}

/// Builds an experiment, optionally overriding the number of elements. A
/// penalty parameter tied to the mesh size follows the override.
pub fn build_scenario_with<T: Real>(id: ScenarioId, elements: Option<usize>) -> Result<Scenario<T>> {
    let n = elements.unwrap_or_else(|| default_elements(id));
    let two_pi = T::lit(2.0 * PI);
    let pert = standard_perturbation::<T>();
    // (state, kappa, epsilon (None = h_max), rho, bc, beta, perturbation)
    #[allow(clippy::type_complexity)]
    let (state, kappa, eps, rho, kind, beta, perturbation): (
        RodState<T>,
        T,
        Option<T>,
        T,
        BcKind,
        T,
        Option<Perturbation<T>>,
    ) = match id {
        ScenarioId::Uniframe => {
            let rates = [(two_pi / T::lit(4.0), T::lit(4.0)), (two_pi, T::zero())];
            let st = make_straight_piecewise_twist(two_pi, n, &rates)?;
            (st, T::lit(2.0), None, T::zero(), BcKind::ClampedBoth, T::lit(4.0), None)
        }
        ScenarioId::Michell(beta) => {
            let beta = T::lit(beta);
            let st = make_circle_rod(two_pi, n, beta)?;
            (
                st,
                T::lit(1.5),
                Some(T::lit(1e-5)),
                T::zero(),
                BcKind::Periodic,
                beta,
                Some(pert),
            )
        }
        ScenarioId::Overtwist => {
            let st = make_circle_rod(two_pi, n, T::lit(5.0))?;
            (
                st,
                T::lit(2.0),
                Some(T::lit(1e-3)),
                T::zero(),
                BcKind::Periodic,
                T::lit(5.0),
                Some(pert),
            )
        }
        ScenarioId::FigureEight(kappa) => {
            if !(kappa > 0.0) {
                return Err(RodError::param("kappa", "must be positive"));
            }
            let st = figure_eight_rod(n)?;
            (
                st,
                T::lit(kappa),
                None,
                T::zero(),
                BcKind::Periodic,
                T::zero(),
                Some(pert),
            )
        }
        ScenarioId::Clamped | ScenarioId::ImperB => {
            let st = clamped_cosine_rod(n, T::lit(4.0))?;
            let rho = if id == ScenarioId::ImperB {
                T::lit(0.1)
            } else {
                T::zero()
            };
            (
                st,
                T::lit(2.0),
                Some(T::lit(1e-3)),
                rho,
                BcKind::ClampedBoth,
                T::lit(4.0),
                None,
            )
        }
        ScenarioId::ImperA => {
            let st = make_circle_rod(two_pi, n, T::lit(5.0))?;
            // repeats the overtwisted circle, perturbation included
            (
                st,
                T::lit(2.0),
                None,
                T::lit(0.1),
                BcKind::Periodic,
                T::lit(5.0),
                Some(pert),
            )
        }
    };
    let state = match perturbation {
        Some(p) => perturb_out_of_plane(&state, p.amplitude, p.frequency),
        None => state,
    };
    let h = state.mesh.h_max();
    let mut config = FlowConfig::new(kappa, eps.unwrap_or(h), h);
    config.rho = rho;
    let bc = BoundaryCondition::from_state(kind, &state);
    Ok(Scenario {
        id,
        state,
        config,
        bc,
        beta_ini: beta,
        perturbation,
    })
}

/// Twist-rate threshold `2π√3 κ / L` of the circle, here `1.5√3` for `κ = 3/2`, `L = 2π`.
pub fn michell_threshold(kappa: f64, length: f64) -> f64 {
    2.0 * PI * 3f64.sqrt() * kappa / length
}

/// Twist rates `β* + 2^ℓ/10`, `ℓ = −1..4`, with `ℓ = 2` replaced by `2.98`.
pub fn michell_sweep() -> Vec<f64> {
    let beta_star = michell_threshold(1.5, 2.0 * PI);
    [-1.0, 0.0, 1.0, 2.98, 3.0, 4.0]
        .iter()
        .map(|&l| beta_star + 2f64.powf(l) / 10.0)
        .collect()
}

/// Bending-to-torsion ratios `1/2 + 2^ℓ/10`, `ℓ = −2..4`.
pub fn figure_eight_sweep() -> Vec<f64> {
    (-2..=4).map(|l| 0.5 + 2f64.powi(l) / 10.0).collect()
}

/// Scenario list of a sweep family (`michell` or `f8`).
pub fn sweep_family(family: &str) -> Result<Vec<ScenarioId>> {
    match family {
        "michell" => Ok(michell_sweep().into_iter().map(ScenarioId::Michell).collect()),
        "f8" | "figure8" | "figure_eight" => {
            Ok(figure_eight_sweep().into_iter().map(ScenarioId::FigureEight).collect())
        }
        _ => Err(RodError::UnknownScenario(family.to_string())),
    }
}

/// Figure-eight experiment (perturbed, periodic, `ε = h_max`) on `n` elements.
pub fn make_figure_eight<T: Real>(n: usize, kappa: f64) -> Result<Scenario<T>> {
    build_scenario_with(ScenarioId::FigureEight(kappa), Some(n))
}

/// Clamped cosine experiment on `n` elements with twist rate `beta_ini`.
pub fn make_clamped_cosine<T: Real>(n: usize, beta_ini: T) -> Result<Scenario<T>> {
    let mut sc = build_scenario_with::<T>(ScenarioId::Clamped, Some(n))?;
    if beta_ini != sc.beta_ini {
        sc.state = clamped_cosine_rod(n, beta_ini)?;
        sc.bc = BoundaryCondition::from_state(BcKind::ClampedBoth, &sc.state);
        sc.beta_ini = beta_ini;
    }
    Ok(sc)
}

/// Random nodal perturbation of size `amplitude` (seeded), followed by the
/// same renormalisation as [`perturb_out_of_plane`]. End tangents, the
/// director end values and positions clamped by `bc` are left untouched.
pub fn jitter<T: Real>(state: &RodState<T>, amplitude: T, seed: u64, bc: &BoundaryCondition<T>) -> RodState<T> {
    if amplitude == T::zero() {
        return state.clone();
    }
    let mut rng = StdRng::seed_from_u64(seed);
    let v = |rng: &mut StdRng| {
        Vec3::new(
            T::lit(rng.random_range(-1.0..1.0)),
            T::lit(rng.random_range(-1.0..1.0)),
            T::lit(rng.random_range(-1.0..1.0)),
        ) * amplitude
    };
    let mut out = state.clone();
    let nc = out.curve.len();
    for c in 0..nc {
        let dp = v(&mut rng);
        let dd = v(&mut rng);
        let end = c == 0 || c == nc - 1;
        if !(bc.clamps_curve() && end) {
            out.curve.pos[c] += dp;
        }
        // tangents at the ends must stay orthogonal to the clamped directors
        if !end {
            out.curve.der[c] = (out.curve.der[c] + dd).normalized();
        }
    }
    let nd = out.director.len();
    for z in 0..nd {
        let db = v(&mut rng);
        if z == 0 || z == nd - 1 {
            continue;
        }
        let t = out.tangent_at(z);
        let b = out.director.dir[z] + db;
        out.director.dir[z] = (b - t * t.dot(&b)).normalized();
    }
    out
}
