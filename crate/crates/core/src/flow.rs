//! Constrained descent iteration: linearised nodal constraints, the bordered
//! saddle-point solve, one step of the semi-implicit scheme and the run loop.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use crate::band::BandLu;
use crate::error::{Result, RodError};
use crate::mesh::{DirectorField, FormMatrix, HermiteCurve, CURVE_DOFS_PER_NODE, DIRECTOR_DOFS_PER_NODE};
use crate::rod::{
    energy_breakdown_with_tp, tp_params, BoundaryCondition, EnergyBreakdown, Field, FlowConfig, RodState, StepOperators,
};
use crate::scalar::Real;
use crate::selfavoid;
use crate::topology::{total_twist, uniformity_from};
use crate::vec3::Vec3;

/// Tolerance of the rank-revealing pass over constraint rows.
pub const PRUNE_TOL: f64 = 1e-10;

/// Nodal vectors shorter than this are treated as corrupted.
pub const DEGENERATE_TOL: f64 = 1e-8;

/// Sparse linear functional on a dof vector (natural numbering).
#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintRow<T> {
    pub entries: Vec<(usize, T)>,
}

impl<T: Real> ConstraintRow<T> {
    pub fn apply(&self, v: &[T]) -> T {
        self.entries.iter().map(|&(i, c)| c * v[i]).sum()
    }
}

/// Linear constraints `C v = 0` on a velocity.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintSet<T> {
    dim: usize,
    rows: Vec<ConstraintRow<T>>,
    pruned: usize,
}

impl<T: Real> ConstraintSet<T> {
    pub fn new(dim: usize) -> Self {
        ConstraintSet {
            dim,
            rows: Vec::new(),
            pruned: 0,
        }
    }

    pub fn push(&mut self, mut entries: Vec<(usize, T)>) {
        entries.retain(|&(_, c)| c != T::zero());
        assert!(
            entries.iter().all(|&(i, _)| i < self.dim),
            "constraint column out of range"
        );
        self.rows.push(ConstraintRow { entries });
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> &[ConstraintRow<T>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Number of rows removed by [`ConstraintSet::prune`].
    pub fn pruned(&self) -> usize {
        self.pruned
    }

    pub fn apply(&self, v: &[T]) -> Vec<T> {
        self.rows.iter().map(|r| r.apply(v)).collect()
    }

    /// Drops rows that are linearly dependent on earlier ones (Gram–Schmidt on
    /// the overlapping rows, relative tolerance `tol`).
    pub fn prune(mut self, tol: T) -> Self {
        let mut basis: Vec<Vec<(usize, T)>> = Vec::new();
        let mut by_col: Vec<Vec<usize>> = vec![Vec::new(); self.dim];
        let mut kept = Vec::with_capacity(self.rows.len());
        for row in self.rows.drain(..) {
            let norm0 = row.entries.iter().map(|&(_, c)| c * c).sum::<T>().sqrt();
            if norm0 == T::zero() {
                self.pruned += 1;
                continue;
            }
            let mut cand: Vec<usize> = row
                .entries
                .iter()
                .flat_map(|&(i, _)| by_col[i].iter().copied())
                .collect();
            cand.sort_unstable();
            cand.dedup();
            let mut res: BTreeMap<usize, T> = row.entries.iter().copied().collect();
            for &q in &cand {
                let coef: T = basis[q]
                    .iter()
                    .map(|&(i, c)| c * res.get(&i).copied().unwrap_or(T::zero()))
                    .sum();
                if coef != T::zero() {
                    for &(i, c) in &basis[q] {
                        let e = res.entry(i).or_insert(T::zero());
                        *e = *e - coef * c;
                    }
                }
            }
            let rn = res.values().map(|&c| c * c).sum::<T>().sqrt();
            if rn <= tol * norm0 {
                self.pruned += 1;
                continue;
            }
            let id = basis.len();
            let q: Vec<(usize, T)> = res
                .into_iter()
                .filter(|&(_, c)| c != T::zero())
                .map(|(i, c)| (i, c / rn))
                .collect();
            for &(i, _) in &q {
                by_col[i].push(id);
            }
            basis.push(q);
            kept.push(row);
        }
        self.rows = kept;
        self
    }
}

/// Linearised constraints for the velocity of `which` at `state`: nodal
/// tangency (`y'(z)·w'(z) = 0`) or orthogonality (`b(z)·r(z) = 0`) plus
/// homogeneous boundary rows, pruned to full row rank.
pub fn build_constraints<T: Real>(
    state: &RodState<T>,
    which: Field,
    bc: &BoundaryCondition<T>,
) -> Result<ConstraintSet<T>> {
    let tiny = T::lit(DEGENERATE_TOL);
    let set = match which {
        Field::Curve => {
            let n = state.curve.len();
            let mut set = ConstraintSet::new(n * CURVE_DOFS_PER_NODE);
            if bc.clamps_curve() {
                for node in [0, n - 1] {
                    for k in 0..CURVE_DOFS_PER_NODE {
                        set.push(vec![(node * CURVE_DOFS_PER_NODE + k, T::one())]);
                    }
                }
            }
            for (c, d) in state.curve.der.iter().enumerate() {
                if !d.is_finite() || d.norm() < tiny {
                    return Err(RodError::CorruptedState {
                        node: c,
                        what: "curve tangent",
                    });
                }
                let base = c * CURVE_DOFS_PER_NODE + 3;
                set.push((0..3).map(|i| (base + i, d[i])).collect());
            }
            set
        }
        Field::Director => {
            let n = state.director.len();
            let mut set = ConstraintSet::new(n * DIRECTOR_DOFS_PER_NODE);
            for node in [0, n - 1] {
                for k in 0..DIRECTOR_DOFS_PER_NODE {
                    set.push(vec![(node * DIRECTOR_DOFS_PER_NODE + k, T::one())]);
                }
            }
            for (z, b) in state.director.dir.iter().enumerate() {
                if !b.is_finite() || b.norm() < tiny {
                    return Err(RodError::CorruptedState {
                        node: z,
                        what: "director",
                    });
                }
                set.push((0..3).map(|i| (z * DIRECTOR_DOFS_PER_NODE + i, b[i])).collect());
            }
            set
        }
    };
    Ok(set.prune(T::lit(PRUNE_TOL)))
}

/// Solves `A v + Cᵀλ = rhs, C v = 0` through the bordered system, with each
/// multiplier placed right after the last unknown its row touches so the
/// system stays banded. Returns `v` in natural numbering.
pub fn solve_kkt<T: Real>(a: &FormMatrix<T>, rhs: &[T], c: &ConstraintSet<T>, stage: &str) -> Result<Vec<T>> {
    let n = a.dim();
    assert_eq!(rhs.len(), n, "rhs length");
    assert_eq!(c.dim(), n, "constraint dimension");
    let map = a.map();
    let band = a.band();
    let bw = band.bandwidth();

    // constraint rows in position numbering, keyed by their last position
    let rows: Vec<Vec<(usize, T)>> = c
        .rows()
        .iter()
        .map(|r| r.entries.iter().map(|&(i, v)| (map.position(i), v)).collect())
        .collect();
    let mut attach: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (r, row) in rows.iter().enumerate() {
        let last = row
            .iter()
            .map(|e| e.0)
            .max()
            .ok_or_else(|| RodError::param("constraints", "empty row"))?;
        attach[last].push(r);
    }
    let m = rows.len();
    let mut ext_primal = vec![0usize; n];
    let mut ext_mult = vec![0usize; m];
    let mut k = 0;
    for p in 0..n {
        ext_primal[p] = k;
        k += 1;
        for &r in &attach[p] {
            ext_mult[r] = k;
            k += 1;
        }
    }
    let dim = n + m;
    let mut half = 0;
    for i in 0..n {
        half = half.max(ext_primal[i] - ext_primal[i.saturating_sub(bw)]);
    }
    for (r, row) in rows.iter().enumerate() {
        let first = row.iter().map(|e| e.0).min().unwrap();
        half = half.max(ext_mult[r] - ext_primal[first]);
    }

    let mut lu = BandLu::zeros(dim, half, half);
    for i in 0..n {
        for j in i.saturating_sub(bw)..=i {
            let v = band.get(i, j);
            if v != T::zero() {
                lu.add(ext_primal[i], ext_primal[j], v);
                if i != j {
                    lu.add(ext_primal[j], ext_primal[i], v);
                }
            }
        }
    }
    for (r, row) in rows.iter().enumerate() {
        for &(p, v) in row {
            lu.add(ext_mult[r], ext_primal[p], v);
            lu.add(ext_primal[p], ext_mult[r], v);
        }
    }
    lu.factor(T::epsilon() * T::lit(16.0), stage)?;
    let mut b = vec![T::zero(); dim];
    let rhs_pos = map.to_positions(rhs);
    for p in 0..n {
        b[ext_primal[p]] = rhs_pos[p];
    }
    let x = lu.solve(&b);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(RodError::SingularSystem {
            stage: stage.to_string(),
            row: 0,
            pivot: f64::NAN,
        });
    }
    let v_pos: Vec<T> = (0..n).map(|p| x[ext_primal[p]]).collect();
    Ok(map.to_natural(&v_pos))
}

/// Per-step diagnostics as written to `records.csv`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiagnosticsRecord<T> {
    pub step: usize,
    pub energy: EnergyBreakdown<T>,
    pub total_twist: T,
    /// `NaN` when the twisting energy vanishes.
    pub uniformity: T,
    /// `‖d_t y‖_⋆`
    pub vy: T,
    /// `‖d_t b‖_†`
    pub vb: T,
    /// `‖|y'|² − 1‖_∞ + ‖|b|² − 1‖_∞` over the nodes.
    pub violation: T,
    pub wall_ms: f64,
}

impl<T: Real> DiagnosticsRecord<T> {
    /// Record for a state that has not been stepped (zero velocities).
    pub fn initial(step: usize, state: &RodState<T>, cfg: &FlowConfig<T>) -> Result<Self> {
        let energy = crate::rod::energy_breakdown(state, cfg)?;
        Ok(Self::from_parts(step, state, energy, T::zero(), T::zero(), 0.0))
    }

    pub(crate) fn from_parts(
        step: usize,
        state: &RodState<T>,
        energy: EnergyBreakdown<T>,
        vy: T,
        vb: T,
        wall_ms: f64,
    ) -> Self {
        let tw = total_twist(state);
        let (uy, ub) = state.unit_violation();
        DiagnosticsRecord {
            step,
            energy,
            total_twist: tw,
            uniformity: uniformity_from(state.mesh.length(), tw, energy.twisting).unwrap_or_else(T::nan),
            vy,
            vb,
            violation: uy + ub,
            wall_ms,
        }
    }

    /// Equality of every column except the wall-clock time, bit for bit.
    pub fn same_values(&self, other: &Self) -> bool {
        let bits = |r: &Self| {
            [
                r.energy.bending,
                r.energy.twisting,
                r.energy.penalty,
                r.energy.tangent_point,
                r.energy.total,
                r.total_twist,
                r.uniformity,
                r.vy,
                r.vb,
                r.violation,
            ]
            .map(|v| v.as_f64().to_bits())
        };
        self.step == other.step && bits(self) == bits(other)
    }
}

/// Bookkeeping of one step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepReport<T> {
    /// Index of the state produced by the step.
    pub step: usize,
    pub vy: T,
    pub vb: T,
    pub energy_before: EnergyBreakdown<T>,
    pub energy_after: EnergyBreakdown<T>,
    /// Total energy grew by more than `1e-10` relative.
    pub energy_increased: bool,
    /// `max_z ||y'(z)|²_k − |y'(z)|²_{k−1} − τ²|d_t y'(z)|²|` and the same for `b`.
    pub telescoping_defect: T,
    pub wall: Duration,
}

/// Step report together with the new state.
#[derive(Clone, Debug)]
pub struct StepResult<T> {
    pub state: RodState<T>,
    pub report: StepReport<T>,
}

/// Relative energy growth tolerated before a step is flagged.
pub const ENERGY_INCREASE_TOL: f64 = 1e-10;

/// Stateful iteration on a fixed mesh. Caches the factor-independent forms,
/// the current energy and the tangent-point gradient of the current state.
#[derive(Clone, Debug)]
pub struct Flow<T> {
    cfg: FlowConfig<T>,
    bc: BoundaryCondition<T>,
    ops: StepOperators<T>,
    state: RodState<T>,
    energy: EnergyBreakdown<T>,
    tp_grad: Option<Vec<T>>,
    step: usize,
}

impl<T: Real> Flow<T> {
    pub fn new(state: RodState<T>, cfg: FlowConfig<T>, bc: BoundaryCondition<T>) -> Result<Self> {
        Self::resume(state, cfg, bc, 0)
    }

    /// Starts the iteration at step index `step` (used when resuming).
    pub fn resume(state: RodState<T>, cfg: FlowConfig<T>, bc: BoundaryCondition<T>, step: usize) -> Result<Self> {
        cfg.validate()?;
        bc.validate(T::lit(1e-8))?;
        if bc.clamps_curve() && state.mesh.periodic() {
            return Err(RodError::param("bc", "a closed curve cannot have clamped curve ends"));
        }
        if !state.is_finite() {
            return Err(RodError::NonFiniteEnergy { step });
        }
        let ops = StepOperators::new(&state.mesh, &cfg);
        let (tp, tp_grad) = Self::tangent_point(&state, &cfg)?;
        let energy = energy_breakdown_with_tp(&state, &cfg, tp);
        if !energy.total.is_finite() {
            return Err(RodError::NonFiniteEnergy { step });
        }
        Ok(Flow {
            cfg,
            bc,
            ops,
            state,
            energy,
            tp_grad,
            step,
        })
    }

    fn tangent_point(state: &RodState<T>, cfg: &FlowConfig<T>) -> Result<(T, Option<Vec<T>>)> {
        if cfg.rho > T::zero() {
            let (e, g) = selfavoid::tp_energy_and_gradient(&state.curve, &state.mesh, &tp_params(state, cfg))?;
            Ok((e, Some(g)))
        } else {
            Ok((T::zero(), None))
        }
    }

    pub fn state(&self) -> &RodState<T> {
        &self.state
    }

    pub fn into_state(self) -> RodState<T> {
        self.state
    }

    pub fn config(&self) -> &FlowConfig<T> {
        &self.cfg
    }

    pub fn boundary(&self) -> &BoundaryCondition<T> {
        &self.bc
    }

    pub fn energy(&self) -> &EnergyBreakdown<T> {
        &self.energy
    }

    /// Index of the current state.
    pub fn step_index(&self) -> usize {
        self.step
    }

    /// Diagnostics of the current state with zero velocities.
    pub fn current_record(&self) -> DiagnosticsRecord<T> {
        DiagnosticsRecord::from_parts(self.step, &self.state, self.energy, T::zero(), T::zero(), 0.0)
    }

    /// Curve velocity, then director velocity (seeing the updated curve), then
    /// the update of both fields.
    pub fn advance(&mut self) -> Result<StepReport<T>> {
        let start = Instant::now();
        let next = self.step + 1;
        let cfg = &self.cfg;
        let tau = cfg.tau;
        let prev = &self.state;

        let (a, rhs) = self.ops.assemble_curve_step(prev, cfg, self.tp_grad.as_deref());
        let cy = build_constraints(prev, Field::Curve, &self.bc)?;
        let vy = solve_kkt(&a, &rhs, &cy, &format!("curve solve of step {next}"))?;
        let y_old = prev.curve.to_dofs();
        let y_new: Vec<T> = y_old.iter().zip(&vy).map(|(y, v)| *y + tau * *v).collect();
        let curve_new = HermiteCurve::from_dofs(&y_new);

        let (a, rhs) = self.ops.assemble_director_step(prev, &curve_new, cfg);
        let cb = build_constraints(prev, Field::Director, &self.bc)?;
        let vb = solve_kkt(&a, &rhs, &cb, &format!("director solve of step {next}"))?;
        let b_old = prev.director.to_dofs();
        let b_new: Vec<T> = b_old.iter().zip(&vb).map(|(b, v)| *b + tau * *v).collect();
        let director_new = DirectorField::from_dofs(&b_new);

        let mut defect = T::zero();
        for c in 0..curve_new.len() {
            let o = c * CURVE_DOFS_PER_NODE + 3;
            let d = Vec3::new(vy[o], vy[o + 1], vy[o + 2]);
            let lhs = curve_new.der[c].norm_sq();
            let rhs = prev.curve.der[c].norm_sq() + tau * tau * d.norm_sq();
            defect = defect.max((lhs - rhs).abs());
        }
        for z in 0..director_new.len() {
            let r = Vec3::new(vb[3 * z], vb[3 * z + 1], vb[3 * z + 2]);
            let lhs = director_new.dir[z].norm_sq();
            let rhs = prev.director.dir[z].norm_sq() + tau * tau * r.norm_sq();
            defect = defect.max((lhs - rhs).abs());
        }

        let new_state = RodState {
            mesh: prev.mesh.clone(),
            curve: curve_new,
            director: director_new,
        };
        if !new_state.is_finite() {
            return Err(RodError::NonFiniteEnergy { step: next });
        }
        let (tp, tp_grad) = Self::tangent_point(&new_state, cfg)?;
        let energy_after = energy_breakdown_with_tp(&new_state, cfg, tp);
        if !energy_after.total.is_finite() {
            return Err(RodError::NonFiniteEnergy { step: next });
        }
        let norm_y = self.ops.star.quad(&vy).max(T::zero()).sqrt();
        let norm_b = self.ops.dagger.quad(&vb).max(T::zero()).sqrt();
        let before = self.energy;
        let increased = energy_after.total - before.total > T::lit(ENERGY_INCREASE_TOL) * before.total.abs();

        self.state = new_state;
        self.energy = energy_after;
        self.tp_grad = tp_grad;
        self.step = next;
        Ok(StepReport {
            step: next,
            vy: norm_y,
            vb: norm_b,
            energy_before: before,
            energy_after,
            energy_increased: increased,
            telescoping_defect: defect,
            wall: start.elapsed(),
        })
    }

    /// Diagnostics of the current state after a step.
    pub fn record(&self, report: &StepReport<T>) -> DiagnosticsRecord<T> {
        DiagnosticsRecord::from_parts(
            report.step,
            &self.state,
            report.energy_after,
            report.vy,
            report.vb,
            report.wall.as_secs_f64() * 1e3,
        )
    }
}

/// One step from `state`.
pub fn flow_step<T: Real>(
    state: &RodState<T>,
    cfg: &FlowConfig<T>,
    bc: &BoundaryCondition<T>,
) -> Result<StepResult<T>> {
    let mut flow = Flow::new(state.clone(), *cfg, bc.clone())?;
    let report = flow.advance()?;
    Ok(StepResult {
        state: flow.into_state(),
        report,
    })
}

/// Why a run ended.
#[derive(Debug)]
pub enum Termination {
    /// `‖d_t y‖_⋆ + ‖d_t b‖_† ≤ eps_stop`.
    Converged,
    /// The step index reached `max_steps`.
    StepBudget,
    /// The observer asked to stop.
    Interrupted,
    /// A step failed; the outcome holds the last good state.
    Aborted(RodError),
}

/// Result of [`run_flow`].
#[derive(Debug)]
pub struct RunOutcome<T> {
    /// Final state, or the last good state if the run aborted.
    pub state: RodState<T>,
    /// Step index of `state`.
    pub step: usize,
    pub termination: Termination,
    /// Steps whose energy increase was flagged.
    pub flagged_steps: Vec<usize>,
    /// `τ Σ (‖d_t y‖_⋆² + ‖d_t b‖_†²)` over the run.
    pub dissipation: T,
    pub initial_energy: T,
    pub final_energy: T,
    pub max_violation: T,
    pub max_telescoping_defect: T,
}

impl<T> RunOutcome<T> {
    pub fn is_aborted(&self) -> bool {
        matches!(self.termination, Termination::Aborted(_))
    }
}

/// What the observer wants after seeing a record.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

/// Iterates from `flow`'s current state until the stopping rule, the step
/// budget `cfg.max_steps` (an absolute step index) or an observer stop.
pub fn run_from<T: Real>(
    mut flow: Flow<T>,
    mut observer: impl FnMut(&DiagnosticsRecord<T>, &RodState<T>) -> Control,
) -> RunOutcome<T> {
    let initial_energy = flow.energy().total;
    let mut out_flags = Vec::new();
    let mut dissipation = T::zero();
    let mut max_violation = flow.current_record().violation;
    let mut max_defect = T::zero();
    let max_steps = flow.config().max_steps;
    let tau = flow.config().tau;
    let eps_stop = flow.config().eps_stop;
    let termination = loop {
        if flow.step_index() >= max_steps {
            break Termination::StepBudget;
        }
        let report = match flow.advance() {
            Ok(r) => r,
            Err(e) => break Termination::Aborted(e),
        };
        if report.energy_increased {
            out_flags.push(report.step);
        }
        dissipation = dissipation + tau * (report.vy * report.vy + report.vb * report.vb);
        max_defect = max_defect.max(report.telescoping_defect);
        let rec = flow.record(&report);
        max_violation = max_violation.max(rec.violation);
        if observer(&rec, flow.state()) == Control::Stop {
            break Termination::Interrupted;
        }
        if report.vy + report.vb <= eps_stop {
            break Termination::Converged;
        }
    };
    let final_energy = flow.energy().total;
    let step = flow.step_index();
    RunOutcome {
        state: flow.into_state(),
        step,
        termination,
        flagged_steps: out_flags,
        dissipation,
        initial_energy,
        final_energy,
        max_violation,
        max_telescoping_defect: max_defect,
    }
}

/// Runs the iteration from `state0`; the observer sees every step's record and
/// the new state. With `max_steps == 0` no step is taken and the observer is
/// never called.
pub fn run_flow<T: Real>(
    state0: RodState<T>,
    cfg: FlowConfig<T>,
    bc: BoundaryCondition<T>,
    observer: impl FnMut(&DiagnosticsRecord<T>, &RodState<T>) -> Control,
) -> Result<RunOutcome<T>> {
    let flow = Flow::new(state0, cfg, bc)?;
    Ok(run_from(flow, observer))
}
