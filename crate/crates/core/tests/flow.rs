mod common;

use std::f64::consts::PI;

use common::{random_state, random_vec};
use nalgebra::{DMatrix, DVector};
use rodflow::flow::{ConstraintSet, PRUNE_TOL};
use rodflow::rod::StepOperators;
use rodflow::{
    assemble_form, build_constraints, flow_step, make_circle_rod, make_straight_piecewise_twist, run_flow, BcKind,
    BoundaryCondition, Control, DiagnosticsRecord, Field, FlowConfig, FormKind, RodError, RodState, Termination, Vec3,
};

fn dense(a: &rodflow::FormMatrix<f64>) -> DMatrix<f64> {
    let n = a.dim();
    DMatrix::from_fn(n, n, |i, j| a.get(i, j))
}

fn kkt_oracle(a: &rodflow::FormMatrix<f64>, rhs: &[f64], c: &ConstraintSet<f64>) -> Vec<f64> {
    let n = a.dim();
    let m = c.len();
    let mut k = DMatrix::zeros(n + m, n + m);
    k.view_mut((0, 0), (n, n)).copy_from(&dense(a));
    for (r, row) in c.rows().iter().enumerate() {
        for &(i, v) in &row.entries {
            k[(n + r, i)] = v;
            k[(i, n + r)] = v;
        }
    }
    let mut b = DVector::zeros(n + m);
    b.rows_mut(0, n).copy_from(&DVector::from_column_slice(rhs));
    let x = k.lu().solve(&b).expect("oracle factorization");
    x.rows(0, n).iter().copied().collect()
}

#[test]
fn constraint_row_counts() {
    let n = 20;
    let circle = make_circle_rod(2.0 * PI, n, 1.0).unwrap();
    let bc = BoundaryCondition::from_state(BcKind::Periodic, &circle);
    assert_eq!(build_constraints(&circle, Field::Curve, &bc).unwrap().len(), n);
    // director ends are always clamped; the two end orthogonality rows are implied
    assert_eq!(
        build_constraints(&circle, Field::Director, &bc).unwrap().len(),
        n + 1 + 6 - 2
    );

    let line = make_straight_piecewise_twist(2.0, n, &[(2.0, 1.0)]).unwrap();
    let bc = BoundaryCondition::from_state(BcKind::ClampedBoth, &line);
    let c = build_constraints(&line, Field::Curve, &bc).unwrap();
    assert_eq!(c.len(), n + 1 + 12 - 2);
    assert_eq!(c.pruned(), 2);
    let d = build_constraints(&line, Field::Director, &bc).unwrap();
    assert_eq!(d.len(), n + 1 + 6 - 2);
}

#[test]
fn admissible_directions_satisfy_constraints_exactly() {
    let (st, bc) = random_state(4, false, 12);
    let c = build_constraints(&st, Field::Curve, &bc).unwrap();
    // a tangential position shift with derivative updates orthogonal to y'
    let mut w = vec![0.0; c.dim()];
    for z in 1..st.curve.len() - 1 {
        let d = st.curve.der[z];
        let e = d.cross(&Vec3::new(0.3, -0.2, 1.0));
        for k in 0..3 {
            w[6 * z + k] = (z as f64).sin();
            w[6 * z + 3 + k] = e[k];
        }
    }
    assert!(c.apply(&w).iter().all(|x| x.abs() < 1e-15));
}

#[test]
fn degenerate_tangent_is_a_corrupted_state() {
    let (mut st, bc) = random_state(1, true, 10);
    st.curve.der[3] = Vec3::new(1e-9, 0.0, 0.0);
    match build_constraints(&st, Field::Curve, &bc) {
        Err(RodError::CorruptedState { node: 3, .. }) => {}
        other => panic!("{other:?}"),
    }
    st.curve.der[3] = Vec3::new(f64::NAN, 0.0, 0.0);
    assert!(build_constraints(&st, Field::Curve, &bc).is_err());
}

#[test]
fn kkt_with_zero_rhs_is_zero() {
    let (st, bc) = random_state(2, true, 16);
    let cfg = FlowConfig::new(1.0, 0.1, st.mesh.h_max());
    let ops = StepOperators::new(&st.mesh, &cfg);
    let (a, _) = ops.assemble_curve_step(&st, &cfg, None);
    let c = build_constraints(&st, Field::Curve, &bc).unwrap();
    let v = rodflow::solve_kkt(&a, &vec![0.0; a.dim()], &c, "t").unwrap();
    assert!(v.iter().all(|x| *x == 0.0));
}

#[test]
fn kkt_with_diagonal_form_is_a_projection() {
    // the lumped pairing is diagonal; with one row the solution is an oblique projection
    let mesh = rodflow::Mesh1D::uniform(4.0, 4, false).unwrap();
    let a = assemble_form(&mesh, FormKind::LumpedPairing);
    let n = a.dim();
    let w: Vec<f64> = (0..n).map(|i| a.get(i, i)).collect();
    let cvec = random_vec(9, n);
    let mut c = ConstraintSet::new(n);
    c.push(cvec.iter().copied().enumerate().collect());
    let rhs = random_vec(10, n);
    let v = rodflow::solve_kkt(&a, &rhs, &c, "t").unwrap();
    let num: f64 = (0..n).map(|i| cvec[i] * rhs[i] / w[i]).sum();
    let den: f64 = (0..n).map(|i| cvec[i] * cvec[i] / w[i]).sum();
    for i in 0..n {
        assert!((v[i] - (rhs[i] - cvec[i] * num / den) / w[i]).abs() < 1e-12);
    }
}

#[test]
fn kkt_matches_dense_oracle() {
    for seed in 0..8 {
        let periodic = seed % 2 == 0;
        let (st, bc) = random_state(seed, periodic, 14);
        let cfg = FlowConfig::new(0.8 + 0.2 * seed as f64, 0.05, st.mesh.h_max());
        let ops = StepOperators::new(&st.mesh, &cfg);
        for field in [Field::Curve, Field::Director] {
            let (a, _) = match field {
                Field::Curve => ops.assemble_curve_step(&st, &cfg, None),
                Field::Director => ops.assemble_director_step(&st, &st.curve, &cfg),
            };
            let c = build_constraints(&st, field, &bc).unwrap();
            let rhs = random_vec(seed + 77, a.dim());
            let v = rodflow::solve_kkt(&a, &rhs, &c, "t").unwrap();
            let oracle = kkt_oracle(&a, &rhs, &c);
            let rn = rhs.iter().map(|x| x * x).sum::<f64>().sqrt();
            let diff = v.iter().zip(&oracle).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            assert!(diff <= 1e-10 * rn, "seed {seed} {field:?}: {diff}");
            let cv = c.apply(&v).iter().fold(0.0f64, |m, x| m.max(x.abs()));
            assert!(cv <= 1e-10, "{cv}");
            // residual: A v − rhs lies in the row space of C
            let r: Vec<f64> = a.apply(&v).iter().zip(&rhs).map(|(x, y)| x - y).collect();
            let cm = DMatrix::from_fn(c.len(), a.dim(), |i, j| {
                c.rows()[i].entries.iter().find(|e| e.0 == j).map_or(0.0, |e| e.1)
            });
            let lambda = (&cm * cm.transpose())
                .lu()
                .solve(&(&cm * DVector::from_column_slice(&r)))
                .unwrap();
            let res = DVector::from_column_slice(&r) - cm.transpose() * lambda;
            assert!(res.norm() <= 1e-10 * rn, "{}", res.norm());
        }
    }
}

#[test]
fn pruning_drops_dependent_rows() {
    let mut c = ConstraintSet::new(4);
    c.push(vec![(0, 1.0), (1, 1.0)]);
    c.push(vec![(2, 1.0)]);
    c.push(vec![(0, 2.0), (1, 2.0)]);
    c.push(vec![(0, 1.0), (1, 1.0), (2, 1.0)]);
    let c = c.prune(PRUNE_TOL);
    assert_eq!((c.len(), c.pruned()), (2, 2));
}

#[test]
fn straight_uniform_twist_rod_is_stationary() {
    let st = make_straight_piecewise_twist(2.0 * PI, 40, &[(2.0 * PI, 1.0)]).unwrap();
    let bc = BoundaryCondition::from_state(BcKind::ClampedBoth, &st);
    for kappa in [1.0, 2.0] {
        let mut cfg = FlowConfig::new(kappa, st.mesh.h_max(), st.mesh.h_max());
        cfg.rho = 0.0;
        let res = flow_step(&st, &cfg, &bc).unwrap();
        assert!(
            res.report.vy + res.report.vb <= cfg.eps_stop,
            "{:?}",
            (res.report.vy, res.report.vb)
        );
        let dy = res
            .state
            .curve
            .to_dofs()
            .iter()
            .zip(st.curve.to_dofs())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let db = res
            .state
            .director
            .to_dofs()
            .iter()
            .zip(st.director.to_dofs())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(dy < 1e-12 && db < 1e-12, "{dy} {db}");
    }
}

#[test]
fn twist_free_circle_comes_to_rest_under_refinement() {
    // nodal unit length leaves a first-order consistency force on the interpolated circle
    let mut prev = f64::INFINITY;
    for n in [20, 40, 80, 160] {
        let st = make_circle_rod(2.0 * PI, n, 0.0).unwrap();
        let bc = BoundaryCondition::from_state(BcKind::Periodic, &st);
        let mut cfg = FlowConfig::new(2.0, st.mesh.h_max(), st.mesh.h_max());
        cfg.rho = 0.0;
        let r = flow_step(&st, &cfg, &bc).unwrap().report;
        assert!(r.vb < 1e-10, "n={n}: {}", r.vb);
        assert!(r.vy < 1.5 * st.mesh.h_max(), "n={n}: {}", r.vy);
        assert!(r.vy < 0.55 * prev, "n={n}: {} vs {prev}", r.vy);
        prev = r.vy;
    }
}

#[test]
fn telescoping_identity_holds_to_roundoff() {
    for seed in 0..4 {
        let (st, bc) = random_state(seed, seed % 2 == 0, 20);
        let cfg = FlowConfig::new(1.3, 0.05, st.mesh.h_max());
        let r = flow_step(&st, &cfg, &bc).unwrap().report;
        assert!(r.telescoping_defect < 1e-13, "{}", r.telescoping_defect);
    }
}

#[test]
fn zero_step_budget_returns_initial_state() {
    let (st, bc) = random_state(5, true, 12);
    let mut cfg = FlowConfig::new(1.0, 0.05, st.mesh.h_max());
    cfg.max_steps = 0;
    let mut calls = 0;
    let out = run_flow(st.clone(), cfg, bc, |_, _| {
        calls += 1;
        Control::Continue
    })
    .unwrap();
    assert_eq!(calls, 0);
    assert_eq!(out.step, 0);
    assert!(matches!(out.termination, Termination::StepBudget));
    assert_eq!(out.state.curve, st.curve);
    assert_eq!(out.state.director, st.director);
}

fn stream(seed: u64) -> (Vec<DiagnosticsRecord<f64>>, RodState<f64>) {
    let (st, bc) = random_state(seed, true, 16);
    let mut cfg = FlowConfig::new(0.9, 0.05, st.mesh.h_max());
    cfg.max_steps = 15;
    let mut recs = Vec::new();
    let out = run_flow(st, cfg, bc, |r, _| {
        recs.push(*r);
        Control::Continue
    })
    .unwrap();
    (recs, out.state)
}

#[test]
fn runs_are_deterministic() {
    let (a, sa) = stream(8);
    let (b, sb) = stream(8);
    assert_eq!(a.len(), 15);
    assert!(a.iter().zip(&b).all(|(x, y)| x.same_values(y)));
    assert_eq!(sa.curve, sb.curve);
    assert_eq!(sa.director, sb.director);
}

#[test]
fn energy_law_and_observer_stop() {
    let (st, bc) = random_state(6, false, 20);
    let mut cfg = FlowConfig::new(1.0, st.mesh.h_max(), st.mesh.h_max());
    cfg.max_steps = 200;
    let mut last = f64::INFINITY;
    let out = run_flow(st, cfg, bc, |r, _| {
        assert!(r.energy.total <= last * (1.0 + 1e-10));
        last = r.energy.total;
        if r.step == 50 {
            Control::Stop
        } else {
            Control::Continue
        }
    })
    .unwrap();
    assert!(matches!(out.termination, Termination::Interrupted));
    assert_eq!(out.step, 50);
    assert!(out.flagged_steps.is_empty());
    assert!(out.final_energy + out.dissipation <= out.initial_energy * (1.0 + 1e-10));
}

#[test]
fn single_precision_flow_runs() {
    let st = rodflow::make_circle_rod::<f32>(2.0 * std::f32::consts::PI, 24, 2.0).unwrap();
    let bc = BoundaryCondition::from_state(BcKind::Periodic, &st);
    let mut cfg = FlowConfig::<f32>::new(1.5, st.mesh.h_max(), st.mesh.h_max());
    cfg.max_steps = 5;
    let out = run_flow(st, cfg, bc, |_, _| Control::Continue).unwrap();
    assert!(!out.is_aborted());
    assert!(out.final_energy.is_finite() && out.final_energy <= out.initial_energy * 1.0001);
}
