use std::f64::consts::PI;

use rodflow::experiments::{
    figure_eight_sweep, michell_sweep, michell_threshold, sweep_family, DEFAULT_F8_KAPPA, DEFAULT_MICHELL_BETA,
};
use rodflow::quadrature::integrate;
use rodflow::{
    build_scenario, build_scenario_with, clamped_cosine_length, complete_k, energy_breakdown, figure_eight_modulus,
    jacobi_am_cn, make_circle_rod, make_clamped_cosine, make_figure_eight, make_straight_piecewise_twist,
    perturb_out_of_plane, total_twist, BcKind, FlowConfig, RodState, Scenario, ScenarioId,
};

fn admissibility(st: &RodState<f64>) -> f64 {
    let (u, b) = st.unit_violation();
    u.max(b).max(st.orthogonality_violation())
}

#[test]
fn circle_rod_examples() {
    let st = make_circle_rod(2.0 * PI, 400, 4.2).unwrap();
    assert!((total_twist(&st) - 4.2).abs() < 1e-3);
    assert!(admissibility(&st) < 1e-12);
    let flat = make_circle_rod(2.0 * PI, 400, 0.0).unwrap();
    let cfg = FlowConfig::new(1.5, 1e-5, flat.mesh.h_max());
    let e = energy_breakdown(&flat, &cfg).unwrap();
    // O(h²) mismatch between the P1 stiffness and the concave term
    assert!(e.twisting.abs() < 1e-3, "{}", e.twisting);
    assert!((e.bending - 1.5 * PI).abs() < 1e-2 * 1.5 * PI);
}

#[test]
fn straight_rod_examples() {
    let st = make_straight_piecewise_twist(2.0 * PI, 100, &[(PI / 2.0, 4.0), (2.0 * PI, 0.0)]).unwrap();
    assert!((total_twist(&st) - 1.0).abs() < 1e-3);
    assert!(admissibility(&st) < 1e-12);
    let cfg = FlowConfig::new(2.0, st.mesh.h_max(), st.mesh.h_max());
    assert!((energy_breakdown(&st, &cfg).unwrap().twisting - 4.0 * PI).abs() < 1e-2 * 4.0 * PI);
    assert!(make_straight_piecewise_twist(1.0, 10, &[(0.5, 1.0)]).is_err());
}

#[test]
fn figure_eight_examples() {
    let sc: Scenario<f64> = make_figure_eight(400, 0.7).unwrap();
    let m: f64 = figure_eight_modulus();
    let k = complete_k(m).unwrap();
    assert!((sc.state.mesh.length() - 4.0 * k).abs() < 1e-12);
    assert_eq!(sc.bc.kind, BcKind::Periodic);
    assert_eq!(sc.beta_ini, 0.0);
    // unperturbed geometry: closure, unit speed, zero twist, bending energy
    let st = rodflow::experiments::figure_eight_rod::<f64>(400).unwrap();
    let y = |s: f64| {
        let (am, cn) = jacobi_am_cn(s, m).unwrap();
        (2.0 * rodflow::incomplete_e(am, m).unwrap() - s, 2.0 * m.sqrt() * cn)
    };
    let (a, b) = (y(0.0), y(4.0 * k));
    let closure = (a.0 - b.0).hypot(a.1 - b.1);
    assert!(closure < 1e-8, "{closure}");
    for d in &st.curve.der {
        assert!((d.norm() - 1.0).abs() < 1e-10);
    }
    assert!(total_twist(&st).abs() < 1e-10);
    let cfg = FlowConfig::new(0.7, st.mesh.h_max(), st.mesh.h_max());
    let bend = energy_breakdown(&st, &cfg).unwrap().bending;
    let oracle = 0.35
        * integrate(
            |s: f64| 4.0 * m * jacobi_am_cn(s, m).unwrap().1.powi(2),
            0.0,
            4.0 * k,
            64,
            1e-12,
        );
    assert!((bend - oracle).abs() < 5e-3 * oracle, "{bend} vs {oracle}");
}

#[test]
fn clamped_cosine_examples() {
    let sc = make_clamped_cosine(400, 4.0f64).unwrap();
    assert!(
        (total_twist(&sc.state) - 8.0).abs() < 1e-2,
        "{}",
        total_twist(&sc.state)
    );
    assert!((sc.state.mesh.length() - clamped_cosine_length::<f64>().unwrap()).abs() < 1e-12);
    assert!((sc.state.mesh.length() - 12.357).abs() < 1e-3);
    for d in &sc.state.curve.der {
        assert!((d.norm() - 1.0).abs() < 1e-12);
    }
    assert_eq!(sc.bc.kind, BcKind::ClampedBoth);
    let other = make_clamped_cosine(100, 2.0f64).unwrap();
    assert!((total_twist(&other.state) - 4.0).abs() < 1e-2);
}

#[test]
fn perturbation_examples() {
    let st = make_circle_rod(2.0 * PI, 200, 4.2).unwrap();
    assert_eq!(perturb_out_of_plane(&st, 0.0, 7.0), st);
    let p = perturb_out_of_plane(&st, 1e-3, 7.0);
    assert!(admissibility(&p) < 1e-12);
    for (c, s) in st.mesh.nodes().iter().take(200).enumerate() {
        assert!((p.curve.pos[c][2] - 1e-3 * (7.0 * s).sin()).abs() < 1e-15);
    }
}

#[test]
fn scenario_table() {
    let m: Scenario<f64> = build_scenario("michell(4.2)").unwrap();
    assert_eq!(m.state.curve.len(), 400);
    assert_eq!((m.config.kappa, m.config.epsilon, m.config.rho), (1.5, 1e-5, 0.0));
    assert!((m.state.mesh.length() - 2.0 * PI).abs() < 1e-12);
    assert_eq!(m.bc.kind, BcKind::Periodic);
    assert!((m.config.tau - m.state.mesh.h_max() / 8.0).abs() < 1e-16);

    let a: Scenario<f64> = build_scenario("imper_a").unwrap();
    assert_eq!(a.state.mesh.num_elements(), 800);
    assert_eq!((a.config.rho, a.beta_ini), (0.1, 5.0));
    assert_eq!(a.config.epsilon, a.state.mesh.h_max());

    let f: Scenario<f64> = build_scenario("f8(0.7)").unwrap();
    assert_eq!(f.beta_ini, 0.0);
    assert_eq!(f.config.kappa, 0.7);
    assert!((f.state.mesh.length() - 4.0 * complete_k(figure_eight_modulus::<f64>()).unwrap()).abs() < 1e-12);

    assert!(build_scenario::<f64>("spaghetti").is_err());
    assert_eq!(
        "michell".parse::<ScenarioId>().unwrap(),
        ScenarioId::Michell(DEFAULT_MICHELL_BETA)
    );
    assert_eq!(
        "f8".parse::<ScenarioId>().unwrap(),
        ScenarioId::FigureEight(DEFAULT_F8_KAPPA)
    );
    assert_eq!(
        "figure8:0.45".parse::<ScenarioId>().unwrap(),
        ScenarioId::FigureEight(0.45)
    );
}

#[test]
fn every_scenario_starts_admissible_and_matches_its_energy() {
    for id in ScenarioId::all() {
        let n = match id {
            ScenarioId::ImperA => 200,
            _ => 100,
        };
        let sc: Scenario<f64> = build_scenario_with(id, Some(n)).unwrap();
        assert!(admissibility(&sc.state) < 1e-12, "{id}");
        assert!(sc.bc.residual(&sc.state) == 0.0, "{id}");
        let e = energy_breakdown(&sc.state, &sc.config).unwrap();
        match id {
            ScenarioId::Uniframe => assert!((e.twisting - 4.0 * PI).abs() < 1e-2 * 4.0 * PI),
            ScenarioId::Michell(beta) => {
                let expect = 1.5 * PI + PI * beta * beta;
                assert!(
                    (e.bending + e.twisting - expect).abs() < 1e-2 * expect,
                    "{id}: {}",
                    e.bending + e.twisting
                );
            }
            _ => assert!(e.total.is_finite()),
        }
        assert_eq!(sc.name(), id.to_string());
        assert_eq!(sc.name().parse::<ScenarioId>().unwrap(), id);
    }
}

#[test]
fn sweeps() {
    let star = michell_threshold(1.5, 2.0 * PI);
    assert!((star - 2.598076211353316).abs() < 1e-12);
    let m = michell_sweep();
    assert_eq!(m.len(), 6);
    assert!((m[0] - (star + 0.05)).abs() < 1e-12);
    let f = figure_eight_sweep();
    assert_eq!(f.len(), 7);
    assert!((f[0] - 0.525).abs() < 1e-12 && (f[6] - 2.1).abs() < 1e-12);
    assert_eq!(sweep_family("f8").unwrap().len(), 7);
    assert!(sweep_family("knots").is_err());
}
