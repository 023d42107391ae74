#![allow(dead_code)]

use std::f64::consts::PI;

use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};
use rodflow::experiments::jitter;
use rodflow::{
    make_circle_rod, make_straight_piecewise_twist, BcKind, BoundaryCondition, DirectorField, HermiteCurve, RodState,
};

/// Admissible but generic state: a jittered twisted circle (periodic) or a
/// jittered twisted straight rod with clamped ends.
pub fn random_state(seed: u64, periodic: bool, n: usize) -> (RodState<f64>, BoundaryCondition<f64>) {
    let mut rng = StdRng::seed_from_u64(seed ^ 0x5eed);
    let beta = rng.random_range(0.5..4.0);
    let state = if periodic {
        make_circle_rod(2.0 * PI, n, beta).unwrap()
    } else {
        make_straight_piecewise_twist(2.0, n, &[(2.0, beta)]).unwrap()
    };
    let kind = if periodic {
        BcKind::Periodic
    } else {
        BcKind::ClampedBoth
    };
    let bc = BoundaryCondition::from_state(kind, &state);
    let amp = 0.02;
    (jitter(&state, amp, seed, &bc), bc)
}

pub fn random_vec(seed: u64, len: usize) -> Vec<f64> {
    let mut rng = StdRng::seed_from_u64(seed.wrapping_mul(7919) + 1);
    (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn with_curve_dofs(state: &RodState<f64>, y: &[f64]) -> RodState<f64> {
    RodState::new(state.mesh.clone(), HermiteCurve::from_dofs(y), state.director.clone())
}

pub fn with_director_dofs(state: &RodState<f64>, b: &[f64]) -> RodState<f64> {
    RodState::new(state.mesh.clone(), state.curve.clone(), DirectorField::from_dofs(b))
}

pub fn axpy(x: &[f64], s: f64, d: &[f64]) -> Vec<f64> {
    x.iter().zip(d).map(|(a, b)| a + s * b).collect()
}

/// Relative difference `|a − b| / max(|a|, |b|)` (0 when both vanish).
pub fn rel(a: f64, b: f64) -> f64 {
    let m = a.abs().max(b.abs());
    if m == 0.0 {
        0.0
    } else {
        (a - b).abs() / m
    }
}
