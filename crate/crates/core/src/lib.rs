//! Gradient flow for elastic framed curves (Kirchhoff rods) discretised by
//! cubic Hermite centerlines and piecewise affine directors.
//!
//! The numerical core is generic over the scalar type ([`Real`], implemented
//! for `f32` and `f64`); the `*64` aliases below fix `f64`, which is what the
//! I/O layer and the command-line tool use.
//!
//! ```
//! use rodflow::{build_scenario, run_flow, Control};
//!
//! let mut sc = rodflow::build_scenario_with::<f64>("uniframe".parse().unwrap(), Some(20)).unwrap();
//! sc.config.max_steps = 3;
//! let out = run_flow(sc.state, sc.config, sc.bc, |_, _| Control::Continue).unwrap();
//! assert_eq!(out.step, 3);
//! # let _ = build_scenario::<f64>;
//! ```

// `!(x > 0)` is used on purpose so that NaN is rejected
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod band;
pub mod error;
pub mod experiments;
pub mod flow;
pub mod io;
pub mod mesh;
pub mod quadrature;
pub mod rod;
pub mod scalar;
pub mod selfavoid;
pub mod specialfn;
pub mod topology;
pub mod vec3;

pub use error::{Result, RodError};
pub use experiments::{
    build_scenario, build_scenario_with, clamped_cosine_length, make_circle_rod, make_clamped_cosine,
    make_figure_eight, make_straight_piecewise_twist, perturb_out_of_plane, Scenario, ScenarioId,
};
pub use flow::{
    build_constraints, flow_step, run_flow, run_from, solve_kkt, ConstraintSet, Control, DiagnosticsRecord, Flow,
    RunOutcome, StepReport, StepResult, Termination,
};
pub use mesh::{assemble_form, DirectorField, FormKind, FormMatrix, HermiteCurve, Mesh1D, MetricWeights};
pub use rod::{energy_breakdown, BcKind, BoundaryCondition, EnergyBreakdown, EnergyTerm, Field, FlowConfig, RodState};
pub use scalar::Real;
pub use selfavoid::{tp_energy, tp_gradient, tp_radius, TangentPointParams};
pub use specialfn::{complete_k, figure_eight_modulus, incomplete_e, jacobi_am_cn};
pub use topology::{
    calugareanu_residual, linking_number, total_twist, twist_rate_profile, uniformity_quotient, writhe,
};
pub use vec3::Vec3;

pub type Vec3f64 = Vec3<f64>;
pub type Mesh64 = Mesh1D<f64>;
pub type RodState64 = RodState<f64>;
pub type FlowConfig64 = FlowConfig<f64>;
pub type Scenario64 = Scenario<f64>;
pub type DiagnosticsRecord64 = DiagnosticsRecord<f64>;
pub type RodState32 = RodState<f32>;
pub type FlowConfig32 = FlowConfig<f32>;
