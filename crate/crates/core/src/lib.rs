//! Arrow–Hurwicz primal-dual gradient flows for linearly constrained convex
//! optimization: problem model, flow vector fields, ODE integrators,
//! convergence diagnostics and reference experiments.
//!
//! The crate is `no_std` and needs only `alloc`.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod flows;
pub mod integrate;
pub mod linalg;
pub mod model;

pub use error::{DiagnosticsError, IntegrateError, ModelError, NoSaddleReason, ParamError};
pub use flows::{AahFlow, AahParams, AhFlow, GahFlow, StructuredPoint, StructuredProblem, VectorField};
pub use integrate::{integrate, IntegratorConfig, Method, Trajectory};
pub use linalg::Matrix;
pub use model::{
    LinearConstraint, Objective, PrimalDualState, QuadraticObjective, SaddlePoint, SaddleProblem, SmoothObjective,
};
