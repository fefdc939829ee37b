//! Analysis ℓ1 recovery of cosparse signals from Gaussian measurements.
//!
//! The crate covers the whole pipeline around the program
//! `min ||Ωz||_1 subject to ||Mz - y||_2 <= eta`:
//!
//! * [`operators`]: finite-difference and frame analysis operators,
//!   cosupports and frame bounds.
//! * [`bounds`]: closed-form measurement bounds for total variation and
//!   frames, plus the competing bounds used for comparison.
//! * [`geometry`]: Monte-Carlo upper estimates of the Gaussian width of the
//!   descent cone and a restricted-gain probe.
//! * [`solver`]: a primal-dual solver for the recovery program and a
//!   minimum-norm baseline.
//! * [`harness`]: phase-transition and comparison experiments with
//!   reproducible random streams.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix it to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod io;
pub mod numerics;
pub mod operators;
mod scalar;
pub mod solver;

pub use error::{Error, Result};
pub use numerics::{DenseMatrix, LinearMap, SeededRng};
pub use operators::{AnalysisOperator, OperatorKind, SignalModel};
pub use scalar::Scalar;

pub type Matrix = DenseMatrix<f64>;
pub type Operator = AnalysisOperator<f64>;
pub type Signal = SignalModel<f64>;
pub type Problem<'a> = solver::RecoveryProblem<'a, f64>;
pub type Solution = solver::SolverResult<f64>;
pub type Options = solver::SolverOptions<f64>;
pub type Subdifferential<'a> = geometry::SubdifferentialSpec<'a, f64>;
pub type Width = geometry::WidthEstimate<f64>;
