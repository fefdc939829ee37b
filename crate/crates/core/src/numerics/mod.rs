//! Deterministic numerical kernel: seeded Gaussian streams, dense and
//! matrix-free linear algebra, power iteration, minimum-norm least squares
//! and scalar minimization.

mod linalg;
mod optimize;
mod rng;
mod special;

pub use linalg::{
    axpy, dot, min_norm_least_squares, norm1, norm2, norm_inf, operator_norm, power_iteration,
    Adjoint, DenseMatrix, LinearMap, PowerIterationOptions,
};
pub use optimize::minimize_scalar;
pub use rng::{gauss_vector, stream_id, SeededRng};
pub use special::{expected_gauss_norm, ln_gamma};
