//! Variational solver for spherical mixed even p-spin vector glasses.
//!
//! Evaluates and minimizes the Crisanti–Sommers and Parisi functionals over
//! matrix-valued order parameters, checks optimality conditions, and provides
//! a small-N Hamiltonian maximization oracle.

pub mod diagnostics;
pub mod error;
pub mod functionals;
pub mod linalg;
pub mod model;
pub mod optimize;
pub mod sampler;

pub use error::{Error, Result};
pub use linalg::SymMat;
pub use model::MixedModel;
