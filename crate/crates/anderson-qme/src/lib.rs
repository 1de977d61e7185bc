//! Perturbative memory kernels and time-local generators for the single-impurity
//! Anderson model, in bare and renormalized form, with propagators, physicality
//! diagnostics and an exact reference for the noninteracting dot.

pub mod config;
pub mod contractions;
pub mod diagnostics;
pub mod error;
pub mod exact;
pub mod generator;
pub mod graded;
pub mod kernel;
pub mod liouville_fock;
pub mod model;
pub mod propagation;
pub mod runner;
pub mod superop;

pub use error::{Error, Result};
pub use model::{ModelParams, Reservoir, Sign, Spin, TimeGrid};
pub use superop::{DotMatrix, LiouvilleVec, SuperOp};
