//! Numerical laboratory for reaction-diffusion equations with a
//! square-root survival threshold and their Hamilton-Jacobi limits.
//!
//! * [`rd_solver`] solves the scaled PDE in Hopf-Cole variables.
//! * [`hj_solver`] handles the first-order limit `u_t = |Du|^2 + R`, the
//!   obstacle problem and optimal-trajectory backtracking.
//! * [`iterator`] builds the state-constrained value functions on shrinking
//!   space-time sets.
//! * [`closed_forms`] holds the exact constant-rate solutions.
//! * [`cli`] drives experiments from JSON configurations.

pub mod cli;
pub mod closed_forms;
pub mod error;
pub mod field;
pub mod grid;
pub mod hj_solver;
pub mod iterator;
pub mod logexp;
pub mod output;
pub mod problem;
pub mod profile;
pub mod rd_solver;

pub use error::{Error, Result};
pub use field::{ScalarField, SpaceTimeField, SpaceTimeMask, DEFAULT_FLOOR};
pub use grid::Grid;
pub use problem::{ProblemSpec, ReactionForm};
pub use profile::{ProfileSpec, RateSpec};
