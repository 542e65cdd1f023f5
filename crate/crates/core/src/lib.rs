//! Solver and verification harness for obstacle problems governed by
//! elliptic operators with degenerate coercivity, a lower-order absorption
//! term, and integrable data.
//!
//! The crate discretizes the variational inequality with piecewise-linear
//! elements on interval and rectangle meshes, solves it with a projected
//! nonlinear relaxation inside a frozen-coefficient fixed point, and then
//! verifies the structural and analytic properties the operator is supposed
//! to satisfy: coercivity/growth/monotonicity/continuity of the flux field,
//! the truncated entropy inequality, sublevel-set energy bounds, and the
//! Sobolev-exponent window together with data-approximation stability.
//!
//! Modules:
//! - [`params`]: exponent arithmetic and admissibility of (N, p, r, θ, b);
//! - [`field`]: the flux field, degeneracy factor, lower-order term, and
//!   randomized structure checks;
//! - [`mesh`]: meshes, grid functions, truncation, quadrature, norms,
//!   level-set measures;
//! - [`solver`]: the projected solver for the discrete inequality;
//! - [`entropy`]: entropy-inequality residuals and energy diagnostics on
//!   computed solutions;
//! - [`pipeline`]: configuration, data sequences, stability and refinement
//!   experiments, persistence.

// `!(x > 0)`-style guards are deliberate: they reject NaN where `x <= 0`
// would accept it.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod entropy;
pub mod error;
pub mod field;
pub mod mesh;
pub mod params;
pub mod pipeline;
pub mod solver;
pub mod vec2;

pub use error::{Error, Result};
