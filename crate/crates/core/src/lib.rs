//! Galerkin and algebraic subgrid-scale (SGS) stabilized P1 finite elements for
//! the steady advection-diffusion-reaction equation with variable coefficients
//! on the unit square.

// NaN must fail validation, so `!(x > 0.0)` is deliberate; index loops mirror
// the element formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod assembly;
pub mod config;
pub mod error;
pub mod estimate;
pub mod export;
pub mod harness;
pub mod linalg;
pub mod mesh;
pub mod problem;
pub mod quadrature;
pub mod stabilization;

pub use error::{Error, Result};
