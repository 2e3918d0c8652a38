//! Solver and verification harness for the whole-space Dirichlet problem
//! `int F(u(x+y) + u(x-y) - 2u(x)) |y|^(-n-sigma) dy = g(x, u - phi)`
//! with a degenerate internal nonlinearity `F`.

// `!(x > 0.0)` is used on purpose so that NaN parameters are rejected;
// quadrature tables keep the digits they were published with.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod barriers;
pub mod config;
pub mod envelopes;
pub mod error;
pub mod gauss;
pub mod model;
pub mod operator;
pub mod quadrature;
pub mod solver;
pub mod spline;
pub mod verify;

pub use error::{Error, Result};
pub use model::*;
