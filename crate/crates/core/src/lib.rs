//! Spectral laboratory for the one-dimensional Bloch-Torrey operator
//! `-eps^2 d^2/dx^2 + b(x) x (.)` with `b(x) = (b0, 0, x)`, and for the scalar
//! model operators that govern its eigenvalue asymptotics.
//!
//! The crate discretizes each operator with finite differences on a uniform
//! Dirichlet grid, computes eigenvalues and resolvent norms with in-house
//! dense and banded complex linear algebra, and runs the verification
//! experiments exposed by the `btspec` command-line tool.

// NaN-rejecting guards are written as negated comparisons on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod airy;
pub mod asymptotics;
pub mod cli;
pub mod error;
pub mod grid;
pub mod linalg;
pub mod operators;
pub mod reduction;
pub mod rng;
pub mod spectra;
pub mod variational;

pub use error::{Error, Result};
pub use grid::{Grid1D, StencilOrder};
pub use linalg::{ComplexBandedMatrix, DenseComplexMatrix, EigenMethod, EigenResult};
pub use operators::{OperatorKind, OperatorSpec};
