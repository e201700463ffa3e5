//! Kronecker–Eisenstein series, generalized Dedekind sums and Eisenstein
//! cocycles over imaginary quadratic fields, and the partial zeta and
//! L-values built from them.

pub mod error;
pub mod euclid;
pub mod extension;
pub mod cocycle;
pub mod field;
pub mod fixtures;
pub mod kronecker;
pub mod lattice;
pub mod numerics;
pub mod recognize;
pub mod zeta;

pub use error::{Error, Result};
pub use numerics::{BigComplex, CellShape, Tolerance};
