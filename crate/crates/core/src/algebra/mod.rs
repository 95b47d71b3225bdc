//! Exact arithmetic substrate: prime fields, polynomials and dense matrices.

pub mod field;
pub mod matrix;
pub mod poly;

pub use field::{FieldError, Fp, PrimeField};
pub use matrix::{vandermonde, Matrix};
pub use poly::{lagrange_interpolate, PolyError, Polynomial};
