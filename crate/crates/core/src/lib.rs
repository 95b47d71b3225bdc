//! A finite-field laboratory for coded blockchain sharding.
//!
//! Nodes verify Lagrange-coded combinations of every shard's proposed block
//! and recover the per-shard verification results by Reed–Solomon decoding.
//! This crate simulates that protocol, mounts the discrepancy attack (an
//! adversarial producer unicasting different block versions to different
//! nodes), and checks the resulting recovery-threshold bound by exact rank
//! analysis of the linear decoding system.
//!
//! Modules, bottom-up:
//!
//! - [`algebra`]: `GF(p)` elements, polynomials, matrices, rank and nullspace.
//! - [`verification`]: the pluggable verification polynomial `f` and accept set.
//! - [`lcc`]: Lagrange encoding and composed polynomials.
//! - [`decoder`]: Berlekamp–Welch decoding and the known-behavior decoder.
//! - [`adversary`]: version forging, version assignment, result corruption.
//! - [`sim`]: the epoch-driven protocol simulation.
//! - [`threshold`]: the block linear system behind the threshold bound.
//! - [`experiment`]: JSON-configured scenarios behind the `polyshard` binary.

pub mod adversary;
pub mod algebra;
pub mod decoder;
pub mod experiment;
pub mod lcc;
pub mod rng;
pub mod sim;
pub mod threshold;
pub mod verification;

pub use algebra::{Fp, Matrix, Polynomial, PrimeField};
