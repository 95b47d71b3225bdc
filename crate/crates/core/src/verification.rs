//! Verification polynomials and accept sets.
//!
//! A verification function maps a proposed block and its shard's history to a
//! value; the block is accepted when that value lies in the accept set. The
//! coding scheme only needs `f` to be a polynomial of known total degree, so
//! it is modeled as a trait with both a pointwise evaluator and a symbolic
//! composer over polynomials.

use std::fmt::Debug;

use crate::algebra::{Fp, Polynomial};

pub trait VerificationFn: Debug + Send + Sync {
    /// Total degree `d`.
    fn degree(&self) -> usize;

    /// `f(proposal, history)`. `history` runs oldest first and always holds at
    /// least the genesis entry.
    fn eval(&self, proposal: Fp, history: &[Fp]) -> Fp;

    /// `f(proposal(z), history_1(z), ...)` as an explicit polynomial.
    fn compose(&self, proposal: &Polynomial, history: &[Polynomial]) -> Polynomial;

    /// A block whose verification output is zero, if one is easy to construct.
    fn zero_root(&self, _history: &[Fp]) -> Option<Fp> {
        None
    }
}

/// `f(x, history) = (x - a * last(history))^d`.
///
/// Over a field this vanishes exactly when `x = a * last`, so with the accept
/// set `{0}` a valid block always exists and validity depends on the history.
#[derive(Debug, Clone, Copy)]
pub struct ShiftedPower {
    pub a: Fp,
    pub d: usize,
}

impl VerificationFn for ShiftedPower {
    fn degree(&self) -> usize {
        self.d
    }

    fn eval(&self, proposal: Fp, history: &[Fp]) -> Fp {
        let last = history.last().copied().unwrap_or(proposal.zero_like());
        (proposal - self.a * last).pow(self.d as u64)
    }

    fn compose(&self, proposal: &Polynomial, history: &[Polynomial]) -> Polynomial {
        let base = match history.last() {
            Some(last) => proposal - &last.scale(self.a),
            None => proposal.clone(),
        };
        if self.d == 0 {
            return Polynomial::constant(self.a.one_like());
        }
        base.pow(self.d as u32)
    }

    fn zero_root(&self, history: &[Fp]) -> Option<Fp> {
        Some(self.a * *history.last()?)
    }
}

/// `f(x) = x^d`, ignoring history.
#[derive(Debug, Clone, Copy)]
pub struct PowerMap {
    pub d: usize,
}

impl VerificationFn for PowerMap {
    fn degree(&self) -> usize {
        self.d
    }

    fn eval(&self, proposal: Fp, _history: &[Fp]) -> Fp {
        proposal.pow(self.d as u64)
    }

    fn compose(&self, proposal: &Polynomial, _history: &[Polynomial]) -> Polynomial {
        if proposal.is_zero() {
            return Polynomial::zero();
        }
        proposal.pow(self.d as u32)
    }

    fn zero_root(&self, history: &[Fp]) -> Option<Fp> {
        history.first().map(Fp::zero_like)
    }
}

/// The set of verification outputs that affirm a block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AcceptSet {
    All,
    Values(Vec<Fp>),
}

impl AcceptSet {
    pub fn zero(field: crate::algebra::PrimeField) -> Self {
        AcceptSet::Values(vec![field.zero()])
    }

    pub fn contains(&self, h: Fp) -> bool {
        match self {
            AcceptSet::All => true,
            AcceptSet::Values(vals) => vals.contains(&h),
        }
    }
}
