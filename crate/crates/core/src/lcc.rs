//! Lagrange coded computing with distributed encoding.
//!
//! Shard `k` is pinned to the public point `omega_k`, node `n` to `alpha_n`.
//! A node that received blocks `X_1..X_K` evaluates their Lagrange interpolant
//! `q(z)` at its own `alpha_n`; applying a degree-`d` verification function to
//! that coded block yields a point on `f(q(z), ...)`, a polynomial of degree
//! at most `d(K-1)`.

use serde::Serialize;
use thiserror::Error;

use crate::algebra::{Fp, Polynomial, PrimeField};
use crate::verification::VerificationFn;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LccError {
    #[error("need at least one shard, one node and degree >= 1 (got K={k}, N={n}, d={d})")]
    Degenerate { k: usize, n: usize, d: usize },
    #[error("evaluation point {0} is used twice")]
    DuplicatePoint(u64),
    #[error("composed polynomial has degree {degree}, above the bound {bound}")]
    DegreeOverflow { degree: usize, bound: usize },
}

/// Public encoding constants.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodingParams {
    field: PrimeField,
    omegas: Vec<Fp>,
    alphas: Vec<Fp>,
    d: usize,
}

impl EncodingParams {
    pub fn new(field: PrimeField, omegas: Vec<Fp>, alphas: Vec<Fp>, d: usize) -> Result<Self, LccError> {
        if omegas.is_empty() || alphas.is_empty() || d == 0 {
            return Err(LccError::Degenerate {
                k: omegas.len(),
                n: alphas.len(),
                d,
            });
        }
        let mut all: Vec<Fp> = omegas.iter().chain(&alphas).copied().collect();
        all.sort();
        if let Some(w) = all.windows(2).find(|w| w[0] == w[1]) {
            return Err(LccError::DuplicatePoint(w[0].value()));
        }
        Ok(Self {
            field,
            omegas,
            alphas,
            d,
        })
    }

    /// `omega = 1..=K`, `alpha = K+1..=K+N`.
    pub fn default_layout(field: PrimeField, k: usize, n: usize, d: usize) -> Result<Self, LccError> {
        let omegas = (1..=k as u64).map(|x| field.elem(x)).collect();
        let alphas = (1..=n as u64).map(|x| field.elem(k as u64 + x)).collect();
        Self::new(field, omegas, alphas, d)
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn k(&self) -> usize {
        self.omegas.len()
    }

    pub fn n(&self) -> usize {
        self.alphas.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn omegas(&self) -> &[Fp] {
        &self.omegas
    }

    pub fn alphas(&self) -> &[Fp] {
        &self.alphas
    }

    pub fn omega(&self, k: usize) -> Fp {
        self.omegas[k]
    }

    pub fn alpha(&self, n: usize) -> Fp {
        self.alphas[n]
    }

    /// Degree bound `d(K-1)` of the composed polynomial.
    pub fn composed_degree(&self) -> usize {
        self.d * (self.k() - 1)
    }

    /// Unique-decoding radius `floor((present - D - 1) / 2)`, or `None` when
    /// fewer than `D + 1` evaluations are available.
    pub fn error_tolerance(&self, present: usize) -> Option<usize> {
        present.checked_sub(self.composed_degree() + 1).map(|slack| slack / 2)
    }
}

/// A block payload. Blocks are scalars in `GF(p)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct Block(pub Fp);

/// The K blocks one node received in an epoch, indexed by shard.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReceivedProposals {
    blocks: Vec<Block>,
}

impl ReceivedProposals {
    pub fn new(blocks: Vec<Block>) -> Self {
        Self { blocks }
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }
}

/// Versions received from each adversarial producer, in producer order.
/// Versions are 0-based.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct VersionTuple(pub Vec<usize>);

/// `l_k(z) = prod_{j != k} (z - omega_j) / (omega_k - omega_j)`.
pub fn lagrange_basis(params: &EncodingParams, k: usize, z: Fp) -> Fp {
    let wk = params.omega(k);
    let (num, den) = params
        .omegas()
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != k)
        .fold((params.field.one(), params.field.one()), |(num, den), (_, &wj)| {
            (num * (z - wj), den * (wk - wj))
        });
    num / den
}

/// `l_k` as an explicit polynomial.
pub fn lagrange_basis_poly(params: &EncodingParams, k: usize) -> Polynomial {
    let one = params.field.one();
    let wk = params.omega(k);
    let mut num = Polynomial::constant(one);
    let mut den = one;
    for (j, &wj) in params.omegas().iter().enumerate() {
        if j != k {
            num = &num * &Polynomial::linear_root(wj);
            den *= wk - wj;
        }
    }
    num.scale(den.inv().expect("omegas are distinct"))
}

/// The coded block `sum_k received[k] * l_k(alpha_n)` computed by node `n`.
pub fn encode_at_node(received: &ReceivedProposals, params: &EncodingParams, n: usize) -> Fp {
    assert_eq!(received.len(), params.k(), "one block per shard");
    let alpha = params.alpha(n);
    received
        .blocks()
        .iter()
        .enumerate()
        .fold(params.field.zero(), |acc, (k, b)| {
            acc + b.0 * lagrange_basis(params, k, alpha)
        })
}

/// The degree-`(K-1)` interpolant `q` with `q(omega_k) = view[k]`.
pub fn build_coded_poly(view: &ReceivedProposals, params: &EncodingParams) -> Polynomial {
    assert_eq!(view.len(), params.k(), "one block per shard");
    view.blocks()
        .iter()
        .enumerate()
        .fold(Polynomial::zero(), |acc, (k, b)| {
            &acc + &lagrange_basis_poly(params, k).scale(b.0)
        })
}

/// `f(q(z), history_1(z), ...)` by exact polynomial arithmetic.
pub fn compose_verification(
    q: &Polynomial,
    coded_history: &[Polynomial],
    f: &dyn VerificationFn,
    params: &EncodingParams,
) -> Result<Polynomial, LccError> {
    let composed = f.compose(q, coded_history);
    let bound = params.composed_degree();
    match composed.degree() {
        Some(degree) if degree > bound => Err(LccError::DegreeOverflow { degree, bound }),
        _ => Ok(composed),
    }
}
