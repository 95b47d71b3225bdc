//! Linear-algebraic recovery-threshold analysis.
//!
//! Under a discrepancy attack the honest results lie on one composed
//! polynomial per version tuple. The unknowns are the coefficients of those
//! polynomials (one block of `d(K-1)+1` per tuple, highest degree first)
//! followed by the honest shards' outputs `Z`. The stacked system `D` ties
//! them together:
//!
//! - `A`: each cell's observations, a block-diagonal Vandermonde;
//! - `B`: honest shards evaluate identically under tuple 0 and every other tuple;
//! - `C`: an adversarial shard evaluates identically under tuples that agree on
//!   its version;
//! - the last block reads `Z` off tuple 0.
//!
//! `Z` is determined by linear decoding iff no nullspace vector of `D` has a
//! nonzero `Z` part.

use std::io::Write;
use std::ops::RangeInclusive;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::adversary::{all_version_tuples, assign_versions, AdversaryError, AssignmentStrategy};
use crate::algebra::{vandermonde, Fp, Matrix, PrimeField};
use crate::lcc::{EncodingParams, LccError, VersionTuple};

#[derive(Debug, Error)]
pub enum ThresholdError {
    #[error(transparent)]
    Adversary(#[from] AdversaryError),
    #[error(transparent)]
    Encoding(#[from] LccError),
    #[error("expected {expected} cells, got {got}")]
    CellCount { expected: usize, got: usize },
    #[error("node {0} is out of range or appears twice")]
    BadNode(usize),
    #[error("beta' = {beta_prime} exceeds K = {k}")]
    TooManyProducers { beta_prime: usize, k: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Producers `r` on which two version tuples agree.
pub fn versions_match_set(vi: &VersionTuple, vj: &VersionTuple) -> Vec<usize> {
    assert_eq!(vi.0.len(), vj.0.len(), "tuples must have equal length");
    vi.0.iter()
        .zip(&vj.0)
        .enumerate()
        .filter(|(_, (a, b))| a == b)
        .map(|(r, _)| r)
        .collect()
}

/// Attack geometry: the adversarial producers are shards `0..beta_prime` and
/// `cells[i]` lists the nodes (after removal) whose view realizes `tuples[i]`.
#[derive(Debug, Clone)]
pub struct AnalysisParams {
    pub encoding: EncodingParams,
    pub beta: usize,
    pub beta_prime: usize,
    pub v: usize,
    pub tuples: Vec<VersionTuple>,
    pub cells: Vec<Vec<usize>>,
}

impl AnalysisParams {
    pub fn new(
        encoding: EncodingParams,
        beta: usize,
        beta_prime: usize,
        v: usize,
        cells: Vec<Vec<usize>>,
    ) -> Result<Self, ThresholdError> {
        if v == 0 {
            return Err(AdversaryError::NoVersions.into());
        }
        if beta_prime > encoding.k() {
            return Err(ThresholdError::TooManyProducers {
                beta_prime,
                k: encoding.k(),
            });
        }
        let tuples = all_version_tuples(v, beta_prime);
        if cells.len() != tuples.len() {
            return Err(ThresholdError::CellCount {
                expected: tuples.len(),
                got: cells.len(),
            });
        }
        let mut seen = vec![false; encoding.n()];
        for &node in cells.iter().flatten() {
            if node >= seen.len() || seen[node] {
                return Err(ThresholdError::BadNode(node));
            }
            seen[node] = true;
        }
        Ok(Self {
            encoding,
            beta,
            beta_prime,
            v,
            tuples,
            cells,
        })
    }

    /// Drops nodes `0..2*beta`, then deals the rest round-robin over the
    /// tuples with every cell capped at `d(K-1)` nodes.
    pub fn balanced(
        encoding: EncodingParams,
        beta: usize,
        beta_prime: usize,
        v: usize,
    ) -> Result<Self, ThresholdError> {
        let cap = encoding.composed_degree();
        Self::dealt(encoding, beta, beta_prime, v, Some(cap))
    }

    /// As [`AnalysisParams::balanced`] without the cap.
    pub fn round_robin(
        encoding: EncodingParams,
        beta: usize,
        beta_prime: usize,
        v: usize,
    ) -> Result<Self, ThresholdError> {
        Self::dealt(encoding, beta, beta_prime, v, None)
    }

    fn dealt(
        encoding: EncodingParams,
        beta: usize,
        beta_prime: usize,
        v: usize,
        cap: Option<usize>,
    ) -> Result<Self, ThresholdError> {
        let kept: Vec<usize> = (2 * beta..encoding.n()).collect();
        let producers: Vec<usize> = (0..beta_prime).collect();
        let cap = cap.unwrap_or(kept.len().max(1));
        // the balanced strategy draws nothing from the rng
        let mut rng = crate::rng::stream(0, &[]);
        let assignment = assign_versions(&kept, &AssignmentStrategy::Balanced, v, &producers, cap, &mut rng)?;
        let cells = assignment.partition().into_iter().map(|(_, nodes)| nodes).collect();
        Self::new(encoding, beta, beta_prime, v, cells)
    }

    pub fn partition_sizes(&self) -> Vec<usize> {
        self.cells.iter().map(Vec::len).collect()
    }

    /// Unknowns per tuple block.
    pub fn block_width(&self) -> usize {
        self.encoding.composed_degree() + 1
    }

    pub fn honest_shards(&self) -> std::ops::Range<usize> {
        self.beta_prime..self.encoding.k()
    }
}

#[derive(Debug, Clone)]
pub struct SystemMatrices {
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
    /// `[Van(omega_H) on tuple 0 | -I]`.
    pub tie: Matrix,
    pub d: Matrix,
    pub block_width: usize,
    pub tuple_count: usize,
    pub z_count: usize,
}

impl SystemMatrices {
    pub fn z_offset(&self) -> usize {
        self.block_width * self.tuple_count
    }

    /// Block `i` of a solution vector.
    pub fn lambda<'a>(&self, x: &'a [Fp], i: usize) -> &'a [Fp] {
        &x[i * self.block_width..(i + 1) * self.block_width]
    }

    pub fn zeta<'a>(&self, x: &'a [Fp]) -> &'a [Fp] {
        &x[self.z_offset()..]
    }
}

/// Pairs `(r, i, j)`: tuples `i` and `j` agree on producer `r`. Each
/// producer and version value contributes a star from the first tuple with
/// that value, which spans the same rows as all agreeing pairs.
pub fn agreement_links(tuples: &[VersionTuple], v: usize, beta_prime: usize) -> Vec<(usize, usize, usize)> {
    let mut links = Vec::new();
    for r in 0..beta_prime {
        for a in 0..v {
            let members: Vec<usize> = (0..tuples.len()).filter(|&i| tuples[i].0[r] == a).collect();
            if let Some((&hub, rest)) = members.split_first() {
                links.extend(rest.iter().map(|&j| (r, hub, j)));
            }
        }
    }
    links
}

pub fn build_system(params: &AnalysisParams) -> SystemMatrices {
    let enc = &params.encoding;
    let field = enc.field();
    let degree = enc.composed_degree();
    let w = params.block_width();
    let t = params.tuples.len();
    let honest: Vec<usize> = params.honest_shards().collect();
    let z_count = honest.len();
    let cols = t * w + z_count;
    let van_row = |x: Fp| vandermonde(field, &[x], degree);
    let neg_van_row = |x: Fp| {
        let row: Vec<Fp> = vandermonde(field, &[x], degree).row(0).iter().map(|&e| -e).collect();
        Matrix::from_rows(field, w, &[row])
    };

    let a_rows: usize = params.cells.iter().map(Vec::len).sum();
    let mut a = Matrix::zeros(field, a_rows, cols);
    let mut r0 = 0;
    for (i, cell) in params.cells.iter().enumerate() {
        let xs: Vec<Fp> = cell.iter().map(|&n| enc.alpha(n)).collect();
        a.set_block(r0, i * w, &vandermonde(field, &xs, degree));
        r0 += cell.len();
    }

    let mut b = Matrix::zeros(field, t.saturating_sub(1) * z_count, cols);
    let mut row = 0;
    for i in 1..t {
        for &k in &honest {
            b.set_block(row, 0, &van_row(enc.omega(k)));
            b.set_block(row, i * w, &neg_van_row(enc.omega(k)));
            row += 1;
        }
    }

    let links = agreement_links(&params.tuples, params.v, params.beta_prime);
    let mut c = Matrix::zeros(field, links.len(), cols);
    for (row, &(r, i, j)) in links.iter().enumerate() {
        c.set_block(row, i * w, &van_row(enc.omega(r)));
        c.set_block(row, j * w, &neg_van_row(enc.omega(r)));
    }

    let mut tie = Matrix::zeros(field, z_count, cols);
    for (h, &k) in honest.iter().enumerate() {
        tie.set_block(h, 0, &van_row(enc.omega(k)));
        tie[(h, t * w + h)] = -field.one();
    }

    let d = Matrix::vstack(field, cols, &[&a, &b, &c, &tie]);
    SystemMatrices {
        a,
        b,
        c,
        tie,
        d,
        block_width: w,
        tuple_count: t,
        z_count,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RankReport {
    pub rank_d: usize,
    pub rank_d_reduced: usize,
    pub unique_z: bool,
    /// A nullspace vector of `D` with nonzero `Z` part, when one exists.
    pub witness: Option<Vec<Fp>>,
}

pub fn unique_decodability(sys: &SystemMatrices) -> RankReport {
    let offset = sys.z_offset();
    let rank_d = sys.d.rank();
    let coefficient_cols: Vec<usize> = (0..offset).collect();
    let rank_d_reduced = sys.d.select_columns(&coefficient_cols).rank();
    let unique_z = rank_d == rank_d_reduced + sys.z_count;
    let witness = if unique_z {
        None
    } else {
        let found = sys
            .d
            .nullspace_basis()
            .into_iter()
            .find(|x| sys.zeta(x).iter().any(|e| !e.is_zero()));
        Some(found.expect("rank deficit in Z columns implies a nullspace vector with nonzero Z part"))
    };
    let report = RankReport {
        rank_d,
        rank_d_reduced,
        unique_z,
        witness,
    };
    if let Some(w) = &report.witness {
        assert!(witness_is_valid(sys, w), "extracted witness failed verification");
    }
    report
}

/// `D x = 0` and `x` has a nonzero `Z` part.
pub fn witness_is_valid(sys: &SystemMatrices, x: &[Fp]) -> bool {
    x.len() == sys.d.cols() && sys.zeta(x).iter().any(|e| !e.is_zero()) && sys.d.mul_vec(x).iter().all(Fp::is_zero)
}

fn pow_i64(base: usize, exp: usize) -> i64 {
    (base as i64).pow(exp as u32)
}

/// `v^b'(d-1)(K-1) + v b' + K - b' + 2 beta`.
pub fn theorem_bound(v: usize, beta_prime: usize, d: usize, k: usize, beta: usize) -> i64 {
    let (v_, bp, d_, k_, b) = (v as i64, beta_prime as i64, d as i64, k as i64, beta as i64);
    pow_i64(v, beta_prime) * (d_ - 1) * (k_ - 1) + v_ * bp + k_ - bp + 2 * b
}

/// `v^b'(d(K-1)+1) + 2 beta`: enough for one cell to decode on its own.
pub fn known_behavior_upper_bound(v: usize, beta_prime: usize, d: usize, k: usize, beta: usize) -> i64 {
    pow_i64(v, beta_prime) * (d as i64 * (k as i64 - 1) + 1) + 2 * beta as i64
}

/// Unknowns left free by `A` just below the threshold:
/// `v^b'(d(K-1)+1) - N'` with `N' = v^b'(d-1)(K-1) + v b' + K - b' - 1`.
pub fn free_variable_count(v: usize, beta_prime: usize, d: usize, k: usize) -> i64 {
    let n_prime = theorem_bound(v, beta_prime, d, k, 0) - 1;
    pow_i64(v, beta_prime) * (d as i64 * (k as i64 - 1) + 1) - n_prime
}

/// The same count as rows of `B` and `C` plus one.
pub fn free_variable_count_by_rows(v: usize, beta_prime: usize, k: usize) -> i64 {
    let t = pow_i64(v, beta_prime);
    let (bp, k_) = (beta_prime as i64, k as i64);
    (t - 1) * (k_ - bp) + (t - v as i64) * bp + 1
}

/// Everything but N for a threshold sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepTemplate {
    #[serde(skip)]
    pub field: PrimeField,
    pub k: usize,
    pub d: usize,
    pub beta: usize,
    pub beta_prime: usize,
    pub v: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SweepRow {
    pub n: usize,
    pub partition_sizes: Vec<usize>,
    pub rank_d: usize,
    pub rank_d_reduced: usize,
    /// Whether the balanced construction fits in `n` nodes.
    pub feasible: bool,
    /// False only when the construction makes `Z` ambiguous.
    pub unique_z: bool,
}

fn sweep_point(template: &SweepTemplate, n: usize, strict: bool) -> Result<SweepRow, ThresholdError> {
    let enc = EncodingParams::default_layout(template.field, template.k, n, template.d)?;
    let (beta, bp, v) = (template.beta, template.beta_prime, template.v);
    let (params, feasible) = match AnalysisParams::balanced(enc.clone(), beta, bp, v) {
        Ok(p) => (p, true),
        Err(ThresholdError::Adversary(e @ AdversaryError::InfeasiblePartition { .. })) => {
            if strict {
                return Err(e.into());
            }
            (AnalysisParams::round_robin(enc, beta, bp, v)?, false)
        }
        Err(e) => return Err(e),
    };
    let report = unique_decodability(&build_system(&params));
    Ok(SweepRow {
        n,
        partition_sizes: params.partition_sizes(),
        rank_d: report.rank_d,
        rank_d_reduced: report.rank_d_reduced,
        feasible,
        unique_z: report.unique_z || !feasible,
    })
}

/// One row per N, in order. Infeasible points are reported as not
/// attackable, or returned as an error when `strict`.
pub fn empirical_threshold(
    template: &SweepTemplate,
    n_range: RangeInclusive<usize>,
    strict: bool,
) -> Result<Vec<SweepRow>, ThresholdError> {
    let ns: Vec<usize> = n_range.collect();
    ns.par_iter().map(|&n| sweep_point(template, n, strict)).collect()
}

/// Smallest N in the sweep above which every row is uniquely decodable.
pub fn transition(rows: &[SweepRow]) -> Option<usize> {
    let last_ambiguous = rows.iter().rposition(|r| !r.unique_z);
    match last_ambiguous {
        Some(i) => rows.get(i + 1).map(|r| r.n),
        None => rows.first().map(|r| r.n),
    }
}

pub fn write_sweep_csv<W: Write>(
    mut out: W,
    template: &SweepTemplate,
    rows: &[SweepRow],
) -> Result<(), ThresholdError> {
    writeln!(
        out,
        "# p={} K={} d={} beta={} beta_prime={} v={}",
        template.field.modulus(),
        template.k,
        template.d,
        template.beta,
        template.beta_prime,
        template.v
    )?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["N", "partition_sizes", "rank_D", "rank_D_reduced", "unique_Z"])?;
    for r in rows {
        let mut sizes = r
            .partition_sizes
            .iter()
            .map(usize::to_string)
            .collect::<Vec<_>>()
            .join(";");
        if !r.feasible {
            sizes.push_str(" (uncapped)");
        }
        w.write_record([
            r.n.to_string(),
            sizes,
            r.rank_d.to_string(),
            r.rank_d_reduced.to_string(),
            r.unique_z.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
