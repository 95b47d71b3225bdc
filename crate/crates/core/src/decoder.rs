//! Recovering the composed polynomial from broadcast node results.
//!
//! [`rs_decode`] is a Berlekamp–Welch decoder: with `e` allowed errors it
//! looks for a monic error locator `E` of degree `e` and `Q` of degree at most
//! `D + e` such that `y_i E(alpha_i) = Q(alpha_i)` at every present entry, and
//! returns `Q / E`. An inconsistent system, a nonzero remainder, or a result
//! that disagrees with more than `e` entries all mean the entries are not
//! within `e` errors of any degree-`D` polynomial, reported as
//! [`DecodeOutcome::Failure`].

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::adversary::VersionAssignment;
use crate::algebra::{Fp, Matrix, Polynomial};
use crate::lcc::EncodingParams;
use crate::verification::AcceptSet;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecodeError {
    #[error("{present} evaluations present, need at least {required}")]
    InsufficientEvaluations { present: usize, required: usize },
    #[error("broadcast set lists node {0} twice")]
    DuplicateNode(usize),
    #[error("version assignment does not cover node {0}")]
    UnassignedNode(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BroadcastEntry {
    pub node: usize,
    pub alpha: Fp,
    /// `None` when the node stayed silent.
    pub y: Option<Fp>,
}

/// The results `g_1 .. g_N` every node holds after the broadcast round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BroadcastSet {
    entries: Vec<BroadcastEntry>,
}

impl BroadcastSet {
    pub fn new(entries: Vec<BroadcastEntry>) -> Result<Self, DecodeError> {
        let mut seen = BTreeSet::new();
        for e in &entries {
            if !seen.insert(e.node) {
                return Err(DecodeError::DuplicateNode(e.node));
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[BroadcastEntry] {
        &self.entries
    }

    pub fn present(&self) -> impl Iterator<Item = (usize, Fp, Fp)> + '_ {
        self.entries.iter().filter_map(|e| e.y.map(|y| (e.node, e.alpha, y)))
    }

    pub fn present_count(&self) -> usize {
        self.entries.iter().filter(|e| e.y.is_some()).count()
    }

    fn subset(&self, nodes: &BTreeSet<usize>) -> BroadcastSet {
        BroadcastSet {
            entries: self
                .entries
                .iter()
                .filter(|e| nodes.contains(&e.node))
                .copied()
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DecodeOutcome {
    Recovered {
        poly: Polynomial,
        /// Present entries the recovered polynomial disagrees with.
        error_positions: BTreeSet<usize>,
    },
    Failure {
        diagnostics: String,
    },
}

impl DecodeOutcome {
    pub fn is_recovered(&self) -> bool {
        matches!(self, DecodeOutcome::Recovered { .. })
    }

    pub fn poly(&self) -> Option<&Polynomial> {
        match self {
            DecodeOutcome::Recovered { poly, .. } => Some(poly),
            DecodeOutcome::Failure { .. } => None,
        }
    }
}

/// Berlekamp–Welch decoding of the present entries of `b`.
///
/// Silent entries are dropped before decoding and `max_errors` applies to the
/// remaining ones.
pub fn rs_decode(b: &BroadcastSet, degree_bound: usize, max_errors: usize) -> Result<DecodeOutcome, DecodeError> {
    let pts: Vec<(usize, Fp, Fp)> = b.present().collect();
    let required = degree_bound + 1 + 2 * max_errors;
    if pts.len() < required {
        return Err(DecodeError::InsufficientEvaluations {
            present: pts.len(),
            required,
        });
    }
    let field = pts[0].1.field();
    let e = max_errors;
    let q_len = degree_bound + e + 1;

    // unknowns: E_0..E_{e-1} (E_e = 1), then Q_0..Q_{D+e}
    let mut sys = Matrix::zeros(field, pts.len(), e + q_len);
    // sum_{j<e} E_j y a^j - sum_j Q_j a^j = -y a^e
    let mut rhs = Vec::with_capacity(pts.len());
    for (i, &(_, alpha, y)) in pts.iter().enumerate() {
        let mut pw = field.one();
        for j in 0..q_len {
            if j < e {
                sys[(i, j)] = y * pw;
            }
            sys[(i, e + j)] = -pw;
            pw *= alpha;
        }
        rhs.push(-(y * alpha.pow(e as u64)));
    }
    let Some(sol) = sys.solve(&rhs) else {
        return Ok(DecodeOutcome::Failure {
            diagnostics: format!("no (E, Q) pair explains the {} entries within {e} errors", pts.len()),
        });
    };

    let mut e_coeffs = sol[..e].to_vec();
    e_coeffs.push(field.one());
    let locator = Polynomial::new(e_coeffs);
    let numerator = Polynomial::new(sol[e..].to_vec());
    let (poly, rem) = numerator.div_rem(&locator);
    if !rem.is_zero() {
        return Ok(DecodeOutcome::Failure {
            diagnostics: "error locator does not divide Q".into(),
        });
    }
    if poly.degree().is_some_and(|d| d > degree_bound) {
        return Ok(DecodeOutcome::Failure {
            diagnostics: format!("quotient exceeds degree bound {degree_bound}"),
        });
    }
    let error_positions: BTreeSet<usize> = pts
        .iter()
        .filter(|&&(_, alpha, y)| poly.eval(alpha) != y)
        .map(|&(node, _, _)| node)
        .collect();
    if error_positions.len() > e {
        return Ok(DecodeOutcome::Failure {
            diagnostics: format!("{} disagreements exceed max_errors {e}", error_positions.len()),
        });
    }
    Ok(DecodeOutcome::Recovered { poly, error_positions })
}

/// Per-shard verification values `h_k = poly(omega_k)`.
pub fn recover_outputs(poly: &Polynomial, params: &EncodingParams) -> Vec<Fp> {
    params.omegas().iter().map(|&w| poly.eval(w)).collect()
}

/// `e_k = 1` iff `h_k` is in the accept set.
pub fn accept_bits(h: &[Fp], accept: &AcceptSet) -> Vec<bool> {
    h.iter().map(|&x| accept.contains(x)).collect()
}

/// Decoding when the version assignment is known: each partition of nodes that
/// received the same version tuple lies on its own composed polynomial, so
/// partitions are decoded separately.
///
/// `max_errors` bounds the corrupt entries across the whole set. A partition
/// with `s` present entries is decoded at radius `min(max_errors,
/// floor((s - D - 1) / 2))`; its result is only trusted when
/// `s - D - disagreements > max_errors`, since any other degree-`D`
/// polynomial would then need more than `max_errors` corruptions inside that
/// partition. Trusted results must agree at `honest_points`; the first one in
/// partition order is returned.
pub fn known_behavior_decode(
    b: &BroadcastSet,
    assignment: &VersionAssignment,
    degree_bound: usize,
    max_errors: usize,
    honest_points: &[Fp],
) -> Result<DecodeOutcome, DecodeError> {
    for e in b.entries() {
        if assignment.tuple(e.node).is_none() {
            return Err(DecodeError::UnassignedNode(e.node));
        }
    }
    let listed: BTreeSet<usize> = b.entries().iter().map(|e| e.node).collect();
    let cells: Vec<BroadcastSet> = assignment
        .partition()
        .into_iter()
        .map(|(_, nodes)| b.subset(&nodes.into_iter().filter(|n| listed.contains(n)).collect()))
        .collect();

    let certify_at = degree_bound + 1 + max_errors;
    let largest = cells.iter().map(BroadcastSet::present_count).max().unwrap_or(0);
    if largest < certify_at {
        return Err(DecodeError::InsufficientEvaluations {
            present: largest,
            required: certify_at,
        });
    }

    let candidates: Vec<Option<DecodeOutcome>> = cells
        .par_iter()
        .map(|cell| {
            let s = cell.present_count();
            if s < certify_at {
                return None;
            }
            let radius = max_errors.min((s - degree_bound - 1) / 2);
            match rs_decode(cell, degree_bound, radius) {
                Ok(DecodeOutcome::Recovered { poly, error_positions })
                    if s - degree_bound - error_positions.len() > max_errors =>
                {
                    Some(DecodeOutcome::Recovered { poly, error_positions })
                }
                _ => None,
            }
        })
        .collect();

    let trusted: Vec<&DecodeOutcome> = candidates.iter().flatten().collect();
    let Some(first) = trusted.first() else {
        return Ok(DecodeOutcome::Failure {
            diagnostics: "no partition decodes unambiguously".into(),
        });
    };
    let reference: Vec<Fp> = honest_points.iter().map(|&w| first.poly().unwrap().eval(w)).collect();
    for other in &trusted[1..] {
        let vals: Vec<Fp> = honest_points.iter().map(|&w| other.poly().unwrap().eval(w)).collect();
        if vals != reference {
            return Ok(DecodeOutcome::Failure {
                diagnostics: "partitions disagree on honest-shard outputs".into(),
            });
        }
    }
    Ok((*first).clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::{assign_versions, AssignmentStrategy};
    use crate::algebra::{lagrange_interpolate, PrimeField};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn set_from(f: PrimeField, alphas: &[u64], ys: &[Option<u64>]) -> BroadcastSet {
        BroadcastSet::new(
            alphas
                .iter()
                .zip(ys)
                .enumerate()
                .map(|(n, (&a, &y))| BroadcastEntry {
                    node: n,
                    alpha: f.elem(a),
                    y: y.map(|v| f.elem(v)),
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn clean_codeword_gf7() {
        let f = PrimeField::new(7).unwrap();
        let b = set_from(f, &[1, 2, 3, 4, 5], &[Some(2), Some(3), Some(4), Some(5), Some(6)]);
        let out = rs_decode(&b, 1, 1).unwrap();
        let DecodeOutcome::Recovered { poly, error_positions } = out else {
            panic!("expected recovery")
        };
        assert_eq!(poly, Polynomial::new(vec![f.one(), f.one()]));
        assert!(error_positions.is_empty());
    }

    #[test]
    fn single_error_gf7_matches_brute_force() {
        let f = PrimeField::new(7).unwrap();
        let alphas = [1u64, 2, 3, 4, 5];
        let ys = [Some(2), Some(3), Some(0), Some(5), Some(6)];
        let b = set_from(f, &alphas, &ys);

        // brute force: every degree <= 1 polynomial within one disagreement
        let mut fits = Vec::new();
        for c0 in 0..7 {
            for c1 in 0..7 {
                let p = Polynomial::new(vec![f.elem(c0), f.elem(c1)]);
                let bad = alphas
                    .iter()
                    .zip(&ys)
                    .filter(|(&a, y)| p.eval(f.elem(a)).value() != y.unwrap())
                    .count();
                if bad <= 1 {
                    fits.push(p);
                }
            }
        }
        assert_eq!(fits.len(), 1);

        let DecodeOutcome::Recovered { poly, error_positions } = rs_decode(&b, 1, 1).unwrap() else {
            panic!("expected recovery")
        };
        assert_eq!(poly, fits[0]);
        assert_eq!(error_positions, BTreeSet::from([2]));
    }

    #[test]
    fn insufficient_is_an_error_not_a_failure() {
        let f = PrimeField::new(7).unwrap();
        let b = set_from(f, &[1, 2, 3, 4], &[Some(2), None, Some(4), Some(5)]);
        assert_eq!(
            rs_decode(&b, 1, 1),
            Err(DecodeError::InsufficientEvaluations {
                present: 3,
                required: 4
            })
        );
    }

    #[test]
    fn duplicate_nodes_rejected() {
        let f = PrimeField::new(7).unwrap();
        let e = BroadcastEntry {
            node: 1,
            alpha: f.one(),
            y: None,
        };
        assert_eq!(BroadcastSet::new(vec![e, e]), Err(DecodeError::DuplicateNode(1)));
    }

    #[test]
    fn interleaved_versions_fail() {
        let f = PrimeField::mersenne31();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let deg = 4;
        let p1 = Polynomial::new((0..=deg).map(|_| f.random(&mut rng)).collect());
        let p2 = Polynomial::new((0..=deg).map(|_| f.random(&mut rng)).collect());
        let entries: Vec<BroadcastEntry> = (0..12)
            .map(|n| {
                let alpha = f.elem(10 + n as u64);
                let p = if n % 2 == 0 { &p1 } else { &p2 };
                BroadcastEntry {
                    node: n,
                    alpha,
                    y: Some(p.eval(alpha)),
                }
            })
            .collect();
        let b = BroadcastSet::new(entries.clone()).unwrap();

        // oracle: any polynomial within one error agrees with 11 entries, and
        // is pinned down by the first deg+1 of them
        for skip in 0..12 {
            let kept: Vec<&BroadcastEntry> = entries.iter().filter(|e| e.node != skip).collect();
            let pts: Vec<(Fp, Fp)> = kept[..=deg].iter().map(|e| (e.alpha, e.y.unwrap())).collect();
            let cand = lagrange_interpolate(&pts).unwrap();
            assert!(kept.iter().any(|e| cand.eval(e.alpha) != e.y.unwrap()));
        }
        assert!(!rs_decode(&b, deg, 1).unwrap().is_recovered());
    }

    #[test]
    fn zero_errors_is_interpolation() {
        let f = PrimeField::mersenne31();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = Polynomial::new((0..4).map(|_| f.random(&mut rng)).collect());
        let entries: Vec<BroadcastEntry> = (0..4)
            .map(|n| {
                let alpha = f.elem(n as u64 + 1);
                BroadcastEntry {
                    node: n,
                    alpha,
                    y: Some(p.eval(alpha)),
                }
            })
            .collect();
        let b = BroadcastSet::new(entries).unwrap();
        assert_eq!(rs_decode(&b, 3, 0).unwrap().poly(), Some(&p));
    }

    #[test]
    fn outputs_and_bits() {
        let f = PrimeField::new(97).unwrap();
        let params = crate::lcc::EncodingParams::default_layout(f, 3, 5, 1).unwrap();
        assert_eq!(recover_outputs(&Polynomial::zero(), &params), vec![f.zero(); 3]);
        let h = [f.elem(0), f.elem(5), f.elem(0)];
        assert_eq!(accept_bits(&h, &AcceptSet::zero(f)), vec![true, false, true]);
        assert_eq!(accept_bits(&h, &AcceptSet::All), vec![true; 3]);
    }

    #[test]
    fn known_behavior_single_tuple_matches_rs_decode() {
        let f = PrimeField::mersenne31();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let p = Polynomial::new((0..3).map(|_| f.random(&mut rng)).collect());
        let mut entries: Vec<BroadcastEntry> = (0..9)
            .map(|n| {
                let alpha = f.elem(n as u64 + 5);
                BroadcastEntry {
                    node: n,
                    alpha,
                    y: Some(p.eval(alpha)),
                }
            })
            .collect();
        entries[4].y = Some(f.random(&mut rng));
        let b = BroadcastSet::new(entries).unwrap();
        let nodes: Vec<usize> = (0..9).collect();
        let a = VersionAssignment::uniform(1, vec![], &nodes);
        let known = known_behavior_decode(&b, &a, 2, 3, &[f.one()]).unwrap();
        assert_eq!(known, rs_decode(&b, 2, 3).unwrap());
    }

    #[test]
    fn known_behavior_insufficient_partitions() {
        let f = PrimeField::mersenne31();
        let nodes: Vec<usize> = (0..8).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = assign_versions(&nodes, &AssignmentStrategy::Balanced, 2, &[0], 4, &mut rng).unwrap();
        let entries = nodes
            .iter()
            .map(|&n| BroadcastEntry {
                node: n,
                alpha: f.elem(n as u64 + 10),
                y: Some(f.elem(n as u64)),
            })
            .collect();
        let b = BroadcastSet::new(entries).unwrap();
        assert!(matches!(
            known_behavior_decode(&b, &a, 4, 0, &[f.one()]),
            Err(DecodeError::InsufficientEvaluations {
                present: 4,
                required: 5
            })
        ));
        let partial = VersionAssignment::uniform(2, vec![0], &nodes[..3]);
        assert_eq!(
            known_behavior_decode(&b, &partial, 4, 0, &[f.one()]),
            Err(DecodeError::UnassignedNode(3))
        );
    }
}
