//! Adversarial behavior: forging block versions, deciding which node gets
//! which version, and corrupting result broadcasts.
//!
//! Node `k < K` is the producer of shard `k`, so an adversarial producer is an
//! adversarial node whose index is also a shard index.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{Fp, PrimeField};
use crate::lcc::{Block, VersionTuple};
use crate::verification::VerificationFn;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AdversaryError {
    #[error("balanced partition infeasible: {nodes} nodes exceed {cells} cells x cap {cap}")]
    InfeasiblePartition { nodes: usize, cells: usize, cap: usize },
    #[error("v must be at least 1")]
    NoVersions,
    #[error("adversarial producer {0} is not an adversarial node")]
    ProducerNotAdversarial(usize),
    #[error("adversarial producer {producer} is not a shard index (K = {k})")]
    ProducerOutOfRange { producer: usize, k: usize },
    #[error("adversarial node {node} out of range (N = {n})")]
    NodeOutOfRange { node: usize, n: usize },
    #[error("cannot pick {beta_prime} producers from {beta} adversarial nodes below K")]
    TooFewProducers { beta_prime: usize, beta: usize },
    #[error("targeted assignment for node {0} is malformed")]
    BadTargetedTuple(usize),
    #[error("targeted assignment is missing node {0}")]
    MissingTargetedNode(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AssignmentStrategy {
    /// Round-robin over all version tuples.
    Balanced,
    /// Independent uniform tuple per node.
    Random,
    /// Explicit node -> tuple map.
    Targeted(BTreeMap<usize, VersionTuple>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BroadcastStrategy {
    Silent,
    Garbage,
    /// Broadcast the correct result for the first version tuple.
    HonestLooking,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForgeMode {
    AllRandom,
    /// Version 0 passes verification, the others are random.
    ValidFirst,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AdversaryConfig {
    pub adversarial_nodes: BTreeSet<usize>,
    pub adversarial_producers: Vec<usize>,
    pub v: usize,
    pub assignment: AssignmentStrategy,
    pub broadcast: BroadcastStrategy,
    pub forge: ForgeMode,
}

impl AdversaryConfig {
    /// Adversarial nodes `nodes`; the producers are the `beta_prime` lowest of
    /// them that are shard indices.
    pub fn with_lowest_producers(
        nodes: BTreeSet<usize>,
        beta_prime: usize,
        k: usize,
        v: usize,
    ) -> Result<Self, AdversaryError> {
        let producers: Vec<usize> = nodes.iter().copied().filter(|&x| x < k).take(beta_prime).collect();
        if producers.len() < beta_prime {
            return Err(AdversaryError::TooFewProducers {
                beta_prime,
                beta: nodes.len(),
            });
        }
        Ok(Self {
            adversarial_nodes: nodes,
            adversarial_producers: producers,
            v,
            assignment: AssignmentStrategy::Balanced,
            broadcast: BroadcastStrategy::Garbage,
            forge: ForgeMode::AllRandom,
        })
    }

    pub fn beta(&self) -> usize {
        self.adversarial_nodes.len()
    }

    pub fn beta_prime(&self) -> usize {
        self.adversarial_producers.len()
    }

    pub fn validate(&self, k: usize, n: usize) -> Result<(), AdversaryError> {
        if self.v == 0 {
            return Err(AdversaryError::NoVersions);
        }
        if let Some(&node) = self.adversarial_nodes.iter().find(|&&x| x >= n) {
            return Err(AdversaryError::NodeOutOfRange { node, n });
        }
        for &p in &self.adversarial_producers {
            if !self.adversarial_nodes.contains(&p) {
                return Err(AdversaryError::ProducerNotAdversarial(p));
            }
            if p >= k {
                return Err(AdversaryError::ProducerOutOfRange { producer: p, k });
            }
        }
        Ok(())
    }
}

/// Which version of each adversarial producer's block each node received.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VersionAssignment {
    v: usize,
    producers: Vec<usize>,
    tuples: BTreeMap<usize, VersionTuple>,
}

impl VersionAssignment {
    pub fn new(v: usize, producers: Vec<usize>, tuples: BTreeMap<usize, VersionTuple>) -> Self {
        Self { v, producers, tuples }
    }

    /// Every node receives version 0 from every producer.
    pub fn uniform(v: usize, producers: Vec<usize>, nodes: &[usize]) -> Self {
        let t = VersionTuple(vec![0; producers.len()]);
        let tuples = nodes.iter().map(|&n| (n, t.clone())).collect();
        Self { v, producers, tuples }
    }

    pub fn v(&self) -> usize {
        self.v
    }

    pub fn producers(&self) -> &[usize] {
        &self.producers
    }

    pub fn tuple(&self, node: usize) -> Option<&VersionTuple> {
        self.tuples.get(&node)
    }

    pub fn nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.tuples.keys().copied()
    }

    /// Cells `N_1 .. N_{v^beta'}`, one per version tuple in lexicographic
    /// order, including empty cells.
    pub fn partition(&self) -> Vec<(VersionTuple, Vec<usize>)> {
        let mut cells: Vec<(VersionTuple, Vec<usize>)> = all_version_tuples(self.v, self.producers.len())
            .into_iter()
            .map(|t| (t, Vec::new()))
            .collect();
        for (&node, t) in &self.tuples {
            let idx = tuple_index(t, self.v);
            cells[idx].1.push(node);
        }
        cells
    }

    /// Number of distinct versions producer position `r` delivered.
    pub fn distinct_versions(&self, r: usize) -> usize {
        self.tuples.values().map(|t| t.0[r]).collect::<BTreeSet<_>>().len()
    }

    pub fn respects_injection_cap(&self) -> bool {
        (0..self.producers.len()).all(|r| self.distinct_versions(r) <= self.v)
    }
}

/// All of `[v]^beta_prime` in lexicographic order.
pub fn all_version_tuples(v: usize, beta_prime: usize) -> Vec<VersionTuple> {
    let count = v.pow(beta_prime as u32);
    (0..count)
        .map(|mut idx| {
            let mut t = vec![0; beta_prime];
            for slot in t.iter_mut().rev() {
                *slot = idx % v;
                idx /= v;
            }
            VersionTuple(t)
        })
        .collect()
}

fn tuple_index(t: &VersionTuple, v: usize) -> usize {
    t.0.iter().fold(0, |acc, &x| acc * v + x)
}

/// Decides each node's version tuple.
///
/// `Balanced` requires `nodes.len() <= v^beta' * cap`; it then deals tuples
/// round-robin so every cell holds at most `cap` nodes.
pub fn assign_versions<R: Rng + ?Sized>(
    nodes: &[usize],
    strategy: &AssignmentStrategy,
    v: usize,
    producers: &[usize],
    cap: usize,
    rng: &mut R,
) -> Result<VersionAssignment, AdversaryError> {
    if v == 0 {
        return Err(AdversaryError::NoVersions);
    }
    let bp = producers.len();
    let tuples = match strategy {
        AssignmentStrategy::Balanced => {
            let all = all_version_tuples(v, bp);
            if nodes.len() > all.len().saturating_mul(cap) {
                return Err(AdversaryError::InfeasiblePartition {
                    nodes: nodes.len(),
                    cells: all.len(),
                    cap,
                });
            }
            nodes
                .iter()
                .enumerate()
                .map(|(i, &n)| (n, all[i % all.len()].clone()))
                .collect()
        }
        AssignmentStrategy::Random => nodes
            .iter()
            .map(|&n| (n, VersionTuple((0..bp).map(|_| rng.gen_range(0..v)).collect())))
            .collect(),
        AssignmentStrategy::Targeted(map) => {
            for (&node, t) in map {
                if t.0.len() != bp || t.0.iter().any(|&x| x >= v) {
                    return Err(AdversaryError::BadTargetedTuple(node));
                }
            }
            if let Some(&missing) = nodes.iter().find(|n| !map.contains_key(n)) {
                return Err(AdversaryError::MissingTargetedNode(missing));
            }
            map.clone()
        }
    };
    Ok(VersionAssignment::new(v, producers.to_vec(), tuples))
}

/// `v` pairwise-distinct candidate blocks for one adversarial producer.
pub fn forge_versions<R: Rng + ?Sized>(
    history: &[Fp],
    f: &dyn VerificationFn,
    v: usize,
    mode: ForgeMode,
    field: PrimeField,
    rng: &mut R,
) -> Vec<Block> {
    assert!(v >= 1, "v must be at least 1");
    let mut out: Vec<Block> = Vec::with_capacity(v);
    if mode == ForgeMode::ValidFirst {
        let valid = f
            .zero_root(history)
            .expect("verification function cannot construct a valid block");
        out.push(Block(valid));
    }
    while out.len() < v {
        let b = Block(field.random(rng));
        if !out.contains(&b) {
            out.push(b);
        }
    }
    out
}

/// What the adversarial nodes broadcast. `values` holds the result each of
/// them would send if it behaved honestly for the first version tuple.
pub fn corrupt_results<R: Rng + ?Sized>(
    values: &[(usize, Fp)],
    strategy: BroadcastStrategy,
    field: PrimeField,
    rng: &mut R,
) -> Vec<(usize, Option<Fp>)> {
    values
        .iter()
        .map(|&(node, y)| {
            let sent = match strategy {
                BroadcastStrategy::Silent => None,
                BroadcastStrategy::Garbage => Some(field.random(rng)),
                BroadcastStrategy::HonestLooking => Some(y),
            };
            (node, sent)
        })
        .collect()
}

/// Shards an adversary controlling `beta` of `n` nodes can capture when a
/// shard falls once a `gamma` fraction of its `n / k` members are adversarial:
/// `floor(beta * k / (gamma * n))`, capped at `k`.
pub fn shard_capture(beta: usize, gamma: f64, n: usize, k: usize) -> usize {
    assert!(gamma > 0.0 && gamma <= 1.0, "gamma must lie in (0, 1]");
    assert!(n > 0, "n must be positive");
    let raw = (beta as f64) * (k as f64) / (gamma * n as f64);
    // absorb representation error in gamma, e.g. 1/3
    let captured = (raw + 1e-9).floor() as usize;
    captured.min(k)
}
