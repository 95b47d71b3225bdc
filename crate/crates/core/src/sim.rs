//! Epoch-driven simulation of coded sharding.
//!
//! Each epoch runs as synchronous rounds: proposals are delivered, every node
//! encodes what it received and broadcasts `g_n = f(coded block, coded chain)`,
//! every honest node decodes the broadcast set, and verified blocks are
//! appended to the coded chains. Randomness is drawn from streams derived
//! from `(seed, epoch, purpose, index)`, so a run is a pure function of its
//! configuration and seeds.

use std::collections::BTreeSet;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::{
    assign_versions, corrupt_results, forge_versions, AdversaryConfig, AdversaryError, AssignmentStrategy,
    VersionAssignment,
};
use crate::algebra::{Fp, PrimeField};
use crate::decoder::{accept_bits, recover_outputs, rs_decode, BroadcastEntry, BroadcastSet, DecodeOutcome};
use crate::lcc::{encode_at_node, Block, EncodingParams, ReceivedProposals};
use crate::rng::stream;
use crate::verification::{AcceptSet, VerificationFn};

const PROPOSE: u64 = 1;
const FORGE: u64 = 2;
const ASSIGN: u64 = 3;
const CORRUPT: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposerKind {
    /// Proposes a block that passes verification.
    Valid,
    /// Proposes a uniformly random block.
    Invalid,
}

/// What honest nodes do after a decode failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailurePolicy {
    /// Append nothing; the epoch stalls.
    Stall,
    /// Append the node's own view as if every block were accepted.
    AppendOwnView,
}

/// Uncoded subchain of one shard: genesis followed by accepted blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShardChain {
    pub shard: usize,
    pub genesis: Fp,
    pub blocks: Vec<Block>,
}

impl ShardChain {
    pub fn history(&self) -> Vec<Fp> {
        std::iter::once(self.genesis)
            .chain(self.blocks.iter().map(|b| b.0))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Honest,
    Adversarial,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeState {
    pub node: usize,
    pub alpha: Fp,
    /// `Y~_n(0..)`, starting with the coded genesis.
    pub coded_chain: Vec<Fp>,
    pub role: Role,
    /// The uncoded blocks this node's coded chain was built from, one row per
    /// appended epoch (genesis first).
    pub view: Vec<Vec<Fp>>,
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub params: EncodingParams,
    pub f: Arc<dyn VerificationFn>,
    pub accept: AcceptSet,
    pub proposer: ProposerKind,
    pub failure_policy: FailurePolicy,
    pub adversary: Option<AdversaryConfig>,
    /// Decoding radius; defaults to the unique-decoding radius for N.
    pub max_errors: Option<usize>,
}

impl SimConfig {
    pub fn honest(params: EncodingParams, f: Arc<dyn VerificationFn>, accept: AcceptSet) -> Self {
        Self {
            params,
            f,
            accept,
            proposer: ProposerKind::Valid,
            failure_policy: FailurePolicy::Stall,
            adversary: None,
            max_errors: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeStatus {
    Recovered,
    Failure,
    Insufficient,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NodeReport {
    pub node: usize,
    pub status: NodeStatus,
    pub accept: Option<Vec<bool>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct MessageCounts {
    /// Point-to-point proposal deliveries.
    pub unicast: u64,
    /// Deliveries of broadcast proposals and results.
    pub broadcast: u64,
}

impl MessageCounts {
    pub fn total(&self) -> u64 {
        self.unicast + self.broadcast
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EpochReport {
    pub epoch: usize,
    /// Block versions put forward for each shard.
    pub proposals: Vec<Vec<Block>>,
    /// One entry per honest node, in node order.
    pub nodes: Vec<NodeReport>,
    /// The verification values when every honest node recovered the same ones.
    pub outputs: Option<Vec<Fp>>,
    pub stalled: bool,
    /// Distinct chain views among honest nodes.
    pub chain_divergence: usize,
    pub messages: MessageCounts,
}

impl EpochReport {
    pub fn all_recovered(&self) -> bool {
        self.nodes.iter().all(|n| n.status == NodeStatus::Recovered)
    }

    pub fn all_failed(&self) -> bool {
        self.nodes.iter().all(|n| n.status != NodeStatus::Recovered)
    }
}

/// One block per non-deferred shard; deferred (adversarial) shards get `None`.
pub fn propose_blocks(
    chains: &[ShardChain],
    f: &dyn VerificationFn,
    proposer: ProposerKind,
    deferred: &[usize],
    field: PrimeField,
    seed: u64,
) -> Vec<Option<Block>> {
    chains
        .iter()
        .map(|chain| {
            if deferred.contains(&chain.shard) {
                return None;
            }
            let block = match proposer {
                ProposerKind::Valid => f
                    .zero_root(&chain.history())
                    .expect("verification function cannot construct a valid block"),
                ProposerKind::Invalid => {
                    let mut rng = stream(seed, &[PROPOSE, chain.shard as u64]);
                    field.random(&mut rng)
                }
            };
            Some(Block(block))
        })
        .collect()
}

#[derive(Debug)]
pub struct Simulation {
    config: SimConfig,
    chains: Vec<ShardChain>,
    nodes: Vec<NodeState>,
    epoch: usize,
}

impl Simulation {
    /// Genesis `Y_k(0) = k + 1` for every shard.
    pub fn new(config: SimConfig) -> Result<Self, AdversaryError> {
        let field = config.params.field();
        let genesis = (1..=config.params.k() as u64).map(|x| field.elem(x)).collect();
        Self::with_genesis(config, genesis)
    }

    pub fn with_genesis(config: SimConfig, genesis: Vec<Fp>) -> Result<Self, AdversaryError> {
        let params = &config.params;
        let (k, n) = (params.k(), params.n());
        assert_eq!(genesis.len(), k, "one genesis entry per shard");
        if let Some(adv) = &config.adversary {
            adv.validate(k, n)?;
            if let AssignmentStrategy::Targeted(map) = &adv.assignment {
                let missing = (0..n).find(|x| !adv.adversarial_nodes.contains(x) && !map.contains_key(x));
                if let Some(node) = missing {
                    return Err(AdversaryError::MissingTargetedNode(node));
                }
            }
        }
        let chains: Vec<ShardChain> = genesis
            .into_iter()
            .enumerate()
            .map(|(shard, genesis)| ShardChain {
                shard,
                genesis,
                blocks: Vec::new(),
            })
            .collect();
        let genesis_view = ReceivedProposals::new(chains.iter().map(|c| Block(c.genesis)).collect());
        let nodes = (0..n)
            .map(|node| {
                let adversarial = config
                    .adversary
                    .as_ref()
                    .is_some_and(|a| a.adversarial_nodes.contains(&node));
                NodeState {
                    node,
                    alpha: params.alpha(node),
                    coded_chain: vec![encode_at_node(&genesis_view, params, node)],
                    role: if adversarial { Role::Adversarial } else { Role::Honest },
                    view: vec![chains.iter().map(|c| c.genesis).collect()],
                }
            })
            .collect();
        Ok(Self {
            config,
            chains,
            nodes,
            epoch: 0,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn chains(&self) -> &[ShardChain] {
        &self.chains
    }

    pub fn nodes(&self) -> &[NodeState] {
        &self.nodes
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    fn honest_nodes(&self) -> Vec<usize> {
        self.nodes
            .iter()
            .filter(|s| s.role == Role::Honest)
            .map(|s| s.node)
            .collect()
    }

    pub fn chain_divergence(&self) -> usize {
        self.nodes
            .iter()
            .filter(|s| s.role == Role::Honest)
            .map(|s| &s.view)
            .collect::<BTreeSet<_>>()
            .len()
    }

    /// Runs one epoch. Decode failures are recorded in the report.
    pub fn run_epoch(&mut self, seed: u64) -> EpochReport {
        self.epoch += 1;
        let t = self.epoch as u64;
        let params = self.config.params.clone();
        let field = params.field();
        let (k, n) = (params.k(), params.n());
        let f = Arc::clone(&self.config.f);
        let adv = self.config.adversary.clone();
        let producers: Vec<usize> = adv
            .as_ref()
            .map(|a| a.adversarial_producers.clone())
            .unwrap_or_default();
        let v = adv.as_ref().map_or(1, |a| a.v);
        let honest = self.honest_nodes();

        // (1) proposals and delivery
        let epoch_seed = crate::rng::derive_seed(seed, &[t]);
        let base = propose_blocks(
            &self.chains,
            f.as_ref(),
            self.config.proposer,
            &producers,
            field,
            epoch_seed,
        );
        let versions: Vec<Vec<Block>> = base
            .into_iter()
            .enumerate()
            .map(|(shard, b)| match b {
                Some(b) => vec![b],
                None => {
                    let adv = adv.as_ref().expect("deferred shards imply an adversary");
                    let mut rng = stream(epoch_seed, &[FORGE, shard as u64]);
                    let hist = self.chains[shard].history();
                    forge_versions(&hist, f.as_ref(), adv.v, adv.forge, field, &mut rng)
                }
            })
            .collect();

        let assignment = match &adv {
            Some(a) => {
                let mut rng = stream(epoch_seed, &[ASSIGN]);
                assign_versions(&honest, &a.assignment, v, &producers, honest.len().max(1), &mut rng)
                    .expect("assignment validated at construction")
            }
            None => VersionAssignment::uniform(1, Vec::new(), &honest),
        };
        let default_tuple = vec![0; producers.len()];
        let view_of = |node: usize| -> ReceivedProposals {
            let tuple = assignment.tuple(node).map_or(&default_tuple, |t| &t.0);
            ReceivedProposals::new(
                (0..k)
                    .map(|shard| match producers.iter().position(|&p| p == shard) {
                        Some(r) => versions[shard][tuple[r]],
                        None => versions[shard][0],
                    })
                    .collect(),
            )
        };
        let views: Vec<ReceivedProposals> = (0..n).map(view_of).collect();

        for (r, &p) in producers.iter().enumerate() {
            let delivered: BTreeSet<Block> = honest.iter().map(|&h| views[h].blocks()[p]).collect();
            assert!(delivered.len() <= v, "producer {p} exceeded its injection cap");
            debug_assert!(assignment.distinct_versions(r) <= v);
        }

        let mut messages = MessageCounts::default();
        for shard in 0..k {
            let unicasting = producers.contains(&shard) && v > 1;
            if unicasting {
                messages.unicast += n as u64;
            } else {
                messages.broadcast += n as u64;
            }
        }

        // (2) every node's honest result
        let results: Vec<Fp> = (0..n)
            .into_par_iter()
            .map(|node| {
                let coded = encode_at_node(&views[node], &params, node);
                f.eval(coded, &self.nodes[node].coded_chain)
            })
            .collect();

        // (3) adversarial broadcasts
        let mut sent: Vec<Option<Fp>> = results.iter().copied().map(Some).collect();
        if let Some(a) = &adv {
            let adversarial: Vec<(usize, Fp)> = a.adversarial_nodes.iter().map(|&x| (x, results[x])).collect();
            let mut rng = stream(epoch_seed, &[CORRUPT]);
            for (node, y) in corrupt_results(&adversarial, a.broadcast, field, &mut rng) {
                sent[node] = y;
            }
        }
        messages.broadcast += sent.iter().filter(|y| y.is_some()).count() as u64 * n as u64;
        let bset = BroadcastSet::new(
            (0..n)
                .map(|node| BroadcastEntry {
                    node,
                    alpha: params.alpha(node),
                    y: sent[node],
                })
                .collect(),
        )
        .expect("node indices are distinct");

        // (4) decoding at every honest node
        let degree = params.composed_degree();
        let radius = params.error_tolerance(bset.present_count()).map(|tol| {
            self.config
                .max_errors
                .unwrap_or(params.error_tolerance(n).unwrap_or(0))
                .min(tol)
        });
        let accept = &self.config.accept;
        let decoded: Vec<(NodeStatus, Option<Vec<Fp>>)> = honest
            .par_iter()
            .map(|_| {
                let Some(radius) = radius else {
                    return (NodeStatus::Insufficient, None);
                };
                match rs_decode(&bset, degree, radius) {
                    Ok(DecodeOutcome::Recovered { poly, .. }) => {
                        (NodeStatus::Recovered, Some(recover_outputs(&poly, &params)))
                    }
                    Ok(DecodeOutcome::Failure { .. }) => (NodeStatus::Failure, None),
                    Err(_) => (NodeStatus::Insufficient, None),
                }
            })
            .collect();
        let node_reports: Vec<NodeReport> = honest
            .iter()
            .zip(&decoded)
            .map(|(&node, (status, h))| NodeReport {
                node,
                status: *status,
                accept: h.as_ref().map(|h| accept_bits(h, accept)),
            })
            .collect();

        let agreed: Option<Vec<Fp>> = {
            let first = decoded.first().and_then(|d| d.1.clone());
            first.filter(|h| decoded.iter().all(|d| d.1.as_ref() == Some(h)))
        };
        let agreed_bits = agreed.as_ref().map(|h| accept_bits(h, accept));

        // (5) append to coded chains
        let fallback = match self.config.failure_policy {
            FailurePolicy::Stall => None,
            FailurePolicy::AppendOwnView => Some(vec![true; k]),
        };
        let append_bits = agreed_bits.clone().or(fallback);
        let stalled = append_bits.is_none();
        if let Some(bits) = &append_bits {
            for state in self.nodes.iter_mut() {
                let accepted: Vec<Block> = views[state.node]
                    .blocks()
                    .iter()
                    .zip(bits)
                    .map(|(b, &e)| if e { *b } else { Block(field.zero()) })
                    .collect();
                let coded = encode_at_node(&ReceivedProposals::new(accepted.clone()), &params, state.node);
                state.coded_chain.push(coded);
                state.view.push(accepted.iter().map(|b| b.0).collect());
            }
            for (shard, chain) in self.chains.iter_mut().enumerate() {
                let x = versions[shard][0];
                chain.blocks.push(if bits[shard] { x } else { Block(field.zero()) });
            }
        }

        EpochReport {
            epoch: self.epoch,
            proposals: versions,
            nodes: node_reports,
            outputs: agreed,
            stalled,
            chain_divergence: self.chain_divergence(),
            messages,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mitigation {
    None,
    /// Every node rebroadcasts the K blocks it received.
    FullRebroadcast,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CommLoad {
    pub proposals: u64,
    pub results: u64,
    pub rebroadcast: u64,
    pub total: u64,
}

/// Analytic per-epoch delivery counts.
pub fn comm_load(n: u64, k: u64, mitigation: Mitigation) -> CommLoad {
    let proposals = k * n;
    let results = n * n;
    let rebroadcast = match mitigation {
        Mitigation::None => 0,
        Mitigation::FullRebroadcast => n * k * n,
    };
    CommLoad {
        proposals,
        results,
        rebroadcast,
        total: proposals + results + rebroadcast,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::{BroadcastStrategy, ForgeMode};
    use crate::verification::ShiftedPower;

    fn config(k: usize, n: usize, d: usize) -> SimConfig {
        let field = PrimeField::mersenne31();
        let params = EncodingParams::default_layout(field, k, n, d).unwrap();
        let f = Arc::new(ShiftedPower { a: field.elem(3), d });
        SimConfig::honest(params, f, AcceptSet::zero(field))
    }

    #[test]
    fn valid_proposer_uses_root() {
        let field = PrimeField::mersenne31();
        let f = ShiftedPower { a: field.elem(3), d: 2 };
        let chains = vec![
            ShardChain {
                shard: 0,
                genesis: field.elem(1),
                blocks: vec![Block(field.elem(10))],
            },
            ShardChain {
                shard: 1,
                genesis: field.elem(2),
                blocks: vec![],
            },
        ];
        let p = propose_blocks(&chains, &f, ProposerKind::Valid, &[], field, 0);
        assert_eq!(p, vec![Some(Block(field.elem(30))), Some(Block(field.elem(6)))]);
        let deferred = propose_blocks(&chains, &f, ProposerKind::Valid, &[1], field, 0);
        assert_eq!(deferred[1], None);
    }

    #[test]
    fn honest_epochs_recover_and_agree() {
        let mut sim = Simulation::new(config(5, 20, 2)).unwrap();
        for seed in 0..3 {
            let r = sim.run_epoch(seed);
            assert!(r.all_recovered());
            assert_eq!(r.chain_divergence, 1);
            assert!(!r.stalled);
            assert_eq!(r.outputs, Some(vec![PrimeField::mersenne31().zero(); 5]));
            assert_eq!(r.messages.total(), comm_load(20, 5, Mitigation::None).total);
        }
    }

    #[test]
    fn single_shard_degenerates_to_constant_recovery() {
        let mut sim = Simulation::new(config(1, 4, 2)).unwrap();
        let mut cfg = sim.config().clone();
        cfg.proposer = ProposerKind::Invalid;
        sim = Simulation::new(cfg).unwrap();
        let hist = sim.chains()[0].history();
        let r = sim.run_epoch(5);
        assert!(r.all_recovered());
        let x = r.proposals[0][0].0;
        assert_eq!(r.outputs.unwrap()[0], sim.config().f.eval(x, &hist));
    }

    #[test]
    fn garbage_within_tolerance_is_corrected() {
        let mut cfg = config(5, 20, 2);
        let mut adv = AdversaryConfig::with_lowest_producers((0..3).collect(), 0, 5, 1).unwrap();
        adv.broadcast = BroadcastStrategy::Garbage;
        cfg.adversary = Some(adv);
        let mut sim = Simulation::new(cfg).unwrap();
        let r = sim.run_epoch(1);
        assert_eq!(r.nodes.len(), 17);
        assert!(r.all_recovered());
        assert_eq!(r.chain_divergence, 1);
    }

    #[test]
    fn discrepancy_breaks_every_honest_decode() {
        let mut cfg = config(5, 20, 2);
        let mut adv = AdversaryConfig::with_lowest_producers((0..3).collect(), 1, 5, 2).unwrap();
        adv.forge = ForgeMode::AllRandom;
        cfg.adversary = Some(adv);
        let mut sim = Simulation::new(cfg).unwrap();
        let r = sim.run_epoch(1);
        assert!(r.nodes.iter().all(|n| n.status == NodeStatus::Failure));
        assert!(r.stalled);
        assert_eq!(r.messages.unicast, 20);
    }

    #[test]
    fn comm_load_counts() {
        let base = comm_load(10, 3, Mitigation::None);
        assert_eq!((base.proposals, base.results, base.rebroadcast), (30, 100, 0));
        let full = comm_load(10, 3, Mitigation::FullRebroadcast);
        assert_eq!(full.total - base.total, 300);
    }
}
