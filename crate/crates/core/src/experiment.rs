//! Config-driven experiment runner behind the `polyshard` binary.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::{shard_capture, AdversaryConfig, AdversaryError, BroadcastStrategy, ForgeMode};
use crate::algebra::PrimeField;
use crate::lcc::EncodingParams;
use crate::sim::{FailurePolicy, ProposerKind, SimConfig, Simulation};
use crate::threshold::{
    empirical_threshold, known_behavior_upper_bound, theorem_bound, write_sweep_csv, SweepTemplate, ThresholdError,
};
use crate::verification::{AcceptSet, ShiftedPower};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Scenario {
    HonestEpoch,
    GarbageAttack,
    DiscrepancyAttack,
    ThresholdSweep,
    BoundTable,
}

fn default_p() -> u64 {
    PrimeField::MERSENNE31
}

fn default_one() -> usize {
    1
}

fn default_shift() -> u64 {
    3
}

fn default_broadcast() -> BroadcastStrategy {
    BroadcastStrategy::Garbage
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub d: usize,
    #[serde(default)]
    pub beta: usize,
    /// Derived from `gamma` when absent.
    #[serde(default)]
    pub beta_prime: Option<usize>,
    #[serde(default = "default_one")]
    pub v: usize,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default = "default_p")]
    pub p: u64,
    /// Shift `a` in the verification function `(x - a * last)^d`.
    #[serde(default = "default_shift")]
    pub a: u64,
    #[serde(default = "default_broadcast")]
    pub broadcast: BroadcastStrategy,
    #[serde(default)]
    pub random_assignment: bool,
    #[serde(default)]
    pub append_on_failure: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default = "default_jsonl")]
    pub jsonl: String,
    #[serde(default = "default_csv")]
    pub csv: String,
}

fn default_jsonl() -> String {
    "epochs.jsonl".into()
}

fn default_csv() -> String {
    "table.csv".into()
}

impl Default for Outputs {
    fn default() -> Self {
        Self {
            jsonl: default_jsonl(),
            csv: default_csv(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepRange {
    pub n_min: usize,
    pub n_max: usize,
    #[serde(default)]
    pub strict: bool,
}

/// Inclusive ranges for the bound table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub v: [usize; 2],
    pub beta_prime: [usize; 2],
    pub d: [usize; 2],
    #[serde(rename = "K")]
    pub k: [usize; 2],
    pub beta: [usize; 2],
}

impl Default for Grid {
    fn default() -> Self {
        Self {
            v: [1, 3],
            beta_prime: [0, 3],
            d: [1, 3],
            k: [2, 6],
            beta: [0, 3],
        }
    }
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub params: Params,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_one")]
    pub epochs: usize,
    #[serde(default)]
    pub output: Outputs,
    #[serde(default)]
    pub sweep: Option<SweepRange>,
    #[serde(default)]
    pub grid: Option<Grid>,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(String),
    #[error("infeasible parameters: {0}")]
    Infeasible(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Infeasible(_) => 3,
            RunError::Io(_) => 1,
        }
    }
}

impl From<ThresholdError> for RunError {
    fn from(e: ThresholdError) -> Self {
        match e {
            ThresholdError::Io(e) => RunError::Io(e),
            ThresholdError::Csv(e) => RunError::Io(e.into()),
            other => RunError::Infeasible(other.to_string()),
        }
    }
}

impl From<AdversaryError> for RunError {
    fn from(e: AdversaryError) -> Self {
        RunError::Infeasible(e.to_string())
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, RunError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| RunError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), RunError> {
        let p = &self.params;
        let bad = |msg: &str| Err(RunError::Config(msg.into()));
        PrimeField::new(p.p).map_err(|e| RunError::Config(e.to_string()))?;
        if p.k == 0 || p.n == 0 || p.d == 0 || p.v == 0 {
            return bad("N, K, d and v must be positive");
        }
        if let Some(g) = p.gamma {
            if !(g > 0.0 && g <= 1.0) {
                return bad("gamma must lie in (0, 1]");
            }
        }
        if self.seeds.is_empty() {
            return bad("seeds must not be empty");
        }
        if self.scenario == Scenario::ThresholdSweep {
            match &self.sweep {
                None => return bad("threshold_sweep needs a sweep range"),
                Some(s) if s.n_min > s.n_max || s.n_min == 0 => {
                    return bad("sweep range must satisfy 0 < n_min <= n_max")
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Explicit `beta_prime`, else captured shards from `gamma`, else 0.
    pub fn beta_prime(&self) -> usize {
        let p = &self.params;
        match (p.beta_prime, p.gamma) {
            (Some(bp), _) => bp,
            (None, Some(g)) => shard_capture(p.beta, g, p.n, p.k),
            (None, None) => 0,
        }
    }

    fn field(&self) -> PrimeField {
        PrimeField::new(self.params.p).expect("validated")
    }

    fn encoding(&self) -> Result<EncodingParams, RunError> {
        let p = &self.params;
        EncodingParams::default_layout(self.field(), p.k, p.n, p.d).map_err(|e| RunError::Config(e.to_string()))
    }

    fn sim_config(&self) -> Result<SimConfig, RunError> {
        let p = &self.params;
        let field = self.field();
        let f = Arc::new(ShiftedPower {
            a: field.elem(p.a),
            d: p.d,
        });
        let mut cfg = SimConfig::honest(self.encoding()?, f, AcceptSet::zero(field));
        if p.append_on_failure {
            cfg.failure_policy = FailurePolicy::AppendOwnView;
        }
        cfg.proposer = ProposerKind::Valid;
        let nodes: BTreeSet<usize> = (0..p.beta).collect();
        cfg.adversary = match self.scenario {
            Scenario::HonestEpoch => None,
            Scenario::GarbageAttack => {
                let mut adv = AdversaryConfig::with_lowest_producers(nodes, 0, p.k, 1)?;
                adv.broadcast = p.broadcast;
                Some(adv)
            }
            Scenario::DiscrepancyAttack => {
                let mut adv = AdversaryConfig::with_lowest_producers(nodes, self.beta_prime(), p.k, p.v)?;
                adv.broadcast = p.broadcast;
                adv.forge = ForgeMode::AllRandom;
                if p.random_assignment {
                    adv.assignment = crate::adversary::AssignmentStrategy::Random;
                }
                Some(adv)
            }
            _ => unreachable!("not a simulation scenario"),
        };
        Ok(cfg)
    }

    fn template(&self) -> SweepTemplate {
        let p = &self.params;
        SweepTemplate {
            field: self.field(),
            k: p.k,
            d: p.d,
            beta: p.beta,
            beta_prime: self.beta_prime(),
            v: p.v,
        }
    }
}

#[derive(Debug, Serialize)]
struct Header<'a> {
    config: &'a ExperimentConfig,
    beta_prime: usize,
}

#[derive(Debug, Serialize)]
struct EpochLine<'a> {
    seed: u64,
    report: &'a crate::sim::EpochReport,
}

/// Runs the scenario and returns the files written.
pub fn run(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Vec<PathBuf>, RunError> {
    std::fs::create_dir_all(out_dir)?;
    let echo = serde_json::to_string(&Header {
        config: cfg,
        beta_prime: cfg.beta_prime(),
    })
    .expect("config serializes");
    match cfg.scenario {
        Scenario::HonestEpoch | Scenario::GarbageAttack | Scenario::DiscrepancyAttack => {
            let path = out_dir.join(&cfg.output.jsonl);
            let sim_cfg = cfg.sim_config()?;
            let mut out = BufWriter::new(File::create(&path)?);
            writeln!(out, "{echo}")?;
            for &seed in &cfg.seeds {
                let mut sim = Simulation::new(sim_cfg.clone())?;
                for _ in 0..cfg.epochs {
                    let report = sim.run_epoch(seed);
                    let line = serde_json::to_string(&EpochLine { seed, report: &report }).expect("report serializes");
                    writeln!(out, "{line}")?;
                }
            }
            out.flush()?;
            Ok(vec![path])
        }
        Scenario::ThresholdSweep => {
            let range = cfg.sweep.as_ref().expect("validated");
            let template = cfg.template();
            let rows = empirical_threshold(&template, range.n_min..=range.n_max, range.strict)?;
            let path = out_dir.join(&cfg.output.csv);
            let mut out = BufWriter::new(File::create(&path)?);
            writeln!(out, "# {echo}")?;
            write_sweep_csv(&mut out, &template, &rows)?;
            out.flush()?;
            Ok(vec![path])
        }
        Scenario::BoundTable => {
            let grid = cfg.grid.clone().unwrap_or_default();
            let path = out_dir.join(&cfg.output.csv);
            let mut out = BufWriter::new(File::create(&path)?);
            writeln!(out, "# {echo}")?;
            write_bound_table(&mut out, &grid)?;
            out.flush()?;
            Ok(vec![path])
        }
    }
}

fn write_bound_table<W: Write>(out: W, grid: &Grid) -> Result<(), RunError> {
    let to_io = |e: csv::Error| RunError::Io(e.into());
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "v",
        "beta_prime",
        "d",
        "K",
        "beta",
        "theorem_bound",
        "known_behavior_upper_bound",
    ])
    .map_err(to_io)?;
    for v in grid.v[0]..=grid.v[1] {
        for bp in grid.beta_prime[0]..=grid.beta_prime[1] {
            for d in grid.d[0]..=grid.d[1] {
                for k in grid.k[0]..=grid.k[1] {
                    if bp > k {
                        continue;
                    }
                    for beta in grid.beta[0]..=grid.beta[1] {
                        w.write_record([
                            v.to_string(),
                            bp.to_string(),
                            d.to_string(),
                            k.to_string(),
                            beta.to_string(),
                            theorem_bound(v, bp, d, k, beta).to_string(),
                            known_behavior_upper_bound(v, bp, d, k, beta).to_string(),
                        ])
                        .map_err(to_io)?;
                    }
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}
