//! The cycle engine: wires clause banks, the network and the central unit
//! together, runs one instance and reports statistics.

mod trace;
mod verify;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::central::{Central, CentralConfig, CentralError, Event, Outcome, SolverPolicy};
use crate::clause_bank::{BankConfig, ClauseBank};
use crate::cnf::{split_clauses, CnfError, Formula, Lit};
use crate::noc::{
    decode, Endpoint, IdleTree, MessageKind, NetFlit, Network, Topology, TopologyKind,
};
use crate::oracle::{brute_force, Verdict, BRUTE_FORCE_MAX_VARS};

pub use trace::{Trace, TRACE_HEADER};
pub use verify::{BacktrackCount, Verification, IMPLIES_MAX_VARS};

pub const SCHEMA_VERSION: u32 = 1;

/// Largest grid whose bank ids stay clear of the address sentinel.
pub const MAX_GRID: usize = 31;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub topology: TopologyKind,
    pub grid: usize,
    pub bank_size: usize,
    pub width: usize,
    pub contexts: usize,
    pub seed: u64,
    pub max_conflicts: Option<u64>,
    /// Hard stop; the run ends UNKNOWN.
    pub max_cycles: Option<u64>,
    pub policy: SolverPolicy,
    /// Router input buffer depth in flits.
    pub buffer_depth: usize,
    pub trace: bool,
    /// Check every fixpoint, learned clause and backtrack against the oracle.
    pub verify: bool,
    /// Confirm SAT/UNSAT by exhaustive search on small formulas.
    pub oracle_check: bool,
    /// Keep the central unit's event log in the output.
    pub keep_events: bool,
    /// Forced first decisions of context 0.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub script: Vec<Lit>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            topology: TopologyKind::Mesh,
            grid: 4,
            bank_size: 1024,
            width: 8,
            contexts: 1,
            seed: 0,
            max_conflicts: None,
            max_cycles: Some(100_000_000),
            policy: SolverPolicy::default(),
            buffer_depth: 4,
            trace: false,
            verify: false,
            oracle_check: true,
            keep_events: false,
            script: Vec::new(),
        }
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Cnf(#[from] CnfError),
    #[error(transparent)]
    Central(#[from] CentralError),
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Config(m));
        if !(1..=MAX_GRID).contains(&self.grid) {
            return bad(format!("grid {} outside 1..={MAX_GRID}", self.grid));
        }
        if !(1..=1024).contains(&self.bank_size) {
            return bad(format!("bank size {} outside 1..=1024", self.bank_size));
        }
        if !(3..=32).contains(&self.width) {
            return bad(format!("width {} outside 3..=32", self.width));
        }
        if !(1..=2).contains(&self.contexts) {
            return bad(format!("{} contexts; 1 or 2 supported", self.contexts));
        }
        if self.buffer_depth == 0 {
            return bad("buffer depth must be positive".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub schema_version: u32,
    pub verdict: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub topology: TopologyKind,
    pub grid: usize,
    pub contexts: usize,
    pub width: usize,
    pub bank_size: usize,
    pub seed: u64,
    pub cycles: u64,
    pub bcp_cycles: u64,
    pub decisions: u64,
    pub implications: u64,
    /// Duplicates and losers answered with NotReason, plus stale arrivals.
    pub implications_discarded: u64,
    /// Arrived after a conflict or during a backtrack.
    pub stale_dropped: u64,
    pub proplits_to_central: u64,
    pub conflicts: u64,
    pub learned: u64,
    pub learned_literals: u64,
    pub deleted: u64,
    pub strengthened: u64,
    pub strengthened_literals: u64,
    pub replaced: u64,
    pub restarts: u64,
    pub backtracks: u64,
    pub cancel_messages: u64,
    pub shared: u64,
    pub cycles_per_implication: f64,
    /// Mean fraction of banks with work in their pipeline.
    pub utilization: f64,
    pub clause_idle_fraction: f64,
    pub messages: BTreeMap<String, u64>,
    pub flits_injected: u64,
    pub link_traversals: u64,
    pub bank_errors: u64,
    /// Verdict checked by exhaustive search; absent above the size limit
    /// or for UNKNOWN.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_agrees: Option<bool>,
}

impl RunStats {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("stats serialize")
    }
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub outcome: Outcome,
    pub stats: RunStats,
    pub verification: Option<Verification>,
    pub trace: Option<Trace>,
    pub events: Vec<Event>,
}

impl RunOutput {
    pub fn model(&self) -> Option<&[bool]> {
        match &self.outcome {
            Outcome::Sat(m) => Some(m),
            _ => None,
        }
    }
}

/// Simulates `formula` to a verdict, the conflict budget or the cycle cap.
pub fn run(cfg: &SimConfig, formula: &Formula) -> Result<RunOutput, SimError> {
    cfg.validate()?;
    let split = split_clauses(formula, cfg.width)?;
    let nodes = cfg.grid * cfg.grid;
    let topo = Topology::new(cfg.topology, cfg.grid);
    let mut net = Network::new(topo, cfg.buffer_depth);
    if cfg.verify {
        net.enable_delivery_check();
    }
    let bank_cfg = BankConfig {
        size: cfg.bank_size,
        width: cfg.width,
        contexts: cfg.contexts,
        connector_base: split.original_vars,
    };
    let mut banks: Vec<ClauseBank> = (0..nodes)
        .map(|i| ClauseBank::new(i as u16, bank_cfg))
        .collect();
    let mut central = Central::new(
        CentralConfig {
            contexts: cfg.contexts,
            width: cfg.width,
            banks: nodes,
            bank_size: cfg.bank_size,
            seed: cfg.seed,
            max_conflicts: cfg.max_conflicts,
            policy: cfg.policy.clone(),
            record_events: cfg.verify || cfg.keep_events,
            script: cfg.script.clone(),
        },
        &split,
    )?;
    let mut tree = IdleTree::new(nodes, cfg.contexts);
    let mut verification = cfg.verify.then(Verification::default);
    let mut trace = cfg.trace.then(|| Trace::new(nodes));
    let mut delivered: Vec<(Endpoint, NetFlit)> = Vec::new();
    let mut idle = vec![false; cfg.contexts];
    let mut busy_bank_cycles = 0u64;
    let mut bcp_cycles = 0u64;
    let mut now = 0u64;
    let mut kept = Vec::new();
    let outcome = loop {
        if let Some(o) = central.outcome() {
            break o.clone();
        }
        if cfg.max_cycles.is_some_and(|m| now >= m) {
            break Outcome::Unknown("cycle limit reached".into());
        }
        for b in &mut banks {
            b.step(now, &mut net);
        }
        delivered.clear();
        net.step(&mut delivered);
        for &(ep, nf) in &delivered {
            if let Some(t) = &mut trace {
                t.record(now, ep, &nf);
            }
            match ep {
                Endpoint::Bank(i) => banks[i].receive(nf.flit),
                Endpoint::Central => match decode(&[nf.flit]) {
                    Ok((msg, _)) => central.receive(msg),
                    Err(_) => central.stats.protocol_errors += 1,
                },
            }
        }
        for (ctx, flag) in idle.iter_mut().enumerate() {
            let leaves = (0..nodes).all(|n| banks[n].idle(ctx) && net.router_idle(n, ctx as u8));
            *flag = tree.observe(ctx, leaves, now);
            if let Some(v) = &mut verification {
                if *flag {
                    v.idle_checks += 1;
                    let busy = net.flits_of(ctx as u8) > 0 || banks.iter().any(|b| !b.idle(ctx));
                    if busy {
                        v.idle_violations += 1;
                    }
                }
            }
        }
        if central.in_bcp() {
            bcp_cycles += 1;
        }
        central.step(&idle, &mut net);
        let events = central.take_events();
        if cfg.keep_events {
            kept.extend(events.iter().cloned());
        }
        if let Some(v) = &mut verification {
            if !events.is_empty() {
                v.absorb(&central, events, cfg.policy.cancel_current, now);
            }
            if !net.credits_conserved() {
                v.credit_violations += 1;
            }
        }
        busy_bank_cycles += banks.iter().filter(|b| !b.pipeline_empty()).count() as u64;
        now += 1;
    };
    if let Some(v) = &mut verification {
        v.delivery_errors = if net.in_flight() == 0 {
            net.delivery_errors()
        } else {
            Vec::new()
        };
        if let Outcome::Sat(m) = &outcome {
            v.model_ok = Some(formula.eval(m));
        }
    }
    let cs = &central.stats;
    let mut messages = BTreeMap::new();
    for k in MessageKind::ALL {
        let n = cs.messages_sent[k as usize] + banks.iter().map(|b| b.emitted(k)).sum::<u64>();
        messages.insert(k.name().to_string(), n);
    }
    let cycles = now.max(1);
    let utilization = busy_bank_cycles as f64 / (cycles as f64 * nodes as f64);
    let stats = RunStats {
        schema_version: SCHEMA_VERSION,
        verdict: match &outcome {
            Outcome::Sat(_) => "SAT",
            Outcome::Unsat => "UNSAT",
            Outcome::Unknown(_) => "UNKNOWN",
        }
        .to_string(),
        note: match &outcome {
            Outcome::Unknown(r) => Some(r.clone()),
            _ => None,
        },
        topology: cfg.topology,
        grid: cfg.grid,
        contexts: cfg.contexts,
        width: cfg.width,
        bank_size: cfg.bank_size,
        seed: cfg.seed,
        cycles: now,
        bcp_cycles,
        decisions: cs.decisions,
        implications: cs.implications,
        implications_discarded: cs.implications_discarded + cs.stale_dropped,
        stale_dropped: cs.stale_dropped,
        proplits_to_central: cs.proplits_received,
        conflicts: cs.conflicts,
        learned: cs.learned,
        learned_literals: cs.learned_literals,
        deleted: cs.deleted,
        strengthened: cs.strengthened,
        strengthened_literals: cs.strengthened_literals,
        replaced: cs.replaced,
        restarts: cs.restarts,
        backtracks: cs.backtracks,
        cancel_messages: cs.cancel_messages,
        shared: cs.shared,
        cycles_per_implication: if cs.implications > 0 {
            bcp_cycles as f64 / cs.implications as f64
        } else {
            0.0
        },
        utilization,
        clause_idle_fraction: 1.0 - utilization,
        messages,
        flits_injected: net.stats.flits_injected,
        link_traversals: net.stats.link_traversals,
        bank_errors: banks.iter().map(|b| b.stats.errors).sum(),
        oracle_agrees: None,
    };
    let mut stats = stats;
    if cfg.oracle_check && formula.num_vars <= BRUTE_FORCE_MAX_VARS {
        if let Ok(r) = brute_force(formula) {
            stats.oracle_agrees = match &outcome {
                Outcome::Sat(m) => Some(r.verdict == Verdict::Sat && formula.eval(m)),
                Outcome::Unsat => Some(r.verdict == Verdict::Unsat),
                Outcome::Unknown(_) => None,
            };
        }
    }
    Ok(RunOutput {
        outcome,
        stats,
        verification,
        trace,
        events: kept,
    })
}

/// One instance under both topologies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopologyRow {
    pub name: String,
    pub mesh_cycles: u64,
    pub flatbfly_cycles: u64,
    /// Flattened-butterfly cycles normalized to mesh.
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopologyComparison {
    pub rows: Vec<TopologyRow>,
    pub geomean: f64,
}

/// Runs every instance on a mesh and a flattened butterfly with otherwise
/// identical settings.
pub fn compare_topologies(
    base: &SimConfig,
    corpus: &[(String, Formula)],
) -> Result<TopologyComparison, SimError> {
    let jobs: Vec<(SimConfig, &Formula)> = corpus
        .iter()
        .flat_map(|(_, f)| {
            [TopologyKind::Mesh, TopologyKind::FlattenedButterfly].map(|t| {
                let mut c = base.clone();
                c.topology = t;
                (c, f)
            })
        })
        .collect();
    let results = crate::batch::run_batch(&jobs);
    let mut rows = Vec::new();
    for (i, (name, _)) in corpus.iter().enumerate() {
        let mesh = results[2 * i].as_ref().map_err(clone_err)?.stats.cycles;
        let fb = results[2 * i + 1].as_ref().map_err(clone_err)?.stats.cycles;
        rows.push(TopologyRow {
            name: name.clone(),
            mesh_cycles: mesh,
            flatbfly_cycles: fb,
            ratio: fb.max(1) as f64 / mesh.max(1) as f64,
        });
    }
    let geomean = if rows.is_empty() {
        1.0
    } else {
        (rows.iter().map(|r| r.ratio.ln()).sum::<f64>() / rows.len() as f64).exp()
    };
    Ok(TopologyComparison { rows, geomean })
}

fn clone_err(e: &SimError) -> SimError {
    SimError::Config(e.to_string())
}

#[cfg(test)]
mod tests;
