//! The central unit: keeps one trail per context, decides, drives the
//! distributed learning and strengthening protocols, backtracks, restarts and
//! manages the clause database.

mod learn;
mod policy;
mod trail;
mod vsids;

use std::collections::{HashMap, HashSet, VecDeque};

use serde::Serialize;
use thiserror::Error;

use crate::cnf::{split_clause, Formula, Lit, SplitFormula, Var};
use crate::noc::{encode, ClauseAddr, Endpoint, Flit, Message, MessageKind, Network, Routing};

pub use learn::{LearnSession, LearnedClause};
pub use policy::{luby, select_for_deletion, LearnedInfo, ReduceSchedule, Restarts, SolverPolicy};
pub use trail::{Absorbed, Candidate, Trail, TrailEntry};
pub use vsids::Vsids;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CentralError {
    #[error("{needed} clause units needed, {available} available")]
    Capacity { needed: usize, available: usize },
    #[error("a split clause of {len} literals exceeds width {width}")]
    TooWide { len: usize, width: usize },
}

#[derive(Clone, Debug)]
pub struct CentralConfig {
    pub contexts: usize,
    pub width: usize,
    pub banks: usize,
    pub bank_size: usize,
    pub seed: u64,
    pub max_conflicts: Option<u64>,
    pub policy: SolverPolicy,
    /// Keep an [`Event`] log for verification.
    pub record_events: bool,
    /// Decisions context 0 takes before VSIDS, in order. Entries whose
    /// variable is already assigned are skipped.
    pub script: Vec<Lit>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Outcome {
    /// Values of the original variables.
    Sat(Vec<bool>),
    Unsat,
    /// Stopped without a verdict, with the reason.
    Unknown(String),
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CentralStats {
    pub decisions: u64,
    /// PropLits accepted onto a trail.
    pub implications: u64,
    /// PropLits discarded in favor of a lower-level implication.
    pub implications_discarded: u64,
    pub proplits_received: u64,
    /// PropLits dropped because their context was not propagating.
    pub stale_dropped: u64,
    pub conflicts: u64,
    pub learned: u64,
    pub learned_literals: u64,
    pub deleted: u64,
    pub reductions: u64,
    pub strengthened: u64,
    pub strengthened_literals: u64,
    pub strengthen_foreign: u64,
    pub replaced: u64,
    pub restarts: u64,
    pub backtracks: u64,
    pub cancel_messages: u64,
    pub shared: u64,
    pub messages_sent: [u64; 8],
    pub protocol_errors: u64,
}

/// One step of the assignment a conflict was derived from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScopedStep {
    pub lit: Lit,
    pub decision_level: u32,
    /// Literals of the reason clause as stored; `None` for decisions.
    pub reason: Option<Vec<Lit>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Event {
    /// Propagation settled without conflict, right before a decision or a
    /// SAT verdict.
    Fixpoint {
        ctx: usize,
        decisions: Vec<Lit>,
        assigned: Vec<Lit>,
    },
    Learned {
        ctx: usize,
        /// Variable of the conflict pair.
        var: Var,
        /// Scoped trail in a topological order.
        scope: Vec<ScopedStep>,
        /// The clause falsified by the scope.
        conflict: Vec<Lit>,
        learned: LearnedClause,
    },
    Strengthened {
        ctx: usize,
        original: Vec<Lit>,
        reduced: Vec<Lit>,
    },
    Backtrack {
        ctx: usize,
        from: u32,
        to: u32,
        cancels: u64,
        /// Removed entries from levels strictly between `to` and `from`.
        below_final: u64,
        /// Removed entries of level `from` that predate its last reopening
        /// and so hold no current bit.
        stale_final: u64,
        /// All removed entries.
        removed: u64,
    },
}

#[derive(Clone, Debug)]
struct Link {
    addr: ClauseAddr,
    lits: Vec<Lit>,
}

#[derive(Clone, Debug)]
struct Stored {
    lits: Vec<Lit>,
    links: Vec<Link>,
    learned: bool,
    lbd: u32,
    birth: u64,
    valid: Vec<bool>,
    alive: bool,
    owner: usize,
    reduced: Option<Vec<Lit>>,
    /// Loaded at the banks: the owner went idle after sending it.
    settled: bool,
}

#[derive(Clone, Debug)]
struct Allocator {
    free: Vec<Vec<bool>>,
    available: usize,
    cursor: usize,
}

impl Allocator {
    fn new(banks: usize, size: usize) -> Allocator {
        Allocator {
            free: vec![vec![true; size]; banks],
            available: banks * size,
            cursor: 0,
        }
    }

    /// `k` adjacent free units, banks visited round-robin.
    fn alloc(&mut self, k: usize) -> Option<ClauseAddr> {
        let banks = self.free.len();
        for i in 0..banks {
            let b = (self.cursor + i) % banks;
            let units = &mut self.free[b];
            let mut run = 0;
            for u in 0..units.len() {
                run = if units[u] { run + 1 } else { 0 };
                if run == k {
                    let start = u + 1 - k;
                    units[start..=u].iter_mut().for_each(|f| *f = false);
                    self.available -= k;
                    self.cursor = b + 1;
                    return Some(ClauseAddr {
                        bank: b as u16,
                        unit: start as u16,
                    });
                }
            }
        }
        None
    }

    fn release(&mut self, a: ClauseAddr) {
        let f = &mut self.free[a.bank as usize][a.unit as usize];
        debug_assert!(!*f);
        *f = true;
        self.available += 1;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Sharing {
    Nothing,
    Started,
    /// Another context has a clause on its way to the banks.
    Blocked,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    /// Waiting for the initial clause load.
    Load,
    /// Propagating; acts at idle.
    Search,
    /// Collecting reason replies.
    Learn,
    /// Waiting for cancels to settle before reopening the level.
    Backtrack,
    /// Waiting for a chkres sweep to settle.
    Share,
    /// Waiting for the other contexts to reach a maintenance point.
    Park,
}

#[derive(Clone, Debug)]
struct StrengthenSession {
    clause: usize,
    lits: Vec<Lit>,
    asserting: Lit,
    removed: Vec<Lit>,
}

#[derive(Clone, Debug)]
struct Context {
    trail: Trail,
    vsids: Vsids,
    restarts: Restarts,
    phase: Phase,
    level: u32,
    segment: u32,
    decisions: Vec<Lit>,
    learn: Option<LearnSession>,
    strengthen: Option<StrengthenSession>,
    /// Learned clause waiting for the backtrack to settle.
    install: Option<usize>,
    sharing: Vec<usize>,
    /// Clauses sent to the banks since the context was last idle.
    unsettled: Vec<usize>,
    restart_pending: bool,
    scripted: usize,
}

/// Central controller state.
#[derive(Clone, Debug)]
pub struct Central {
    cfg: CentralConfig,
    original_vars: u32,
    next_var: u32,
    split: Formula,
    clauses: Vec<Stored>,
    by_addr: HashMap<ClauseAddr, usize>,
    alloc: Allocator,
    ctxs: Vec<Context>,
    outbox: VecDeque<(Message, Routing)>,
    out_flits: VecDeque<Flit>,
    queued: Vec<usize>,
    /// Learned chain links, kept after deletion so their connector
    /// definitions stay available to checkers.
    definitions: Vec<Vec<Lit>>,
    conflicts: u64,
    reduce: ReduceSchedule,
    settling: bool,
    /// Context whose validity sweep is in flight; the others hold still.
    share_lock: Option<usize>,
    outcome: Option<Outcome>,
    pub stats: CentralStats,
    events: Vec<Event>,
}

impl Central {
    /// Builds the controller and queues the initial clause load for
    /// context 0.
    pub fn new(cfg: CentralConfig, split: &SplitFormula) -> Result<Central, CentralError> {
        let capacity = cfg.banks * cfg.bank_size;
        let needed = split.formula.clauses.len();
        if needed > capacity {
            return Err(CentralError::Capacity {
                needed,
                available: capacity,
            });
        }
        if let Some(c) = split.formula.clauses.iter().find(|c| c.len() > cfg.width) {
            return Err(CentralError::TooWide {
                len: c.len(),
                width: cfg.width,
            });
        }
        let ctxs = (0..cfg.contexts)
            .map(|c| {
                let jitter = (cfg.seed != 0 || c != 0)
                    .then(|| cfg.seed ^ (c as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
                Context {
                    trail: Trail::default(),
                    vsids: Vsids::new(split.original_vars, jitter),
                    restarts: Restarts::new(cfg.policy.restart_unit),
                    phase: Phase::Load,
                    level: 0,
                    segment: 0,
                    decisions: Vec::new(),
                    learn: None,
                    strengthen: None,
                    install: None,
                    sharing: Vec::new(),
                    unsettled: Vec::new(),
                    restart_pending: false,
                    scripted: 0,
                }
            })
            .collect();
        let mut c = Central {
            reduce: ReduceSchedule::new(cfg.policy.reduce_first, cfg.policy.reduce_increment),
            alloc: Allocator::new(cfg.banks, cfg.bank_size),
            original_vars: split.original_vars,
            next_var: split.formula.num_vars,
            split: split.formula.clone(),
            clauses: Vec::new(),
            by_addr: HashMap::new(),
            ctxs,
            outbox: VecDeque::new(),
            out_flits: VecDeque::new(),
            queued: vec![0; cfg.contexts],
            definitions: Vec::new(),
            conflicts: 0,
            settling: false,
            share_lock: None,
            outcome: None,
            stats: CentralStats::default(),
            events: Vec::new(),
            cfg,
        };
        if split.formula.clauses.iter().any(Vec::is_empty) {
            c.outcome = Some(Outcome::Unsat);
            return Ok(c);
        }
        for chain in split.chains() {
            let links: Vec<Vec<Lit>> = split.formula.clauses[chain].to_vec();
            let Some(start) = c.alloc.alloc(links.len()) else {
                return Err(CentralError::Capacity {
                    needed,
                    available: capacity,
                });
            };
            let lits = links.concat();
            let id = c.store(lits, links, start, false, 0, 0);
            for l in c.clauses[id].links.clone() {
                c.send(
                    Message::AddClause {
                        ctx: 0,
                        addr: l.addr,
                        lits: l.lits,
                    },
                    Routing::ADDRESSED,
                );
            }
        }
        Ok(c)
    }

    fn store(
        &mut self,
        lits: Vec<Lit>,
        links: Vec<Vec<Lit>>,
        start: ClauseAddr,
        learned: bool,
        lbd: u32,
        owner: usize,
    ) -> usize {
        let id = self.clauses.len();
        let links: Vec<Link> = links
            .into_iter()
            .enumerate()
            .map(|(i, lits)| Link {
                addr: ClauseAddr {
                    bank: start.bank,
                    unit: start.unit + i as u16,
                },
                lits,
            })
            .collect();
        for l in &links {
            self.by_addr.insert(l.addr, id);
        }
        let mut valid = vec![false; self.cfg.contexts];
        valid[owner] = true;
        self.clauses.push(Stored {
            lits,
            links,
            learned,
            lbd,
            birth: self.conflicts,
            valid,
            alive: true,
            owner,
            reduced: None,
            settled: !learned,
        });
        id
    }

    pub fn outcome(&self) -> Option<&Outcome> {
        self.outcome.as_ref()
    }

    pub fn phase(&self, ctx: usize) -> Phase {
        self.ctxs[ctx].phase
    }

    pub fn trail(&self, ctx: usize) -> &Trail {
        &self.ctxs[ctx].trail
    }

    pub fn decision_level(&self, ctx: usize) -> u32 {
        self.ctxs[ctx].level
    }

    pub fn conflicts(&self) -> u64 {
        self.conflicts
    }

    /// Some context is propagating or waiting for propagation to settle.
    pub fn in_bcp(&self) -> bool {
        self.ctxs
            .iter()
            .any(|c| matches!(c.phase, Phase::Search | Phase::Load | Phase::Share))
    }

    /// Messages of `ctx` still waiting to leave the central unit.
    pub fn has_queued(&self, ctx: usize) -> bool {
        self.queued[ctx] > 0
    }

    pub fn take_events(&mut self) -> Vec<Event> {
        std::mem::take(&mut self.events)
    }

    /// Literals stored at a clause unit.
    pub fn link(&self, addr: ClauseAddr) -> Option<&[Lit]> {
        let c = &self.clauses[*self.by_addr.get(&addr)?];
        c.links
            .iter()
            .find(|l| l.addr == addr)
            .map(|l| l.lits.as_slice())
    }

    /// Every hardware clause valid in `ctx`, over all variables so far.
    pub fn db_formula(&self, ctx: usize) -> Formula {
        let mut f = Formula::new(self.next_var);
        f.clauses = self
            .clauses
            .iter()
            .filter(|c| c.alive && c.valid[ctx])
            .flat_map(|c| c.links.iter().map(|l| l.lits.clone()))
            .collect();
        f
    }

    /// The split formula plus the chain definitions of every learned clause
    /// that needed connectors: the base that learned clauses follow from.
    pub fn definitions(&self) -> Formula {
        let mut f = Formula::new(self.next_var);
        f.clauses = self.split.clauses.clone();
        f.clauses.extend(self.definitions.iter().cloned());
        f
    }

    pub fn learned_clauses(&self) -> impl Iterator<Item = &[Lit]> {
        self.clauses
            .iter()
            .filter(|c| c.alive && c.learned)
            .map(|c| c.lits.as_slice())
    }

    fn send(&mut self, msg: Message, routing: Routing) {
        self.queued[msg.ctx() as usize] += 1;
        self.stats.messages_sent[msg.kind() as usize] += 1;
        if msg.kind() == MessageKind::CancelVar {
            self.stats.cancel_messages += 1;
        }
        self.outbox.push_back((msg, routing));
    }

    fn protocol_error(&mut self, what: String) {
        self.stats.protocol_errors += 1;
        if self.outcome.is_none() {
            self.outcome = Some(Outcome::Unknown(format!("protocol error: {what}")));
        }
    }

    /// Handles a message delivered to the central unit.
    pub fn receive(&mut self, msg: Message) {
        let ctx = msg.ctx() as usize;
        if ctx >= self.ctxs.len() {
            self.protocol_error(format!("message for context {ctx}"));
            return;
        }
        match msg {
            Message::PropLit {
                addr, lit, level, ..
            } => {
                self.stats.proplits_received += 1;
                let c = &mut self.ctxs[ctx];
                if !matches!(
                    c.phase,
                    Phase::Load | Phase::Search | Phase::Share | Phase::Park
                ) {
                    self.stats.stale_dropped += 1;
                    return;
                }
                let e = TrailEntry {
                    lit,
                    decision_level: c.level,
                    segment: c.segment,
                    level,
                    reason: addr,
                    current: true,
                };
                match c.trail.absorb(e) {
                    Absorbed::Accepted | Absorbed::Conflict => self.stats.implications += 1,
                    Absorbed::Duplicate => {
                        self.stats.implications_discarded += 1;
                        self.send(
                            Message::NotReason {
                                ctx: ctx as u8,
                                addr,
                            },
                            Routing::ADDRESSED,
                        );
                    }
                    Absorbed::Replaced { old } => {
                        self.stats.implications_discarded += 1;
                        self.send(
                            Message::NotReason {
                                ctx: ctx as u8,
                                addr: old,
                            },
                            Routing::ADDRESSED,
                        );
                    }
                }
            }
            Message::Reason { query, tag, .. } => {
                let c = &mut self.ctxs[ctx];
                let Some(s) = c.learn.as_mut() else {
                    self.protocol_error(format!("reason reply {query} outside learning"));
                    return;
                };
                let next = s.on_reply(&c.trail, query, tag);
                if let Some(e) = s.protocol_errors.pop() {
                    self.protocol_error(e);
                }
                if let Some(q) = next {
                    self.send(
                        Message::Reason {
                            ctx: ctx as u8,
                            query: q,
                            tag: q,
                        },
                        Routing::BROADCAST,
                    );
                }
            }
            Message::Strengthen { lit: Some(l), .. } => match self.ctxs[ctx].strengthen.as_mut() {
                Some(s) if s.lits.contains(&l) && l != s.asserting => {
                    if !s.removed.contains(&l) {
                        s.removed.push(l);
                    }
                }
                _ => self.stats.strengthen_foreign += 1,
            },
            // Conflicts are seen through the implication pair; banks only
            // report them so the others stop.
            Message::Conflict { .. } => {}
            other => self.protocol_error(format!("unexpected {} at central", other.kind())),
        }
    }

    /// One cycle: acts for every context that is idle with nothing queued,
    /// then injects at most one flit.
    pub fn step(&mut self, idle: &[bool], net: &mut Network) {
        if self.outcome.is_none() {
            self.act(idle);
        }
        if self.out_flits.is_empty() {
            if let Some((msg, routing)) = self.outbox.front() {
                match encode(msg, *routing) {
                    Ok(f) => self.out_flits.extend(f),
                    Err(e) => {
                        let e = e.to_string();
                        self.outbox.pop_front();
                        self.protocol_error(e);
                    }
                }
            }
        }
        if let Some(&f) = self.out_flits.front() {
            if net.inject(Endpoint::Central, f) {
                self.out_flits.pop_front();
                if f.last {
                    let (msg, _) = self.outbox.pop_front().expect("flits without message");
                    self.queued[msg.ctx() as usize] -= 1;
                }
            }
        }
    }

    fn ready(&self, ctx: usize, idle: &[bool]) -> bool {
        idle[ctx] && self.queued[ctx] == 0
    }

    fn act(&mut self, idle: &[bool]) {
        if self.settling {
            if (0..self.ctxs.len()).all(|c| self.ready(c, idle)) {
                self.settling = false;
            } else {
                return;
            }
        }
        for ctx in 0..self.ctxs.len() {
            if self.ready(ctx, idle) {
                for id in std::mem::take(&mut self.ctxs[ctx].unsettled) {
                    self.clauses[id].settled = true;
                }
            }
        }
        for ctx in 0..self.ctxs.len() {
            if self.outcome.is_some() || self.settling {
                return;
            }
            if !self.ready(ctx, idle) || self.share_lock.is_some_and(|o| o != ctx) {
                continue;
            }
            match self.ctxs[ctx].phase {
                Phase::Load => {
                    if ctx == 0 {
                        self.ctxs[0].phase = Phase::Search;
                        self.at_fixpoint(0);
                    } else if self.ctxs[0].phase != Phase::Load {
                        self.ctxs[ctx].phase = Phase::Search;
                        self.at_fixpoint(ctx);
                    }
                }
                Phase::Search => self.at_fixpoint(ctx),
                Phase::Learn => self.finish_learning(ctx),
                Phase::Backtrack => self.reopen(ctx),
                Phase::Share => self.finish_sharing(ctx),
                Phase::Park => {
                    if self.ctxs.iter().all(|c| c.phase == Phase::Park) {
                        self.maintain();
                    }
                }
            }
            if self.settling {
                return;
            }
        }
    }

    /// Propagation has settled for `ctx`.
    fn at_fixpoint(&mut self, ctx: usize) {
        if let Some(cand) = self.ctxs[ctx].trail.select_conflict() {
            self.start_learning(ctx, cand);
            return;
        }
        let c = &mut self.ctxs[ctx];
        if c.restart_pending {
            c.restart_pending = false;
            if c.level > 0 {
                self.stats.restarts += 1;
                self.backtrack(ctx, 0);
                return;
            }
        }
        if self.maintenance_due() {
            self.ctxs[ctx].phase = Phase::Park;
            if self.ctxs.iter().all(|c| c.phase == Phase::Park) {
                self.maintain();
            }
            return;
        }
        if self.ctxs[ctx].level == 0 && self.start_sharing(ctx) != Sharing::Nothing {
            return;
        }
        let c = &self.ctxs[ctx];
        if self.cfg.record_events {
            let mut assigned: Vec<Lit> = c.trail.entries().iter().map(|e| e.lit).collect();
            assigned.sort();
            self.events.push(Event::Fixpoint {
                ctx,
                decisions: c.decisions.clone(),
                assigned,
            });
        }
        let trail = &c.trail;
        let script = if ctx == 0 {
            &self.cfg.script[c.scripted.min(self.cfg.script.len())..]
        } else {
            &[]
        };
        let skip = script
            .iter()
            .take_while(|l| trail.is_assigned(l.var()))
            .count();
        if let Some(&lit) = script.get(skip) {
            self.ctxs[ctx].scripted += skip + 1;
            return self.decide(ctx, lit);
        }
        match c.vsids.pick(|v| trail.is_assigned(v)) {
            Some(lit) => self.decide(ctx, lit),
            None => {
                let model = (0..self.original_vars)
                    .map(|v| trail.value(Var(v)).unwrap_or(false))
                    .collect();
                self.outcome = Some(Outcome::Sat(model));
            }
        }
    }

    fn decide(&mut self, ctx: usize, lit: Lit) {
        self.stats.decisions += 1;
        let c = &mut self.ctxs[ctx];
        c.level += 1;
        c.segment += 1;
        c.trail.complete_level();
        c.trail.push_decision(lit, c.level, c.segment);
        c.decisions.push(lit);
        self.send(
            Message::CompleteDl {
                ctx: ctx as u8,
                var: Some(lit.var()),
            },
            Routing::BROADCAST,
        );
        self.send(
            Message::PropLit {
                ctx: ctx as u8,
                addr: ClauseAddr::NONE,
                lit,
                level: 0,
            },
            Routing::BROADCAST,
        );
    }

    fn start_learning(&mut self, ctx: usize, cand: Candidate) {
        let c = &mut self.ctxs[ctx];
        if c.level == 0 {
            self.outcome = Some(Outcome::Unsat);
            return;
        }
        if self.cfg.max_conflicts.is_some_and(|m| self.conflicts >= m) {
            self.outcome = Some(Outcome::Unknown("conflict budget exhausted".into()));
            return;
        }
        self.conflicts += 1;
        self.stats.conflicts += 1;
        let mut s = LearnSession::new(&c.trail, cand, c.level);
        let queries = s.initial_queries();
        c.learn = Some(s);
        c.phase = Phase::Learn;
        for q in queries {
            self.send(
                Message::Reason {
                    ctx: ctx as u8,
                    query: q,
                    tag: q,
                },
                Routing::BROADCAST,
            );
        }
    }

    fn finish_learning(&mut self, ctx: usize) {
        let s = self.ctxs[ctx]
            .learn
            .take()
            .expect("learning without session");
        let c = &self.ctxs[ctx];
        let learned = match s.analyze(&c.trail) {
            Ok(l) => l,
            Err(e) => return self.protocol_error(e),
        };
        if self.cfg.record_events {
            let mut scope: Vec<&TrailEntry> =
                c.trail.entries().iter().filter(|e| s.in_scope(e)).collect();
            if !scope.contains(&&s.low) {
                scope.push(&s.low);
            }
            scope.sort_by_key(|e| e.key());
            let scope = scope
                .iter()
                .map(|e| ScopedStep {
                    lit: e.lit,
                    decision_level: e.decision_level,
                    reason: (!e.is_decision())
                        .then(|| self.link(e.reason).map(<[Lit]>::to_vec).unwrap_or_default()),
                })
                .collect();
            let conflict = self
                .link(s.high.reason)
                .map(<[Lit]>::to_vec)
                .unwrap_or_default();
            self.events.push(Event::Learned {
                ctx,
                var: s.var,
                scope,
                conflict,
                learned: learned.clone(),
            });
        }
        self.stats.learned += 1;
        self.stats.learned_literals += learned.lits.len() as u64;
        let c = &mut self.ctxs[ctx];
        c.vsids.bump(&learned.lits);
        c.vsids.decay();
        if c.restarts.on_conflict() {
            c.restart_pending = true;
        }
        let links = split_clause(&learned.lits, self.cfg.width, &mut self.next_var);
        let Some(start) = self.alloc.alloc(links.len()) else {
            self.outcome = Some(Outcome::Unknown("clause capacity exhausted".into()));
            return;
        };
        if links.len() > 1 {
            self.definitions.extend(links.iter().cloned());
        }
        let id = self.store(learned.lits.clone(), links, start, true, learned.lbd, ctx);
        self.backtrack(ctx, learned.backtrack_level);
        let c = &mut self.ctxs[ctx];
        c.install = Some(id);
        if self.cfg.policy.strengthen && learned.lits.len() > 1 {
            c.strengthen = Some(StrengthenSession {
                clause: id,
                lits: learned.lits.clone(),
                asserting: learned.asserting,
                removed: Vec::new(),
            });
            self.send(
                Message::Strengthen {
                    ctx: ctx as u8,
                    lit: None,
                },
                Routing::BROADCAST,
            );
            for &l in &learned.lits {
                if l != learned.asserting {
                    self.send(
                        Message::Strengthen {
                            ctx: ctx as u8,
                            lit: Some(l),
                        },
                        Routing::BROADCAST,
                    );
                }
            }
        }
    }

    /// Closes the open strengthening session; replies have all arrived since
    /// the context is idle.
    fn finish_strengthening(&mut self, ctx: usize) {
        let Some(s) = self.ctxs[ctx].strengthen.take() else {
            return;
        };
        if s.removed.is_empty() {
            return;
        }
        let reduced: Vec<Lit> = s
            .lits
            .iter()
            .copied()
            .filter(|l| !s.removed.contains(l))
            .collect();
        self.stats.strengthened += 1;
        self.stats.strengthened_literals += s.removed.len() as u64;
        if self.cfg.record_events {
            self.events.push(Event::Strengthened {
                ctx,
                original: s.lits.clone(),
                reduced: reduced.clone(),
            });
        }
        let c = &mut self.clauses[s.clause];
        if c.alive {
            c.reduced = Some(reduced);
        }
    }

    /// Cancels every assignment above `to` and parks the context until the
    /// cancels settle.
    fn backtrack(&mut self, ctx: usize, to: u32) {
        self.finish_strengthening(ctx);
        let c = &mut self.ctxs[ctx];
        let from = c.level;
        let removed = c.trail.truncate(to);
        c.level = to;
        c.decisions.truncate(to as usize);
        c.phase = Phase::Backtrack;
        let before = self.stats.cancel_messages;
        if self.cfg.policy.cancel_current {
            self.send(
                Message::CancelVar {
                    ctx: ctx as u8,
                    var: None,
                },
                Routing::BROADCAST,
            );
            for e in removed.iter().filter(|e| !e.current) {
                self.send(
                    Message::CancelVar {
                        ctx: ctx as u8,
                        var: Some(e.lit.var()),
                    },
                    Routing::BROADCAST,
                );
            }
        } else {
            for e in &removed {
                self.send(
                    Message::CancelVar {
                        ctx: ctx as u8,
                        var: Some(e.lit.var()),
                    },
                    Routing::BROADCAST,
                );
            }
        }
        self.stats.backtracks += 1;
        if self.cfg.record_events {
            self.events.push(Event::Backtrack {
                ctx,
                from,
                to,
                cancels: self.stats.cancel_messages - before,
                below_final: removed.iter().filter(|e| e.decision_level < from).count() as u64,
                stale_final: removed
                    .iter()
                    .filter(|e| e.decision_level == from && !e.current)
                    .count() as u64,
                removed: removed.len() as u64,
            });
        }
    }

    /// Cancels have settled: reopen the level and install the learned clause.
    fn reopen(&mut self, ctx: usize) {
        let c = &mut self.ctxs[ctx];
        c.segment += 1;
        c.trail.complete_level();
        c.phase = Phase::Search;
        let marker = c.decisions.last().map_or(Var(0), |l| l.var());
        self.send(
            Message::CompleteDl {
                ctx: ctx as u8,
                var: Some(marker),
            },
            Routing::BROADCAST,
        );
        if let Some(id) = self.ctxs[ctx].install.take() {
            self.install(ctx, id);
        }
    }

    /// Sends a stored clause to its units for `ctx`, followed by the
    /// assignments it has to know about.
    fn install(&mut self, ctx: usize, id: usize) {
        self.ctxs[ctx].unsettled.push(id);
        for l in self.clauses[id].links.clone() {
            self.send(
                Message::AddClause {
                    ctx: ctx as u8,
                    addr: l.addr,
                    lits: l.lits,
                },
                Routing::ADDRESSED,
            );
        }
        self.load_assignments(ctx, id);
    }

    /// Directed PropLits for every assigned literal of a clause. Links that
    /// still have a free literal go first, then outward, so connector
    /// signals only ever enter links that are fully loaded.
    fn load_assignments(&mut self, ctx: usize, id: usize) {
        let links = self.clauses[id].links.clone();
        let trail = &self.ctxs[ctx].trail;
        let free: Vec<bool> = links
            .iter()
            .enumerate()
            .map(|(i, l)| {
                l.lits.iter().any(|x| {
                    let connector = |j: usize| {
                        links
                            .get(j)
                            .is_some_and(|n| n.lits.iter().any(|y| y.var() == x.var()))
                    };
                    !trail.is_assigned(x.var()) && !(i > 0 && connector(i - 1)) && !connector(i + 1)
                })
            })
            .collect();
        let first = free.iter().position(|&f| f).unwrap_or(0);
        let last = free.iter().rposition(|&f| f).unwrap_or(0);
        let order: Vec<usize> = (first..=last.max(first))
            .chain((0..first).rev())
            .chain(last.max(first) + 1..links.len())
            .collect();
        let mut msgs = Vec::new();
        for i in order {
            for &x in &links[i].lits {
                if let Some(e) = trail.entry_of(x).or_else(|| trail.entry_of(!x)) {
                    msgs.push(Message::PropLit {
                        ctx: ctx as u8,
                        addr: links[i].addr,
                        lit: e.lit,
                        level: e.level,
                    });
                }
            }
        }
        for m in msgs {
            self.send(m, Routing::ADDRESSED);
        }
    }

    /// Validates every clause the context has not seen. The banks validate
    /// whatever they hold, so no other context may have a clause in flight.
    fn start_sharing(&mut self, ctx: usize) -> Sharing {
        if self.cfg.contexts < 2 {
            return Sharing::Nothing;
        }
        let ids: Vec<usize> = (0..self.clauses.len())
            .filter(|&i| {
                self.clauses[i].alive && self.clauses[i].settled && !self.clauses[i].valid[ctx]
            })
            .collect();
        let fresh = self.ctxs.iter().any(|c| !c.unsettled.is_empty());
        if ids.is_empty() && !fresh {
            return Sharing::Nothing;
        }
        if fresh {
            return Sharing::Blocked;
        }
        let trail = &self.ctxs[ctx].trail;
        let falsified = ids.iter().any(|&i| {
            self.clauses[i]
                .lits
                .iter()
                .all(|&l| trail.entry_of(!l).is_some() && trail.entry_of(l).is_none())
        });
        if falsified {
            self.outcome = Some(Outcome::Unsat);
            return Sharing::Started;
        }
        for &i in &ids {
            self.clauses[i].valid[ctx] = true;
        }
        self.stats.shared += ids.len() as u64;
        self.ctxs[ctx].sharing = ids;
        self.ctxs[ctx].phase = Phase::Share;
        self.share_lock = Some(ctx);
        self.send(
            Message::CompleteDl {
                ctx: ctx as u8,
                var: None,
            },
            Routing::BROADCAST,
        );
        Sharing::Started
    }

    fn finish_sharing(&mut self, ctx: usize) {
        self.share_lock = None;
        for id in std::mem::take(&mut self.ctxs[ctx].sharing) {
            self.load_assignments(ctx, id);
        }
        self.ctxs[ctx].phase = Phase::Search;
    }

    fn maintenance_due(&self) -> bool {
        let reserve = (self.cfg.banks * self.cfg.bank_size / 20).max(4 * self.cfg.width);
        self.reduce.due(self.conflicts) || self.alloc.available < reserve
    }

    fn reasons(&self) -> HashSet<ClauseAddr> {
        self.ctxs
            .iter()
            .flat_map(|c| c.trail.entries().iter().map(|e| e.reason))
            .filter(|a| !a.is_none())
            .collect()
    }

    fn delete(&mut self, id: usize) {
        let c = &mut self.clauses[id];
        c.alive = false;
        let links = std::mem::take(&mut c.links);
        for l in links {
            self.by_addr.remove(&l.addr);
            self.alloc.release(l.addr);
            self.send(
                Message::AddClause {
                    ctx: 0,
                    addr: l.addr,
                    lits: Vec::new(),
                },
                Routing::ADDRESSED,
            );
        }
    }

    /// Runs with every context parked at a fixpoint: reduces the learned
    /// clauses and swaps in strengthened versions.
    fn maintain(&mut self) {
        let reasons = self.reasons();
        let is_reason = |c: &Stored| c.links.iter().any(|l| reasons.contains(&l.addr));
        let infos: Vec<LearnedInfo> = self
            .clauses
            .iter()
            .enumerate()
            .filter(|(_, c)| c.alive && c.learned)
            .map(|(id, c)| LearnedInfo {
                id,
                lbd: c.lbd,
                birth: c.birth,
                is_reason: is_reason(c),
            })
            .collect();
        for id in select_for_deletion(&infos) {
            self.delete(id);
            self.stats.deleted += 1;
        }
        self.stats.reductions += 1;
        if self.reduce.due(self.conflicts) {
            self.reduce.advance(self.conflicts);
        }
        let candidates: Vec<usize> = (0..self.clauses.len())
            .filter(|&i| {
                self.clauses[i].alive
                    && self.clauses[i].reduced.is_some()
                    && !is_reason(&self.clauses[i])
            })
            .collect();
        for id in candidates {
            let reduced = self.clauses[id].reduced.take().unwrap();
            let owner = self.clauses[id].owner;
            let trail = &self.ctxs[owner].trail;
            let free = reduced
                .iter()
                .filter(|l| !trail.is_assigned(l.var()))
                .count();
            let satisfied = reduced
                .iter()
                .any(|&l| trail.value(l.var()) == Some(l.is_positive()));
            if !satisfied && free < 2 {
                continue;
            }
            let links = split_clause(&reduced, self.cfg.width, &mut self.next_var);
            let need = links.len();
            let lbd = self.clauses[id].lbd.min(reduced.len() as u32);
            self.delete(id);
            let Some(start) = self.alloc.alloc(need) else {
                continue;
            };
            if links.len() > 1 {
                self.definitions.extend(links.iter().cloned());
            }
            let nid = self.store(reduced, links, start, true, lbd, owner);
            self.clauses[nid].birth = self.clauses[id].birth;
            self.install(owner, nid);
            self.stats.replaced += 1;
        }
        for c in &mut self.ctxs {
            c.phase = Phase::Search;
        }
        self.settling = true;
    }
}

#[cfg(test)]
mod tests;
