//! A bank of clause units behind a pipelined controller.
//!
//! The controller accepts one message per cycle from its router, decodes it
//! into unit commands, scans the unit flags and turns them into outgoing
//! messages. Effects of a message are applied when it leaves the last stage.

use std::collections::{HashMap, VecDeque};

use thiserror::Error;

use crate::clause_unit::{exchange_connectors, ClauseUnit, ClearTarget, Command, ReadData};
use crate::cnf::{Lit, Var};
use crate::noc::message::MAX_LEVEL;
use crate::noc::{
    decode, encode, ClauseAddr, Endpoint, Flit, Message, MessageKind, Network, Routing,
};

pub const PIPELINE_STAGES: u64 = 4;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BankError {
    #[error("clause bank {bank} is full")]
    Full { bank: u16 },
    #[error("clause address {addr} is out of range or occupied")]
    BadAddress { addr: ClauseAddr },
    #[error("clause of {len} literals exceeds width {width}")]
    TooWide { len: usize, width: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BankConfig {
    pub size: usize,
    pub width: usize,
    pub contexts: usize,
    /// Variables at or above this index are chain connectors.
    pub connector_base: u32,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BankStats {
    pub messages_processed: u64,
    /// Cycles with at least one item in the pipeline.
    pub busy_cycles: u64,
    pub getpros: u64,
    pub chain_steps: u64,
    pub emitted: [u64; 8],
    /// Protocol diagnostics (bad addresses, malformed input).
    pub errors: u64,
}

#[derive(Clone, Debug)]
enum Work {
    Msg(Message, Routing),
}

#[derive(Clone, Debug)]
struct Item {
    work: Work,
    ctx: u8,
    ready_at: u64,
}

#[derive(Clone, Debug)]
pub struct ClauseBank {
    id: u16,
    cfg: BankConfig,
    units: Vec<ClauseUnit>,
    index: HashMap<Var, Vec<u16>>,
    shared_level: Vec<u16>,
    stopped: Vec<bool>,
    /// Units that may hold current bits, per context.
    touched: Vec<Vec<u16>>,
    touched_mark: Vec<Vec<bool>>,
    reassembly: Vec<Flit>,
    inbox: VecDeque<(Message, Routing)>,
    pipeline: VecDeque<Item>,
    exec_free_at: u64,
    /// Connector exchanges due: (context, left unit, due cycle).
    chains: VecDeque<(u8, u16, u64)>,
    outbox: VecDeque<(Message, Routing)>,
    out_flits: VecDeque<Flit>,
    /// Emitted (message, routing) pairs in order, when recording is on.
    pub record: Option<Vec<(u64, Message)>>,
    pub stats: BankStats,
}

impl ClauseBank {
    pub fn new(id: u16, cfg: BankConfig) -> ClauseBank {
        ClauseBank {
            id,
            units: (0..cfg.size)
                .map(|_| ClauseUnit::new(cfg.width, cfg.contexts))
                .collect(),
            index: HashMap::new(),
            shared_level: vec![0; cfg.contexts],
            stopped: vec![false; cfg.contexts],
            touched: vec![Vec::new(); cfg.contexts],
            touched_mark: vec![vec![false; cfg.size]; cfg.contexts],
            reassembly: Vec::new(),
            inbox: VecDeque::new(),
            pipeline: VecDeque::new(),
            exec_free_at: 0,
            chains: VecDeque::new(),
            outbox: VecDeque::new(),
            out_flits: VecDeque::new(),
            record: None,
            stats: BankStats::default(),
            cfg,
        }
    }

    pub fn id(&self) -> u16 {
        self.id
    }

    pub fn unit(&self, i: usize) -> &ClauseUnit {
        &self.units[i]
    }

    pub fn shared_level(&self, ctx: usize) -> u16 {
        self.shared_level[ctx]
    }

    pub fn is_stopped(&self, ctx: usize) -> bool {
        self.stopped[ctx]
    }

    pub fn occupied(&self) -> usize {
        self.units.iter().filter(|u| u.is_valid_anywhere()).count()
    }

    /// Takes one flit from the router. Messages are queued once complete.
    pub fn receive(&mut self, flit: Flit) {
        self.reassembly.push(flit);
        if !flit.last {
            return;
        }
        let flits = std::mem::take(&mut self.reassembly);
        match decode(&flits) {
            Ok(m) => self.inbox.push_back(m),
            Err(_) => self.stats.errors += 1,
        }
    }

    /// Queues a decoded message directly, bypassing the router.
    pub fn push_message(&mut self, msg: Message, routing: Routing) {
        self.inbox.push_back((msg, routing));
    }

    /// Nothing of `ctx` is queued, in the pipeline, waiting to leave, or
    /// travelling along a connector chain.
    pub fn idle(&self, ctx: usize) -> bool {
        let c = ctx as u8;
        self.inbox.iter().all(|(m, _)| m.ctx() != c)
            && self.pipeline.iter().all(|i| i.ctx != c)
            && self.outbox.iter().all(|(m, _)| m.ctx() != c)
            && self.out_flits.iter().all(|f| f.ctx != c)
            && self.chains.iter().all(|&(cc, _, _)| cc != c)
            && self.reassembly.iter().all(|f| f.ctx != c)
    }

    /// The pipeline holds no work of any context.
    pub fn pipeline_empty(&self) -> bool {
        self.pipeline.is_empty() && self.chains.is_empty()
    }

    /// Completes at most one pipeline item or chain step and accepts at most
    /// one queued message.
    fn tick(&mut self, now: u64) {
        if !self.pipeline_empty() {
            self.stats.busy_cycles += 1;
        }
        if now >= self.exec_free_at {
            if let Some(pos) = self.chains.iter().position(|&(_, _, due)| due <= now) {
                let (ctx, left, _) = self.chains.remove(pos).unwrap();
                self.chain_step(ctx as usize, left as usize, now);
                self.exec_free_at = now + 1;
            } else if let Some(item) = self.pipeline.pop_front_if(|i| i.ready_at <= now) {
                let Work::Msg(msg, routing) = item.work;
                let extra = self.apply(msg, routing, now);
                self.stats.messages_processed += 1;
                self.exec_free_at = now + 1 + extra;
            }
        }
        if (self.pipeline.len() as u64) < PIPELINE_STAGES {
            if let Some((msg, routing)) = self.inbox.pop_front() {
                self.pipeline.push_back(Item {
                    ctx: msg.ctx(),
                    work: Work::Msg(msg, routing),
                    ready_at: now + PIPELINE_STAGES - 1,
                });
            }
        }
    }

    /// Advances one cycle and injects at most one flit into the router.
    pub fn step(&mut self, now: u64, net: &mut Network) {
        self.tick(now);
        if self.out_flits.is_empty() {
            if let Some((msg, routing)) = self.outbox.pop_front() {
                match encode(&msg, routing) {
                    Ok(f) => self.out_flits.extend(f),
                    Err(_) => self.stats.errors += 1,
                }
            }
        }
        if let Some(&f) = self.out_flits.front() {
            if net.inject(Endpoint::Bank(self.id as usize), f) {
                self.out_flits.pop_front();
            }
        }
    }

    /// Runs the bank without a network until nothing is left to do, taking
    /// one outgoing message per cycle. Test and tooling helper.
    pub fn drain(&mut self, now: &mut u64) -> Vec<(Message, Routing)> {
        let mut out = Vec::new();
        while !(self.inbox.is_empty()
            && self.pipeline.is_empty()
            && self.chains.is_empty()
            && self.outbox.is_empty())
        {
            self.tick(*now);
            if let Some(m) = self.outbox.pop_front() {
                out.push(m);
            }
            *now += 1;
        }
        out
    }

    fn emit(&mut self, msg: Message, routing: Routing, now: u64) {
        self.stats.emitted[msg.kind() as usize] += 1;
        if let Some(r) = &mut self.record {
            r.push((now, msg.clone()));
        }
        self.outbox.push_back((msg, routing));
    }

    fn touch(&mut self, ctx: usize, u: u16) {
        if !self.touched_mark[ctx][u as usize] {
            self.touched_mark[ctx][u as usize] = true;
            self.touched[ctx].push(u);
        }
    }

    fn valid_units(&self, ctx: usize) -> Vec<u16> {
        (0..self.units.len() as u16)
            .filter(|&u| self.units[u as usize].is_valid(ctx))
            .collect()
    }

    fn units_with(&self, v: Var) -> Vec<u16> {
        self.index.get(&v).cloned().unwrap_or_default()
    }

    fn exec(&mut self, u: u16, cmd: Command) -> crate::clause_unit::CommandOutput {
        match self.units[u as usize].execute(cmd) {
            Ok(o) => o,
            Err(_) => {
                self.stats.errors += 1;
                Default::default()
            }
        }
    }

    /// Applies a message's effects; returns the extra execute cycles it costs.
    fn apply(&mut self, msg: Message, routing: Routing, now: u64) -> u64 {
        let ctx = msg.ctx() as usize;
        if ctx >= self.cfg.contexts {
            self.stats.errors += 1;
            return 0;
        }
        match msg {
            Message::AddClause { addr, lits, .. } => {
                let u = addr.unit as usize;
                if u >= self.units.len() {
                    self.stats.errors += 1;
                    return 0;
                }
                if lits.is_empty() {
                    self.delete_unit(u);
                    return 0;
                }
                match self.load_at(u, &lits, ctx) {
                    Ok(()) => {
                        let extra = lits.len() as u64;
                        self.scan(ctx, &[u as u16], now) + extra
                    }
                    Err(_) => {
                        self.stats.errors += 1;
                        0
                    }
                }
            }
            Message::PropLit {
                addr, lit, level, ..
            } => {
                if routing.broadcast || routing.to_central {
                    self.shared_level[ctx] = self.shared_level[ctx].max(level);
                    let targets = self.units_with(lit.var());
                    for &u in &targets {
                        self.exec(u, Command::ProVar { ctx, lit });
                        self.touch(ctx, u);
                    }
                    return self.scan(ctx, &targets, now);
                }
                // Directed: loads an older assignment into a fresh unit, so it
                // must not look current to a later cancel.
                if (addr.unit as usize) >= self.units.len() {
                    self.stats.errors += 1;
                    return 0;
                }
                self.exec(addr.unit, Command::ProVar { ctx, lit });
                self.exec(addr.unit, Command::CompleteDl { ctx });
                self.scan(ctx, &[addr.unit], now)
            }
            Message::CancelVar { var, .. } => {
                // Held until the next level boundary: a half-applied cancel can
                // make units look pending.
                self.stopped[ctx] = true;
                let targets = match var {
                    None => {
                        let t = std::mem::take(&mut self.touched[ctx]);
                        for &u in &t {
                            self.touched_mark[ctx][u as usize] = false;
                            self.exec(
                                u,
                                Command::ClearVar {
                                    ctx,
                                    target: ClearTarget::Current,
                                },
                            );
                        }
                        t
                    }
                    Some(v) => {
                        let t = self.units_with(v);
                        for &u in &t {
                            self.exec(
                                u,
                                Command::ClearVar {
                                    ctx,
                                    target: ClearTarget::Var(v),
                                },
                            );
                        }
                        t
                    }
                };
                self.scan(ctx, &targets, now)
            }
            Message::CompleteDl { var, .. } => {
                self.stopped[ctx] = false;
                match var {
                    Some(_) => {
                        let t = std::mem::take(&mut self.touched[ctx]);
                        for &u in &t {
                            self.touched_mark[ctx][u as usize] = false;
                            self.exec(u, Command::CompleteDl { ctx });
                        }
                        self.shared_level[ctx] = 0;
                        let valid = self.valid_units(ctx);
                        self.scan(ctx, &valid, now)
                    }
                    None => {
                        let all: Vec<u16> = (0..self.units.len() as u16)
                            .filter(|&u| self.units[u as usize].is_valid_anywhere())
                            .collect();
                        for &u in &all {
                            self.exec(u, Command::ChkRes { ctx });
                        }
                        self.scan(ctx, &all, now)
                    }
                }
            }
            Message::Conflict { .. } => {
                self.stopped[ctx] = true;
                0
            }
            Message::NotReason { addr, .. } => {
                if (addr.unit as usize) < self.units.len() {
                    self.exec(addr.unit, Command::ClearReason { ctx });
                } else {
                    self.stats.errors += 1;
                }
                0
            }
            Message::Reason { query, .. } => {
                let mut extra = 0;
                for u in self.units_with(query.var()) {
                    if !self
                        .exec(u, Command::GetReason { ctx, lit: query })
                        .reason_match
                    {
                        continue;
                    }
                    self.exec(u, Command::GetLvlBits { ctx });
                    extra += 1;
                    for slot in 0..self.cfg.width {
                        let ReadData::Slot { present: true, lit } =
                            self.exec(u, Command::GetVar { slot }).read
                        else {
                            continue;
                        };
                        extra += 1;
                        if lit == query {
                            continue;
                        }
                        self.emit(
                            Message::Reason {
                                ctx: ctx as u8,
                                query: !lit,
                                tag: query,
                            },
                            Routing::CENTRAL,
                            now,
                        );
                    }
                }
                extra
            }
            Message::Strengthen { lit, .. } => match lit {
                None => {
                    for u in self.valid_units(ctx) {
                        self.exec(u, Command::CopyStr { ctx });
                    }
                    0
                }
                Some(l) => {
                    let targets = self.units_with(l.var());
                    for &u in &targets {
                        self.exec(u, Command::StrProVar { ctx, var: l.var() });
                    }
                    self.scan(ctx, &targets, now)
                }
            },
        }
    }

    /// Flag scan over `units`: conflicts stop the context, pending units are
    /// drained with getpro, strengthen flags are reported. Returns the extra
    /// execute cycles spent on the generated commands.
    fn scan(&mut self, ctx: usize, units: &[u16], now: u64) -> u64 {
        let mut extra = 0;
        if !self.stopped[ctx] {
            let level = self.shared_level[ctx].saturating_add(1).min(MAX_LEVEL);
            if let Some(_u) = units
                .iter()
                .find(|&&u| self.units[u as usize].state(ctx).conflict)
            {
                self.stopped[ctx] = true;
                self.emit(
                    Message::Conflict {
                        ctx: ctx as u8,
                        level,
                    },
                    Routing::BROADCAST_CENTRAL,
                    now,
                );
            } else {
                let mut emitted = false;
                for &u in units {
                    if !self.units[u as usize].state(ctx).prop_pending {
                        continue;
                    }
                    let out = self.exec(u, Command::GetPro { ctx });
                    self.stats.getpros += 1;
                    extra += 1;
                    let ReadData::Lit(lit) = out.read else {
                        continue;
                    };
                    self.touch(ctx, u);
                    emitted = true;
                    self.emit(
                        Message::PropLit {
                            ctx: ctx as u8,
                            addr: ClauseAddr {
                                bank: self.id,
                                unit: u,
                            },
                            lit,
                            level,
                        },
                        Routing::BROADCAST_CENTRAL,
                        now,
                    );
                    self.queue_chains(ctx, u, lit, now);
                }
                if emitted {
                    self.shared_level[ctx] = level;
                }
            }
        }
        for &u in units {
            if self.units[u as usize].state(ctx).strengthen {
                let out = self.exec(u, Command::StrGetPro { ctx });
                extra += 1;
                if let ReadData::Lit(t) = out.read {
                    self.emit(
                        Message::Strengthen {
                            ctx: ctx as u8,
                            lit: Some(!t),
                        },
                        Routing::BROADCAST_CENTRAL,
                        now,
                    );
                }
            }
        }
        extra
    }

    /// Schedules the connector signal for the cycle after unit `u` implied
    /// one of its connector literals.
    fn queue_chains(&mut self, ctx: usize, u: u16, lit: Lit, now: u64) {
        let unit = &self.units[u as usize];
        let slot_is = |s: Option<u8>| s.and_then(|s| unit.slot_lit(s as usize)) == Some(lit);
        if slot_is(unit.connector_next) {
            self.chains.push_back((ctx as u8, u, now + 1));
        }
        if slot_is(unit.connector_prev) && u > 0 {
            self.chains.push_back((ctx as u8, u - 1, now + 1));
        }
    }

    fn chain_step(&mut self, ctx: usize, left: usize, now: u64) {
        self.stats.chain_steps += 1;
        let (a, b) = self.units.split_at_mut(left + 1);
        let crossed = exchange_connectors(&mut a[left], &mut b[0], ctx).unwrap_or_else(|_| {
            self.stats.errors += 1;
            false
        });
        if crossed {
            self.touch(ctx, left as u16);
            self.touch(ctx, left as u16 + 1);
            self.scan(ctx, &[left as u16, left as u16 + 1], now);
        }
    }

    fn delete_unit(&mut self, u: usize) {
        let lits: Vec<Lit> = self.units[u].literals().collect();
        for l in lits {
            if let Some(v) = self.index.get_mut(&l.var()) {
                v.retain(|&x| x as usize != u);
                if v.is_empty() {
                    self.index.remove(&l.var());
                }
            }
        }
        self.units[u]
            .execute(Command::Validate {
                ctx: 0,
                clear: true,
            })
            .ok();
        if u > 0 {
            self.units[u - 1].connector_next = None;
        }
        if u + 1 < self.units.len() {
            self.units[u + 1].connector_prev = None;
        }
    }

    fn load_at(&mut self, u: usize, lits: &[Lit], ctx: usize) -> Result<(), BankError> {
        let addr = ClauseAddr {
            bank: self.id,
            unit: u as u16,
        };
        if lits.len() > self.cfg.width {
            return Err(BankError::TooWide {
                len: lits.len(),
                width: self.cfg.width,
            });
        }
        if u >= self.units.len() || self.units[u].is_valid_anywhere() {
            return Err(BankError::BadAddress { addr });
        }
        if self.units[u].literals().next().is_some() {
            self.delete_unit(u);
        }
        for (slot, &lit) in lits.iter().enumerate() {
            self.units[u]
                .execute(Command::SetVar { slot, lit })
                .expect("slot in range");
            self.index.entry(lit.var()).or_default().push(u as u16);
        }
        // A chain link starts with the negation of the previous link's last literal.
        if u > 0 && lits[0].var().0 >= self.cfg.connector_base {
            let prev = &self.units[u - 1];
            if let Some(ps) = (0..self.cfg.width)
                .rev()
                .find(|&s| prev.slot_lit(s).is_some())
            {
                if prev.slot_lit(ps) == Some(!lits[0]) && prev.is_valid_anywhere() {
                    self.units[u - 1].connector_next = Some(ps as u8);
                    self.units[u].connector_prev = Some(0);
                }
            }
        }
        self.units[u]
            .execute(Command::Validate { ctx, clear: false })
            .expect("context in range");
        Ok(())
    }

    /// Loads a clause into the first free unit, outside the message path.
    pub fn load_clause(&mut self, ctx: usize, lits: &[Lit]) -> Result<ClauseAddr, BankError> {
        let u = (0..self.units.len())
            .find(|&u| !self.units[u].is_valid_anywhere())
            .ok_or(BankError::Full { bank: self.id })?;
        self.load_at(u, lits, ctx)?;
        Ok(ClauseAddr {
            bank: self.id,
            unit: u as u16,
        })
    }

    /// Messages emitted so far of a given kind.
    pub fn emitted(&self, kind: MessageKind) -> u64 {
        self.stats.emitted[kind as usize]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn x(i: u32) -> Lit {
        Var(i).lit(true)
    }

    fn bank(size: usize) -> ClauseBank {
        ClauseBank::new(
            0,
            BankConfig {
                size,
                width: 8,
                contexts: 2,
                connector_base: 1000,
            },
        )
    }

    fn prop(lit: Lit, level: u16) -> (Message, Routing) {
        (
            Message::PropLit {
                ctx: 0,
                addr: ClauseAddr { bank: 5, unit: 0 },
                lit,
                level,
            },
            Routing::BROADCAST_CENTRAL,
        )
    }

    fn proplits(out: &[(Message, Routing)]) -> Vec<(Lit, u16)> {
        out.iter()
            .filter_map(|(m, _)| match *m {
                Message::PropLit { lit, level, .. } => Some((lit, level)),
                _ => None,
            })
            .collect()
    }

    #[test]
    fn emitted_level_follows_max_rule() {
        let mut b = bank(4);
        b.load_clause(0, &[x(0), x(1)]).unwrap();
        b.shared_level[0] = 3;
        let (m, r) = prop(!x(0), 5);
        b.push_message(m, r);
        let mut now = 0;
        let out = b.drain(&mut now);
        assert_eq!(proplits(&out), vec![(x(1), 6)]);
        assert_eq!(b.shared_level(0), 6);
    }

    #[test]
    fn unmatched_message_costs_four_cycles() {
        let mut b = bank(4);
        b.load_clause(0, &[x(0), x(1)]).unwrap();
        let (m, r) = prop(x(9), 1);
        b.push_message(m, r);
        let mut net = Network::new(
            crate::noc::Topology::new(crate::noc::TopologyKind::Mesh, 1),
            4,
        );
        let mut idle_at = None;
        for t in 0..10 {
            b.step(t, &mut net);
            if b.idle(0) && idle_at.is_none() {
                idle_at = Some(t + 1);
            }
        }
        assert_eq!(idle_at, Some(PIPELINE_STAGES));
        assert_eq!(b.stats.emitted.iter().sum::<u64>(), 0);
    }

    #[test]
    fn two_units_in_one_item_share_a_level() {
        let mut b = bank(4);
        b.load_clause(0, &[x(0), x(1)]).unwrap();
        b.load_clause(0, &[x(0), x(2)]).unwrap();
        let (m, r) = prop(!x(0), 2);
        b.push_message(m, r);
        let mut net = Network::new(
            crate::noc::Topology::new(crate::noc::TopologyKind::Mesh, 1),
            4,
        );
        let mut out = Vec::new();
        let mut injected = Vec::new();
        for t in 0..12 {
            b.step(t, &mut net);
            out.clear();
            net.step(&mut out);
            for (e, f) in &out {
                if *e == Endpoint::Central {
                    injected.push((t, decode(&[f.flit]).unwrap().0));
                }
            }
        }
        let props: Vec<_> = injected
            .iter()
            .filter_map(|(t, m)| match *m {
                Message::PropLit { level, .. } => Some((*t, level)),
                _ => None,
            })
            .collect();
        assert_eq!(props.len(), 2);
        assert_eq!(props[1].0, props[0].0 + 1);
        assert_eq!(props[0].1, props[1].1);
    }

    #[test]
    fn idle_per_context_and_fresh_bank() {
        let mut b = bank(2);
        assert!(b.idle(0) && b.idle(1));
        let (m, r) = prop(x(1), 1);
        b.push_message(m, r);
        assert!(!b.idle(0));
        assert!(b.idle(1));
    }

    #[test]
    fn conflict_stops_until_level_boundary() {
        let mut b = bank(4);
        b.load_clause(0, &[x(0), x(1), !x(2)]).unwrap();
        b.load_clause(0, &[x(0), x(1), x(2)]).unwrap();
        let mut now = 0;
        b.push_message(prop(!x(0), 0).0, Routing::BROADCAST);
        b.push_message(prop(!x(1), 1).0, Routing::BROADCAST);
        let out = b.drain(&mut now);
        // both units become unit in the same item and imply opposite literals
        let lits: Vec<Lit> = proplits(&out).iter().map(|p| p.0).collect();
        assert_eq!(lits, vec![!x(2), x(2)]);
        // feeding the implications back trips the conflict latch
        b.push_message(prop(!x(2), 3).0, Routing::BROADCAST);
        b.push_message(prop(x(2), 3).0, Routing::BROADCAST);
        let out = b.drain(&mut now);
        assert!(out
            .iter()
            .any(|(m, _)| matches!(m, Message::Conflict { .. })));
        assert!(b.is_stopped(0));
        b.push_message(Message::CancelVar { ctx: 0, var: None }, Routing::BROADCAST);
        b.drain(&mut now);
        assert!(b.is_stopped(0));
        b.push_message(
            Message::CompleteDl {
                ctx: 0,
                var: Some(Var(0)),
            },
            Routing::BROADCAST,
        );
        b.drain(&mut now);
        assert!(!b.is_stopped(0));
        for u in 0..2 {
            assert_eq!(b.unit(u).state(0).assigned, 0);
            assert!(!b.unit(u).state(0).reason);
        }
    }

    #[test]
    fn stopped_bank_emits_no_proplit() {
        let mut b = bank(4);
        b.load_clause(0, &[x(0), x(1)]).unwrap();
        b.push_message(Message::Conflict { ctx: 0, level: 2 }, Routing::BROADCAST);
        b.push_message(prop(!x(0), 1).0, Routing::BROADCAST);
        let mut now = 0;
        assert!(proplits(&b.drain(&mut now)).is_empty());
        b.push_message(
            Message::CompleteDl {
                ctx: 0,
                var: Some(Var(7)),
            },
            Routing::BROADCAST,
        );
        b.drain(&mut now);
        assert!(!b.is_stopped(0));
    }

    #[test]
    fn reason_query_reports_antecedents() {
        let mut b = bank(4);
        b.load_clause(0, &[x(0), !x(1), !x(2)]).unwrap();
        let mut now = 0;
        b.push_message(prop(!x(0), 0).0, Routing::BROADCAST);
        b.push_message(prop(x(1), 1).0, Routing::BROADCAST);
        b.drain(&mut now);
        b.push_message(
            Message::Reason {
                ctx: 0,
                query: !x(2),
                tag: !x(2),
            },
            Routing::BROADCAST,
        );
        let out = b.drain(&mut now);
        let mut ants: Vec<Lit> = out
            .iter()
            .filter_map(|(m, r)| match *m {
                Message::Reason { query, tag, .. } if *r == Routing::CENTRAL => {
                    assert_eq!(tag, !x(2));
                    Some(query)
                }
                _ => None,
            })
            .collect();
        ants.sort();
        assert_eq!(ants, vec![!x(0), x(1)]);
    }

    #[test]
    fn not_reason_silences_reason_queries() {
        let mut b = bank(4);
        let a = b.load_clause(0, &[x(0), x(1)]).unwrap();
        let mut now = 0;
        b.push_message(prop(!x(0), 0).0, Routing::BROADCAST);
        b.drain(&mut now);
        b.push_message(Message::NotReason { ctx: 0, addr: a }, Routing::ADDRESSED);
        b.push_message(
            Message::Reason {
                ctx: 0,
                query: x(1),
                tag: x(1),
            },
            Routing::BROADCAST,
        );
        assert!(b.drain(&mut now).is_empty());
    }

    #[test]
    fn strengthening_reports_removable_literal() {
        // reason clause (¬a ∨ b) implied b from a; learned clause {¬a, ¬b, c}
        let (a, bb, c) = (x(0), x(1), x(2));
        let mut b = bank(4);
        b.load_clause(0, &[!a, bb]).unwrap();
        let mut now = 0;
        b.push_message(prop(a, 0).0, Routing::BROADCAST);
        b.drain(&mut now);
        b.push_message(
            Message::Strengthen { ctx: 0, lit: None },
            Routing::BROADCAST,
        );
        for l in [!a, !bb, c] {
            b.push_message(
                Message::Strengthen {
                    ctx: 0,
                    lit: Some(l),
                },
                Routing::BROADCAST,
            );
        }
        let out = b.drain(&mut now);
        let s: Vec<_> = out
            .iter()
            .filter_map(|(m, _)| match *m {
                Message::Strengthen { lit: Some(l), .. } => Some(l),
                _ => None,
            })
            .collect();
        assert_eq!(s, vec![!bb]);
    }

    #[test]
    fn load_capacity_and_reuse() {
        let mut b = bank(3);
        for i in 0..3 {
            assert_eq!(b.load_clause(0, &[x(i), x(i + 1)]).unwrap().unit, i as u16);
        }
        assert_eq!(b.load_clause(0, &[x(7)]), Err(BankError::Full { bank: 0 }));
        b.push_message(
            Message::AddClause {
                ctx: 0,
                addr: ClauseAddr { bank: 0, unit: 1 },
                lits: vec![],
            },
            Routing::ADDRESSED,
        );
        let mut now = 0;
        b.drain(&mut now);
        assert_eq!(b.load_clause(0, &[x(7), x(8)]).unwrap().unit, 1);
        assert_eq!(b.occupied(), 3);
    }

    #[test]
    fn connector_chain_propagates_in_bank() {
        // (x0 ∨ x1 ∨ c) (¬c ∨ x2 ∨ x3) with c = var 1000
        let c = Var(1000).lit(true);
        let mut b = bank(4);
        b.load_clause(0, &[x(0), x(1), c]).unwrap();
        b.load_clause(0, &[!c, x(2), x(3)]).unwrap();
        assert_eq!(b.unit(0).connector_next, Some(2));
        assert_eq!(b.unit(1).connector_prev, Some(0));
        let mut now = 0;
        for l in [!x(0), !x(1), !x(2)] {
            b.push_message(prop(l, 1).0, Routing::BROADCAST);
        }
        let out = b.drain(&mut now);
        let lits: Vec<Lit> = proplits(&out).iter().map(|p| p.0).collect();
        // c is implied, the neighbor hears it over the connector and implies x3
        assert_eq!(lits, vec![c, x(3)]);
        assert_eq!(b.stats.chain_steps, 1);
    }

    #[test]
    fn cancel_current_restores_state() {
        let mut b = bank(4);
        b.load_clause(0, &[x(0), x(1), x(2)]).unwrap();
        let mut now = 0;
        b.push_message(prop(!x(0), 0).0, Routing::BROADCAST);
        b.push_message(
            Message::CompleteDl {
                ctx: 0,
                var: Some(Var(1)),
            },
            Routing::BROADCAST,
        );
        b.push_message(prop(!x(1), 0).0, Routing::BROADCAST);
        let out = b.drain(&mut now);
        assert_eq!(proplits(&out), vec![(x(2), 1)]);
        b.push_message(Message::CancelVar { ctx: 0, var: None }, Routing::BROADCAST);
        b.drain(&mut now);
        let s = b.unit(0).state(0);
        assert_eq!(s.assigned, 0b001);
        assert!(!s.reason);
    }

    proptest! {
        // Every emitted level exceeds every level absorbed before it.
        #[test]
        fn level_monotonicity(seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut b = bank(32);
            for _ in 0..24 {
                let lits: Vec<Lit> = {
                    let mut v: Vec<u32> = (0..10).collect();
                    let mut out = Vec::new();
                    for _ in 0..3 {
                        let i = rng.gen_range(0..v.len());
                        out.push(Var(v.swap_remove(i)).lit(rng.gen()));
                    }
                    out.sort();
                    out
                };
                b.load_clause(0, &lits).unwrap();
            }
            b.record = Some(Vec::new());
            let mut absorbed = 0u16;
            let mut now = 0;
            for _ in 0..6 {
                let lit = Var(rng.gen_range(0..10)).lit(rng.gen());
                let level = rng.gen_range(0..20);
                b.push_message(prop(lit, level).0, Routing::BROADCAST);
                absorbed = absorbed.max(level);
                for (m, _) in b.drain(&mut now) {
                    if let Message::PropLit { level: l, .. } = m {
                        prop_assert!(l > absorbed);
                    }
                }
            }
        }
    }
}
