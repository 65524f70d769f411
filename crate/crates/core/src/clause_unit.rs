//! A single fixed-width hardware clause.
//!
//! Slot contents (variable + polarity) are shared by all contexts; every
//! context keeps its own status bits. Per-slot status is stored as bit masks
//! over slot indices, so a width of at most 32 is supported.

use thiserror::Error;

use crate::cnf::{Lit, Var};

pub const MAX_WIDTH: usize = 32;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum UnitError {
    #[error("getpro issued with no pending propagation")]
    NoPendingPropagation,
    #[error("slot {slot} out of range for width {width}")]
    SlotOutOfRange { slot: usize, width: usize },
    #[error("context {ctx} out of range ({contexts} contexts)")]
    InvalidContext { ctx: usize, contexts: usize },
    #[error("connector wiring mismatch between adjacent units")]
    ConnectorMismatch,
}

/// What `clearvar` removes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClearTarget {
    Var(Var),
    /// Every slot whose current bit is set (one-message level cancel).
    Current,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    SetVar {
        slot: usize,
        lit: Lit,
    },
    /// With `clear`, invalidates the unit in every context (clause deletion).
    Validate {
        ctx: usize,
        clear: bool,
    },
    ChkRes {
        ctx: usize,
    },
    ProVar {
        ctx: usize,
        lit: Lit,
    },
    GetPro {
        ctx: usize,
    },
    GetVar {
        slot: usize,
    },
    ClearVar {
        ctx: usize,
        target: ClearTarget,
    },
    CompleteDl {
        ctx: usize,
    },
    CopyStr {
        ctx: usize,
    },
    StrProVar {
        ctx: usize,
        var: Var,
    },
    StrGetPro {
        ctx: usize,
    },
    ClearReason {
        ctx: usize,
    },
    GetReason {
        ctx: usize,
        lit: Lit,
    },
    GetLvlBits {
        ctx: usize,
    },
    Nop,
}

impl Command {
    fn context(&self) -> Option<usize> {
        use Command::*;
        match *self {
            SetVar { .. } | GetVar { .. } | Nop => None,
            Validate { ctx, .. }
            | ChkRes { ctx }
            | ProVar { ctx, .. }
            | GetPro { ctx }
            | ClearVar { ctx, .. }
            | CompleteDl { ctx }
            | CopyStr { ctx }
            | StrProVar { ctx, .. }
            | StrGetPro { ctx }
            | ClearReason { ctx }
            | GetReason { ctx, .. }
            | GetLvlBits { ctx } => Some(ctx),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ReadData {
    #[default]
    None,
    Lit(Lit),
    Slot {
        present: bool,
        lit: Lit,
    },
    LvlBits(u32),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CommandOutput {
    pub prop_flag: bool,
    pub conflict_flag: bool,
    pub reason_match: bool,
    pub strengthen_flag: bool,
    pub read: ReadData,
}

/// Status bits of one context.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ContextState {
    pub valid: bool,
    pub reason: bool,
    pub assigned: u32,
    /// Meaningful only where `assigned` is set.
    pub agrees: u32,
    pub current: u32,
    pub str_present: u32,
    pub str_reason_slot: Option<u8>,
    str_reported: bool,
    pub implied_slot: Option<u8>,
    /// Set when the clause's own implication is contradicted.
    conflict_latch: bool,
    pub prop_pending: bool,
    pub conflict: bool,
    pub strengthen: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClauseUnit {
    width: usize,
    present: u32,
    lits: Vec<Lit>,
    ctx: Vec<ContextState>,
    pub connector_prev: Option<u8>,
    pub connector_next: Option<u8>,
}

#[inline]
fn bit(i: usize) -> u32 {
    1 << i
}

impl ClauseUnit {
    pub fn new(width: usize, contexts: usize) -> ClauseUnit {
        assert!((1..=MAX_WIDTH).contains(&width), "unsupported clause width");
        assert!(contexts >= 1);
        ClauseUnit {
            width,
            present: 0,
            lits: vec![Var(0).lit(true); width],
            ctx: vec![ContextState::default(); contexts],
            connector_prev: None,
            connector_next: None,
        }
    }

    /// Clears every storage and status bit.
    pub fn reset(&mut self) {
        let (w, c) = (self.width, self.ctx.len());
        *self = ClauseUnit::new(w, c);
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn contexts(&self) -> usize {
        self.ctx.len()
    }

    pub fn state(&self, ctx: usize) -> &ContextState {
        &self.ctx[ctx]
    }

    pub fn is_valid(&self, ctx: usize) -> bool {
        self.ctx[ctx].valid
    }

    pub fn is_valid_anywhere(&self) -> bool {
        self.ctx.iter().any(|c| c.valid)
    }

    pub fn present_mask(&self) -> u32 {
        self.present
    }

    /// Literals held by present slots, in slot order.
    pub fn literals(&self) -> impl Iterator<Item = Lit> + '_ {
        (0..self.width)
            .filter(|&i| self.present & bit(i) != 0)
            .map(|i| self.lits[i])
    }

    pub fn slot_lit(&self, slot: usize) -> Option<Lit> {
        (self.present & bit(slot) != 0).then(|| self.lits[slot])
    }

    /// Slots holding `var`.
    pub fn match_mask(&self, var: Var) -> u32 {
        let mut m = 0;
        for i in 0..self.width {
            if self.present & bit(i) != 0 && self.lits[i].var() == var {
                m |= bit(i);
            }
        }
        m
    }

    /// Literals marked as part of the learned clause during strengthening.
    pub fn learned_marks(&self, ctx: usize) -> u32 {
        self.present & !self.ctx[ctx].str_present
    }

    /// Recomputes the propagation and conflict flags from slot state.
    fn refresh(&mut self, ctx: usize) {
        let present = self.present;
        let s = &mut self.ctx[ctx];
        let (pending, conflict) =
            derive_flags(present, s.valid, s.assigned, s.agrees, s.conflict_latch);
        s.prop_pending = pending;
        s.conflict = conflict;
    }

    fn output(&self, ctx: usize) -> CommandOutput {
        let s = &self.ctx[ctx];
        CommandOutput {
            prop_flag: s.prop_pending,
            conflict_flag: s.conflict,
            strengthen_flag: s.strengthen,
            ..CommandOutput::default()
        }
    }

    fn check_ctx(&self, ctx: usize) -> Result<(), UnitError> {
        if ctx >= self.ctx.len() {
            return Err(UnitError::InvalidContext {
                ctx,
                contexts: self.ctx.len(),
            });
        }
        Ok(())
    }

    fn check_slot(&self, slot: usize) -> Result<(), UnitError> {
        if slot >= self.width {
            return Err(UnitError::SlotOutOfRange {
                slot,
                width: self.width,
            });
        }
        Ok(())
    }

    /// Applies a propagated literal; returns true if any status bit changed.
    fn provar(&mut self, ctx: usize, lit: Lit) -> bool {
        let m = self.match_mask(lit.var());
        if m == 0 {
            return false;
        }
        let mut changed = false;
        for i in 0..self.width {
            if m & bit(i) == 0 {
                continue;
            }
            let agrees = self.lits[i] == lit;
            let s = &mut self.ctx[ctx];
            if s.assigned & bit(i) == 0 {
                s.assigned |= bit(i);
                if agrees {
                    s.agrees |= bit(i);
                } else {
                    s.agrees &= !bit(i);
                }
                s.current |= bit(i);
                changed = true;
            } else if s.implied_slot == Some(i as u8)
                && (s.agrees & bit(i) != 0) != agrees
                && !s.conflict_latch
            {
                s.conflict_latch = true;
                changed = true;
            }
        }
        self.refresh(ctx);
        changed
    }

    fn clear_slots(&mut self, ctx: usize, mask: u32) {
        let s = &mut self.ctx[ctx];
        s.assigned &= !mask;
        s.agrees &= !mask;
        s.current &= !mask;
        if let Some(i) = s.implied_slot {
            if mask & bit(i as usize) != 0 {
                s.implied_slot = None;
                s.reason = false;
                s.conflict_latch = false;
            }
        }
        self.refresh(ctx);
    }

    fn check_strengthen(&mut self, ctx: usize) {
        let s = &mut self.ctx[ctx];
        if let Some(r) = s.str_reason_slot {
            if !s.str_reported && s.str_present == bit(r as usize) {
                s.strengthen = true;
            }
        }
    }

    pub fn execute(&mut self, cmd: Command) -> Result<CommandOutput, UnitError> {
        if let Some(ctx) = cmd.context() {
            self.check_ctx(ctx)?;
            let setup = matches!(cmd, Command::Validate { .. } | Command::ChkRes { .. });
            if !setup && !self.ctx[ctx].valid {
                return Ok(CommandOutput::default());
            }
        }
        match cmd {
            Command::SetVar { slot, lit } => {
                self.check_slot(slot)?;
                self.present |= bit(slot);
                self.lits[slot] = lit;
                for c in 0..self.ctx.len() {
                    let s = &mut self.ctx[c];
                    s.assigned &= !bit(slot);
                    s.agrees &= !bit(slot);
                    s.current &= !bit(slot);
                    s.str_present &= !bit(slot);
                    self.refresh(c);
                }
                Ok(CommandOutput::default())
            }
            Command::Validate { ctx, clear } => {
                if clear {
                    self.reset();
                    return Ok(CommandOutput::default());
                }
                let present = self.present;
                let s = &mut self.ctx[ctx];
                s.valid = true;
                s.str_present = present;
                s.str_reason_slot = None;
                s.str_reported = false;
                s.strengthen = false;
                self.refresh(ctx);
                Ok(self.output(ctx))
            }
            Command::ChkRes { ctx } => {
                if self.is_valid_anywhere() && !self.ctx[ctx].valid {
                    let present = self.present;
                    let s = &mut self.ctx[ctx];
                    *s = ContextState::default();
                    s.valid = true;
                    s.str_present = present;
                    self.refresh(ctx);
                }
                Ok(self.output(ctx))
            }
            Command::ProVar { ctx, lit } => {
                self.provar(ctx, lit);
                Ok(self.output(ctx))
            }
            Command::GetPro { ctx } => {
                let present = self.present;
                let s = &mut self.ctx[ctx];
                if !s.prop_pending {
                    return Err(UnitError::NoPendingPropagation);
                }
                let free = present & !s.assigned;
                let i = free.trailing_zeros() as usize;
                s.assigned |= bit(i);
                s.agrees |= bit(i);
                s.current |= bit(i);
                s.implied_slot = Some(i as u8);
                s.reason = true;
                s.conflict_latch = false;
                self.refresh(ctx);
                let mut out = self.output(ctx);
                out.read = ReadData::Lit(self.lits[i]);
                Ok(out)
            }
            Command::GetVar { slot } => {
                self.check_slot(slot)?;
                Ok(CommandOutput {
                    read: ReadData::Slot {
                        present: self.present & bit(slot) != 0,
                        lit: self.lits[slot],
                    },
                    ..CommandOutput::default()
                })
            }
            Command::ClearVar { ctx, target } => {
                let mask = match target {
                    ClearTarget::Var(v) => self.match_mask(v),
                    ClearTarget::Current => self.ctx[ctx].current,
                };
                if mask != 0 {
                    self.clear_slots(ctx, mask);
                }
                Ok(self.output(ctx))
            }
            Command::CompleteDl { ctx } => {
                self.ctx[ctx].current = 0;
                Ok(self.output(ctx))
            }
            Command::CopyStr { ctx } => {
                let present = self.present;
                let s = &mut self.ctx[ctx];
                s.str_present = present;
                s.str_reason_slot = if s.reason { s.implied_slot } else { None };
                s.str_reported = false;
                s.strengthen = false;
                self.check_strengthen(ctx);
                Ok(self.output(ctx))
            }
            Command::StrProVar { ctx, var } => {
                let mut m = self.match_mask(var);
                let s = &mut self.ctx[ctx];
                if let Some(r) = s.str_reason_slot {
                    m &= !bit(r as usize);
                }
                s.str_present &= !m;
                self.check_strengthen(ctx);
                Ok(self.output(ctx))
            }
            Command::StrGetPro { ctx } => {
                let s = &mut self.ctx[ctx];
                let mut out = CommandOutput::default();
                if s.strengthen {
                    s.strengthen = false;
                    s.str_reported = true;
                    let r = s
                        .str_reason_slot
                        .expect("strengthen flag without reason slot");
                    out.read = ReadData::Lit(self.lits[r as usize]);
                }
                let mut o = self.output(ctx);
                o.read = out.read;
                Ok(o)
            }
            Command::ClearReason { ctx } => {
                self.ctx[ctx].reason = false;
                Ok(self.output(ctx))
            }
            Command::GetReason { ctx, lit } => {
                let s = &self.ctx[ctx];
                let hit = s.reason && s.implied_slot.map(|i| self.lits[i as usize]) == Some(lit);
                let mut out = self.output(ctx);
                out.reason_match = hit;
                Ok(out)
            }
            Command::GetLvlBits { ctx } => {
                let mut out = self.output(ctx);
                out.read = ReadData::LvlBits(self.ctx[ctx].current & self.present);
                Ok(out)
            }
            Command::Nop => Ok(CommandOutput::default()),
        }
    }
}

/// Flag derivation shared by the unit and its tests:
/// pending = no satisfied slot and exactly one unassigned slot;
/// conflict = every slot falsified, or the clause's implication contradicted.
pub fn derive_flags(
    present: u32,
    valid: bool,
    assigned: u32,
    agrees: u32,
    latch: bool,
) -> (bool, bool) {
    if !valid || present == 0 {
        return (false, false);
    }
    let satisfied = present & assigned & agrees != 0;
    let free = present & !assigned;
    let pending = !satisfied && free.count_ones() == 1;
    let conflict = latch || (!satisfied && free == 0);
    (pending, conflict)
}

/// Propagates connector assertions between two adjacent units of a chain.
///
/// A unit that implied its connector literal falsifies the neighbor's copy.
/// If both sides implied the shared connector, each sees the other's signal
/// against its own implication and both raise conflict. Returns true when a
/// signal changed the neighbor's state.
pub fn exchange_connectors(
    left: &mut ClauseUnit,
    right: &mut ClauseUnit,
    ctx: usize,
) -> Result<bool, UnitError> {
    let (Some(ls), Some(rs)) = (left.connector_next, right.connector_prev) else {
        return Err(UnitError::ConnectorMismatch);
    };
    let (Some(ll), Some(rl)) = (left.slot_lit(ls as usize), right.slot_lit(rs as usize)) else {
        return Err(UnitError::ConnectorMismatch);
    };
    if ll != !rl {
        return Err(UnitError::ConnectorMismatch);
    }
    if !left.ctx[ctx].valid || !right.ctx[ctx].valid {
        return Ok(false);
    }
    let left_asserts = asserts_slot(left, ctx, ls);
    let right_asserts = asserts_slot(right, ctx, rs);
    let mut crossed = false;
    if left_asserts {
        crossed |= right.provar(ctx, ll);
    }
    if right_asserts {
        crossed |= left.provar(ctx, rl);
    }
    Ok(crossed)
}

fn asserts_slot(u: &ClauseUnit, ctx: usize, slot: u8) -> bool {
    let s = &u.ctx[ctx];
    s.implied_slot == Some(slot) && s.assigned & bit(slot as usize) != 0
}
