use std::collections::{BTreeMap, BTreeSet};

use crate::cnf::{Lit, Var};

use super::trail::{Candidate, Trail, TrailEntry};

/// Result of conflict analysis.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LearnedClause {
    /// Sorted literals.
    pub lits: Vec<Lit>,
    /// The asserting literal (negated 1-UIP).
    pub asserting: Lit,
    pub backtrack_level: u32,
    pub lbd: u32,
}

/// Distributed 1-UIP analysis of one conflict: collects the reason replies
/// of the banks and walks them once the context is idle.
#[derive(Clone, Debug)]
pub struct LearnSession {
    pub var: Var,
    pub high: TrailEntry,
    pub low: TrailEntry,
    pub decision_level: u32,
    /// Queried trail literal → its antecedents as reported by the banks.
    answers: BTreeMap<Lit, Vec<Lit>>,
    queried: BTreeSet<Var>,
    pub protocol_errors: Vec<String>,
}

impl LearnSession {
    pub fn new(trail: &Trail, c: Candidate, decision_level: u32) -> LearnSession {
        LearnSession {
            var: c.var,
            high: trail.entries()[c.high],
            low: trail.entries()[c.low],
            decision_level,
            answers: BTreeMap::new(),
            queried: BTreeSet::new(),
            protocol_errors: Vec::new(),
        }
    }

    /// Whether `e` belongs to the assignment the conflict was derived from:
    /// everything before the later side of the conflicting pair, plus the
    /// earlier side.
    pub fn in_scope(&self, e: &TrailEntry) -> bool {
        e.key() < self.high.key() || *e == self.low
    }

    pub fn scoped(&self, trail: &Trail, lit: Lit) -> Option<TrailEntry> {
        if lit == self.low.lit {
            return trail.entry_of(lit).is_some().then_some(self.low);
        }
        trail.entry_of(lit).filter(|e| self.in_scope(e)).copied()
    }

    /// Literals whose reasons are needed to start: the later side always,
    /// the earlier side when it was implied at the current level.
    pub fn initial_queries(&mut self) -> Vec<Lit> {
        let mut q = vec![self.high.lit];
        self.answers.insert(self.high.lit, Vec::new());
        if self.low.decision_level == self.decision_level && !self.low.is_decision() {
            q.push(self.low.lit);
            self.queried.insert(self.low.lit.var());
            self.answers.insert(self.low.lit, Vec::new());
        }
        q
    }

    /// Folds one reason reply in; returns a new query to send, if any.
    pub fn on_reply(&mut self, trail: &Trail, antecedent: Lit, tag: Lit) -> Option<Lit> {
        match self.answers.get_mut(&tag) {
            Some(a) => a.push(antecedent),
            None => {
                self.protocol_errors
                    .push(format!("reply for unqueried {tag}"));
                return None;
            }
        }
        let Some(e) = self.scoped(trail, antecedent) else {
            self.protocol_errors.push(format!(
                "antecedent {antecedent} of {tag} is not on the trail"
            ));
            return None;
        };
        if e.decision_level == self.decision_level
            && !e.is_decision()
            && self.queried.insert(antecedent.var())
        {
            self.answers.insert(antecedent, Vec::new());
            return Some(antecedent);
        }
        None
    }

    /// The clause the conflict was detected on, as reported: the later
    /// side's reason literals.
    pub fn conflict_antecedents(&self) -> &[Lit] {
        self.answers.get(&self.high.lit).map_or(&[], Vec::as_slice)
    }

    /// Walks the current level backwards over the scoped trail order until a
    /// single current-level literal remains.
    pub fn analyze(&self, trail: &Trail) -> Result<LearnedClause, String> {
        let cur = self.decision_level;
        let mut seen = BTreeSet::new();
        let mut open = 0usize;
        let mut earlier: Vec<Lit> = Vec::new();
        let mut add = |l: Lit, seen: &mut BTreeSet<Var>, open: &mut usize| -> Result<(), String> {
            let e = self
                .scoped(trail, l)
                .ok_or_else(|| format!("literal {l} missing from the conflict scope"))?;
            if !seen.insert(l.var()) {
                return Ok(());
            }
            if e.decision_level == cur {
                *open += 1;
            } else if e.decision_level > 0 {
                earlier.push(!l);
            }
            Ok(())
        };
        add(self.low.lit, &mut seen, &mut open)?;
        for &a in self.conflict_antecedents() {
            add(a, &mut seen, &mut open)?;
        }
        let mut current: Vec<&TrailEntry> = trail
            .entries()
            .iter()
            .filter(|e| e.decision_level == cur && self.in_scope(e) && e.lit.var() != self.var)
            .chain(std::iter::once(&self.low).filter(|l| l.decision_level == cur))
            .collect();
        current.sort_by_key(|e| std::cmp::Reverse(e.key()));
        let mut uip = None;
        for e in current {
            if !seen.contains(&e.lit.var()) {
                continue;
            }
            open -= 1;
            if open == 0 {
                uip = Some(e.lit);
                break;
            }
            let Some(ants) = self.answers.get(&e.lit) else {
                return Err(format!("no reason collected for {}", e.lit));
            };
            for &a in ants {
                add(a, &mut seen, &mut open)?;
            }
        }
        let uip = uip.ok_or("conflict has no literal at the current level")?;
        let level_of = |l: Lit| trail.entry_of(!l).map_or(0, |e| e.decision_level);
        let backtrack_level = earlier.iter().map(|&l| level_of(l)).max().unwrap_or(0);
        let mut levels: BTreeSet<u32> = earlier.iter().map(|&l| level_of(l)).collect();
        levels.insert(cur);
        let mut lits = earlier;
        lits.push(!uip);
        lits.sort();
        Ok(LearnedClause {
            lits,
            asserting: !uip,
            backtrack_level,
            lbd: levels.len() as u32,
        })
    }
}
