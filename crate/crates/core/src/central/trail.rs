use crate::cnf::{Lit, Var};
use crate::noc::ClauseAddr;

/// One assignment known to the central unit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrailEntry {
    pub lit: Lit,
    pub decision_level: u32,
    /// Incremented on every decision and backtrack; orders assignments of
    /// one decision level made before and after a backtrack into it.
    pub segment: u32,
    /// Implication level (0 for decisions and directly loaded facts).
    pub level: u16,
    /// Implying clause; `ClauseAddr::NONE` for decisions.
    pub reason: ClauseAddr,
    /// Assigned since the last level boundary, so banks hold a current bit for it.
    pub current: bool,
}

impl TrailEntry {
    /// Sort key that is a topological order of the implication graph.
    pub fn key(&self) -> (u32, u32, u16, u32) {
        (
            self.decision_level,
            self.segment,
            self.level,
            self.lit.var().0,
        )
    }

    pub fn is_decision(&self) -> bool {
        self.reason.is_none()
    }
}

/// Both polarities of one variable were implied.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Candidate {
    pub var: Var,
    /// Index of the entry that arrived later in logical time.
    pub high: usize,
    pub low: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Absorbed {
    /// New assignment.
    Accepted,
    /// Replaced an entry with a higher level; the old reason must be told.
    Replaced { old: ClauseAddr },
    /// Lost to an existing entry; the new clause must be told.
    Duplicate,
    /// Opposite polarity of an existing entry.
    Conflict,
}

const NO_ENTRY: u32 = u32::MAX;

/// Ordered assignment record of one context.
#[derive(Clone, Debug, Default)]
pub struct Trail {
    entries: Vec<TrailEntry>,
    /// Entry index per variable and polarity (0 = negative, 1 = positive).
    index: Vec<[u32; 2]>,
    candidates: Vec<Candidate>,
}

impl Trail {
    pub fn entries(&self) -> &[TrailEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    fn slot(&mut self, v: Var) -> &mut [u32; 2] {
        if v.index() >= self.index.len() {
            self.index.resize(v.index() + 1, [NO_ENTRY; 2]);
        }
        &mut self.index[v.index()]
    }

    pub fn entry_of(&self, lit: Lit) -> Option<&TrailEntry> {
        let i = *self
            .index
            .get(lit.var().index())?
            .get(lit.is_positive() as usize)?;
        (i != NO_ENTRY).then(|| &self.entries[i as usize])
    }

    /// The assignment of `v`, if exactly one polarity is on the trail.
    pub fn value(&self, v: Var) -> Option<bool> {
        let s = self.index.get(v.index())?;
        match (s[0] != NO_ENTRY, s[1] != NO_ENTRY) {
            (true, false) => Some(false),
            (false, true) => Some(true),
            _ => None,
        }
    }

    pub fn is_assigned(&self, v: Var) -> bool {
        self.index
            .get(v.index())
            .is_some_and(|s| s[0] != NO_ENTRY || s[1] != NO_ENTRY)
    }

    pub fn push_decision(&mut self, lit: Lit, decision_level: u32, segment: u32) {
        self.push(TrailEntry {
            lit,
            decision_level,
            segment,
            level: 0,
            reason: ClauseAddr::NONE,
            current: true,
        });
    }

    fn push(&mut self, e: TrailEntry) {
        let pol = e.lit.is_positive() as usize;
        let i = self.entries.len() as u32;
        self.slot(e.lit.var())[pol] = i;
        self.entries.push(e);
    }

    /// Folds an incoming implication into the trail. Per variable and
    /// polarity only the earliest implication is kept.
    pub fn absorb(&mut self, e: TrailEntry) -> Absorbed {
        let v = e.lit.var();
        let pol = e.lit.is_positive() as usize;
        let s = *self.slot(v);
        if s[pol] != NO_ENTRY {
            let old = &mut self.entries[s[pol] as usize];
            if e.key() < old.key() {
                let prev = old.reason;
                old.level = e.level;
                old.segment = e.segment;
                old.reason = e.reason;
                old.current = true;
                // an earlier key can flip which side of a conflict is later
                let entries = &self.entries;
                for c in self.candidates.iter_mut().filter(|c| c.var == v) {
                    if entries[c.low].key() > entries[c.high].key() {
                        std::mem::swap(&mut c.high, &mut c.low);
                    }
                }
                return Absorbed::Replaced { old: prev };
            }
            return Absorbed::Duplicate;
        }
        let i = self.entries.len();
        self.push(e);
        if s[1 - pol] != NO_ENTRY {
            let other = s[1 - pol] as usize;
            let (high, low) = if self.entries[i].key() >= self.entries[other].key() {
                (i, other)
            } else {
                (other, i)
            };
            self.candidates.push(Candidate { var: v, high, low });
            return Absorbed::Conflict;
        }
        Absorbed::Accepted
    }

    /// The candidate whose later implication has the lowest level, ties
    /// broken by variable index.
    pub fn select_conflict(&self) -> Option<Candidate> {
        self.candidates
            .iter()
            .copied()
            .min_by_key(|c| (self.entries[c.high].key(), c.var))
    }

    /// Clears every current flag (a new decision level starts).
    pub fn complete_level(&mut self) {
        for e in &mut self.entries {
            e.current = false;
        }
    }

    /// Removes entries above `level`, returning them in trail order.
    pub fn truncate(&mut self, level: u32) -> Vec<TrailEntry> {
        let keep = self
            .entries
            .iter()
            .position(|e| e.decision_level > level)
            .unwrap_or(self.entries.len());
        let removed: Vec<TrailEntry> = self.entries.drain(keep..).collect();
        for e in &removed {
            self.index[e.lit.var().index()][e.lit.is_positive() as usize] = NO_ENTRY;
        }
        self.candidates.clear();
        removed
    }

    /// Whether some entry names `addr` as its reason.
    pub fn is_reason(&self, addr: ClauseAddr) -> bool {
        self.entries.iter().any(|e| e.reason == addr)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(i: u32) -> Lit {
        Var(i).lit(true)
    }

    fn imp(lit: Lit, level: u16, unit: u16) -> TrailEntry {
        TrailEntry {
            lit,
            decision_level: 1,
            segment: 1,
            level,
            reason: ClauseAddr { bank: 0, unit },
            current: true,
        }
    }

    #[test]
    fn lowest_level_wins() {
        let mut t = Trail::default();
        assert_eq!(t.absorb(imp(x(2), 7, 1)), Absorbed::Accepted);
        assert_eq!(
            t.absorb(imp(x(2), 4, 2)),
            Absorbed::Replaced {
                old: ClauseAddr { bank: 0, unit: 1 }
            }
        );
        assert_eq!(t.absorb(imp(x(2), 9, 3)), Absorbed::Duplicate);
        assert_eq!(t.entry_of(x(2)).unwrap().level, 4);
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn opposite_polarity_is_a_candidate() {
        let mut t = Trail::default();
        t.absorb(imp(x(3), 2, 1));
        assert_eq!(t.absorb(imp(!x(3), 5, 2)), Absorbed::Conflict);
        let c = t.select_conflict().unwrap();
        assert_eq!(t.entries()[c.high].level, 5);
        assert_eq!(t.entries()[c.low].lit, x(3));
        assert_eq!(t.value(Var(3)), None);
    }

    #[test]
    fn replacement_can_swap_conflict_sides() {
        let mut t = Trail::default();
        t.absorb(imp(!x(3), 4, 1));
        t.absorb(imp(x(3), 4, 2));
        t.absorb(imp(x(3), 3, 3));
        let c = t.select_conflict().unwrap();
        assert_eq!(t.entries()[c.high].lit, !x(3));
        assert_eq!(t.entries()[c.low].level, 3);
    }

    #[test]
    fn select_conflict_min_level_then_var() {
        let mut t = Trail::default();
        t.absorb(imp(x(1), 1, 1));
        t.absorb(imp(!x(1), 5, 2));
        t.absorb(imp(x(2), 1, 3));
        t.absorb(imp(!x(2), 3, 4));
        assert_eq!(t.select_conflict().unwrap().var, Var(2));
        let mut t = Trail::default();
        t.absorb(imp(x(7), 1, 1));
        t.absorb(imp(!x(7), 4, 2));
        t.absorb(imp(x(1), 1, 3));
        t.absorb(imp(!x(1), 4, 4));
        assert_eq!(t.select_conflict().unwrap().var, Var(1));
        assert_eq!(Trail::default().select_conflict(), None);
    }

    #[test]
    fn truncate_removes_higher_levels() {
        let mut t = Trail::default();
        t.push_decision(x(0), 1, 1);
        let mut e = imp(x(1), 1, 1);
        e.decision_level = 2;
        t.absorb(e);
        let removed = t.truncate(1);
        assert_eq!(removed.len(), 1);
        assert!(!t.is_assigned(Var(1)));
        assert_eq!(t.value(Var(0)), Some(true));
    }
}
