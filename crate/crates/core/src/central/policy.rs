use serde::{Deserialize, Serialize};

/// Search policy knobs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverPolicy {
    /// Conflicts per Luby unit; 0 disables restarts.
    pub restart_unit: u64,
    /// Conflicts before the first clause-database reduction.
    pub reduce_first: u64,
    /// Growth of the reduction interval after each reduction.
    pub reduce_increment: u64,
    /// Cancel the current decision level with one broadcast.
    pub cancel_current: bool,
    pub strengthen: bool,
}

impl Default for SolverPolicy {
    fn default() -> Self {
        SolverPolicy {
            restart_unit: 100,
            reduce_first: 2000,
            reduce_increment: 300,
            cancel_current: true,
            strengthen: true,
        }
    }
}

/// The i-th term (1-based) of the Luby sequence 1,1,2,1,1,2,4,...
pub fn luby(i: u64) -> u64 {
    assert!(i >= 1);
    let mut i = i;
    loop {
        // smallest k with i <= 2^k - 1
        let mut k = 1;
        while (1u64 << k) - 1 < i {
            k += 1;
        }
        if i == (1u64 << k) - 1 {
            return 1 << (k - 1);
        }
        i -= (1u64 << (k - 1)) - 1;
    }
}

/// Restart trigger for one context.
#[derive(Clone, Debug)]
pub struct Restarts {
    unit: u64,
    index: u64,
    since: u64,
}

impl Restarts {
    pub fn new(unit: u64) -> Restarts {
        Restarts {
            unit,
            index: 1,
            since: 0,
        }
    }

    /// Counts a conflict; true when a restart is due.
    pub fn on_conflict(&mut self) -> bool {
        if self.unit == 0 {
            return false;
        }
        self.since += 1;
        if self.since >= luby(self.index) * self.unit {
            self.since = 0;
            self.index += 1;
            return true;
        }
        false
    }
}

/// Conflict counts at which the learned clauses are reduced: the first at
/// `first`, each later gap `increment` longer than the previous.
#[derive(Clone, Debug)]
pub struct ReduceSchedule {
    next: u64,
    gap: u64,
    increment: u64,
}

impl ReduceSchedule {
    pub fn new(first: u64, increment: u64) -> ReduceSchedule {
        ReduceSchedule {
            next: first,
            gap: first,
            increment,
        }
    }

    pub fn due(&self, conflicts: u64) -> bool {
        self.next > 0 && conflicts >= self.next
    }

    pub fn next(&self) -> u64 {
        self.next
    }

    pub fn advance(&mut self, conflicts: u64) {
        self.gap += self.increment;
        self.next = conflicts + self.gap;
    }
}

/// A learned clause as seen by the reduction policy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LearnedInfo {
    pub id: usize,
    pub lbd: u32,
    /// Conflict count at which it was learned.
    pub birth: u64,
    pub is_reason: bool,
}

/// Picks half of the learned clauses, worst LBD first and older first on
/// ties, skipping reasons.
pub fn select_for_deletion(clauses: &[LearnedInfo]) -> Vec<usize> {
    let quota = clauses.len() / 2;
    let mut order: Vec<&LearnedInfo> = clauses.iter().collect();
    order.sort_by_key(|c| (std::cmp::Reverse(c.lbd), c.birth, c.id));
    order
        .into_iter()
        .filter(|c| !c.is_reason)
        .take(quota)
        .map(|c| c.id)
        .collect()
}
