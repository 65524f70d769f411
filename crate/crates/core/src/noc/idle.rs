/// Global idle detection: an AND-tree over per-leaf idle bits (clause banks
/// and routers), one tree per context.
///
/// The output rises `depth = ceil(log2(leaves))` cycles after every leaf
/// became idle and falls in the same cycle any leaf goes busy.
#[derive(Clone, Debug)]
pub struct IdleTree {
    depth: u64,
    idle_since: Vec<Option<u64>>,
}

impl IdleTree {
    pub fn new(leaves: usize, contexts: usize) -> IdleTree {
        let depth = if leaves <= 1 {
            0
        } else {
            (usize::BITS - (leaves - 1).leading_zeros()) as u64
        };
        IdleTree {
            depth,
            idle_since: vec![None; contexts],
        }
    }

    pub fn depth(&self) -> u64 {
        self.depth
    }

    /// Feeds this cycle's leaf bits and returns the tree output.
    pub fn observe(&mut self, ctx: usize, all_leaves_idle: bool, now: u64) -> bool {
        let since = &mut self.idle_since[ctx];
        if !all_leaves_idle {
            *since = None;
            return false;
        }
        let start = *since.get_or_insert(now);
        now - start >= self.depth
    }

    /// Forgets accumulated idle time, e.g. after the controller injected work
    /// that has not reached any leaf yet.
    pub fn reset(&mut self, ctx: usize) {
        self.idle_since[ctx] = None;
    }
}
