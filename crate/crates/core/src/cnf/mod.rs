//! CNF formulas: literals, DIMACS input/output, fixed-width clause splitting
//! and problem characterization.

mod dimacs;
pub mod gen;
mod split;
mod stats;

use std::fmt;
use std::ops::Not;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dimacs::{parse_dimacs, write_dimacs, DimacsCnf};
pub use split::{split_clause, split_clauses, SplitFormula};
pub use stats::{characterize, CharStats, PercentileRow};

/// Width of the variable field on the wire.
pub const VAR_BITS: u32 = 20;
/// Number of addressable variables; the all-ones index is reserved as a
/// broadcast sentinel, so formulas may use indices `0..MAX_VARS - 1`.
pub const MAX_VARS: u32 = 1 << VAR_BITS;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CnfError {
    #[error("line {line}: missing or malformed `p cnf` header")]
    MalformedHeader { line: usize },
    #[error("line {line}: unsupported DIMACS variant `{kind}`")]
    UnsupportedFormat { line: usize, kind: String },
    #[error("line {line}: invalid token `{token}`")]
    InvalidToken { line: usize, token: String },
    #[error("line {line}: literal {lit} exceeds declared variable count {declared}")]
    LiteralOutOfRange {
        line: usize,
        lit: i64,
        declared: u32,
    },
    #[error("final clause is not terminated by 0")]
    UnterminatedClause,
    #[error("header declares {declared} clauses but {found} were read")]
    ClauseCountMismatch { declared: usize, found: usize },
    #[error("{vars} variables do not fit the 20-bit variable field")]
    Capacity { vars: u64 },
    #[error("clause width {0} is too small; splitting needs at least 3")]
    WidthTooSmall(usize),
    #[error("formula has no clauses")]
    EmptyFormula,
}

/// A propositional variable, 0-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Var(pub u32);

impl Var {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    #[inline]
    pub fn lit(self, positive: bool) -> Lit {
        Lit::new(self, positive)
    }
}

/// A literal, packed as `2 * var + negated`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Lit(u32);

impl Lit {
    #[inline]
    pub fn new(var: Var, positive: bool) -> Lit {
        Lit(var.0 << 1 | (!positive) as u32)
    }

    #[inline]
    pub fn var(self) -> Var {
        Var(self.0 >> 1)
    }

    #[inline]
    pub fn is_positive(self) -> bool {
        self.0 & 1 == 0
    }

    /// Dense index usable for per-literal tables.
    #[inline]
    pub fn code(self) -> usize {
        self.0 as usize
    }

    #[inline]
    pub fn from_code(code: usize) -> Lit {
        Lit(code as u32)
    }

    /// Converts a non-zero DIMACS literal.
    pub fn from_dimacs(x: i64) -> Lit {
        debug_assert!(x != 0);
        Lit::new(Var((x.unsigned_abs() - 1) as u32), x > 0)
    }

    pub fn to_dimacs(self) -> i64 {
        let v = self.var().0 as i64 + 1;
        if self.is_positive() {
            v
        } else {
            -v
        }
    }
}

impl Not for Lit {
    type Output = Lit;
    #[inline]
    fn not(self) -> Lit {
        Lit(self.0 ^ 1)
    }
}

impl fmt::Debug for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_positive() {
            write!(f, "x{}", self.var().0)
        } else {
            write!(f, "¬x{}", self.var().0)
        }
    }
}

impl fmt::Display for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_dimacs())
    }
}

/// A CNF formula. Clauses are non-empty, free of duplicate literals and
/// tautology-free once they have gone through [`Formula::add_clause`].
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Formula {
    pub num_vars: u32,
    pub clauses: Vec<Vec<Lit>>,
}

impl Formula {
    pub fn new(num_vars: u32) -> Formula {
        Formula {
            num_vars,
            clauses: Vec::new(),
        }
    }

    /// Normalizes and appends a clause. Returns false if the clause was a
    /// tautology and got dropped.
    pub fn add_clause(&mut self, lits: &[Lit]) -> bool {
        match normalize_clause(lits) {
            Some(c) => {
                for l in &c {
                    self.num_vars = self.num_vars.max(l.var().0 + 1);
                }
                self.clauses.push(c);
                true
            }
            None => false,
        }
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    /// Evaluates the formula under a complete assignment indexed by variable.
    pub fn eval(&self, assignment: &[bool]) -> bool {
        self.clauses.iter().all(|c| {
            c.iter()
                .any(|l| assignment[l.var().index()] == l.is_positive())
        })
    }
}

/// Sorts and deduplicates a clause; returns `None` for tautologies.
/// Empty input is returned as an empty clause.
pub fn normalize_clause(lits: &[Lit]) -> Option<Vec<Lit>> {
    let mut c = lits.to_vec();
    c.sort_unstable();
    c.dedup();
    // After sorting, x and ¬x are adjacent.
    if c.windows(2).any(|w| w[0].var() == w[1].var()) {
        return None;
    }
    Some(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literal_packing() {
        let l = Lit::new(Var(5), false);
        assert_eq!(l.var(), Var(5));
        assert!(!l.is_positive());
        assert_eq!(!!l, l);
        assert_eq!((!l).var(), l.var());
        assert_eq!(l.to_dimacs(), -6);
        assert_eq!(Lit::from_dimacs(-6), l);
    }

    #[test]
    fn normalize_drops_tautologies_and_duplicates() {
        let a = Var(0).lit(true);
        let b = Var(1).lit(false);
        assert_eq!(normalize_clause(&[a, b, a]), Some(vec![a, b]));
        assert_eq!(normalize_clause(&[a, !a]), None);
    }
}
