use std::ops::Range;

use super::{CnfError, Formula, Lit, Var};

/// A formula rewritten so that no clause exceeds `width` literals.
///
/// Long clauses become linear chains joined by fresh connector variables:
/// chain link `i` ends with `c_i` and link `i + 1` starts with `¬c_i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitFormula {
    pub formula: Formula,
    pub width: usize,
    /// Variable count of the input formula; connector indices start here.
    pub original_vars: u32,
    /// Original clause index for every split clause.
    pub origin: Vec<usize>,
    /// `linked_next[i]` is set when split clause `i` shares a connector with
    /// clause `i + 1` (they must sit in adjacent clause units).
    pub linked_next: Vec<bool>,
}

impl SplitFormula {
    pub fn connector_vars(&self) -> Range<u32> {
        self.original_vars..self.formula.num_vars
    }

    pub fn is_connector(&self, v: Var) -> bool {
        v.0 >= self.original_vars
    }

    /// Groups split clauses into chains: each entry is a range of consecutive
    /// clause indices that must be placed together.
    pub fn chains(&self) -> Vec<Range<usize>> {
        let mut out = Vec::new();
        let mut start = 0;
        for i in 0..self.linked_next.len() {
            if !self.linked_next[i] {
                out.push(start..i + 1);
                start = i + 1;
            }
        }
        out
    }
}

/// Splits a single clause into a chain. `next_var` supplies (and is advanced
/// past) fresh connector indices. Clauses that already fit are returned as is.
pub fn split_clause(lits: &[Lit], width: usize, next_var: &mut u32) -> Vec<Vec<Lit>> {
    assert!(width >= 3);
    if lits.len() <= width {
        return vec![lits.to_vec()];
    }
    let links = (lits.len() - 2).div_ceil(width - 2);
    let mut out = Vec::with_capacity(links);
    let mut rest = lits;
    let mut incoming: Option<Lit> = None;
    for i in 0..links {
        let mut c = Vec::with_capacity(width);
        if let Some(l) = incoming {
            c.push(l);
        }
        if i + 1 == links {
            c.extend_from_slice(rest);
        } else {
            let take = width - 1 - c.len();
            c.extend_from_slice(&rest[..take]);
            rest = &rest[take..];
            let conn = Var(*next_var);
            *next_var += 1;
            c.push(conn.lit(true));
            incoming = Some(conn.lit(false));
        }
        out.push(c);
    }
    out
}

pub fn split_clauses(f: &Formula, width: usize) -> Result<SplitFormula, CnfError> {
    if width < 3 {
        return Err(CnfError::WidthTooSmall(width));
    }
    let mut next_var = f.num_vars;
    let mut out = Formula::new(f.num_vars);
    let mut origin = Vec::new();
    let mut linked_next = Vec::new();
    for (ci, c) in f.clauses.iter().enumerate() {
        let chain = split_clause(c, width, &mut next_var);
        let n = chain.len();
        for (k, part) in chain.into_iter().enumerate() {
            out.clauses.push(part);
            origin.push(ci);
            linked_next.push(k + 1 < n);
        }
    }
    if next_var >= super::MAX_VARS - 1 {
        return Err(CnfError::Capacity {
            vars: next_var as u64,
        });
    }
    out.num_vars = next_var;
    Ok(SplitFormula {
        formula: out,
        width,
        original_vars: f.num_vars,
        origin,
        linked_next,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnf::gen::random_ksat;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn x(i: u32) -> Lit {
        Var(i).lit(true)
    }

    // Exhaustive satisfiability, independent of the crate's oracle module.
    fn sat_by_enumeration(f: &Formula) -> bool {
        let n = f.num_vars;
        assert!(n <= 24);
        (0u32..1 << n).any(|m| {
            f.clauses.iter().all(|c| {
                c.iter()
                    .any(|l| ((m >> l.var().0) & 1 == 1) == l.is_positive())
            })
        })
    }

    #[test]
    fn four_literal_clause_width_three() {
        let mut f = Formula::new(4);
        f.add_clause(&[x(0), x(1), x(2), x(3)]);
        let s = split_clauses(&f, 3).unwrap();
        let c0 = Var(4);
        assert_eq!(
            s.formula.clauses,
            vec![
                vec![x(0), x(1), c0.lit(true)],
                vec![c0.lit(false), x(2), x(3)]
            ]
        );
        assert_eq!(s.connector_vars(), 4..5);
        assert_eq!(s.linked_next, vec![true, false]);
        assert_eq!(s.chains(), vec![0..2]);
    }

    #[test]
    fn short_clause_passes_through() {
        let mut f = Formula::new(2);
        f.add_clause(&[x(0), x(1)]);
        let s = split_clauses(&f, 8).unwrap();
        assert_eq!(s.formula, f);
        assert!(s.connector_vars().is_empty());
    }

    #[test]
    fn twenty_literal_clause_is_equisatisfiable() {
        let lits: Vec<Lit> = (0..20).map(|i| Var(i).lit(i % 3 != 0)).collect();
        let mut f = Formula::new(20);
        f.add_clause(&lits);
        // Force every literal but the last one false.
        for l in &lits[..19] {
            f.add_clause(&[!*l]);
        }
        let s = split_clauses(&f, 8).unwrap();
        let chain: Vec<_> = s.origin.iter().filter(|&&o| o == 0).collect();
        assert_eq!(chain.len(), 3);
        assert!(s.formula.clauses.iter().all(|c| c.len() <= 8));
        assert_eq!(s.formula.num_vars, 22);
        assert_eq!(sat_by_enumeration(&f), sat_by_enumeration(&s.formula));
        f.add_clause(&[!lits[19]]);
        let s = split_clauses(&f, 8).unwrap();
        assert!(!sat_by_enumeration(&f));
        assert!(!sat_by_enumeration(&s.formula));
    }

    #[test]
    fn width_below_three_is_rejected() {
        assert_eq!(
            split_clauses(&Formula::new(1), 2),
            Err(CnfError::WidthTooSmall(2))
        );
    }

    proptest! {
        #[test]
        fn chain_lengths_and_connectors(len in 1usize..40, width in 3usize..10) {
            let lits: Vec<Lit> = (0..len as u32).map(|i| Var(i).lit(i % 2 == 0)).collect();
            let mut next = len as u32;
            let chain = split_clause(&lits, width, &mut next);
            if len <= width {
                prop_assert_eq!(chain.len(), 1);
            } else {
                prop_assert_eq!(chain.len(), (len - 2).div_ceil(width - 2));
            }
            let mut payload = 0;
            for c in &chain {
                prop_assert!(c.len() <= width);
                payload += c.iter().filter(|l| l.var().0 < len as u32).count();
            }
            prop_assert_eq!(payload, len);
            // each connector appears exactly twice, once per polarity
            for v in len as u32..next {
                let occ: Vec<Lit> = chain.iter().flatten().copied().filter(|l| l.var().0 == v).collect();
                prop_assert_eq!(occ.len(), 2);
                prop_assert_ne!(occ[0].is_positive(), occ[1].is_positive());
            }
        }

        #[test]
        fn splitting_preserves_satisfiability(seed in any::<u64>(), width in 3usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut f = random_ksat(8, 6, 5, &mut rng);
            f.clauses.extend(random_ksat(8, 10, 2, &mut rng).clauses);
            let s = split_clauses(&f, width).unwrap();
            prop_assert!(s.formula.num_vars <= 24);
            prop_assert_eq!(sat_by_enumeration(&f), sat_by_enumeration(&s.formula));
        }
    }
}
