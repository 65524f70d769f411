use super::*;
use crate::cnf::split_clauses;

fn lits(xs: &[i64]) -> Vec<Lit> {
    xs.iter().map(|&x| Lit::from_dimacs(x)).collect()
}

fn config(banks: usize, size: usize) -> CentralConfig {
    CentralConfig {
        contexts: 1,
        width: 3,
        banks,
        bank_size: size,
        seed: 0,
        max_conflicts: None,
        policy: SolverPolicy::default(),
        record_events: true,
        script: Vec::new(),
    }
}

fn formula(clauses: &[&[i64]]) -> Formula {
    let n = clauses
        .iter()
        .flat_map(|c| c.iter())
        .map(|x| x.unsigned_abs() as u32)
        .max()
        .unwrap_or(0);
    let mut f = Formula::new(n);
    for c in clauses {
        f.add_clause(&lits(c));
    }
    f
}

#[test]
fn allocator_keeps_chains_adjacent() {
    let mut a = Allocator::new(2, 4);
    let x = a.alloc(3).unwrap();
    assert_eq!((x.bank, x.unit), (0, 0));
    // bank 1 is next in the rotation
    let y = a.alloc(2).unwrap();
    assert_eq!((y.bank, y.unit), (1, 0));
    // bank 0 has only one free unit left, bank 1 has two
    let z = a.alloc(2).unwrap();
    assert_eq!((z.bank, z.unit), (1, 2));
    assert!(a.alloc(2).is_none());
    a.release(ClauseAddr { bank: 0, unit: 2 });
    assert_eq!(a.alloc(2).unwrap(), ClauseAddr { bank: 0, unit: 2 });
    assert_eq!(a.available, 0);
}

#[test]
fn initial_load_is_queued() {
    let f = formula(&[&[1, 2, 3, 4], &[-1, 2]]);
    let s = split_clauses(&f, 3).unwrap();
    let c = Central::new(config(2, 4), &s).unwrap();
    assert_eq!(c.stats.messages_sent[MessageKind::AddClause as usize], 3);
    assert!(c.has_queued(0));
    // the two links of the long clause sit next to each other
    let first = c.clauses[0].links[0].addr;
    assert_eq!(c.clauses[0].links[1].addr.unit, first.unit + 1);
    assert_eq!(c.link(first), Some(&s.formula.clauses[0][..]));
    assert_eq!(c.db_formula(0).clauses.len(), 3);
}

#[test]
fn capacity_is_checked() {
    let f = formula(&[&[1, 2], &[-1, 2], &[1, -2]]);
    let s = split_clauses(&f, 3).unwrap();
    assert_eq!(
        Central::new(config(1, 2), &s).unwrap_err(),
        CentralError::Capacity {
            needed: 3,
            available: 2
        }
    );
}

#[test]
fn empty_clause_is_unsat_at_once() {
    let mut f = formula(&[&[1, 2]]);
    f.clauses.push(Vec::new());
    let s = split_clauses(&f, 3).unwrap();
    let c = Central::new(config(1, 4), &s).unwrap();
    assert_eq!(c.outcome(), Some(&Outcome::Unsat));
}

#[test]
fn absorb_sends_not_reason_to_the_loser() {
    let f = formula(&[&[1, 2], &[1, 3]]);
    let s = split_clauses(&f, 3).unwrap();
    let mut c = Central::new(config(1, 4), &s).unwrap();
    let a = |u| ClauseAddr { bank: 0, unit: u };
    let x2 = Lit::from_dimacs(2);
    c.receive(Message::PropLit {
        ctx: 0,
        addr: a(0),
        lit: x2,
        level: 7,
    });
    c.receive(Message::PropLit {
        ctx: 0,
        addr: a(1),
        lit: x2,
        level: 4,
    });
    c.receive(Message::PropLit {
        ctx: 0,
        addr: a(2),
        lit: x2,
        level: 9,
    });
    let nr: Vec<ClauseAddr> = c
        .outbox
        .iter()
        .filter_map(|(m, _)| match m {
            Message::NotReason { addr, .. } => Some(*addr),
            _ => None,
        })
        .collect();
    assert_eq!(nr, vec![a(0), a(2)]);
    assert_eq!(c.trail(0).entry_of(x2).unwrap().reason, a(1));
    assert_eq!(
        c.stats.implications + c.stats.implications_discarded,
        c.stats.proplits_received
    );
}
