//! Reference engines used to check the simulator: exhaustive search, a
//! sequential unit-propagation fixpoint, clause implication, 1-UIP learning
//! and a plain sequential CDCL solver.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cnf::{Formula, Lit, Var};

pub const BRUTE_FORCE_MAX_VARS: u32 = 25;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("{vars} variables exceed the brute-force limit of {limit}")]
    TooManyVars { vars: u32, limit: u32 },
    #[error("decision trace inconsistent with formula state: {0}")]
    InconsistentTrace(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Sat,
    Unsat,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OracleResult {
    pub verdict: Verdict,
    pub model: Option<Vec<bool>>,
}

/// Exhaustive search, 64 assignments per step. Variable 0 is the most
/// significant bit of the enumeration order, so the first model found is the
/// lexicographically smallest (false < true).
pub fn brute_force(f: &Formula) -> Result<OracleResult, OracleError> {
    let n = f.num_vars;
    if n > BRUTE_FORCE_MAX_VARS {
        return Err(OracleError::TooManyVars {
            vars: n,
            limit: BRUTE_FORCE_MAX_VARS,
        });
    }
    if f.clauses.iter().any(Vec::is_empty) {
        return Ok(OracleResult {
            verdict: Verdict::Unsat,
            model: None,
        });
    }
    const LANE: [u64; 6] = [
        0xAAAA_AAAA_AAAA_AAAA,
        0xCCCC_CCCC_CCCC_CCCC,
        0xF0F0_F0F0_F0F0_F0F0,
        0xFF00_FF00_FF00_FF00,
        0xFFFF_0000_FFFF_0000,
        0xFFFF_FFFF_0000_0000,
    ];
    // bit position of var i in the enumeration counter
    let pos = |v: Var| n - 1 - v.0;
    let valid = if n >= 6 {
        u64::MAX
    } else {
        (1u64 << (1 << n)) - 1
    };
    let words: u64 = if n > 6 { 1 << (n - 6) } else { 1 };
    for w in 0..words {
        let mut sat = valid;
        for c in &f.clauses {
            let mut cm = 0u64;
            for &l in c {
                let p = pos(l.var());
                let m = if p < 6 {
                    LANE[p as usize]
                } else if (w >> (p - 6)) & 1 == 1 {
                    u64::MAX
                } else {
                    0
                };
                cm |= if l.is_positive() { m } else { !m };
            }
            sat &= cm;
            if sat == 0 {
                break;
            }
        }
        if sat != 0 {
            let m = (w << 6) | sat.trailing_zeros() as u64;
            let model = (0..n).map(|i| (m >> (n - 1 - i)) & 1 == 1).collect();
            return Ok(OracleResult {
                verdict: Verdict::Sat,
                model: Some(model),
            });
        }
    }
    Ok(OracleResult {
        verdict: Verdict::Unsat,
        model: None,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BcpResult {
    /// Assigned literals, sorted.
    Assigned(Vec<Lit>),
    Conflict,
}

fn lit_value(assign: &[Option<bool>], l: Lit) -> Option<bool> {
    assign[l.var().index()].map(|b| b == l.is_positive())
}

/// Least fixpoint of unit propagation from `assumptions`.
pub fn bcp_fixpoint(f: &Formula, assumptions: &[Lit]) -> BcpResult {
    let mut assign: Vec<Option<bool>> = vec![None; f.num_vars as usize];
    for &a in assumptions {
        match lit_value(&assign, a) {
            Some(false) => return BcpResult::Conflict,
            Some(true) => {}
            None => assign[a.var().index()] = Some(a.is_positive()),
        }
    }
    loop {
        let mut changed = false;
        for c in &f.clauses {
            let mut free = None;
            let mut free_count = 0;
            let mut satisfied = false;
            for &l in c {
                match lit_value(&assign, l) {
                    Some(true) => {
                        satisfied = true;
                        break;
                    }
                    Some(false) => {}
                    None => {
                        free_count += 1;
                        free = Some(l);
                    }
                }
            }
            if satisfied {
                continue;
            }
            match free_count {
                0 => return BcpResult::Conflict,
                1 => {
                    let l = free.unwrap();
                    assign[l.var().index()] = Some(l.is_positive());
                    changed = true;
                }
                _ => {}
            }
        }
        if !changed {
            break;
        }
    }
    let mut out: Vec<Lit> = assign
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|b| Var(i as u32).lit(b)))
        .collect();
    out.sort();
    BcpResult::Assigned(out)
}

fn dpll(clauses: &[Vec<Lit>], assign: &mut Vec<Option<bool>>) -> bool {
    let mut trail = Vec::new();
    let ok = loop {
        let mut changed = false;
        let mut conflict = false;
        for c in clauses {
            let mut free = None;
            let mut free_count = 0;
            let mut satisfied = false;
            for &l in c {
                match lit_value(assign, l) {
                    Some(true) => {
                        satisfied = true;
                        break;
                    }
                    Some(false) => {}
                    None => {
                        free_count += 1;
                        free = Some(l);
                    }
                }
            }
            if satisfied {
                continue;
            }
            if free_count == 0 {
                conflict = true;
                break;
            }
            if free_count == 1 {
                let l = free.unwrap();
                assign[l.var().index()] = Some(l.is_positive());
                trail.push(l.var().index());
                changed = true;
            }
        }
        if conflict {
            break false;
        }
        if !changed {
            break true;
        }
    };
    let result = ok && {
        match assign.iter().position(Option::is_none) {
            None => true,
            Some(v) => {
                assign[v] = Some(false);
                if dpll(clauses, assign) {
                    true
                } else {
                    assign[v] = Some(true);
                    let r = dpll(clauses, assign);
                    if !r {
                        assign[v] = None;
                    }
                    r
                }
            }
        }
    };
    if !result {
        for v in trail {
            assign[v] = None;
        }
    }
    result
}

/// Whether `f` entails `clause`, i.e. `f ∧ ¬clause` is unsatisfiable.
/// Exhaustive for small formulas, DPLL otherwise.
pub fn implies(f: &Formula, clause: &[Lit]) -> Result<bool, OracleError> {
    let n = clause
        .iter()
        .map(|l| l.var().0 + 1)
        .max()
        .unwrap_or(0)
        .max(f.num_vars);
    let mut g = Formula::new(n);
    g.clauses = f.clauses.clone();
    for &l in clause {
        g.clauses.push(vec![!l]);
    }
    if n <= BRUTE_FORCE_MAX_VARS {
        return Ok(brute_force(&g)?.verdict == Verdict::Unsat);
    }
    let mut assign = vec![None; n as usize];
    Ok(!dpll(&g.clauses, &mut assign))
}

/// One assignment of a trail handed to [`first_uip`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrailStep {
    pub lit: Lit,
    pub decision_level: u32,
    /// Literals of the reason clause (including `lit`); `None` for decisions.
    pub reason: Option<Vec<Lit>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Learned {
    /// Sorted literals; the asserting literal is `!uip`.
    pub clause: Vec<Lit>,
    pub uip: Lit,
    pub backtrack_level: u32,
    pub lbd: u32,
}

/// 1-UIP analysis of `conflict` (a clause falsified by `trail`). Returns
/// `None` for a conflict at decision level 0.
pub fn first_uip(trail: &[TrailStep], conflict: &[Lit]) -> Result<Option<Learned>, OracleError> {
    let num_vars = trail
        .iter()
        .map(|s| s.lit.var().index() + 1)
        .chain(conflict.iter().map(|l| l.var().index() + 1))
        .max()
        .unwrap_or(0);
    let mut pos = vec![usize::MAX; num_vars];
    for (i, s) in trail.iter().enumerate() {
        pos[s.lit.var().index()] = i;
    }
    let level_of = |l: Lit| -> Result<u32, OracleError> {
        let p = pos[l.var().index()];
        if p == usize::MAX || trail[p].lit != !l {
            return Err(OracleError::InconsistentTrace(format!(
                "{l:?} not falsified by trail"
            )));
        }
        Ok(trail[p].decision_level)
    };
    let mut cur = 0;
    for &l in conflict {
        cur = cur.max(level_of(l)?);
    }
    if cur == 0 {
        return Ok(None);
    }
    let mut seen = vec![false; num_vars];
    let mut learned = Vec::new();
    let mut open = 0;
    let add = |l: Lit,
               seen: &mut Vec<bool>,
               learned: &mut Vec<Lit>,
               open: &mut usize|
     -> Result<(), OracleError> {
        let v = l.var().index();
        if seen[v] {
            return Ok(());
        }
        seen[v] = true;
        if level_of(l)? == cur {
            *open += 1;
        } else if level_of(l)? > 0 {
            learned.push(l);
        }
        Ok(())
    };
    for &l in conflict {
        add(l, &mut seen, &mut learned, &mut open)?;
    }
    let mut i = trail.len();
    let uip = loop {
        if i == 0 {
            return Err(OracleError::InconsistentTrace("no UIP found".into()));
        }
        i -= 1;
        let s = &trail[i];
        if !seen[s.lit.var().index()] {
            continue;
        }
        open -= 1;
        if open == 0 {
            break s.lit;
        }
        let reason = s
            .reason
            .as_ref()
            .ok_or_else(|| OracleError::InconsistentTrace("decision reached before UIP".into()))?;
        for &r in reason {
            if r != s.lit {
                add(r, &mut seen, &mut learned, &mut open)?;
            }
        }
    };
    let mut levels: Vec<u32> = learned
        .iter()
        .map(|&l| level_of(l))
        .collect::<Result<_, _>>()?;
    levels.sort_unstable();
    levels.dedup();
    let backtrack_level = levels.last().copied().unwrap_or(0);
    learned.push(!uip);
    learned.sort();
    Ok(Some(Learned {
        lbd: levels.len() as u32 + 1,
        clause: learned,
        uip,
        backtrack_level,
    }))
}

/// What happened after one replayed decision.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecisionOutcome {
    pub decision: Lit,
    /// Implied literals in propagation order, across any conflicts.
    pub implications: Vec<Lit>,
    /// Clauses learned while settling this decision.
    pub learned: Vec<Vec<Lit>>,
    /// Conflict at decision level 0: the formula is unsatisfiable.
    pub unsat: bool,
}

struct Seq {
    clauses: Vec<Vec<Lit>>,
    assign: Vec<Option<bool>>,
    trail: Vec<TrailStep>,
    level: u32,
}

impl Seq {
    fn new(f: &Formula) -> Seq {
        Seq {
            clauses: f.clauses.clone(),
            assign: vec![None; f.num_vars as usize],
            trail: Vec::new(),
            level: 0,
        }
    }

    fn push(&mut self, lit: Lit, reason: Option<Vec<Lit>>) {
        self.assign[lit.var().index()] = Some(lit.is_positive());
        self.trail.push(TrailStep {
            lit,
            decision_level: self.level,
            reason,
        });
    }

    /// Propagates in clause order; returns a falsified clause if any.
    fn propagate(&mut self, out: &mut Vec<Lit>) -> Option<Vec<Lit>> {
        loop {
            let mut changed = false;
            for ci in 0..self.clauses.len() {
                let c = &self.clauses[ci];
                let mut free = None;
                let mut free_count = 0;
                let mut satisfied = false;
                for &l in c {
                    match lit_value(&self.assign, l) {
                        Some(true) => {
                            satisfied = true;
                            break;
                        }
                        Some(false) => {}
                        None => {
                            free_count += 1;
                            free = Some(l);
                        }
                    }
                }
                if satisfied {
                    continue;
                }
                if free_count == 0 {
                    return Some(c.clone());
                }
                if free_count == 1 {
                    let l = free.unwrap();
                    let c = c.clone();
                    self.push(l, Some(c));
                    out.push(l);
                    changed = true;
                }
            }
            if !changed {
                return None;
            }
        }
    }

    fn backtrack(&mut self, level: u32) {
        while self.trail.last().is_some_and(|s| s.decision_level > level) {
            let s = self.trail.pop().unwrap();
            self.assign[s.lit.var().index()] = None;
        }
        self.level = level;
    }

    /// Propagates and learns until quiescent. Returns false on a level-0 conflict.
    fn settle(&mut self, out: &mut DecisionOutcome) -> Result<bool, OracleError> {
        while let Some(conflict) = self.propagate(&mut out.implications) {
            let Some(l) = first_uip(&self.trail, &conflict)? else {
                return Ok(false);
            };
            self.backtrack(l.backtrack_level);
            self.push(!l.uip, Some(l.clause.clone()));
            out.implications.push(!l.uip);
            self.clauses.push(l.clause.clone());
            out.learned.push(l.clause);
        }
        Ok(true)
    }
}

/// Replays a decision sequence with sequential BCP and 1-UIP learning.
/// Decisions already assigned when their turn comes are skipped.
pub fn sequential_cdcl(
    f: &Formula,
    decisions: &[Lit],
) -> Result<Vec<DecisionOutcome>, OracleError> {
    let mut s = Seq::new(f);
    let mut root = DecisionOutcome {
        decision: Lit::new(Var(0), false),
        implications: Vec::new(),
        learned: Vec::new(),
        unsat: false,
    };
    if f.clauses.iter().any(Vec::is_empty) || !s.settle(&mut root)? {
        return Err(OracleError::InconsistentTrace(
            "formula unsatisfiable at level 0".into(),
        ));
    }
    let mut out = Vec::new();
    for &d in decisions {
        if d.var().index() >= s.assign.len() {
            return Err(OracleError::InconsistentTrace(format!(
                "decision {d:?} out of range"
            )));
        }
        if s.assign[d.var().index()].is_some() {
            continue;
        }
        s.level += 1;
        s.push(d, None);
        let mut o = DecisionOutcome {
            decision: d,
            implications: Vec::new(),
            learned: Vec::new(),
            unsat: false,
        };
        o.unsat = !s.settle(&mut o)?;
        let stop = o.unsat;
        out.push(o);
        if stop {
            break;
        }
    }
    Ok(out)
}

/// Complete sequential CDCL solve: lowest unassigned variable, negative first.
pub fn cdcl_solve(f: &Formula) -> OracleResult {
    let unsat = OracleResult {
        verdict: Verdict::Unsat,
        model: None,
    };
    if f.clauses.iter().any(Vec::is_empty) {
        return unsat;
    }
    let mut s = Seq::new(f);
    let mut scratch = DecisionOutcome {
        decision: Lit::new(Var(0), false),
        implications: Vec::new(),
        learned: Vec::new(),
        unsat: false,
    };
    loop {
        match s.settle(&mut scratch) {
            Ok(true) => {}
            _ => return unsat,
        }
        scratch.implications.clear();
        match s.assign.iter().position(Option::is_none) {
            None => {
                return OracleResult {
                    verdict: Verdict::Sat,
                    model: Some(s.assign.iter().map(|v| v.unwrap()).collect()),
                }
            }
            Some(v) => {
                s.level += 1;
                s.push(Var(v as u32).lit(false), None);
            }
        }
    }
}
