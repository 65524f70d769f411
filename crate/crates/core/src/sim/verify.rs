use crate::central::{Central, Event, ScopedStep};
use crate::cnf::{Formula, Lit};
use crate::oracle::{bcp_fixpoint, first_uip, implies, BcpResult, TrailStep};

/// Implication checks are skipped above this many variables.
pub const IMPLIES_MAX_VARS: u32 = 48;

/// Findings of a verified run. Every `Vec<String>` lists violations.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Verification {
    pub fixpoints: u64,
    pub fixpoint_mismatches: Vec<String>,
    pub learned: u64,
    pub learned_mismatches: Vec<String>,
    pub trail_unsound: Vec<String>,
    pub implied: u64,
    pub implied_skipped: u64,
    pub not_implied: Vec<String>,
    pub backtracks: Vec<BacktrackCount>,
    pub cancel_mismatches: Vec<String>,
    pub delivery_errors: Vec<String>,
    pub credit_violations: u64,
    pub idle_checks: u64,
    pub idle_violations: u64,
    pub model_ok: Option<bool>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BacktrackCount {
    pub cancels: u64,
    /// Removed entries below the level backtracked from.
    pub below_final: u64,
    pub stale_final: u64,
    pub removed: u64,
}

impl Verification {
    /// No violation of any kind.
    pub fn clean(&self) -> bool {
        self.fixpoint_mismatches.is_empty()
            && self.learned_mismatches.is_empty()
            && self.trail_unsound.is_empty()
            && self.not_implied.is_empty()
            && self.cancel_mismatches.is_empty()
            && self.delivery_errors.is_empty()
            && self.credit_violations == 0
            && self.idle_violations == 0
            && self.model_ok != Some(false)
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v: Vec<String> = Vec::new();
        v.extend(self.fixpoint_mismatches.iter().cloned());
        v.extend(self.learned_mismatches.iter().cloned());
        v.extend(self.trail_unsound.iter().cloned());
        v.extend(self.not_implied.iter().cloned());
        v.extend(self.cancel_mismatches.iter().cloned());
        v.extend(self.delivery_errors.iter().cloned());
        if self.credit_violations > 0 {
            v.push(format!("{} credit violations", self.credit_violations));
        }
        if self.idle_violations > 0 {
            v.push(format!("{} idle violations", self.idle_violations));
        }
        if self.model_ok == Some(false) {
            v.push("model does not satisfy the formula".into());
        }
        v
    }

    fn check_implied(&mut self, base: &Formula, clause: &[Lit], what: &str) {
        if base.num_vars > IMPLIES_MAX_VARS {
            self.implied_skipped += 1;
            return;
        }
        self.implied += 1;
        match implies(base, clause) {
            Ok(true) => {}
            Ok(false) => self
                .not_implied
                .push(format!("{what} {clause:?} is not implied")),
            Err(e) => self.not_implied.push(format!("{what} {clause:?}: {e}")),
        }
    }

    /// Checks events just emitted by `central`.
    pub fn absorb(
        &mut self,
        central: &Central,
        events: Vec<Event>,
        cancel_current: bool,
        cycle: u64,
    ) {
        for ev in events {
            match ev {
                Event::Fixpoint {
                    ctx,
                    decisions,
                    assigned,
                } => {
                    self.fixpoints += 1;
                    let f = central.db_formula(ctx);
                    match bcp_fixpoint(&f, &decisions) {
                        BcpResult::Assigned(want) if want == assigned => {}
                        BcpResult::Assigned(want) => {
                            let unit = f.clauses.iter().find(|c| {
                                let free = c
                                    .iter()
                                    .filter(|l| !assigned.contains(l) && !assigned.contains(&!**l));
                                !c.iter().any(|l| assigned.contains(l)) && free.count() <= 1
                            });
                            self.fixpoint_mismatches.push(format!(
                                "cycle {cycle} ctx {ctx} after {decisions:?}: assigned {assigned:?}, fixpoint {want:?}, first open unit {unit:?}"
                            ))
                        }
                        BcpResult::Conflict => self.fixpoint_mismatches.push(format!(
                            "ctx {ctx} after {decisions:?}: fixpoint conflicts, simulator idle"
                        )),
                    }
                }
                Event::Learned {
                    ctx,
                    scope,
                    conflict,
                    learned,
                    ..
                } => {
                    self.learned += 1;
                    self.check_scope(ctx, &scope, &conflict);
                    let steps: Vec<TrailStep> = scope
                        .iter()
                        .map(|s| TrailStep {
                            lit: s.lit,
                            decision_level: s.decision_level,
                            reason: s.reason.clone(),
                        })
                        .collect();
                    match first_uip(&steps, &conflict) {
                        Ok(Some(want)) => {
                            if want.clause != learned.lits
                                || want.backtrack_level != learned.backtrack_level
                                || want.lbd != learned.lbd
                                || !want.uip != learned.asserting
                            {
                                self.learned_mismatches.push(format!(
                                    "ctx {ctx}: learned {:?} (bt {}, lbd {}), oracle {:?} (bt {}, lbd {})",
                                    learned.lits,
                                    learned.backtrack_level,
                                    learned.lbd,
                                    want.clause,
                                    want.backtrack_level,
                                    want.lbd
                                ));
                            }
                        }
                        Ok(None) => self
                            .learned_mismatches
                            .push(format!("ctx {ctx}: oracle sees a level-0 conflict")),
                        Err(e) => self.learned_mismatches.push(format!("ctx {ctx}: {e}")),
                    }
                    if learned.lbd as usize > learned.lits.len() {
                        self.learned_mismatches
                            .push(format!("lbd {} above size", learned.lbd));
                    }
                    self.check_implied(&central.definitions(), &learned.lits, "learned");
                }
                Event::Strengthened { reduced, .. } => {
                    self.check_implied(&central.definitions(), &reduced, "strengthened");
                }
                Event::Backtrack {
                    ctx,
                    from,
                    to,
                    cancels,
                    below_final,
                    stale_final,
                    removed,
                } => {
                    let want = if cancel_current {
                        below_final + stale_final + 1
                    } else {
                        removed
                    };
                    if cancels != want {
                        self.cancel_mismatches.push(format!(
                            "ctx {ctx} {from}->{to}: {cancels} cancels, expected {want}"
                        ));
                    }
                    self.backtracks.push(BacktrackCount {
                        cancels,
                        below_final,
                        stale_final,
                        removed,
                    });
                }
            }
        }
    }

    /// Every implied step's reason has its other literals falsified earlier;
    /// the conflict clause is falsified by the whole scope.
    fn check_scope(&mut self, ctx: usize, scope: &[ScopedStep], conflict: &[Lit]) {
        let mut seen = std::collections::HashSet::new();
        for s in scope {
            if let Some(r) = &s.reason {
                let ok = r.contains(&s.lit) && r.iter().all(|&l| l == s.lit || seen.contains(&!l));
                if !ok {
                    self.trail_unsound.push(format!(
                        "ctx {ctx}: {} not implied by {r:?} at its position",
                        s.lit
                    ));
                }
            }
            seen.insert(s.lit);
        }
        if conflict.is_empty() || !conflict.iter().all(|l| seen.contains(&!*l)) {
            self.trail_unsound.push(format!(
                "ctx {ctx}: conflict clause {conflict:?} not falsified"
            ));
        }
    }
}
