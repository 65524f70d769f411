use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cnf::{Lit, Var};

pub const DECAY: f64 = 0.95;
pub const BUMP: f64 = 1.0;
const RESCALE_ABOVE: f64 = 1e100;

/// Literal activity scores. Decay is applied lazily by growing the bump.
#[derive(Clone, Debug)]
pub struct Vsids {
    activity: Vec<f64>,
    inc: f64,
}

impl Vsids {
    /// Scores for literals of variables `0..vars`. With a seed, every score
    /// starts with a tiny random offset so different contexts diverge.
    pub fn new(vars: u32, jitter_seed: Option<u64>) -> Vsids {
        let mut activity = vec![0.0; 2 * vars as usize];
        if let Some(seed) = jitter_seed {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for a in &mut activity {
                *a = rng.gen_range(0.0..1e-3);
            }
        }
        Vsids {
            activity,
            inc: BUMP,
        }
    }

    pub fn activity(&self, l: Lit) -> f64 {
        self.activity.get(l.code()).map_or(0.0, |a| a / self.inc)
    }

    /// Bumps every literal of a learned clause; literals outside the scored
    /// range (connector variables) are ignored.
    pub fn bump(&mut self, clause: &[Lit]) {
        for &l in clause {
            if let Some(a) = self.activity.get_mut(l.code()) {
                *a += self.inc;
            }
        }
        if self.inc > RESCALE_ABOVE || self.activity.iter().any(|&a| a > RESCALE_ABOVE) {
            for a in &mut self.activity {
                *a /= RESCALE_ABOVE;
            }
            self.inc /= RESCALE_ABOVE;
        }
    }

    /// One conflict's worth of decay.
    pub fn decay(&mut self) {
        self.inc /= DECAY;
    }

    pub fn scale(&mut self, k: f64) {
        for a in &mut self.activity {
            *a *= k;
        }
    }

    /// Highest-scoring literal whose variable is unassigned. Ties go to the
    /// lower variable, then the negative literal.
    pub fn pick(&self, assigned: impl Fn(Var) -> bool) -> Option<Lit> {
        let mut best: Option<(f64, Lit)> = None;
        for v in 0..(self.activity.len() / 2) as u32 {
            if assigned(Var(v)) {
                continue;
            }
            for l in [Var(v).lit(false), Var(v).lit(true)] {
                let a = self.activity[l.code()];
                if best.is_none_or(|(b, _)| a > b) {
                    best = Some((a, l));
                }
            }
        }
        best.map(|(_, l)| l)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_activity_picks_lowest_negative() {
        let v = Vsids::new(4, None);
        assert_eq!(v.pick(|_| false), Some(Var(0).lit(false)));
        assert_eq!(v.pick(|x| x.0 < 2), Some(Var(2).lit(false)));
        assert_eq!(v.pick(|x| x != Var(3)), Some(Var(3).lit(false)));
        assert_eq!(v.pick(|_| true), None);
    }

    #[test]
    fn bumped_literals_win() {
        let mut v = Vsids::new(4, None);
        v.bump(&[Var(1).lit(true), Var(0).lit(true)]);
        v.decay();
        v.bump(&[Var(1).lit(true)]);
        assert_eq!(v.pick(|_| false), Some(Var(1).lit(true)));
        assert_eq!(v.pick(|x| x == Var(1)), Some(Var(0).lit(true)));
    }

    #[test]
    fn later_bumps_weigh_more() {
        let mut v = Vsids::new(3, None);
        v.bump(&[Var(0).lit(true)]);
        v.decay();
        v.bump(&[Var(2).lit(true)]);
        assert!(v.activity(Var(2).lit(true)) > v.activity(Var(0).lit(true)));
        assert!(
            (v.activity(Var(0).lit(true)) / v.activity(Var(2).lit(true)) - DECAY).abs() < 1e-12
        );
    }

    #[test]
    fn rescale_keeps_order() {
        let mut v = Vsids::new(2, None);
        v.bump(&[Var(0).lit(false)]);
        for _ in 0..6000 {
            v.decay();
        }
        v.bump(&[Var(1).lit(true)]);
        assert!(v.activity.iter().all(|a| a.is_finite()));
        assert_eq!(v.pick(|_| false), Some(Var(1).lit(true)));
    }

    proptest! {
        #[test]
        fn argmax_invariant_under_scaling(
            bumps in prop::collection::vec((0u32..6, any::<bool>()), 0..20),
            k in 0.001f64..1000.0,
        ) {
            let mut v = Vsids::new(6, Some(3));
            for (var, pol) in bumps {
                v.bump(&[Var(var).lit(pol)]);
                v.decay();
            }
            let before = v.pick(|x| x.0 % 3 == 1);
            v.scale(k);
            prop_assert_eq!(v.pick(|x| x.0 % 3 == 1), before);
        }
    }
}
