//! Instance generators used by tests, benches and the CLI corpus tools.

use rand::seq::index::sample;
use rand::Rng;

use super::{Formula, Lit, Var};

/// Uniform random k-SAT: each clause draws `k` distinct variables and
/// independent polarities.
pub fn random_ksat<R: Rng>(num_vars: u32, num_clauses: usize, k: usize, rng: &mut R) -> Formula {
    assert!(k as u32 <= num_vars, "k exceeds variable count");
    let mut f = Formula::new(num_vars);
    for _ in 0..num_clauses {
        let mut c: Vec<Lit> = sample(rng, num_vars as usize, k)
            .into_iter()
            .map(|v| Var(v as u32).lit(rng.gen()))
            .collect();
        c.sort_unstable();
        f.clauses.push(c);
    }
    f
}

/// Pigeonhole principle PHP(pigeons, holes); unsatisfiable whenever
/// `pigeons > holes`. Variable `p * holes + h` means pigeon `p` sits in hole `h`.
pub fn pigeonhole(pigeons: u32, holes: u32) -> Formula {
    let var = |p: u32, h: u32| Var(p * holes + h);
    let mut f = Formula::new(pigeons * holes);
    for p in 0..pigeons {
        f.add_clause(&(0..holes).map(|h| var(p, h).lit(true)).collect::<Vec<_>>());
    }
    for h in 0..holes {
        for p in 0..pigeons {
            for q in p + 1..pigeons {
                f.add_clause(&[var(p, h).lit(false), var(q, h).lit(false)]);
            }
        }
    }
    f
}
