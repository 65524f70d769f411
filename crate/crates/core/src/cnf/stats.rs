use std::fmt;

use serde::Serialize;

use super::{CnfError, Formula};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PercentileRow {
    pub percentile: f64,
    pub clause_length: usize,
    pub var_popularity: usize,
}

/// Clause-length and variable-popularity distribution of a formula.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CharStats {
    pub num_vars: u32,
    pub num_clauses: usize,
    pub rows: Vec<PercentileRow>,
}

/// Value at rank `ceil(p * n)` (1-based, clamped to `1..=n`) of an ascending list.
fn at_rank(sorted: &[usize], p: f64) -> usize {
    let n = sorted.len();
    let rank = ((p * n as f64).ceil() as usize).clamp(1, n);
    sorted[rank - 1]
}

pub fn characterize(f: &Formula, percentiles: &[f64]) -> Result<CharStats, CnfError> {
    if f.clauses.is_empty() || f.num_vars == 0 {
        return Err(CnfError::EmptyFormula);
    }
    let mut lengths: Vec<usize> = f.clauses.iter().map(Vec::len).collect();
    lengths.sort_unstable();
    let mut occurrences = vec![0usize; f.num_vars as usize];
    for l in f.clauses.iter().flatten() {
        occurrences[l.var().index()] += 1;
    }
    occurrences.sort_unstable();
    let rows = percentiles
        .iter()
        .map(|&p| PercentileRow {
            percentile: p,
            clause_length: at_rank(&lengths, p),
            var_popularity: at_rank(&occurrences, p),
        })
        .collect();
    Ok(CharStats {
        num_vars: f.num_vars,
        num_clauses: f.clauses.len(),
        rows,
    })
}

impl CharStats {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("percentile,clause_length,var_popularity\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{}\n",
                r.percentile, r.clause_length, r.var_popularity
            ));
        }
        out
    }
}

impl fmt::Display for CharStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{} variables, {} clauses",
            self.num_vars, self.num_clauses
        )?;
        writeln!(
            f,
            "{:>10}  {:>13}  {:>14}",
            "percentile", "clause length", "var popularity"
        )?;
        for r in &self.rows {
            writeln!(
                f,
                "{:>9.1}%  {:>13}  {:>14}",
                r.percentile * 100.0,
                r.clause_length,
                r.var_popularity
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnf::gen::random_ksat;
    use crate::cnf::{Lit, Var};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn x(i: u32) -> Lit {
        Var(i).lit(true)
    }

    #[test]
    fn constant_length() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = random_ksat(20, 50, 3, &mut rng);
        let s = characterize(&f, &[0.1, 0.5, 0.999, 1.0]).unwrap();
        assert!(s.rows.iter().all(|r| r.clause_length == 3));
    }

    #[test]
    fn hand_counted_popularity() {
        let mut f = Formula::new(4);
        f.add_clause(&[x(0), x(1)]);
        f.add_clause(&[x(0), x(2)]);
        f.add_clause(&[x(0), x(3)]);
        let s = characterize(&f, &[1.0]).unwrap();
        assert_eq!(s.rows[0].var_popularity, 3);
    }

    #[test]
    fn empty_formula_is_an_error() {
        assert_eq!(
            characterize(&Formula::new(3), &[0.5]),
            Err(CnfError::EmptyFormula)
        );
    }

    #[test]
    fn csv_layout() {
        let mut f = Formula::new(2);
        f.add_clause(&[x(0), x(1)]);
        let csv = characterize(&f, &[0.5]).unwrap().to_csv();
        assert_eq!(csv, "percentile,clause_length,var_popularity\n0.5,2,1\n");
    }

    // Naive oracle: count how many entries are <= each candidate and pick the
    // smallest candidate covering the rank.
    fn naive_percentile(values: &[usize], p: f64) -> usize {
        let n = values.len();
        let rank = ((p * n as f64).ceil() as usize).max(1).min(n);
        let mut candidates: Vec<usize> = values.to_vec();
        candidates.dedup();
        *candidates
            .iter()
            .filter(|&&c| values.iter().filter(|&&v| v <= c).count() >= rank)
            .min()
            .unwrap()
    }

    #[test]
    fn random_3sat_matches_naive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(100);
        let mut f = random_ksat(100, 420, 3, &mut rng);
        f.clauses.extend(random_ksat(100, 40, 7, &mut rng).clauses);
        let ps = [0.0, 0.25, 0.5, 0.9, 0.99, 0.999, 1.0];
        let s = characterize(&f, &ps).unwrap();
        let lengths: Vec<usize> = f.clauses.iter().map(Vec::len).collect();
        let mut occ = vec![0usize; 100];
        for l in f.clauses.iter().flatten() {
            occ[l.var().index()] += 1;
        }
        for (r, &p) in s.rows.iter().zip(&ps) {
            assert_eq!(r.clause_length, naive_percentile(&lengths, p));
            assert_eq!(r.var_popularity, naive_percentile(&occ, p));
        }
    }

    proptest! {
        #[test]
        fn percentiles_are_monotone(seed in any::<u64>(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut f = random_ksat(30, 60, 3, &mut rng);
            f.clauses.extend(random_ksat(30, 20, 6, &mut rng).clauses);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let s = characterize(&f, &[lo, hi]).unwrap();
            prop_assert!(s.rows[0].clause_length <= s.rows[1].clause_length);
            prop_assert!(s.rows[0].var_popularity <= s.rows[1].var_popularity);
        }
    }
}
