use std::fmt::Write;

use super::{normalize_clause, CnfError, Formula, Lit, MAX_VARS};

/// A parsed DIMACS file together with its clause bookkeeping.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DimacsCnf {
    pub formula: Formula,
    /// Clauses read from the file, tautologies included.
    pub raw_clauses: usize,
    /// Clauses kept after tautology removal.
    pub retained_clauses: usize,
}

pub fn parse_dimacs(input: &[u8]) -> Result<DimacsCnf, CnfError> {
    let text = String::from_utf8_lossy(input);
    let mut header: Option<(u32, usize)> = None;
    let mut formula = Formula::default();
    let mut raw = 0usize;
    let mut current: Vec<Lit> = Vec::new();
    let mut open = false;

    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('c') {
            continue;
        }
        if trimmed.starts_with('%') {
            // SATLIB trailer
            break;
        }
        if trimmed.starts_with('p') {
            if header.is_some() {
                return Err(CnfError::MalformedHeader { line: lineno });
            }
            let fields: Vec<&str> = trimmed.split_whitespace().collect();
            if fields.len() >= 2 && fields[0] == "p" && fields[1] != "cnf" {
                return Err(CnfError::UnsupportedFormat {
                    line: lineno,
                    kind: fields[1].to_string(),
                });
            }
            if fields.len() != 4 || fields[0] != "p" {
                return Err(CnfError::MalformedHeader { line: lineno });
            }
            let vars: u64 = fields[2]
                .parse()
                .map_err(|_| CnfError::MalformedHeader { line: lineno })?;
            let clauses: usize = fields[3]
                .parse()
                .map_err(|_| CnfError::MalformedHeader { line: lineno })?;
            if vars >= MAX_VARS as u64 {
                return Err(CnfError::Capacity { vars });
            }
            formula.num_vars = vars as u32;
            header = Some((vars as u32, clauses));
            continue;
        }
        let Some((declared, _)) = header else {
            return Err(CnfError::MalformedHeader { line: lineno });
        };
        for tok in trimmed.split_whitespace() {
            let x: i64 = tok.parse().map_err(|_| CnfError::InvalidToken {
                line: lineno,
                token: tok.to_string(),
            })?;
            if x == 0 {
                raw += 1;
                if let Some(c) = normalize_clause(&current) {
                    formula.clauses.push(c);
                }
                current.clear();
                open = false;
            } else {
                if x.unsigned_abs() > declared as u64 {
                    return Err(CnfError::LiteralOutOfRange {
                        line: lineno,
                        lit: x,
                        declared,
                    });
                }
                current.push(Lit::from_dimacs(x));
                open = true;
            }
        }
    }

    let Some((_, declared_clauses)) = header else {
        return Err(CnfError::MalformedHeader { line: 0 });
    };
    if open {
        return Err(CnfError::UnterminatedClause);
    }
    if raw != declared_clauses {
        return Err(CnfError::ClauseCountMismatch {
            declared: declared_clauses,
            found: raw,
        });
    }
    // A bare `0` yields an empty clause, which is kept: it makes the formula
    // unsatisfiable.
    let retained = formula.clauses.len();
    Ok(DimacsCnf {
        formula,
        raw_clauses: raw,
        retained_clauses: retained,
    })
}

pub fn write_dimacs(f: &Formula) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "p cnf {} {}", f.num_vars, f.clauses.len());
    for c in &f.clauses {
        for l in c {
            let _ = write!(out, "{} ", l.to_dimacs());
        }
        out.push_str("0\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnf::gen::random_ksat;
    use crate::cnf::Var;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn x(i: u32, pos: bool) -> Lit {
        Var(i).lit(pos)
    }

    #[test]
    fn two_clause_example() {
        let p = parse_dimacs(b"p cnf 2 2\n1 -2 0\n-1 2 0\n").unwrap();
        assert_eq!(p.formula.num_vars, 2);
        assert_eq!(
            p.formula.clauses,
            vec![vec![x(0, true), x(1, false)], vec![x(0, false), x(1, true)]]
        );
    }

    #[test]
    fn tautology_is_removed() {
        let p = parse_dimacs(b"p cnf 1 1\n1 -1 0\n").unwrap();
        assert_eq!(p.formula.num_vars, 1);
        assert_eq!(p.raw_clauses, 1);
        assert_eq!(p.retained_clauses, 0);
    }

    #[test]
    fn comments_and_multiline_clauses() {
        let p = parse_dimacs(b"c hello\np cnf 3 1\n1 2\n 3 0\n").unwrap();
        assert_eq!(p.formula.clauses[0].len(), 3);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            parse_dimacs(b"p cnf x 1\n1 0\n"),
            Err(CnfError::MalformedHeader { .. })
        ));
        assert!(matches!(
            parse_dimacs(b"1 2 0\n"),
            Err(CnfError::MalformedHeader { .. })
        ));
        assert!(matches!(
            parse_dimacs(b"p cnf 2 1\n1 3 0\n"),
            Err(CnfError::LiteralOutOfRange { lit: 3, .. })
        ));
        assert_eq!(
            parse_dimacs(b"p cnf 2 1\n1 2\n"),
            Err(CnfError::UnterminatedClause)
        );
        assert_eq!(
            parse_dimacs(b"p cnf 1048576 1\n1 0\n"),
            Err(CnfError::Capacity { vars: 1 << 20 })
        );
        assert!(matches!(
            parse_dimacs(b"p inccnf\n1 0\n"),
            Err(CnfError::UnsupportedFormat { .. })
        ));
        assert!(matches!(
            parse_dimacs(b"p cnf 2 2\n1 0\n"),
            Err(CnfError::ClauseCountMismatch { .. })
        ));
    }

    #[test]
    fn generated_random_3sat_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f = random_ksat(50, 210, 3, &mut rng);
        let text = write_dimacs(&f);
        let p = parse_dimacs(text.as_bytes()).unwrap();
        assert_eq!(p.formula.num_vars, 50);
        assert_eq!(p.formula.clauses.len(), 210);
        assert_eq!(p.formula, f);
    }

    proptest! {
        #[test]
        fn parse_inverts_write(seed in any::<u64>(), vars in 3u32..40, clauses in 1usize..80) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = random_ksat(vars, clauses, 3, &mut rng);
            let back = parse_dimacs(write_dimacs(&f).as_bytes()).unwrap().formula;
            let mut a = f.clauses.clone();
            let mut b = back.clauses.clone();
            a.sort();
            b.sort();
            prop_assert_eq!(a, b);
            prop_assert_eq!(f.num_vars, back.num_vars);
        }
    }
}
