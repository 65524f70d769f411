use super::*;
use crate::cnf::gen::{pigeonhole, random_ksat};
use crate::cnf::Lit;
use crate::oracle::{brute_force, Verdict};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn verified() -> SimConfig {
    SimConfig {
        verify: true,
        max_cycles: Some(2_000_000),
        ..SimConfig::default()
    }
}

#[test]
fn rejects_bad_config() {
    let f = Formula::new(1);
    for cfg in [
        SimConfig {
            grid: 0,
            ..SimConfig::default()
        },
        SimConfig {
            grid: 32,
            ..SimConfig::default()
        },
        SimConfig {
            width: 2,
            ..SimConfig::default()
        },
        SimConfig {
            contexts: 3,
            ..SimConfig::default()
        },
        SimConfig {
            bank_size: 2000,
            ..SimConfig::default()
        },
    ] {
        assert!(matches!(run(&cfg, &f), Err(SimError::Config(_))));
    }
}

#[test]
fn tiny_sat_and_unsat() {
    let mut f = Formula::new(2);
    f.add_clause(&[Lit::from_dimacs(1), Lit::from_dimacs(2)]);
    f.add_clause(&[Lit::from_dimacs(-1)]);
    let out = run(&verified(), &f).unwrap();
    let m = out.model().expect("sat");
    assert!(f.eval(m));
    assert!(out.verification.unwrap().clean());

    f.add_clause(&[Lit::from_dimacs(-2)]);
    let out = run(&verified(), &f).unwrap();
    assert_eq!(out.outcome, Outcome::Unsat);
}

#[test]
fn random_instances_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for i in 0..30 {
        let n = 8 + i % 6;
        let f = random_ksat(n, (n as f64 * 4.3) as usize, 3, &mut rng);
        for contexts in [1, 2] {
            let cfg = SimConfig {
                contexts,
                grid: 3,
                width: 3 + i as usize % 3,
                ..verified()
            };
            let out = run(&cfg, &f).unwrap();
            let want = brute_force(&f).unwrap().verdict == Verdict::Sat;
            match &out.outcome {
                Outcome::Sat(m) => assert!(want && f.eval(m), "instance {i}"),
                Outcome::Unsat => assert!(!want, "instance {i}"),
                Outcome::Unknown(r) => panic!("instance {i}: unknown ({r})"),
            }
            let v = out.verification.unwrap();
            assert!(
                v.clean(),
                "instance {i} ctx {contexts}: {:?}",
                v.violations()
            );
        }
    }
}

#[test]
fn pigeonhole_is_unsat() {
    let out = run(&verified(), &pigeonhole(4, 3)).unwrap();
    assert_eq!(out.outcome, Outcome::Unsat);
    assert!(out.verification.unwrap().clean());
}

#[test]
fn stats_json_has_schema_version() {
    let out = run(&SimConfig::default(), &pigeonhole(3, 2)).unwrap();
    let v: serde_json::Value = serde_json::from_str(&out.stats.to_json()).unwrap();
    assert_eq!(v["schema_version"], SCHEMA_VERSION);
    assert_eq!(v["verdict"], "UNSAT");
}

#[test]
fn trace_rows_follow_header() {
    let cfg = SimConfig {
        trace: true,
        ..SimConfig::default()
    };
    let out = run(&cfg, &pigeonhole(3, 2)).unwrap();
    let csv = out.trace.unwrap().to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(TRACE_HEADER));
    let first = lines.next().unwrap();
    assert!(first.split(',').count() >= 5, "{first}");
}

#[test]
fn implication_accounting_balances() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let f = random_ksat(30, 128, 3, &mut rng);
        let s = run(&SimConfig::default(), &f).unwrap().stats;
        assert_eq!(
            s.implications + s.implications_discarded,
            s.proplits_to_central
        );
    }
}

#[test]
fn unit_chain_needs_no_decisions() {
    let mut f = Formula::new(2);
    f.add_clause(&[Lit::from_dimacs(1)]);
    f.add_clause(&[Lit::from_dimacs(-1), Lit::from_dimacs(2)]);
    let out = run(&SimConfig::default(), &f).unwrap();
    assert_eq!(out.model(), Some(&[true, true][..]));
    assert_eq!(out.stats.conflicts, 0);
    assert_eq!(out.stats.decisions, 0);
    assert_eq!(out.stats.oracle_agrees, Some(true));
}
