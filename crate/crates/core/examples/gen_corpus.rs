//! Writes the sample corpus used by the README and the CLI tests.
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use satin::cnf::gen::{pigeonhole, random_ksat};
use satin::cnf::write_dimacs;

fn main() {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "corpus".into());
    std::fs::create_dir_all(&dir).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for (n, k, ratio) in [
        (20, 3, 4.26),
        (40, 3, 4.26),
        (60, 3, 4.26),
        (80, 3, 4.0),
        (30, 5, 18.0),
        (24, 9, 200.0),
    ] {
        let f = random_ksat(n, (n as f64 * ratio).round() as usize, k, &mut rng);
        std::fs::write(format!("{dir}/rand{k}_{n}.cnf"), write_dimacs(&f)).unwrap();
    }
    for holes in [3, 4, 5] {
        std::fs::write(
            format!("{dir}/php_{}_{holes}.cnf", holes + 1),
            write_dimacs(&pigeonhole(holes + 1, holes)),
        )
        .unwrap();
    }
}
