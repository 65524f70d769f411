use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use satin::central::Outcome;
use satin::cnf::{characterize, parse_dimacs, Formula};
use satin::noc::TopologyKind;
use satin::sim::{compare_topologies, run, SimConfig};

/// Cycle-level simulator of a clause-array SAT accelerator.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate one instance. Exits 10 on SAT, 20 on UNSAT, 0 otherwise.
    Solve {
        file: PathBuf,
        #[command(flatten)]
        hw: Hardware,
        /// Write run statistics as JSON.
        #[arg(long)]
        stats: Option<PathBuf>,
        /// Write every delivered message as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Skip printing the model line.
        #[arg(long)]
        quiet: bool,
    },
    /// Clause-length and variable-popularity percentiles.
    Characterize {
        file: PathBuf,
        #[arg(long, value_delimiter = ',', num_args = 1.., default_values_t = [0.5, 0.9, 0.99, 0.999, 1.0])]
        percentiles: Vec<f64>,
        /// Also write the table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Cycle counts on mesh and flattened butterfly for every .cnf in a directory.
    Compare {
        #[arg(long)]
        corpus: PathBuf,
        #[command(flatten)]
        hw: Hardware,
        /// Write the comparison table as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Hardware {
    #[arg(long, default_value = "mesh")]
    topology: TopologyKind,
    #[arg(long, default_value_t = 4)]
    grid: usize,
    #[arg(long, default_value_t = 1024)]
    bank_size: usize,
    #[arg(long, default_value_t = 8)]
    width: usize,
    #[arg(long, default_value_t = 1)]
    contexts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    max_conflicts: Option<u64>,
    #[arg(long)]
    max_cycles: Option<u64>,
}

impl Hardware {
    fn config(&self) -> SimConfig {
        let d = SimConfig::default();
        SimConfig {
            topology: self.topology,
            grid: self.grid,
            bank_size: self.bank_size,
            width: self.width,
            contexts: self.contexts,
            seed: self.seed,
            max_conflicts: self.max_conflicts,
            max_cycles: self.max_cycles.or(d.max_cycles),
            ..d
        }
    }
}

fn load(path: &Path) -> Result<Formula> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let cnf = parse_dimacs(&bytes).with_context(|| format!("parsing {}", path.display()))?;
    Ok(cnf.formula)
}

fn solve(
    file: &Path,
    cfg: SimConfig,
    stats: Option<&Path>,
    trace: Option<&Path>,
    quiet: bool,
) -> Result<ExitCode> {
    let f = load(file)?;
    let out = run(&cfg, &f)?;
    if let Some(p) = stats {
        fs::write(p, out.stats.to_json() + "\n")
            .with_context(|| format!("writing {}", p.display()))?;
    }
    if let (Some(p), Some(t)) = (trace, &out.trace) {
        fs::write(p, t.to_csv()).with_context(|| format!("writing {}", p.display()))?;
    }
    let s = &out.stats;
    println!(
        "c cycles {} decisions {} conflicts {} implications {} cycles/implication {:.2}",
        s.cycles, s.decisions, s.conflicts, s.implications, s.cycles_per_implication
    );
    if s.oracle_agrees == Some(false) {
        bail!("verdict disagrees with exhaustive search");
    }
    Ok(match &out.outcome {
        Outcome::Sat(model) => {
            println!("s SATISFIABLE");
            if !quiet {
                let lits: Vec<String> = model
                    .iter()
                    .enumerate()
                    .map(|(i, &b)| {
                        if b {
                            format!("{}", i + 1)
                        } else {
                            format!("-{}", i + 1)
                        }
                    })
                    .collect();
                println!("v {} 0", lits.join(" "));
            }
            ExitCode::from(10)
        }
        Outcome::Unsat => {
            println!("s UNSATISFIABLE");
            ExitCode::from(20)
        }
        Outcome::Unknown(why) => {
            println!("c {why}");
            println!("s UNKNOWN");
            ExitCode::SUCCESS
        }
    })
}

fn compare(dir: &Path, cfg: SimConfig, json: Option<&Path>) -> Result<()> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "cnf"))
        .collect();
    files.sort();
    if files.is_empty() {
        bail!("no .cnf files in {}", dir.display());
    }
    let corpus = files
        .iter()
        .map(|p| {
            Ok((
                p.file_name().unwrap().to_string_lossy().into_owned(),
                load(p)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let table = compare_topologies(&cfg, &corpus)?;
    println!(
        "{:<32} {:>12} {:>12} {:>8}",
        "instance", "mesh", "flatbfly", "ratio"
    );
    for r in &table.rows {
        println!(
            "{:<32} {:>12} {:>12} {:>8.3}",
            r.name, r.mesh_cycles, r.flatbfly_cycles, r.ratio
        );
    }
    println!("geomean flatbfly/mesh: {:.3}", table.geomean);
    if let Some(p) = json {
        fs::write(p, serde_json::to_string_pretty(&table)? + "\n")?;
    }
    Ok(())
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().cmd) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cmd: Cmd) -> Result<ExitCode> {
    match cmd {
        Cmd::Solve {
            file,
            hw,
            stats,
            trace,
            quiet,
        } => {
            let mut cfg = hw.config();
            cfg.trace = trace.is_some();
            solve(&file, cfg, stats.as_deref(), trace.as_deref(), quiet)
        }
        Cmd::Characterize {
            file,
            percentiles,
            csv,
        } => {
            if let Some(p) = percentiles.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                bail!("percentile {p} is outside [0, 1]");
            }
            let c = characterize(&load(&file)?, &percentiles)?;
            print!("{c}");
            if let Some(p) = csv {
                fs::write(&p, c.to_csv())?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Compare { corpus, hw, json } => {
            compare(&corpus, hw.config(), json.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
    }
}
