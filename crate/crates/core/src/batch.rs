//! Runs many independent simulations. With the `parallel` feature the jobs
//! are spread over rayon's pool; results keep input order either way.

use crate::cnf::Formula;
use crate::sim::{run, RunOutput, SimConfig, SimError};

pub type Job<'a> = (SimConfig, &'a Formula);

pub fn run_batch_sequential(jobs: &[Job<'_>]) -> Vec<Result<RunOutput, SimError>> {
    jobs.iter().map(|(c, f)| run(c, f)).collect()
}

#[cfg(feature = "parallel")]
pub fn run_batch_parallel(jobs: &[Job<'_>]) -> Vec<Result<RunOutput, SimError>> {
    use rayon::prelude::*;
    jobs.par_iter().map(|(c, f)| run(c, f)).collect()
}

/// Parallel when the feature is on, sequential otherwise.
pub fn run_batch(jobs: &[Job<'_>]) -> Vec<Result<RunOutput, SimError>> {
    #[cfg(feature = "parallel")]
    {
        run_batch_parallel(jobs)
    }
    #[cfg(not(feature = "parallel"))]
    {
        run_batch_sequential(jobs)
    }
}
