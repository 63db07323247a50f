//! Independent dynamic runs, executed sequentially or across a thread pool.
//!
//! Each job owns its simulator and seeded generators, so the result of a job
//! does not depend on how the batch is executed.

use std::sync::Arc;
use std::time::Duration;

use crate::controller::{run_dynamic, RunOutcome, Strategy};
use crate::error::SolveError;
use crate::hgs::SolverConfig;
use crate::io::config::config_hash;
use crate::io::results::ResultRow;
use crate::model::ProblemInstance;
use crate::sim::{SimConfig, Simulator};

#[derive(Debug, Clone)]
pub struct Job {
    pub instance: Arc<ProblemInstance>,
    pub strategy: Strategy,
    pub seed: u64,
    pub sim: SimConfig,
    pub solver: SolverConfig,
    pub budget: Duration,
}

#[derive(Debug, Clone)]
pub struct JobOutput {
    pub row: ResultRow,
    pub outcome: RunOutcome,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Runs jobs on a pool of `threads` workers. Without the `parallel`
    /// feature this falls back to sequential execution.
    Parallel {
        threads: usize,
    },
}

/// Every (instance, strategy, seed) combination, in that nesting order.
pub fn cartesian_jobs(
    instances: &[Arc<ProblemInstance>],
    strategies: &[Strategy],
    seeds: &[u64],
    sim: SimConfig,
    solver: SolverConfig,
    budget: Duration,
) -> Vec<Job> {
    let mut jobs = Vec::with_capacity(instances.len() * strategies.len() * seeds.len());
    for instance in instances {
        for &strategy in strategies {
            for &seed in seeds {
                jobs.push(Job {
                    instance: Arc::clone(instance),
                    strategy,
                    seed,
                    sim,
                    solver,
                    budget,
                });
            }
        }
    }
    jobs
}

pub fn run_job(job: &Job) -> Result<JobOutput, SolveError> {
    let hindsight = job.strategy == Strategy::Oracle;
    let mut sim = Simulator::new((*job.instance).clone(), job.sim, job.seed, hindsight)?;
    let outcome = run_dynamic(&mut sim, job.strategy, job.budget, &job.solver, job.seed)?;
    let row = ResultRow {
        instance: job.instance.name.clone(),
        strategy: job.strategy.to_string(),
        seed: job.seed,
        total_cost: outcome.total_cost,
        epochs: outcome.epochs.len(),
        wall_time_s: outcome.wall_time_s(),
        config_hash: config_hash(&job.sim, &job.solver, job.budget.as_secs_f64()),
    };
    Ok(JobOutput { row, outcome })
}

/// Runs every job and returns the results in job order.
pub fn run_batch(jobs: &[Job], execution: Execution) -> Vec<Result<JobOutput, SolveError>> {
    match execution {
        Execution::Sequential => jobs.iter().map(run_job).collect(),
        Execution::Parallel { threads } => run_parallel(jobs, threads),
    }
}

#[cfg(feature = "parallel")]
fn run_parallel(jobs: &[Job], threads: usize) -> Vec<Result<JobOutput, SolveError>> {
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .expect("thread pool starts");
    pool.install(|| jobs.par_iter().map(run_job).collect())
}

#[cfg(not(feature = "parallel"))]
fn run_parallel(jobs: &[Job], _threads: usize) -> Vec<Result<JobOutput, SolveError>> {
    jobs.iter().map(run_job).collect()
}
