//! Running many independent scenarios. Worlds share nothing, so a batch
//! parallelizes across them; the result order always follows the input.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::platform::RunUntil;
use crate::scenario::{Scenario, ScenarioError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchResult {
    pub name: String,
    pub seed: u64,
    /// Full trace file contents, header included.
    pub trace: String,
    pub events: usize,
    pub budget_exceeded: bool,
}

fn run_one(scenario: &Scenario, seed: Option<u64>) -> Result<BatchResult, ScenarioError> {
    let run = scenario.run(seed, RunUntil::Quiescent)?;
    Ok(BatchResult {
        name: scenario.name(),
        seed: run.seed,
        trace: run.trace_jsonl(scenario),
        events: run.trace.len(),
        budget_exceeded: run.outcome.is_err(),
    })
}

pub fn run_batch_sequential(
    scenarios: &[Scenario],
    seed: Option<u64>,
) -> Vec<Result<BatchResult, ScenarioError>> {
    scenarios.iter().map(|s| run_one(s, seed)).collect()
}

#[cfg(feature = "parallel")]
pub fn run_batch_parallel(
    scenarios: &[Scenario],
    seed: Option<u64>,
) -> Vec<Result<BatchResult, ScenarioError>> {
    scenarios.par_iter().map(|s| run_one(s, seed)).collect()
}

/// Parallel when the `parallel` feature is on, sequential otherwise.
pub fn run_batch(
    scenarios: &[Scenario],
    seed: Option<u64>,
) -> Vec<Result<BatchResult, ScenarioError>> {
    #[cfg(feature = "parallel")]
    {
        run_batch_parallel(scenarios, seed)
    }
    #[cfg(not(feature = "parallel"))]
    {
        run_batch_sequential(scenarios, seed)
    }
}
