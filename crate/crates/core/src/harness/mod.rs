//! Synthetic corpus generation, the static and adaptive experiment protocols,
//! and result reporting.

mod corpus;
mod experiment;
mod plan;
mod report;

pub use corpus::{
    generate_corpus, label_counts, labeled_cohort, simulate_logged, CorpusConfig, GeneratedCorpus,
    LoggingPolicy,
};
pub use experiment::{
    run_experiment, Cell, CohortConfig, Condition, Protocol, ResultRow, ResultsTable, SlotTrace,
    StudentResult, COLUMNS,
};
pub use plan::{build_static_plan, InterventionPlan, PlanConfig};
pub use report::{
    action_distribution, action_distribution_report, parse_csv, render_csv, render_report,
    round_half_up, ActionDistribution, Format,
};

use thiserror::Error;

use crate::deepq::DeepQError;
use crate::domain::CorpusError;
use crate::forest::ForestError;
use crate::sim::SimError;
use crate::stats::StatsError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid intervention plan: {0}")]
    Plan(String),
    #[error("the adaptive protocol needs a policy")]
    MissingPolicy,
    #[error("cohort of {0} students is too small for the condition split")]
    CohortTooSmall(usize),
    #[error("no interventions were recorded")]
    EmptyCounts,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("malformed results csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error(transparent)]
    DeepQ(#[from] DeepQError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

/// Named rng streams under a run's master seed. Each per-student stream is
/// further keyed by student id.
pub(crate) mod streams {
    use crate::rng::derive_seed;

    pub fn cohort(seed: u64) -> u64 {
        derive_seed(seed, 1)
    }
    pub fn switch_dist(seed: u64) -> u64 {
        derive_seed(seed, 2)
    }
    pub fn pretest(seed: u64) -> u64 {
        derive_seed(seed, 3)
    }
    pub fn env(seed: u64) -> u64 {
        derive_seed(seed, 4)
    }
    pub fn logging(seed: u64) -> u64 {
        derive_seed(seed, 5)
    }
    pub fn posttest(seed: u64) -> u64 {
        derive_seed(seed, 6)
    }
    pub fn probability(seed: u64) -> u64 {
        derive_seed(seed, 7)
    }
    pub fn assign(seed: u64) -> u64 {
        derive_seed(seed, 8)
    }
}
