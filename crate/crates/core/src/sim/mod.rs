//! Seeded student simulator for the logic and probability tutors.
//!
//! A student is a [`StudentProfile`] of latent traits. [`EnvState`] walks one
//! student through the 20 logic training problems, answering interventions and
//! emitting scores in `[0, 100]` plus the 152-wide state vector. The test
//! phases of both tutors live in [`assess`].

mod assess;
mod config;
mod env;
mod profile;
mod switch;

pub use assess::{
    incoming_features, run_logic_posttest, run_logic_pretest, run_probability_phase, LogicPost,
    INCOMING_DIM,
};
pub use config::{ArchetypeRanges, ProfileRanges, SimConfig};
pub use env::{
    extract_features, EnvState, ProblemOutcome, SlotKind, StepOutcome, AGGREGATE_FEATURES,
    SIGNALS_PER_PROBLEM,
};
pub use profile::{group_counts, sample_cohort, sample_profile, StudentProfile};
pub use switch::{default_switch_distribution, fit_switch_distribution, EmpiricalDistribution};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("group proportions must be non-negative and sum to 1 (got {0:?})")]
    BadProportions([f64; 3]),
    #[error("the trajectory is finished")]
    Finished,
    #[error("switch-time sample is empty")]
    EmptySample,
    #[error("switch time must be a finite non-negative number of seconds (got {0})")]
    NegativeTime(f64),
    #[error("bc skill must lie in [0, 1] (got {0})")]
    BadSkill(f64),
    #[error("training slot {0} has already been played or does not exist")]
    SlotUnavailable(usize),
    #[error("invalid simulator configuration: {0}")]
    Config(String),
}
