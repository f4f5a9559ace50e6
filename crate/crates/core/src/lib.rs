//! Adaptive metacognitive-intervention engine.
//!
//! The crate is organised bottom-up:
//!
//! - [`domain`]: vocabulary types, curricula and the replay-corpus format.
//! - [`sim`]: seeded student/tutor simulator, switch-time sampler and feature extraction.
//! - [`forest`]: random-forest classifier for early metacognitive-group prediction.
//! - [`deepq`]: multilayer perceptron, offline Double-DQN trainer and masked policies.
//! - [`stats`]: learning-gain, t-test, ANOVA and chi-square machinery.
//! - [`harness`]: corpus generation, static/adaptive experiment protocols and reports.
//!
//! Data-parallel loops (per-student simulation, per-tree training, Monte-Carlo
//! sweeps) go through [`exec`], which uses rayon when the `parallel` feature is
//! on and a plain loop otherwise. Every parallel item owns an rng stream derived
//! from the master seed, so results never depend on the worker count.

// `!(x >= 0.0)` is used on purpose to reject NaN along with negatives.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod deepq;
pub mod domain;
pub mod exec;
pub mod forest;
pub mod harness;
pub mod rng;
pub mod sim;
pub mod stats;

pub use domain::{
    FeatureVector, InterventionAction, MetaGroup, Phase, Problem, ReplayCorpus, Score, Strategy,
    TransitionRecord, Tutor,
};
