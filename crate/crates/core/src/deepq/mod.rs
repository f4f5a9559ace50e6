//! Q-value network, offline Double-DQN trainer and masked policies.
//!
//! The network maps a state vector to one value per intervention action.
//! Training never interacts with the simulator: it replays logged
//! `(state, action, reward)` records, taking the next record of the same
//! student as the successor state.

mod mlp;
mod policy;
mod train;

pub use mlp::{grad_check, Layer, Mlp, QSample};
pub use policy::{select_action, Policy, Standardizer};
pub use train::{
    ddqn_target, train, EpochLoss, OptimizerKind, TrainConfig, TrainOutcome, TrainReport, Trainer,
    Transition,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{is_last_in_level, ActionMask, CorpusError};

#[derive(Debug, Error)]
pub enum DeepQError {
    #[error("input dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("bad network shape: {0}")]
    Shape(String),
    #[error("invalid training config: {0}")]
    Config(String),
    #[error(
        "record at position {position} of student {student} is not terminal but has no successor"
    )]
    MissingSuccessor { student: String, position: usize },
    #[error("the action mask allows no action")]
    EmptyMask,
    #[error("minibatch is empty")]
    EmptyBatch,
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("unsupported policy file: {0}")]
    Format(String),
    #[error("malformed policy file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Which actions the successor-state argmax may consider during training.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskRule {
    /// The last problem of each logic level only allows no intervention.
    TutorSlots,
    /// Every action is allowed.
    None,
    /// The same mask everywhere.
    Fixed([bool; 3]),
}

impl MaskRule {
    /// Mask for a decision at the 1-based training `position`.
    pub fn mask_for(&self, position: usize) -> ActionMask {
        match self {
            MaskRule::TutorSlots if is_last_in_level(position) => ActionMask::ONLY_NONE,
            MaskRule::TutorSlots | MaskRule::None => ActionMask::ALL,
            MaskRule::Fixed(m) => ActionMask(*m),
        }
    }
}

/// Index of the largest allowed value, lowest index on ties.
pub(crate) fn masked_argmax(q: &[f64], mask: ActionMask) -> Result<usize, DeepQError> {
    let mut best: Option<usize> = None;
    for (i, v) in q.iter().enumerate() {
        if mask.0.get(i).copied().unwrap_or(false) && best.is_none_or(|b| *v > q[b]) {
            best = Some(i);
        }
    }
    best.ok_or(DeepQError::EmptyMask)
}
