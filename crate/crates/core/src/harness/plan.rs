use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::domain::{is_last_in_level, InterventionAction, TRAINING_LEN};
use crate::sim::SlotKind;

/// Positions (1-based) of the static plan. The defaults put both worked
/// examples at the start of level 2 and spread six direct presentations over
/// levels 2 to 5.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanConfig {
    pub worked_examples: Vec<usize>,
    pub direct_presentations: Vec<usize>,
}

impl Default for PlanConfig {
    fn default() -> Self {
        PlanConfig {
            worked_examples: vec![5, 6],
            direct_presentations: vec![7, 9, 10, 13, 14, 17],
        }
    }
}

/// A validated static intervention plan.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct InterventionPlan {
    we_positions: BTreeSet<usize>,
    direct_positions: BTreeSet<usize>,
}

fn check_positions(what: &str, ps: &[usize]) -> Result<BTreeSet<usize>, HarnessError> {
    let mut set = BTreeSet::new();
    for &p in ps {
        if !(1..=TRAINING_LEN).contains(&p) {
            return Err(HarnessError::Plan(format!(
                "{what} position {p} is outside 1..=20"
            )));
        }
        if is_last_in_level(p) {
            return Err(HarnessError::Plan(format!(
                "{what} position {p} is the last problem of its level"
            )));
        }
        if !set.insert(p) {
            return Err(HarnessError::Plan(format!(
                "{what} position {p} is listed twice"
            )));
        }
    }
    Ok(set)
}

/// Validates a plan: positions in range, never the last problem of a level,
/// and no slot both a worked example and a direct presentation.
pub fn build_static_plan(config: &PlanConfig) -> Result<InterventionPlan, HarnessError> {
    let we = check_positions("worked-example", &config.worked_examples)?;
    let direct = check_positions("direct-presentation", &config.direct_presentations)?;
    if let Some(p) = we.intersection(&direct).next() {
        return Err(HarnessError::Plan(format!(
            "position {p} is both a worked example and a direct presentation"
        )));
    }
    Ok(InterventionPlan {
        we_positions: we,
        direct_positions: direct,
    })
}

impl InterventionPlan {
    pub fn we_positions(&self) -> &BTreeSet<usize> {
        &self.we_positions
    }

    pub fn direct_positions(&self) -> &BTreeSet<usize> {
        &self.direct_positions
    }

    pub fn is_empty(&self) -> bool {
        self.we_positions.is_empty() && self.direct_positions.is_empty()
    }

    pub fn slot_kind(&self, position: usize) -> SlotKind {
        if self.we_positions.contains(&position) {
            SlotKind::WorkedExample
        } else {
            SlotKind::Problem
        }
    }

    /// The plan's action at a problem slot.
    pub fn action_at(&self, position: usize) -> InterventionAction {
        if self.direct_positions.contains(&position) {
            InterventionAction::DirectPresent
        } else {
            InterventionAction::NoIntervention
        }
    }
}
