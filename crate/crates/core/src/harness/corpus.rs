//! Synthetic logged corpus: simulated students under a randomized logging
//! policy, one transition record per training problem.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{build_static_plan, streams, HarnessError, PlanConfig};
use crate::domain::{
    build_curriculum, is_last_in_level, InterventionAction, Phase, ReplayCorpus, TransitionRecord,
    Tutor, TRAINING_LEN,
};
use crate::forest::LabeledSample;
use crate::sim::{
    default_switch_distribution, incoming_features, run_logic_pretest, sample_cohort,
    EmpiricalDistribution, EnvState, SimConfig, SlotKind, StudentProfile,
};
use crate::{exec, rng};

/// Intervention rates of the logging policy; the remainder is no
/// intervention. The last problem of each level and worked-example slots are
/// never intervened on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoggingPolicy {
    pub nudge: f64,
    pub present: f64,
}

impl Default for LoggingPolicy {
    fn default() -> Self {
        LoggingPolicy {
            nudge: 0.3,
            present: 0.2,
        }
    }
}

impl LoggingPolicy {
    fn validate(&self) -> Result<(), HarnessError> {
        let ok = self.nudge >= 0.0 && self.present >= 0.0 && self.nudge + self.present <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(HarnessError::Config(
                "logging rates must be >= 0 and sum to at most 1".into(),
            ))
        }
    }

    fn draw<R: Rng>(&self, position: usize, rng: &mut R) -> InterventionAction {
        let u: f64 = rng.random();
        if is_last_in_level(position) {
            InterventionAction::NoIntervention
        } else if u < self.nudge {
            InterventionAction::Nudge
        } else if u < self.nudge + self.present {
            InterventionAction::DirectPresent
        } else {
            InterventionAction::NoIntervention
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    /// Default / StrOnly / StrTime proportions.
    pub group_mix: [f64; 3],
    pub logging: LoggingPolicy,
    /// Worked-example slots of every logged student. These should match the
    /// experiment plan: a policy never sees states its corpus did not cover.
    pub worked_examples: Vec<usize>,
    pub sim: SimConfig,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            group_mix: [0.4, 0.4, 0.2],
            logging: LoggingPolicy::default(),
            worked_examples: PlanConfig::default().worked_examples,
            sim: SimConfig::default(),
        }
    }
}

/// Everything one corpus-generation run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedCorpus {
    pub corpus: ReplayCorpus,
    /// Early-prediction features of each student with their true group.
    pub labels: Vec<LabeledSample>,
    /// Times of switches students made without a nudge.
    pub switch_times: Vec<f64>,
}

pub(crate) fn training_problem_ids() -> Vec<String> {
    build_curriculum(Tutor::Logic)
        .into_iter()
        .filter(|p| p.phase == Phase::Training)
        .map(|p| p.id)
        .collect()
}

/// Early-prediction features from the pre-test and a no-intervention probe of
/// the first training problem. The probe runs on a copy, so the real
/// trajectory is unaffected and the features do not depend on what is done
/// at position 1.
pub(crate) fn probe_incoming(
    env: &EnvState,
    profile: &StudentProfile,
    seed: u64,
) -> Result<crate::FeatureVector, HarnessError> {
    let pre = run_logic_pretest(
        profile,
        env.config(),
        &mut rng::keyed_rng(streams::pretest(seed), &profile.id),
    );
    let mut probe = env.clone();
    probe.step(InterventionAction::NoIntervention)?;
    Ok(incoming_features(&pre, &probe.history()[0], env.config()))
}

pub(crate) fn new_env(
    profile: &StudentProfile,
    layout: [SlotKind; TRAINING_LEN],
    sim: &Arc<SimConfig>,
    dist: &Arc<EmpiricalDistribution>,
    seed: u64,
) -> EnvState {
    EnvState::new(
        profile.clone(),
        layout,
        Arc::clone(sim),
        Arc::clone(dist),
        streams::env(seed),
    )
}

/// Simulates `n` students under the logging policy. Deterministic in `seed`
/// whatever the worker count.
pub fn simulate_logged(
    n: usize,
    seed: u64,
    config: &CorpusConfig,
) -> Result<GeneratedCorpus, HarnessError> {
    config.logging.validate()?;
    let plan = build_static_plan(&PlanConfig {
        worked_examples: config.worked_examples.clone(),
        direct_presentations: Vec::new(),
    })?;
    let layout: [SlotKind; TRAINING_LEN] = std::array::from_fn(|i| plan.slot_kind(i + 1));
    let cohort = sample_cohort(n, config.group_mix, streams::cohort(seed), &config.sim)?;
    let sim = Arc::new(config.sim.clone());
    let dist = Arc::new(default_switch_distribution(
        &config.sim,
        streams::switch_dist(seed),
    )?);
    let ids = training_problem_ids();
    let per_student = exec::map_slice(&cohort, |p| {
        let mut env = new_env(p, layout, &sim, &dist, seed);
        let label = LabeledSample::new(probe_incoming(&env, p, seed)?, p.group);
        let mut log = rng::keyed_rng(streams::logging(seed), &p.id);
        let mut records = Vec::with_capacity(TRAINING_LEN);
        while !env.is_done() {
            let position = env.next_position();
            let state = env.features();
            let mut action = config.logging.draw(position, &mut log);
            if env.slot_kind(position) == SlotKind::WorkedExample {
                action = InterventionAction::NoIntervention;
            }
            let out = env.step(action)?;
            records.push(TransitionRecord {
                student_id: p.id.clone(),
                problem_id: ids[position - 1].clone(),
                position,
                state,
                action,
                reward: out.reward,
                done: out.done,
            });
        }
        let switches: Vec<f64> = env
            .history()
            .iter()
            .filter(|o| o.switched && !o.nudge_shown)
            .filter_map(|o| o.switch_time_s)
            .collect();
        Ok::<_, HarnessError>((records, label, switches))
    });
    let mut records = Vec::with_capacity(n * TRAINING_LEN);
    let mut labels = Vec::with_capacity(n);
    let mut switch_times = Vec::new();
    for r in per_student {
        let (recs, label, sw) = r?;
        records.extend(recs);
        labels.push(label);
        switch_times.extend(sw);
    }
    Ok(GeneratedCorpus {
        corpus: ReplayCorpus::from_records(records)?,
        labels,
        switch_times,
    })
}

/// `n` students × 20 training records under the logging policy.
pub fn generate_corpus(
    n: usize,
    seed: u64,
    config: &CorpusConfig,
) -> Result<ReplayCorpus, HarnessError> {
    Ok(simulate_logged(n, seed, config)?.corpus)
}

/// Early-prediction samples for a fresh cohort, labelled with true groups.
pub fn labeled_cohort(
    n: usize,
    group_mix: [f64; 3],
    seed: u64,
    sim: &SimConfig,
) -> Result<Vec<LabeledSample>, HarnessError> {
    let cohort = sample_cohort(n, group_mix, streams::cohort(seed), sim)?;
    let sim_arc = Arc::new(sim.clone());
    let dist = Arc::new(default_switch_distribution(
        sim,
        streams::switch_dist(seed),
    )?);
    exec::map_slice(&cohort, |p| {
        let env = new_env(p, [SlotKind::Problem; TRAINING_LEN], &sim_arc, &dist, seed);
        Ok(LabeledSample::new(probe_incoming(&env, p, seed)?, p.group))
    })
    .into_iter()
    .collect()
}

/// Count of each group among samples, indexed by group code.
pub fn label_counts(samples: &[LabeledSample]) -> [usize; 3] {
    let mut c = [0; 3];
    for s in samples {
        c[s.label.index()] += 1;
    }
    c
}
