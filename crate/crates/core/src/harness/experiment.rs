//! The two classroom protocols run on a simulated cohort.
//!
//! Both protocols predict each student's group from the pre-test and first
//! training problem, split every predicted group into experimental and
//! control halves, run logic training, the logic post-test and the
//! probability tutor, and tabulate scores and learning gains by predicted
//! group and condition.
//!
//! - Static: experimental students predicted Default or StrOnly get the
//!   static plan (worked examples plus direct presentations); predicted StrTime
//!   students and controls get the unmodified tutor.
//! - Adaptive: experimental students keep the plan's worked examples and the
//!   policy picks an action at every other slot except the last of each level.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::corpus::{new_env, probe_incoming};
use super::plan::{build_static_plan, InterventionPlan, PlanConfig};
use super::{streams, HarnessError};
use crate::deepq::{select_action, Policy};
use crate::domain::{
    is_last_in_level, ActionMask, InterventionAction, MetaGroup, FEATURE_DIM, N_ACTIONS,
    TRAINING_LEN,
};
use crate::forest::{predict, Forest};
use crate::sim::{
    default_switch_distribution, run_logic_posttest, run_logic_pretest, run_probability_phase,
    sample_cohort, EmpiricalDistribution, SimConfig, SlotKind, StudentProfile, INCOMING_DIM,
};
use crate::stats::{describe, nlg};
use crate::{exec, rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Protocol {
    Exp1Static,
    Exp2Adaptive,
}

impl Protocol {
    pub fn token(self) -> &'static str {
        match self {
            Protocol::Exp1Static => "exp1",
            Protocol::Exp2Adaptive => "exp2",
        }
    }
}

impl FromStr for Protocol {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exp1" => Ok(Protocol::Exp1Static),
            "exp2" => Ok(Protocol::Exp2Adaptive),
            other => Err(HarnessError::Config(format!(
                "unknown protocol {other:?} (expected exp1 or exp2)"
            ))),
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Experimental,
    Control,
}

impl Condition {
    pub fn name(self) -> &'static str {
        match self {
            Condition::Experimental => "Exp",
            Condition::Control => "Ctrl",
        }
    }
}

impl FromStr for Condition {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Exp" => Ok(Condition::Experimental),
            "Ctrl" => Ok(Condition::Control),
            other => Err(HarnessError::Csv(format!("unknown condition {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CohortConfig {
    pub students: usize,
    /// Default / StrOnly / StrTime proportions.
    pub group_mix: [f64; 3],
    /// Share of each predicted group assigned to the experimental condition.
    pub experimental_fraction: f64,
    pub sim: SimConfig,
    pub plan: PlanConfig,
}

impl Default for CohortConfig {
    fn default() -> Self {
        CohortConfig {
            students: 110,
            group_mix: [0.4, 0.4, 0.2],
            experimental_fraction: 0.5,
            sim: SimConfig::default(),
            plan: PlanConfig::default(),
        }
    }
}

/// What happened at one training slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotTrace {
    pub position: usize,
    pub kind: SlotKind,
    pub action: InterventionAction,
}

impl SlotTrace {
    /// Slots where an intervention could be chosen at all.
    pub fn is_decision(&self) -> bool {
        self.kind == SlotKind::Problem && !is_last_in_level(self.position)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudentResult {
    pub id: String,
    pub true_group: MetaGroup,
    pub predicted_group: MetaGroup,
    pub condition: Condition,
    /// Logic scores on the 0–100 scale.
    pub pre: f64,
    pub iso_post: f64,
    pub post: f64,
    /// Gains on the 0–1 scale; `None` when the pre-test was at ceiling.
    pub iso_nlg: Option<f64>,
    pub nlg: Option<f64>,
    pub prob_pre: f64,
    pub prob_post: f64,
    pub bc_skill: f64,
    pub trace: Vec<SlotTrace>,
}

/// Mean, sample sd (absent for fewer than two values) and count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub mean: f64,
    pub sd: Option<f64>,
    pub n: usize,
}

impl Cell {
    fn of(values: &[f64]) -> Option<Cell> {
        let d = describe(values).ok()?;
        Some(Cell {
            mean: d.mean,
            sd: d.sd().ok(),
            n: d.n,
        })
    }
}

/// Table columns in display order.
pub const COLUMNS: [&str; 7] = [
    "Pre", "IsoPost", "IsoNLG", "Post", "NLG", "ProbPre", "ProbPost",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub group: MetaGroup,
    pub condition: Condition,
    pub n: usize,
    /// One entry per [`COLUMNS`]; `None` when no student had a value.
    pub cells: [Option<Cell>; 7],
}

impl ResultRow {
    pub fn cell(&self, column: &str) -> Option<&Cell> {
        let i = COLUMNS.iter().position(|c| *c == column)?;
        self.cells[i].as_ref()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultsTable {
    pub protocol: Protocol,
    pub rows: Vec<ResultRow>,
    /// Intervention counts over decision slots, experimental students only,
    /// per predicted group (indexed by action code).
    pub action_counts: Vec<(MetaGroup, [u64; N_ACTIONS])>,
    pub students: Vec<StudentResult>,
}

impl ResultsTable {
    pub fn row(&self, group: MetaGroup, condition: Condition) -> Option<&ResultRow> {
        self.rows
            .iter()
            .find(|r| r.group == group && r.condition == condition)
    }
}

/// Seeded split of each predicted group; members keep cohort order before the
/// shuffle so the result does not depend on evaluation order.
fn assign(
    predicted: &[MetaGroup],
    fraction: f64,
    seed: u64,
) -> Result<Vec<Condition>, HarnessError> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(HarnessError::Config(
            "experimental_fraction must lie in [0, 1]".into(),
        ));
    }
    let mut out = vec![Condition::Control; predicted.len()];
    for g in MetaGroup::ALL {
        let mut members: Vec<usize> = (0..predicted.len())
            .filter(|&i| predicted[i] == g)
            .collect();
        members.shuffle(&mut rng::stream_rng(
            streams::assign(seed),
            g.index() as u64,
        ));
        let k = (fraction * members.len() as f64).round() as usize;
        for &i in &members[..k] {
            out[i] = Condition::Experimental;
        }
    }
    let n_exp = out
        .iter()
        .filter(|c| **c == Condition::Experimental)
        .count();
    if fraction > 0.0 && fraction < 1.0 && (n_exp == 0 || n_exp == out.len()) {
        return Err(HarnessError::CohortTooSmall(predicted.len()));
    }
    Ok(out)
}

struct Ctx<'a> {
    protocol: Protocol,
    plan: &'a InterventionPlan,
    policy: Option<&'a Policy>,
    sim: Arc<SimConfig>,
    dist: Arc<EmpiricalDistribution>,
    seed: u64,
}

fn run_student(
    ctx: &Ctx<'_>,
    p: &StudentProfile,
    predicted: MetaGroup,
    condition: Condition,
) -> Result<StudentResult, HarnessError> {
    let seed = ctx.seed;
    let c = ctx.sim.as_ref();
    let pre_scores = run_logic_pretest(p, c, &mut rng::keyed_rng(streams::pretest(seed), &p.id));
    let mut env = new_env(
        p,
        [SlotKind::Problem; TRAINING_LEN],
        &ctx.sim,
        &ctx.dist,
        seed,
    );

    let experimental = condition == Condition::Experimental;
    let static_plan =
        experimental && ctx.protocol == Protocol::Exp1Static && predicted != MetaGroup::StrTime;
    let adaptive = experimental && ctx.protocol == Protocol::Exp2Adaptive;
    if static_plan || adaptive {
        for &pos in ctx.plan.we_positions() {
            env.schedule(pos, SlotKind::WorkedExample)?;
        }
    }

    let mut trace = Vec::with_capacity(crate::domain::TRAINING_LEN);
    while !env.is_done() {
        let position = env.next_position();
        let kind = env.slot_kind(position);
        let decision = kind == SlotKind::Problem && !is_last_in_level(position);
        let action = if !decision {
            InterventionAction::NoIntervention
        } else if static_plan {
            ctx.plan.action_at(position)
        } else if adaptive {
            let policy = ctx.policy.ok_or(HarnessError::MissingPolicy)?;
            select_action(policy, &env.features(), ActionMask::ALL)?
        } else {
            InterventionAction::NoIntervention
        };
        env.step(action)?;
        trace.push(SlotTrace {
            position,
            kind,
            action,
        });
    }

    let bc_skill = env.bc_skill();
    let post = run_logic_posttest(
        p,
        bc_skill,
        c,
        &mut rng::keyed_rng(streams::posttest(seed), &p.id),
    )?;
    let (prob_pre, prob_post) = run_probability_phase(
        p,
        bc_skill,
        c,
        &mut rng::keyed_rng(streams::probability(seed), &p.id),
    )?;
    let pre = (pre_scores[0].value() + pre_scores[1].value()) / 2.0;
    let gain = |post: f64| nlg(pre / 100.0, post / 100.0, 1.0).ok();
    Ok(StudentResult {
        id: p.id.clone(),
        true_group: p.group,
        predicted_group: predicted,
        condition,
        pre,
        iso_post: post.iso_mean(),
        post: post.mean(),
        iso_nlg: gain(post.iso_mean()),
        nlg: gain(post.mean()),
        prob_pre: prob_pre.value(),
        prob_post: prob_post.value(),
        bc_skill,
        trace,
    })
}

fn tabulate(students: &[StudentResult]) -> Vec<ResultRow> {
    let mut rows = Vec::new();
    for g in MetaGroup::ALL {
        for cond in [Condition::Experimental, Condition::Control] {
            let members: Vec<&StudentResult> = students
                .iter()
                .filter(|s| s.predicted_group == g && s.condition == cond)
                .collect();
            if members.is_empty() {
                continue;
            }
            let col = |f: &dyn Fn(&StudentResult) -> Option<f64>| {
                let v: Vec<f64> = members.iter().filter_map(|s| f(s)).collect();
                Cell::of(&v)
            };
            rows.push(ResultRow {
                group: g,
                condition: cond,
                n: members.len(),
                cells: [
                    col(&|s| Some(s.pre)),
                    col(&|s| Some(s.iso_post)),
                    col(&|s| s.iso_nlg),
                    col(&|s| Some(s.post)),
                    col(&|s| s.nlg),
                    col(&|s| Some(s.prob_pre)),
                    col(&|s| Some(s.prob_post)),
                ],
            });
        }
    }
    rows
}

fn count_actions(students: &[StudentResult]) -> Vec<(MetaGroup, [u64; N_ACTIONS])> {
    let mut out = Vec::new();
    for g in MetaGroup::ALL {
        let mut counts = [0u64; N_ACTIONS];
        let mut any = false;
        for s in students
            .iter()
            .filter(|s| s.predicted_group == g && s.condition == Condition::Experimental)
        {
            any = true;
            for t in s.trace.iter().filter(|t| t.is_decision()) {
                counts[t.action.index()] += 1;
            }
        }
        if any {
            out.push((g, counts));
        }
    }
    out
}

/// Runs one protocol on a freshly sampled cohort. `switch_dist` times the
/// nudges; when absent it is built from simulated StrTime students.
pub fn run_experiment(
    protocol: Protocol,
    cohort: &CohortConfig,
    switch_dist: Option<&EmpiricalDistribution>,
    policy: Option<&Policy>,
    forest: &Forest,
    seed: u64,
) -> Result<ResultsTable, HarnessError> {
    if cohort.students == 0 {
        return Err(HarnessError::CohortTooSmall(0));
    }
    if forest.n_features != INCOMING_DIM {
        return Err(HarnessError::Config(format!(
            "forest expects {} features, early prediction provides {INCOMING_DIM}",
            forest.n_features
        )));
    }
    if protocol == Protocol::Exp2Adaptive {
        let p = policy.ok_or(HarnessError::MissingPolicy)?;
        if p.input_dim() != FEATURE_DIM {
            return Err(HarnessError::Config(format!(
                "policy expects {} features, the simulator emits {FEATURE_DIM}",
                p.input_dim()
            )));
        }
    }
    let plan = build_static_plan(&cohort.plan)?;
    let profiles = sample_cohort(
        cohort.students,
        cohort.group_mix,
        streams::cohort(seed),
        &cohort.sim,
    )?;
    let dist = match switch_dist {
        Some(d) => d.clone(),
        None => default_switch_distribution(&cohort.sim, streams::switch_dist(seed))?,
    };
    let ctx = Ctx {
        protocol,
        plan: &plan,
        policy,
        sim: Arc::new(cohort.sim.clone()),
        dist: Arc::new(dist),
        seed,
    };

    let predicted: Vec<MetaGroup> = exec::map_slice(&profiles, |p| {
        let env = new_env(
            p,
            [SlotKind::Problem; TRAINING_LEN],
            &ctx.sim,
            &ctx.dist,
            seed,
        );
        Ok::<_, HarnessError>(predict(forest, &probe_incoming(&env, p, seed)?)?.0)
    })
    .into_iter()
    .collect::<Result<_, _>>()?;
    let conditions = assign(&predicted, cohort.experimental_fraction, seed)?;

    let students: Vec<StudentResult> = exec::map_range(profiles.len(), |i| {
        run_student(&ctx, &profiles[i], predicted[i], conditions[i])
    })
    .into_iter()
    .collect::<Result<_, _>>()?;

    Ok(ResultsTable {
        protocol,
        rows: tabulate(&students),
        action_counts: count_actions(&students),
        students,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn assignment_is_stratified_and_seeded() {
        let predicted: Vec<MetaGroup> = (0..30).map(|i| MetaGroup::ALL[i % 3]).collect();
        let a = assign(&predicted, 0.5, 3).unwrap();
        assert_eq!(a, assign(&predicted, 0.5, 3).unwrap());
        for g in MetaGroup::ALL {
            let exp = (0..30)
                .filter(|&i| predicted[i] == g && a[i] == Condition::Experimental)
                .count();
            assert_eq!(exp, 5);
        }
        assert!(assign(&predicted, 1.5, 3).is_err());
        assert!(assign(&[MetaGroup::Default], 0.4, 3).is_err());
        assert!(assign(&predicted, 0.0, 3)
            .unwrap()
            .iter()
            .all(|c| *c == Condition::Control));
    }

    #[test]
    fn protocol_tokens() {
        assert_eq!("exp1".parse::<Protocol>().unwrap(), Protocol::Exp1Static);
        assert_eq!("exp2".parse::<Protocol>().unwrap(), Protocol::Exp2Adaptive);
        assert!("exp3".parse::<Protocol>().is_err());
    }
}
