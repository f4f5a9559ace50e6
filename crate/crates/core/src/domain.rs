//! Core vocabulary: tutors, problems, scores, feature vectors and the replay
//! corpus of logged `(state, action, reward)` records.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;

/// Length of the default state vector.
pub const FEATURE_DIM: usize = 152;
/// Number of logic training problems.
pub const TRAINING_LEN: usize = 20;
pub const LEVELS: usize = 5;
pub const PROBLEMS_PER_LEVEL: usize = 4;
pub const N_ACTIONS: usize = 3;

#[derive(Debug, Error, PartialEq)]
pub enum DomainError {
    #[error("score {0} outside [0, 100]")]
    ScoreOutOfRange(f64),
    #[error("feature vector holds a non-finite value at index {0}")]
    NonFiniteFeature(usize),
    #[error("unknown action token {0:?}")]
    UnknownAction(String),
    #[error("unknown action code {0}")]
    UnknownActionCode(u8),
    #[error("unknown group {0:?}")]
    UnknownGroup(String),
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: feature length {found} does not match corpus dimension {expected}")]
    FeatureLength {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: reward out of range ({value})")]
    RewardOutOfRange { line: usize, value: f64 },
    #[error("line {line}: unknown action token {token:?}")]
    UnknownAction { line: usize, token: String },
    #[error("line {line}: non-finite state feature")]
    NonFinite { line: usize },
    #[error("student {student}: duplicate record at position {position}")]
    DuplicatePosition { student: String, position: usize },
    #[error("student {student}: {message}")]
    Trajectory { student: String, message: String },
    #[error("feature dimension {found} does not match {expected}")]
    Dimension { expected: usize, found: usize },
    #[error("split fraction must lie strictly between 0 and 1, got {0}")]
    Fraction(f64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Tutor {
    Logic,
    Probability,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    PreTest,
    Training,
    PostTest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Strategy {
    ForwardChaining,
    BackwardChaining,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Presentation {
    Default,
    WorkedExample,
}

/// Intervention chosen for one training problem. Codes are part of the file
/// formats and never change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum InterventionAction {
    #[serde(rename = "none")]
    NoIntervention = 0,
    #[serde(rename = "nudge")]
    Nudge = 1,
    #[serde(rename = "present")]
    DirectPresent = 2,
}

impl InterventionAction {
    pub const ALL: [InterventionAction; N_ACTIONS] = [
        InterventionAction::NoIntervention,
        InterventionAction::Nudge,
        InterventionAction::DirectPresent,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_code(code: u8) -> Result<Self, DomainError> {
        Self::ALL
            .get(code as usize)
            .copied()
            .ok_or(DomainError::UnknownActionCode(code))
    }

    pub fn token(self) -> &'static str {
        match self {
            InterventionAction::NoIntervention => "none",
            InterventionAction::Nudge => "nudge",
            InterventionAction::DirectPresent => "present",
        }
    }
}

impl FromStr for InterventionAction {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(InterventionAction::NoIntervention),
            "nudge" => Ok(InterventionAction::Nudge),
            "present" => Ok(InterventionAction::DirectPresent),
            other => Err(DomainError::UnknownAction(other.to_string())),
        }
    }
}

impl fmt::Display for InterventionAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// Metacognitive group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MetaGroup {
    Default = 0,
    StrOnly = 1,
    StrTime = 2,
}

impl MetaGroup {
    pub const ALL: [MetaGroup; 3] = [MetaGroup::Default, MetaGroup::StrOnly, MetaGroup::StrTime];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            MetaGroup::Default => "Default",
            MetaGroup::StrOnly => "StrOnly",
            MetaGroup::StrTime => "StrTime",
        }
    }
}

impl FromStr for MetaGroup {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Default" => Ok(MetaGroup::Default),
            "StrOnly" => Ok(MetaGroup::StrOnly),
            "StrTime" => Ok(MetaGroup::StrTime),
            other => Err(DomainError::UnknownGroup(other.to_string())),
        }
    }
}

impl fmt::Display for MetaGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which actions may be chosen at a decision slot, indexed by action code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActionMask(pub [bool; N_ACTIONS]);

impl ActionMask {
    pub const ALL: ActionMask = ActionMask([true; N_ACTIONS]);
    pub const ONLY_NONE: ActionMask = ActionMask([true, false, false]);

    pub fn allows(&self, action: InterventionAction) -> bool {
        self.0[action.index()]
    }

    pub fn any(&self) -> bool {
        self.0.iter().any(|&b| b)
    }
}

/// A problem score in `[0, 100]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Score(f64);

impl Score {
    pub fn new(value: f64) -> Result<Self, DomainError> {
        if (0.0..=100.0).contains(&value) {
            Ok(Score(value))
        } else {
            Err(DomainError::ScoreOutOfRange(value))
        }
    }

    /// Clamps into range; NaN maps to 0.
    pub fn clamped(value: f64) -> Self {
        if value.is_nan() {
            Score(0.0)
        } else {
            Score(value.clamp(0.0, 100.0))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Score {
    type Error = DomainError;
    fn try_from(v: f64) -> Result<Self, Self::Error> {
        Score::new(v)
    }
}

impl From<Score> for f64 {
    fn from(s: Score) -> f64 {
        s.0
    }
}

/// Fixed-length vector of finite reals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self, DomainError> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(DomainError::NonFiniteFeature(i));
        }
        Ok(FeatureVector(values))
    }

    pub fn zeros(dim: usize) -> Self {
        FeatureVector(vec![0.0; dim])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for FeatureVector {
    type Error = DomainError;
    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        FeatureVector::new(v)
    }
}

impl From<FeatureVector> for Vec<f64> {
    fn from(f: FeatureVector) -> Vec<f64> {
        f.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Problem {
    pub id: String,
    pub tutor: Tutor,
    pub phase: Phase,
    /// 1..=5 for logic training problems, 0 otherwise.
    pub level: u8,
    /// 1-based index within the level (training) or within the phase.
    pub index_in_level: u32,
    pub presentation: Presentation,
    pub isomorphic_of: Option<String>,
}

impl Problem {
    pub fn default_strategy(&self) -> Strategy {
        match self.tutor {
            Tutor::Logic => Strategy::ForwardChaining,
            Tutor::Probability => Strategy::BackwardChaining,
        }
    }
}

/// Level (1-based) of a 1-based logic training position.
pub fn level_of(position: usize) -> usize {
    (position - 1) / PROBLEMS_PER_LEVEL + 1
}

/// Whether a 1-based logic training position closes its level. Those slots
/// evaluate the level and never carry an intervention.
pub fn is_last_in_level(position: usize) -> bool {
    (1..=TRAINING_LEN).contains(&position) && position.is_multiple_of(PROBLEMS_PER_LEVEL)
}

fn problem(
    id: String,
    tutor: Tutor,
    phase: Phase,
    level: u8,
    index: u32,
    iso: Option<String>,
) -> Problem {
    Problem {
        id,
        tutor,
        phase,
        level,
        index_in_level: index,
        presentation: Presentation::Default,
        isomorphic_of: iso,
    }
}

/// The fixed problem order of a tutor, identical for every student.
pub fn build_curriculum(tutor: Tutor) -> Vec<Problem> {
    let mut out = Vec::new();
    match tutor {
        Tutor::Logic => {
            for i in 1..=2u32 {
                out.push(problem(
                    format!("logic-pre-{i}"),
                    tutor,
                    Phase::PreTest,
                    0,
                    i,
                    None,
                ));
            }
            for level in 1..=LEVELS as u8 {
                for i in 1..=PROBLEMS_PER_LEVEL as u32 {
                    out.push(problem(
                        format!("logic-train-{level}-{i}"),
                        tutor,
                        Phase::Training,
                        level,
                        i,
                        None,
                    ));
                }
            }
            for i in 1..=6u32 {
                let iso = (i <= 2).then(|| format!("logic-pre-{i}"));
                out.push(problem(
                    format!("logic-post-{i}"),
                    tutor,
                    Phase::PostTest,
                    0,
                    i,
                    iso,
                ));
            }
        }
        Tutor::Probability => {
            for i in 1..=14u32 {
                out.push(problem(
                    format!("prob-pre-{i}"),
                    tutor,
                    Phase::PreTest,
                    0,
                    i,
                    None,
                ));
            }
            for i in 1..=12u32 {
                out.push(problem(
                    format!("prob-train-{i}"),
                    tutor,
                    Phase::Training,
                    0,
                    i,
                    None,
                ));
            }
            for i in 1..=20u32 {
                let iso = (i <= 14).then(|| format!("prob-pre-{i}"));
                out.push(problem(
                    format!("prob-post-{i}"),
                    tutor,
                    Phase::PostTest,
                    0,
                    i,
                    iso,
                ));
            }
        }
    }
    out
}

/// One logged tutoring step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionRecord {
    pub student_id: String,
    pub problem_id: String,
    pub position: usize,
    pub state: FeatureVector,
    pub action: InterventionAction,
    pub reward: Score,
    pub done: bool,
}

#[derive(Deserialize)]
struct RawRecord {
    student_id: String,
    problem_id: String,
    position: usize,
    state: Vec<f64>,
    action: String,
    reward: f64,
    done: bool,
}

#[derive(Debug, Clone, PartialEq)]
struct StudentSpan {
    id: String,
    start: usize,
    len: usize,
}

/// Logged records grouped into contiguous per-student trajectories.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReplayCorpus {
    records: Vec<TransitionRecord>,
    feature_dim: Option<usize>,
    students: Vec<StudentSpan>,
    index: BTreeMap<String, usize>,
}

impl ReplayCorpus {
    /// Groups records by student (first-appearance order), sorts each
    /// trajectory by position and validates the trajectory invariants.
    pub fn from_records(records: Vec<TransitionRecord>) -> Result<Self, CorpusError> {
        let mut feature_dim = None;
        for r in &records {
            match feature_dim {
                None => feature_dim = Some(r.state.len()),
                Some(d) if d != r.state.len() => {
                    return Err(CorpusError::Dimension {
                        expected: d,
                        found: r.state.len(),
                    })
                }
                _ => {}
            }
        }

        let mut order: Vec<String> = Vec::new();
        let mut buckets: BTreeMap<String, Vec<TransitionRecord>> = BTreeMap::new();
        for r in records {
            if !buckets.contains_key(&r.student_id) {
                order.push(r.student_id.clone());
            }
            buckets.entry(r.student_id.clone()).or_default().push(r);
        }

        let mut out = Vec::new();
        let mut students = Vec::with_capacity(order.len());
        let mut index = BTreeMap::new();
        for id in order {
            let mut traj = buckets.remove(&id).unwrap_or_default();
            traj.sort_by_key(|r| r.position);
            validate_trajectory(&id, &traj)?;
            index.insert(id.clone(), students.len());
            students.push(StudentSpan {
                id,
                start: out.len(),
                len: traj.len(),
            });
            out.extend(traj);
        }

        Ok(ReplayCorpus {
            records: out,
            feature_dim,
            students,
            index,
        })
    }

    pub fn records(&self) -> &[TransitionRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn feature_dim(&self) -> Option<usize> {
        self.feature_dim
    }

    pub fn n_students(&self) -> usize {
        self.students.len()
    }

    pub fn student_ids(&self) -> impl Iterator<Item = &str> {
        self.students.iter().map(|s| s.id.as_str())
    }

    /// The trajectory of one student, sorted by position.
    pub fn trajectory(&self, student_id: &str) -> Option<&[TransitionRecord]> {
        let s = &self.students[*self.index.get(student_id)?];
        Some(&self.records[s.start..s.start + s.len])
    }

    pub fn trajectories(&self) -> impl Iterator<Item = &[TransitionRecord]> {
        self.students
            .iter()
            .map(move |s| &self.records[s.start..s.start + s.len])
    }

    /// Successor of record `i`: the same student's record at position + 1.
    pub fn successor(&self, i: usize) -> Option<&TransitionRecord> {
        let r = self.records.get(i)?;
        let next = self.records.get(i + 1)?;
        (next.student_id == r.student_id && next.position == r.position + 1).then_some(next)
    }

    /// Writes one JSON object per line.
    pub fn save<W: Write>(&self, mut w: W) -> Result<(), CorpusError> {
        for r in &self.records {
            let line = serde_json::to_string(r).map_err(|e| CorpusError::Malformed {
                line: 0,
                message: e.to_string(),
            })?;
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.save(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }
}

fn validate_trajectory(id: &str, traj: &[TransitionRecord]) -> Result<(), CorpusError> {
    for (k, w) in traj.windows(2).enumerate() {
        if w[0].position == w[1].position {
            return Err(CorpusError::DuplicatePosition {
                student: id.to_string(),
                position: w[0].position,
            });
        }
        if w[0].done {
            return Err(CorpusError::Trajectory {
                student: id.to_string(),
                message: format!(
                    "terminal record at position {} is not last",
                    traj[k].position
                ),
            });
        }
        if w[1].position != w[0].position + 1 {
            return Err(CorpusError::Trajectory {
                student: id.to_string(),
                message: format!("gap after position {}", w[0].position),
            });
        }
    }
    if let Some(last) = traj.last() {
        if !last.done {
            return Err(CorpusError::Trajectory {
                student: id.to_string(),
                message: format!("last record at position {} is not terminal", last.position),
            });
        }
    }
    Ok(())
}

/// Reads a line-delimited corpus. Blank lines are skipped; line numbers in
/// errors are 1-based.
pub fn load_corpus<R: BufRead>(source: R) -> Result<ReplayCorpus, CorpusError> {
    let mut records = Vec::new();
    let mut dim: Option<usize> = None;
    for (i, line) in source.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        let action: InterventionAction =
            raw.action.parse().map_err(|_| CorpusError::UnknownAction {
                line: line_no,
                token: raw.action.clone(),
            })?;
        let reward = Score::new(raw.reward).map_err(|_| CorpusError::RewardOutOfRange {
            line: line_no,
            value: raw.reward,
        })?;
        match dim {
            None => dim = Some(raw.state.len()),
            Some(d) if d != raw.state.len() => {
                return Err(CorpusError::FeatureLength {
                    line: line_no,
                    expected: d,
                    found: raw.state.len(),
                })
            }
            _ => {}
        }
        let state =
            FeatureVector::new(raw.state).map_err(|_| CorpusError::NonFinite { line: line_no })?;
        records.push(TransitionRecord {
            student_id: raw.student_id,
            problem_id: raw.problem_id,
            position: raw.position,
            state,
            action,
            reward,
            done: raw.done,
        });
    }
    ReplayCorpus::from_records(records)
}

pub fn parse_corpus(text: &str) -> Result<ReplayCorpus, CorpusError> {
    load_corpus(text.as_bytes())
}

/// Splits a corpus by student. `round(fraction × students)` students go to
/// the training side; the choice is a seeded shuffle.
pub fn split_corpus(
    corpus: &ReplayCorpus,
    fraction: f64,
    seed: u64,
) -> Result<(ReplayCorpus, ReplayCorpus), CorpusError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(CorpusError::Fraction(fraction));
    }
    let n = corpus.students.len();
    let n_train = (fraction * n as f64).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::seeded(seed));
    let mut in_train = vec![false; n];
    for &s in &order[..n_train] {
        in_train[s] = true;
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (k, span) in corpus.students.iter().enumerate() {
        let side = if in_train[k] { &mut train } else { &mut test };
        side.extend_from_slice(&corpus.records[span.start..span.start + span.len]);
    }
    let mut train = ReplayCorpus::from_records(train)?;
    let mut test = ReplayCorpus::from_records(test)?;
    // An empty side keeps the parent dimension.
    train.feature_dim = train.feature_dim.or(corpus.feature_dim);
    test.feature_dim = test.feature_dim.or(corpus.feature_dim);
    Ok((train, test))
}
