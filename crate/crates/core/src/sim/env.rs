use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{EmpiricalDistribution, SimConfig, SimError, StudentProfile};
use crate::domain::{
    level_of, FeatureVector, InterventionAction, MetaGroup, Score, FEATURE_DIM, LEVELS,
    TRAINING_LEN,
};
use crate::rng::{self, SimRng};

pub const SIGNALS_PER_PROBLEM: usize = 7;
pub const AGGREGATE_FEATURES: usize = 12;
const _: () = assert!(SIGNALS_PER_PROBLEM * TRAINING_LEN + AGGREGATE_FEATURES == FEATURE_DIM);

/// Hint counts are scaled by this before entering the state vector.
const HINT_SCALE: f64 = 10.0;

/// What occupies a training slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SlotKind {
    Problem,
    WorkedExample,
}

/// Everything observed about one training slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemOutcome {
    pub position: usize,
    pub kind: SlotKind,
    pub action: InterventionAction,
    pub time_s: f64,
    pub accuracy: f64,
    pub hints: u32,
    /// The student switched FC → BC mid-problem (on their own or after a nudge).
    pub switched: bool,
    /// The problem ended up solved in BC, however that happened.
    pub in_bc: bool,
    pub solution_length: f64,
    pub score: Score,
    /// Seconds into the problem at which the switch happened.
    pub switch_time_s: Option<f64>,
    pub nudge_shown: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub features: FeatureVector,
    pub reward: Score,
    pub done: bool,
}

/// One student's walk through logic training.
#[derive(Debug, Clone)]
pub struct EnvState {
    profile: StudentProfile,
    config: Arc<SimConfig>,
    switch_dist: Arc<EmpiricalDistribution>,
    layout: [SlotKind; TRAINING_LEN],
    cursor: usize,
    history: Vec<ProblemOutcome>,
    rng: SimRng,
    experience: f64,
    adopted: bool,
}

/// Random inputs of one step, drawn up front in a fixed order so every action
/// sees the same underlying randomness.
struct Draws {
    time_z: f64,
    switch_u: f64,
    nudge_u: f64,
    comply_u: f64,
    accuracy_z: f64,
    hint_u: f64,
    length_z: f64,
    score_z: f64,
    adopt_u: f64,
}

impl Draws {
    fn new(rng: &mut SimRng) -> Self {
        let mut z = || -> f64 { StandardNormal.sample(&mut *rng) };
        let time_z = z();
        let accuracy_z = z();
        let length_z = z();
        let score_z = z();
        Draws {
            time_z,
            accuracy_z,
            length_z,
            score_z,
            switch_u: rng.random(),
            nudge_u: rng.random(),
            comply_u: rng.random(),
            hint_u: rng.random(),
            adopt_u: rng.random(),
        }
    }
}

fn clamp01(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// Inverse-transform Poisson draw from a single uniform.
fn poisson_from_uniform(lambda: f64, u: f64) -> u32 {
    if lambda <= 0.0 {
        return 0;
    }
    let mut k = 0u32;
    let mut pmf = (-lambda).exp();
    let mut cdf = pmf;
    while u > cdf && k < 100 {
        k += 1;
        pmf *= lambda / k as f64;
        cdf += pmf;
    }
    k
}

impl EnvState {
    /// Starts a trajectory. The rng stream is keyed by `(seed, profile.id)`.
    pub fn new(
        profile: StudentProfile,
        layout: [SlotKind; TRAINING_LEN],
        config: Arc<SimConfig>,
        switch_dist: Arc<EmpiricalDistribution>,
        seed: u64,
    ) -> Self {
        let rng = rng::keyed_rng(rng::derive_seed(seed, 0x0074_7261_696e), &profile.id);
        EnvState {
            profile,
            config,
            switch_dist,
            layout,
            cursor: 0,
            history: Vec::with_capacity(TRAINING_LEN),
            rng,
            experience: 0.0,
            adopted: false,
        }
    }

    pub fn profile(&self) -> &StudentProfile {
        &self.profile
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    /// Number of slots already completed.
    pub fn cursor(&self) -> usize {
        self.cursor
    }

    /// 1-based position of the next slot.
    pub fn next_position(&self) -> usize {
        self.cursor + 1
    }

    pub fn is_done(&self) -> bool {
        self.cursor >= TRAINING_LEN
    }

    pub fn history(&self) -> &[ProblemOutcome] {
        &self.history
    }

    pub fn layout(&self) -> &[SlotKind; TRAINING_LEN] {
        &self.layout
    }

    /// Kind of the slot at a 1-based position.
    pub fn slot_kind(&self, position: usize) -> SlotKind {
        self.layout[position - 1]
    }

    /// Accumulated BC experience mapped to `[0, 1)`.
    pub fn bc_skill(&self) -> f64 {
        1.0 - (-self.experience / self.config.experience_scale).exp()
    }

    /// Whether the student has taken up early switching after an exposure.
    pub fn adopted_early_switching(&self) -> bool {
        self.adopted
    }

    /// Changes the kind of a slot that has not been played yet.
    pub fn schedule(&mut self, position: usize, kind: SlotKind) -> Result<(), SimError> {
        if position <= self.cursor || position > TRAINING_LEN {
            return Err(SimError::SlotUnavailable(position));
        }
        self.layout[position - 1] = kind;
        Ok(())
    }

    pub fn features(&self) -> FeatureVector {
        extract_features(self)
    }

    /// Advances one training slot.
    pub fn step(&mut self, action: InterventionAction) -> Result<StepOutcome, SimError> {
        if self.is_done() {
            return Err(SimError::Finished);
        }
        let position = self.cursor + 1;
        let draws = Draws::new(&mut self.rng);
        let outcome = match self.layout[self.cursor] {
            SlotKind::WorkedExample => self.worked_example(position, action, &draws),
            SlotKind::Problem => self.solve(position, action, &draws),
        };
        let reward = outcome.score;
        self.history.push(outcome);
        self.cursor += 1;
        Ok(StepOutcome {
            features: self.features(),
            reward,
            done: self.is_done(),
        })
    }

    fn forced_efficiency(&self) -> f64 {
        self.profile
            .strategy_awareness
            .powf(self.config.forced_learning_exponent)
    }

    fn maybe_adopt(&mut self, u: f64) {
        let c = &self.config;
        let p = c.adoption_rate * self.profile.strategy_awareness.powf(c.adoption_exponent);
        if !self.adopted && u < p {
            self.adopted = true;
        }
    }

    fn worked_example(
        &mut self,
        position: usize,
        action: InterventionAction,
        d: &Draws,
    ) -> ProblemOutcome {
        let c = Arc::clone(&self.config);
        let level = level_of(position) as f64 - 1.0;
        self.experience += c.learn_rate * self.forced_efficiency();
        self.maybe_adopt(d.adopt_u);
        ProblemOutcome {
            position,
            kind: SlotKind::WorkedExample,
            action,
            time_s: c.worked_example_time_s,
            accuracy: 1.0,
            hints: 0,
            switched: false,
            in_bc: true,
            solution_length: c.bc_length_base + c.bc_length_per_level * level,
            score: Score::clamped(c.worked_example_score),
            switch_time_s: None,
            nudge_shown: false,
        }
    }

    /// Autonomous switching: StrTime early from its switch level, StrOnly late
    /// from its level, Default never. Adopters switch early from then on.
    fn autonomous_fraction(&self, level: usize) -> Option<[f64; 2]> {
        let c = &self.config;
        if self.adopted {
            return Some(c.early_switch_fraction);
        }
        match self.profile.group {
            MetaGroup::StrTime if level >= c.str_time_switch_level => Some(c.early_switch_fraction),
            MetaGroup::StrOnly if level >= c.str_only_switch_level => Some(c.late_switch_fraction),
            _ => None,
        }
    }

    fn solve(&mut self, position: usize, action: InterventionAction, d: &Draws) -> ProblemOutcome {
        let c = Arc::clone(&self.config);
        let p = &self.profile;
        let level = level_of(position);
        let lvl = level as f64 - 1.0;

        let fc_time = c.nominal_time_s
            * (1.0 + c.time_growth_per_level * lvl)
            * p.speed
            * (c.time_noise_sd * d.time_z).exp();
        let bc_time = fc_time * (1.0 - c.bc_time_saving_per_level * lvl).max(0.1);

        let mut switched = false;
        let mut nudged = false;
        let mut nudge_shown = false;
        let mut switch_time = None;
        let (in_bc, time_s, forced) = if action == InterventionAction::DirectPresent {
            (true, bc_time, true)
        } else {
            let auto_t = self
                .autonomous_fraction(level)
                .map(|[lo, hi]| fc_time * (lo + (hi - lo) * d.switch_u));
            let nudge_t = (action == InterventionAction::Nudge)
                .then(|| self.switch_dist.quantile(d.nudge_u))
                .filter(|&t| t < fc_time && auto_t.is_none_or(|a| t < a));
            if let Some(t) = nudge_t {
                nudge_shown = true;
                let comply =
                    c.nudge_compliance_base + c.nudge_compliance_slope * p.strategy_awareness;
                if d.comply_u < comply {
                    switch_time = Some(t);
                    nudged = true;
                }
            }
            if switch_time.is_none() {
                switch_time = auto_t;
            }
            match switch_time {
                Some(t) => {
                    switched = true;
                    (true, t + bc_time, false)
                }
                None => (false, fc_time, false),
            }
        };

        let (len_base, len_slope) = if in_bc {
            (c.bc_length_base, c.bc_length_per_level)
        } else {
            (c.fc_length_base, c.fc_length_per_level)
        };
        let solution_length = (len_base + len_slope * lvl) * (0.1 * d.length_z).exp();

        let mut acc_mean =
            c.accuracy_base + c.accuracy_competence * p.competence - c.difficulty_per_level * lvl;
        if in_bc {
            acc_mean += c.bc_bonus_per_level * lvl + c.bc_skill_accuracy * self.bc_skill();
        }
        let accuracy = clamp01(acc_mean + c.accuracy_noise_sd * d.accuracy_z);

        let lambda = c.hint_rate * p.hint_propensity * (1.0 + c.hint_growth_per_level * lvl);
        let hints = poisson_from_uniform(lambda, d.hint_u);

        let time_norm = clamp01(time_s / c.time_cap_s);
        let length_norm = clamp01(solution_length / c.length_cap);
        let score = Score::clamped(
            100.0
                * (c.weight_accuracy * accuracy
                    + c.weight_time * (1.0 - time_norm)
                    + c.weight_length * (1.0 - length_norm)
                    + c.score_noise_sd * d.score_z),
        );

        if in_bc {
            let efficiency = if forced {
                self.forced_efficiency()
            } else {
                1.0
            };
            self.experience += c.learn_rate * efficiency;
            if forced || nudged {
                self.maybe_adopt(d.adopt_u);
            }
        }

        ProblemOutcome {
            position,
            kind: SlotKind::Problem,
            action,
            time_s,
            accuracy,
            hints,
            switched,
            in_bc,
            solution_length,
            score,
            switch_time_s: switch_time,
            nudge_shown,
        }
    }
}

/// The 152-wide state vector: 7 signals for each of the 20 training slots
/// (zero until solved) followed by 12 running aggregates.
///
/// Per-slot signals: normalized time, accuracy, hints/10, switched, solved in
/// BC, score/100, normalized solution length.
///
/// Aggregates: progress, mean time, mean accuracy, mean hints/10, switch rate,
/// BC rate, mean score/100, last score/100, nudges/20, direct
/// presentations/20, worked examples/20, level of the next slot/5.
pub fn extract_features(env: &EnvState) -> FeatureVector {
    let c = &env.config;
    let mut v = vec![0.0; FEATURE_DIM];
    for (k, o) in env.history.iter().enumerate() {
        let base = k * SIGNALS_PER_PROBLEM;
        v[base] = clamp01(o.time_s / c.time_cap_s);
        v[base + 1] = o.accuracy;
        v[base + 2] = o.hints as f64 / HINT_SCALE;
        v[base + 3] = f64::from(u8::from(o.switched));
        v[base + 4] = f64::from(u8::from(o.in_bc));
        v[base + 5] = o.score.value() / 100.0;
        v[base + 6] = clamp01(o.solution_length / c.length_cap);
    }
    let agg = &mut v[SIGNALS_PER_PROBLEM * TRAINING_LEN..];
    let n = env.history.len();
    let total = TRAINING_LEN as f64;
    agg[0] = n as f64 / total;
    if n > 0 {
        let nf = n as f64;
        let mean = |f: &dyn Fn(&ProblemOutcome) -> f64| env.history.iter().map(f).sum::<f64>() / nf;
        agg[1] = mean(&|o| clamp01(o.time_s / c.time_cap_s));
        agg[2] = mean(&|o| o.accuracy);
        agg[3] = mean(&|o| o.hints as f64 / HINT_SCALE);
        agg[4] = mean(&|o| f64::from(u8::from(o.switched)));
        agg[5] = mean(&|o| f64::from(u8::from(o.in_bc)));
        agg[6] = mean(&|o| o.score.value() / 100.0);
        agg[7] = env.history[n - 1].score.value() / 100.0;
        let count = |pred: &dyn Fn(&ProblemOutcome) -> bool| {
            env.history.iter().filter(|o| pred(o)).count() as f64 / total
        };
        agg[8] = count(&|o| o.kind == SlotKind::Problem && o.action == InterventionAction::Nudge);
        agg[9] = count(&|o| {
            o.kind == SlotKind::Problem && o.action == InterventionAction::DirectPresent
        });
        agg[10] = count(&|o| o.kind == SlotKind::WorkedExample);
    }
    agg[11] = if env.is_done() {
        1.0
    } else {
        level_of(env.cursor + 1) as f64 / LEVELS as f64
    };
    FeatureVector::new(v).expect("features are finite by construction")
}
