use serde::{Deserialize, Serialize};

use super::SimError;
use crate::domain::MetaGroup;

/// Every behavioural constant of the simulator. The whole struct is
/// serializable and each field has a default, so a config file only needs the
/// keys it overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Strategy-awareness threshold for the StrOnly/StrTime labels.
    pub strategy_threshold: f64,
    /// Time-awareness threshold for the StrTime label.
    pub time_threshold: f64,

    /// Score = 100 × (w_a·accuracy + w_t·(1 − time) + w_l·(1 − length) + noise).
    pub weight_accuracy: f64,
    pub weight_time: f64,
    pub weight_length: f64,
    pub score_noise_sd: f64,

    /// Accuracy mean of a training problem before strategy effects.
    pub accuracy_base: f64,
    pub accuracy_competence: f64,
    /// Accuracy lost per level above the first.
    pub difficulty_per_level: f64,
    /// Accuracy gained per level above the first when the problem is solved in BC.
    pub bc_bonus_per_level: f64,
    /// Extra accuracy in BC proportional to accumulated BC skill.
    pub bc_skill_accuracy: f64,
    pub accuracy_noise_sd: f64,

    /// Nominal forward-chaining solve time on level 1, seconds.
    pub nominal_time_s: f64,
    pub time_growth_per_level: f64,
    /// BC solve time relative to FC shrinks by this much per level.
    pub bc_time_saving_per_level: f64,
    pub time_noise_sd: f64,
    /// Time that normalizes to 1.
    pub time_cap_s: f64,

    pub fc_length_base: f64,
    pub fc_length_per_level: f64,
    pub bc_length_base: f64,
    pub bc_length_per_level: f64,
    pub length_cap: f64,

    /// Expected hints per problem = hint_rate × hint_propensity × (1 + hint_growth·(level−1)).
    pub hint_rate: f64,
    pub hint_growth_per_level: f64,

    /// P(comply with a nudge) = base + slope × strategy_awareness.
    pub nudge_compliance_base: f64,
    pub nudge_compliance_slope: f64,

    /// Autonomous switching starts at these levels.
    pub str_time_switch_level: usize,
    pub str_only_switch_level: usize,
    /// Fraction of the FC solve time elapsed when an autonomous switch happens.
    pub early_switch_fraction: [f64; 2],
    pub late_switch_fraction: [f64; 2],

    /// BC experience added per self-initiated BC problem.
    pub learn_rate: f64,
    /// Forced BC (direct presentation, worked example) teaches
    /// strategy_awareness^forced_learning_exponent of a self-initiated problem.
    pub forced_learning_exponent: f64,
    /// After a BC exposure a student starts switching early on their own with
    /// probability adoption_rate × strategy_awareness^adoption_exponent.
    pub adoption_rate: f64,
    pub adoption_exponent: f64,
    /// bc_skill = 1 − exp(−experience / experience_scale).
    pub experience_scale: f64,

    /// Worked-example slots emit these fixed signals.
    pub worked_example_time_s: f64,
    pub worked_example_score: f64,

    /// Logic test phases.
    pub logic_pre_base: f64,
    pub logic_pre_competence: f64,
    pub logic_post_base: f64,
    pub logic_post_competence: f64,
    pub logic_post_bc: f64,
    pub test_noise_sd: f64,

    /// Probability tutor: accuracy per problem, graded on accuracy only.
    pub prob_pre_base: f64,
    pub prob_pre_competence: f64,
    pub prob_post_base: f64,
    pub prob_post_competence: f64,
    pub prob_post_bc: f64,
    pub prob_noise_sd: f64,

    pub profiles: ProfileRanges,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            strategy_threshold: 0.6,
            time_threshold: 0.6,
            weight_accuracy: 0.5,
            weight_time: 0.25,
            weight_length: 0.25,
            score_noise_sd: 0.05,
            accuracy_base: 0.4,
            accuracy_competence: 0.5,
            difficulty_per_level: 0.08,
            bc_bonus_per_level: 0.07,
            bc_skill_accuracy: 0.1,
            accuracy_noise_sd: 0.08,
            nominal_time_s: 300.0,
            time_growth_per_level: 0.25,
            bc_time_saving_per_level: 0.1,
            time_noise_sd: 0.08,
            time_cap_s: 1200.0,
            fc_length_base: 12.0,
            fc_length_per_level: 3.0,
            bc_length_base: 10.0,
            bc_length_per_level: 1.5,
            length_cap: 40.0,
            hint_rate: 10.0,
            hint_growth_per_level: 0.2,
            nudge_compliance_base: 0.2,
            nudge_compliance_slope: 0.75,
            str_time_switch_level: 2,
            str_only_switch_level: 4,
            early_switch_fraction: [0.05, 0.25],
            late_switch_fraction: [0.4, 0.8],
            learn_rate: 0.25,
            forced_learning_exponent: 1.5,
            adoption_rate: 0.6,
            adoption_exponent: 3.0,
            experience_scale: 4.0,
            worked_example_time_s: 240.0,
            worked_example_score: 100.0,
            logic_pre_base: 0.3,
            logic_pre_competence: 0.45,
            logic_post_base: 0.3,
            logic_post_competence: 0.45,
            logic_post_bc: 0.45,
            test_noise_sd: 0.06,
            prob_pre_base: 0.45,
            prob_pre_competence: 0.4,
            prob_post_base: 0.2,
            prob_post_competence: 0.45,
            prob_post_bc: 0.45,
            prob_noise_sd: 0.1,
            profiles: ProfileRanges::default(),
        }
    }
}

impl SimConfig {
    /// The same config with every noise source switched off.
    pub fn noiseless(mut self) -> Self {
        self.score_noise_sd = 0.0;
        self.accuracy_noise_sd = 0.0;
        self.time_noise_sd = 0.0;
        self.test_noise_sd = 0.0;
        self.prob_noise_sd = 0.0;
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::Config(m.to_string()));
        let sds = [
            self.score_noise_sd,
            self.accuracy_noise_sd,
            self.time_noise_sd,
            self.test_noise_sd,
            self.prob_noise_sd,
        ];
        if sds.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return bad("noise standard deviations must be finite and >= 0");
        }
        if self.time_cap_s <= 0.0 || self.length_cap <= 0.0 || self.experience_scale <= 0.0 {
            return bad("caps and experience_scale must be positive");
        }
        if self.nominal_time_s <= 0.0 {
            return bad("nominal_time_s must be positive");
        }
        for (lo, hi) in [self.early_switch_fraction, self.late_switch_fraction]
            .iter()
            .map(|r| (r[0], r[1]))
        {
            if !(0.0..=1.0).contains(&lo) || !(lo..=1.0).contains(&hi) {
                return bad("switch fractions must satisfy 0 <= lo <= hi <= 1");
            }
        }
        self.profiles.validate()?;
        let p = &self.profiles;
        let consistent = p.default.strategy_awareness[1] < self.strategy_threshold
            && p.str_only.strategy_awareness[0] >= self.strategy_threshold
            && p.str_only.time_awareness[1] < self.time_threshold
            && p.str_time.strategy_awareness[0] >= self.strategy_threshold
            && p.str_time.time_awareness[0] >= self.time_threshold;
        if !consistent {
            return bad("archetype awareness ranges must fall on their side of the thresholds");
        }
        Ok(())
    }

    /// Group implied by the awareness thresholds.
    pub fn classify(&self, strategy_awareness: f64, time_awareness: f64) -> MetaGroup {
        if strategy_awareness >= self.strategy_threshold {
            if time_awareness >= self.time_threshold {
                MetaGroup::StrTime
            } else {
                MetaGroup::StrOnly
            }
        } else {
            MetaGroup::Default
        }
    }
}

/// Trait ranges `[lo, hi]` for one archetype.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchetypeRanges {
    pub competence: [f64; 2],
    pub strategy_awareness: [f64; 2],
    pub time_awareness: [f64; 2],
    pub hint_propensity: [f64; 2],
    pub speed: [f64; 2],
}

/// Archetype-specific trait ranges used when sampling cohorts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileRanges {
    pub default: ArchetypeRanges,
    pub str_only: ArchetypeRanges,
    pub str_time: ArchetypeRanges,
}

impl Default for ProfileRanges {
    fn default() -> Self {
        ProfileRanges {
            default: ArchetypeRanges {
                competence: [0.2, 0.9],
                strategy_awareness: [0.0, 0.45],
                time_awareness: [0.0, 1.0],
                hint_propensity: [0.8, 1.0],
                speed: [1.2, 1.5],
            },
            str_only: ArchetypeRanges {
                competence: [0.2, 0.9],
                strategy_awareness: [0.7, 1.0],
                time_awareness: [0.0, 0.45],
                hint_propensity: [0.0, 0.25],
                speed: [0.9, 1.15],
            },
            str_time: ArchetypeRanges {
                competence: [0.2, 0.9],
                strategy_awareness: [0.7, 1.0],
                time_awareness: [0.7, 1.0],
                hint_propensity: [0.0, 0.25],
                speed: [0.5, 0.75],
            },
        }
    }
}

impl ProfileRanges {
    pub fn for_group(&self, g: MetaGroup) -> &ArchetypeRanges {
        match g {
            MetaGroup::Default => &self.default,
            MetaGroup::StrOnly => &self.str_only,
            MetaGroup::StrTime => &self.str_time,
        }
    }

    fn validate(&self) -> Result<(), SimError> {
        for g in MetaGroup::ALL {
            let r = self.for_group(g);
            let unit = [
                r.competence,
                r.strategy_awareness,
                r.time_awareness,
                r.hint_propensity,
            ];
            if unit
                .iter()
                .any(|[lo, hi]| !(0.0 <= *lo && lo <= hi && *hi <= 1.0))
            {
                return Err(SimError::Config(format!(
                    "{g} trait ranges must satisfy 0 <= lo <= hi <= 1"
                )));
            }
            if !(r.speed[0] > 0.0 && r.speed[0] <= r.speed[1]) {
                return Err(SimError::Config(format!(
                    "{g} speed range must be positive"
                )));
            }
        }
        Ok(())
    }
}
