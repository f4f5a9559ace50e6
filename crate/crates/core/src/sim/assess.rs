//! Pre- and post-test phases of both tutors, plus the early-prediction
//! feature vector built from the logic pre-test and the first training problem.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{ProblemOutcome, SimConfig, SimError, StudentProfile};
use crate::domain::{FeatureVector, Score};

/// Length of [`incoming_features`].
pub const INCOMING_DIM: usize = 6;

const LOGIC_PRE_LEN: usize = 2;
const LOGIC_POST_LEN: usize = 6;
const PROB_PRE_LEN: usize = 14;
const PROB_POST_LEN: usize = 20;

/// The six logic post-test scores; the first two are isomorphic to the
/// pre-test problems.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogicPost {
    pub scores: [Score; LOGIC_POST_LEN],
}

impl LogicPost {
    /// Mean of the two isomorphic problems.
    pub fn iso_mean(&self) -> f64 {
        mean(&self.scores[..2])
    }

    pub fn mean(&self) -> f64 {
        mean(&self.scores)
    }
}

fn mean(s: &[Score]) -> f64 {
    s.iter().map(|x| x.value()).sum::<f64>() / s.len() as f64
}

fn noise<R: Rng + ?Sized, const N: usize>(rng: &mut R, sd: f64) -> [f64; N] {
    std::array::from_fn(|_| {
        let z: f64 = StandardNormal.sample(&mut *rng);
        sd * z
    })
}

fn graded(p: f64) -> Score {
    Score::clamped(100.0 * p.clamp(0.0, 1.0))
}

fn check_skill(bc_skill: f64) -> Result<(), SimError> {
    if (0.0..=1.0).contains(&bc_skill) {
        Ok(())
    } else {
        Err(SimError::BadSkill(bc_skill))
    }
}

/// Logic pre-test: depends on competence only.
pub fn run_logic_pretest<R: Rng + ?Sized>(
    profile: &StudentProfile,
    config: &SimConfig,
    rng: &mut R,
) -> [Score; LOGIC_PRE_LEN] {
    let mu = config.logic_pre_base + config.logic_pre_competence * profile.competence;
    noise::<R, LOGIC_PRE_LEN>(rng, config.test_noise_sd).map(|e| graded(mu + e))
}

/// Logic post-test after training that left the student with `bc_skill`.
/// Every score is non-decreasing in `bc_skill` for a fixed rng state.
pub fn run_logic_posttest<R: Rng + ?Sized>(
    profile: &StudentProfile,
    bc_skill: f64,
    config: &SimConfig,
    rng: &mut R,
) -> Result<LogicPost, SimError> {
    check_skill(bc_skill)?;
    let mu = config.logic_post_base
        + config.logic_post_competence * profile.competence
        + config.logic_post_bc * bc_skill;
    let scores = noise::<R, LOGIC_POST_LEN>(rng, config.test_noise_sd).map(|e| graded(mu + e));
    Ok(LogicPost { scores })
}

/// Probability tutor pre- and post-test (14 and 20 problems, graded on
/// accuracy only). The training modes are folded into `bc_skill`. All noise is
/// drawn before either score is formed, so `pre` ignores `bc_skill` and `post`
/// is non-decreasing in it.
pub fn run_probability_phase<R: Rng + ?Sized>(
    profile: &StudentProfile,
    bc_skill: f64,
    config: &SimConfig,
    rng: &mut R,
) -> Result<(Score, Score), SimError> {
    check_skill(bc_skill)?;
    let pre_noise = noise::<R, PROB_PRE_LEN>(rng, config.prob_noise_sd);
    let post_noise = noise::<R, PROB_POST_LEN>(rng, config.prob_noise_sd);
    let c = profile.competence;
    let pre_mu = config.prob_pre_base + config.prob_pre_competence * c;
    let post_mu =
        config.prob_post_base + config.prob_post_competence * c + config.prob_post_bc * bc_skill;
    let avg = |mu: f64, e: &[f64]| {
        100.0 * e.iter().map(|x| (mu + x).clamp(0.0, 1.0)).sum::<f64>() / e.len() as f64
    };
    Ok((
        Score::clamped(avg(pre_mu, &pre_noise)),
        Score::clamped(avg(post_mu, &post_noise)),
    ))
}

/// Early-prediction features: both logic pre-test scores / 100, then time,
/// accuracy, hint count and switch flag of the first training problem.
pub fn incoming_features(
    pretest: &[Score; LOGIC_PRE_LEN],
    first: &ProblemOutcome,
    config: &SimConfig,
) -> FeatureVector {
    let v = vec![
        pretest[0].value() / 100.0,
        pretest[1].value() / 100.0,
        (first.time_s / config.time_cap_s).clamp(0.0, 1.0),
        first.accuracy,
        f64::from(first.hints),
        f64::from(u8::from(first.switched)),
    ];
    FeatureVector::new(v).expect("finite by construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::MetaGroup;
    use crate::rng;

    fn student(competence: f64) -> StudentProfile {
        StudentProfile::new("s", competence, 0.5, 0.5, 0.5, 1.0, &SimConfig::default())
    }

    #[test]
    fn probability_post_monotone_in_skill() {
        let c = SimConfig::default();
        for seed in 0..50 {
            let p = student(0.5);
            let (pre0, post0) = run_probability_phase(&p, 0.0, &c, &mut rng::seeded(seed)).unwrap();
            let (pre1, post1) = run_probability_phase(&p, 1.0, &c, &mut rng::seeded(seed)).unwrap();
            assert_eq!(pre0, pre1);
            assert!(post1 >= post0);
        }
    }

    #[test]
    fn probability_ceiling_without_noise() {
        let c = SimConfig::default().noiseless();
        let (_, post) = run_probability_phase(&student(1.0), 1.0, &c, &mut rng::seeded(1)).unwrap();
        assert_eq!(post.value(), 100.0);
    }

    #[test]
    fn skill_outside_unit_interval_rejected() {
        let c = SimConfig::default();
        let mut r = rng::seeded(0);
        assert_eq!(
            run_probability_phase(&student(0.5), 1.5, &c, &mut r),
            Err(SimError::BadSkill(1.5))
        );
        assert!(run_logic_posttest(&student(0.5), -0.1, &c, &mut r).is_err());
    }

    #[test]
    fn logic_post_monotone_in_skill() {
        let c = SimConfig::default();
        let p = student(0.3);
        let a = run_logic_posttest(&p, 0.1, &c, &mut rng::seeded(4)).unwrap();
        let b = run_logic_posttest(&p, 0.8, &c, &mut rng::seeded(4)).unwrap();
        assert!(a.scores.iter().zip(&b.scores).all(|(x, y)| x <= y));
        assert!(b.mean() > a.mean());
    }

    #[test]
    fn pretest_ignores_awareness() {
        let c = SimConfig::default();
        let a = StudentProfile::new("a", 0.4, 0.0, 0.0, 0.9, 1.2, &c);
        let b = StudentProfile::new("b", 0.4, 1.0, 1.0, 0.0, 0.6, &c);
        assert_eq!(b.group, MetaGroup::StrTime);
        assert_eq!(
            run_logic_pretest(&a, &c, &mut rng::seeded(3)),
            run_logic_pretest(&b, &c, &mut rng::seeded(3))
        );
    }
}
