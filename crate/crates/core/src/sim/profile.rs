use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{SimConfig, SimError};
use crate::domain::MetaGroup;
use crate::rng;

/// Latent traits of one simulated student.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudentProfile {
    pub id: String,
    pub competence: f64,
    pub strategy_awareness: f64,
    pub time_awareness: f64,
    pub hint_propensity: f64,
    /// Multiplier on nominal solve time.
    pub speed: f64,
    /// Derived from the awareness thresholds.
    pub group: MetaGroup,
}

impl StudentProfile {
    /// Builds a profile and labels it from the thresholds in `config`.
    pub fn new(
        id: impl Into<String>,
        competence: f64,
        strategy_awareness: f64,
        time_awareness: f64,
        hint_propensity: f64,
        speed: f64,
        config: &SimConfig,
    ) -> Self {
        StudentProfile {
            id: id.into(),
            competence,
            strategy_awareness,
            time_awareness,
            hint_propensity,
            speed,
            group: config.classify(strategy_awareness, time_awareness),
        }
    }
}

fn uniform<R: Rng>(rng: &mut R, [lo, hi]: [f64; 2]) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Samples one profile of the given archetype.
pub fn sample_profile<R: Rng>(
    id: impl Into<String>,
    group: MetaGroup,
    config: &SimConfig,
    rng: &mut R,
) -> StudentProfile {
    let r = config.profiles.for_group(group);
    let competence = uniform(rng, r.competence);
    let strategy = uniform(rng, r.strategy_awareness);
    let time = uniform(rng, r.time_awareness);
    let hints = uniform(rng, r.hint_propensity);
    let speed = uniform(rng, r.speed);
    StudentProfile::new(id, competence, strategy, time, hints, speed, config)
}

/// Largest-remainder rounding of `n × mix`; ties go to the lower group code.
pub fn group_counts(n: usize, mix: [f64; 3]) -> Result<[usize; 3], SimError> {
    let sum: f64 = mix.iter().sum();
    if mix.iter().any(|p| !(*p >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
        return Err(SimError::BadProportions(mix));
    }
    let exact: Vec<f64> = mix.iter().map(|p| p * n as f64).collect();
    // Guard against 44.000000000000004-style representation error.
    let mut counts: [usize; 3] = [0; 3];
    for (c, e) in counts.iter_mut().zip(&exact) {
        *c = (e + 1e-9).floor() as usize;
    }
    let mut remaining = n.saturating_sub(counts.iter().sum());
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - counts[a] as f64;
        let fb = exact[b] - counts[b] as f64;
        fb.partial_cmp(&fa)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    for &g in order.iter().cycle() {
        if remaining == 0 {
            break;
        }
        if mix[g] > 0.0 {
            counts[g] += 1;
            remaining -= 1;
        }
    }
    Ok(counts)
}

/// Samples a cohort with group sizes fixed by [`group_counts`]. Group labels
/// are shuffled with the master seed; each student's traits come from its own
/// stream keyed by student id, so the cohort is identical however it is
/// later partitioned across workers.
pub fn sample_cohort(
    n: usize,
    mix: [f64; 3],
    seed: u64,
    config: &SimConfig,
) -> Result<Vec<StudentProfile>, SimError> {
    config.validate()?;
    let counts = group_counts(n, mix)?;
    let mut labels: Vec<MetaGroup> = MetaGroup::ALL
        .iter()
        .zip(counts)
        .flat_map(|(g, c)| std::iter::repeat_n(*g, c))
        .collect();
    rand::seq::SliceRandom::shuffle(labels.as_mut_slice(), &mut rng::stream_rng(seed, 0));
    Ok(labels
        .into_iter()
        .enumerate()
        .map(|(i, g)| {
            let id = student_id(i);
            let mut r = rng::keyed_rng(rng::derive_seed(seed, 1), &id);
            sample_profile(id, g, config, &mut r)
        })
        .collect())
}

pub(crate) fn student_id(i: usize) -> String {
    format!("student-{i:05}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cohort_counts_follow_mix() {
        let c = SimConfig::default();
        let cohort = sample_cohort(110, [0.4, 0.4, 0.2], 3, &c).unwrap();
        let count = |g| cohort.iter().filter(|p| p.group == g).count();
        assert_eq!(
            (
                count(MetaGroup::Default),
                count(MetaGroup::StrOnly),
                count(MetaGroup::StrTime)
            ),
            (44, 44, 22)
        );
        assert!(sample_cohort(0, [0.4, 0.4, 0.2], 3, &c).unwrap().is_empty());
        let all_default = sample_cohort(17, [1.0, 0.0, 0.0], 3, &c).unwrap();
        assert!(all_default.iter().all(|p| p.group == MetaGroup::Default));
    }

    #[test]
    fn rounding_always_sums_to_n() {
        for n in 0..200 {
            for mix in [
                [1.0 / 3.0; 3],
                [0.45, 0.45, 0.1],
                [0.5, 0.25, 0.25],
                [0.0, 0.7, 0.3],
            ] {
                let c = group_counts(n, mix).unwrap();
                assert_eq!(c.iter().sum::<usize>(), n);
                for g in 0..3 {
                    assert!((c[g] as f64 - mix[g] * n as f64).abs() < 1.0 + 1e-9);
                }
            }
        }
    }

    #[test]
    fn bad_mix_rejected() {
        assert!(group_counts(10, [0.5, 0.5, 0.5]).is_err());
        assert!(group_counts(10, [1.2, -0.1, -0.1]).is_err());
    }

    #[test]
    fn cohort_is_deterministic_and_labels_respect_thresholds() {
        let c = SimConfig::default();
        let a = sample_cohort(60, [0.3, 0.3, 0.4], 11, &c).unwrap();
        let b = sample_cohort(60, [0.3, 0.3, 0.4], 11, &c).unwrap();
        assert_eq!(a, b);
        for p in &a {
            assert_eq!(p.group, c.classify(p.strategy_awareness, p.time_awareness));
        }
    }
}
