//! Empirical switch-time distribution and its inverse-CDF sampler.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{EnvState, SimConfig, SimError, SlotKind};
use crate::domain::{InterventionAction, MetaGroup, TRAINING_LEN};
use crate::rng;

/// Sorted sample of switch times in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct EmpiricalDistribution {
    sorted: Vec<f64>,
}

impl EmpiricalDistribution {
    pub fn values(&self) -> &[f64] {
        &self.sorted
    }

    pub fn min(&self) -> f64 {
        self.sorted[0]
    }

    pub fn max(&self) -> f64 {
        self.sorted[self.sorted.len() - 1]
    }

    pub fn mean(&self) -> f64 {
        self.sorted.iter().sum::<f64>() / self.sorted.len() as f64
    }

    /// Inverse CDF with linear interpolation between order statistics:
    /// `u` in `[0, 1]` maps onto position `u × (n − 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        let n = self.sorted.len();
        if n == 1 {
            return self.sorted[0];
        }
        let pos = u.clamp(0.0, 1.0) * (n - 1) as f64;
        let i = (pos.floor() as usize).min(n - 2);
        let frac = pos - i as f64;
        let lo = self.sorted[i];
        let hi = self.sorted[i + 1];
        (lo + frac * (hi - lo)).clamp(lo, hi)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.random::<f64>())
    }
}

impl TryFrom<Vec<f64>> for EmpiricalDistribution {
    type Error = SimError;
    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        fit_switch_distribution(&v)
    }
}

impl From<EmpiricalDistribution> for Vec<f64> {
    fn from(d: EmpiricalDistribution) -> Vec<f64> {
        d.sorted
    }
}

pub fn fit_switch_distribution(times: &[f64]) -> Result<EmpiricalDistribution, SimError> {
    if times.is_empty() {
        return Err(SimError::EmptySample);
    }
    if let Some(&bad) = times.iter().find(|t| !(**t >= 0.0) || !t.is_finite()) {
        return Err(SimError::NegativeTime(bad));
    }
    let mut sorted = times.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(EmpiricalDistribution { sorted })
}

/// Switch times of simulated StrTime students on the unmodified tutor; the
/// nudge timer samples from this when no recorded times are supplied.
pub fn default_switch_distribution(
    config: &SimConfig,
    seed: u64,
) -> Result<EmpiricalDistribution, SimError> {
    const STUDENTS: usize = 200;
    config.validate()?;
    let config = Arc::new(config.clone());
    // Placeholder timer; NoIntervention never consults it.
    let unused = Arc::new(fit_switch_distribution(&[0.0])?);
    let mut times = Vec::new();
    for i in 0..STUDENTS {
        let id = format!("switch-ref-{i:04}");
        let mut r = rng::keyed_rng(seed, &id);
        let profile = super::sample_profile(id, MetaGroup::StrTime, &config, &mut r);
        let mut env = EnvState::new(
            profile,
            [SlotKind::Problem; TRAINING_LEN],
            Arc::clone(&config),
            Arc::clone(&unused),
            seed,
        );
        while !env.is_done() {
            env.step(InterventionAction::NoIntervention)?;
        }
        times.extend(env.history().iter().filter_map(|o| o.switch_time_s));
    }
    fit_switch_distribution(&times)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn point_mass() {
        let d = fit_switch_distribution(&[30.0]).unwrap();
        let mut r = rng::seeded(1);
        for _ in 0..100 {
            assert_eq!(d.sample(&mut r), 30.0);
        }
    }

    #[test]
    fn sorted_on_fit() {
        let d = fit_switch_distribution(&[30.0, 10.0, 20.0]).unwrap();
        assert_eq!(d.values(), &[10.0, 20.0, 30.0]);
    }

    #[test]
    fn interpolation_midpoint() {
        let d = fit_switch_distribution(&[0.0, 100.0]).unwrap();
        assert_eq!(d.quantile(0.5), 50.0);
        assert_eq!(d.quantile(0.0), 0.0);
        assert_eq!(d.quantile(1.0), 100.0);
    }

    #[test]
    fn bad_input() {
        assert_eq!(fit_switch_distribution(&[]), Err(SimError::EmptySample));
        assert!(matches!(
            fit_switch_distribution(&[3.0, -1.0]),
            Err(SimError::NegativeTime(_))
        ));
        assert!(fit_switch_distribution(&[f64::NAN]).is_err());
    }

    #[test]
    fn sample_mean_three_points() {
        let d = fit_switch_distribution(&[10.0, 20.0, 30.0]).unwrap();
        let mut r = rng::seeded(99);
        let draws: Vec<f64> = (0..10_000).map(|_| d.sample(&mut r)).collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        assert!((mean - 20.0).abs() <= 1.0, "mean {mean}");
        assert!(draws.iter().all(|v| (10.0..=30.0).contains(v)));
    }

    #[test]
    fn default_distribution_is_early() {
        let c = SimConfig::default();
        let d = default_switch_distribution(&c, 5).unwrap();
        // 200 StrTime students switch on the 16 problems of levels 2-5.
        assert_eq!(d.values().len(), 200 * 16);
        assert!(d.min() > 0.0);
        assert_eq!(d, default_switch_distribution(&c, 5).unwrap());
    }

    proptest! {
        #[test]
        fn samples_stay_in_support(
            times in proptest::collection::vec(0.0f64..1e4, 1..40),
            seed in any::<u64>(),
        ) {
            let d = fit_switch_distribution(&times).unwrap();
            let mut r = rng::seeded(seed);
            for _ in 0..50 {
                let v = d.sample(&mut r);
                prop_assert!(v >= d.min() && v <= d.max());
            }
        }
    }
}
