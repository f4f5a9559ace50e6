//! Deployed policy: network, input standardization, masked action choice and
//! the model file format.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::mlp::{Layer, Mlp};
use super::{masked_argmax, DeepQError, MaskRule};
use crate::domain::{ActionMask, FeatureVector, InterventionAction, N_ACTIONS};

const FORMAT: &str = "metatutor-policy";
const VERSION: u32 = 1;
const MIN_SD: f64 = 1e-8;

/// Per-feature `(x − mean) / sd`, with `sd` clamped to at least `1e-8`.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    mean: Vec<f64>,
    sd: Vec<f64>,
}

impl Standardizer {
    /// Fits population mean and sd over `rows`, all of width `dim`.
    pub fn fit<'a>(rows: impl Iterator<Item = &'a [f64]> + Clone, dim: usize) -> Self {
        let mut n = 0usize;
        let mut mean = vec![0.0; dim];
        for r in rows.clone() {
            n += 1;
            for (m, x) in mean.iter_mut().zip(r) {
                *m += x;
            }
        }
        let nf = n.max(1) as f64;
        mean.iter_mut().for_each(|m| *m /= nf);
        let mut var = vec![0.0; dim];
        for r in rows {
            for ((v, x), m) in var.iter_mut().zip(r).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let sd = var.iter().map(|v| (v / nf).sqrt().max(MIN_SD)).collect();
        Standardizer { mean, sd }
    }

    pub fn identity(dim: usize) -> Self {
        Standardizer {
            mean: vec![0.0; dim],
            sd: vec![1.0; dim],
        }
    }

    pub fn new(mean: Vec<f64>, sd: Vec<f64>) -> Result<Self, DeepQError> {
        if mean.len() != sd.len() {
            return Err(DeepQError::Shape("mean and sd lengths differ".into()));
        }
        if !mean.iter().all(|m| m.is_finite()) || !sd.iter().all(|s| s.is_finite() && *s > 0.0) {
            return Err(DeepQError::Shape(
                "standardization must be finite with sd > 0".into(),
            ));
        }
        Ok(Standardizer {
            mean,
            sd: sd.into_iter().map(|s| s.max(MIN_SD)).collect(),
        })
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn sd(&self) -> &[f64] {
        &self.sd
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.sd)
            .map(|((x, m), s)| (x - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    net: Mlp,
    standardizer: Standardizer,
    mask_rule: MaskRule,
}

#[derive(Serialize, Deserialize)]
struct PolicyFile {
    format: String,
    version: u32,
    layer_sizes: Vec<usize>,
    layers: Vec<Layer>,
    feature_mean: Vec<f64>,
    feature_sd: Vec<f64>,
    /// Action token for each output index.
    actions: Vec<InterventionAction>,
    mask_rule: MaskRule,
}

impl Policy {
    pub fn new(
        net: Mlp,
        standardizer: Standardizer,
        mask_rule: MaskRule,
    ) -> Result<Self, DeepQError> {
        if net.output_dim() != N_ACTIONS {
            return Err(DeepQError::Shape(format!(
                "policy network must have {N_ACTIONS} outputs, has {}",
                net.output_dim()
            )));
        }
        if standardizer.mean.len() != net.input_dim() {
            return Err(DeepQError::Shape(format!(
                "standardization width {} does not match network input {}",
                standardizer.mean.len(),
                net.input_dim()
            )));
        }
        Ok(Policy {
            net,
            standardizer,
            mask_rule,
        })
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn standardizer(&self) -> &Standardizer {
        &self.standardizer
    }

    pub fn mask_rule(&self) -> &MaskRule {
        &self.mask_rule
    }

    pub fn input_dim(&self) -> usize {
        self.net.input_dim()
    }

    /// Action values for a raw (unstandardized) state.
    pub fn q_values(&self, state: &FeatureVector) -> Result<[f64; N_ACTIONS], DeepQError> {
        if state.len() != self.input_dim() {
            return Err(DeepQError::Dimension {
                expected: self.input_dim(),
                found: state.len(),
            });
        }
        let q = self
            .net
            .forward(&self.standardizer.apply(state.as_slice()))?;
        Ok([q[0], q[1], q[2]])
    }

    pub fn save<W: Write>(&self, mut w: W) -> Result<(), DeepQError> {
        let file = PolicyFile {
            format: FORMAT.into(),
            version: VERSION,
            layer_sizes: self.net.sizes().to_vec(),
            layers: self.net.layers().to_vec(),
            feature_mean: self.standardizer.mean.clone(),
            feature_sd: self.standardizer.sd.clone(),
            actions: InterventionAction::ALL.to_vec(),
            mask_rule: self.mask_rule.clone(),
        };
        serde_json::to_writer(&mut w, &file)?;
        w.write_all(b"\n")?;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut buf = Vec::new();
        self.save(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }

    pub fn load<R: Read>(r: R) -> Result<Policy, DeepQError> {
        let f: PolicyFile = serde_json::from_reader(r)?;
        if f.format != FORMAT {
            return Err(DeepQError::Format(format!(
                "unknown format tag {:?}",
                f.format
            )));
        }
        if f.version != VERSION {
            return Err(DeepQError::Format(format!(
                "version {} is not supported (expected {VERSION})",
                f.version
            )));
        }
        if f.actions != InterventionAction::ALL {
            return Err(DeepQError::Format(
                "action table does not match none/nudge/present".into(),
            ));
        }
        let net = Mlp::from_layers(f.layer_sizes, f.layers)?;
        Policy::new(
            net,
            Standardizer::new(f.feature_mean, f.feature_sd)?,
            f.mask_rule,
        )
    }
}

/// Highest-valued action allowed by `mask`; ties go to the lowest code.
pub fn select_action(
    policy: &Policy,
    state: &FeatureVector,
    mask: ActionMask,
) -> Result<InterventionAction, DeepQError> {
    if !mask.any() {
        return Err(DeepQError::EmptyMask);
    }
    let q = policy.q_values(state)?;
    let a = masked_argmax(&q, mask)?;
    Ok(InterventionAction::ALL[a])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    /// Identity-standardized 3→3 linear policy returning its input.
    fn echo_policy() -> Policy {
        let mut w = vec![0.0; 9];
        for i in 0..3 {
            w[i * 3 + i] = 1.0;
        }
        let net = Mlp::from_layers(
            vec![3, 3],
            vec![Layer {
                weights: w,
                biases: vec![0.0; 3],
            }],
        )
        .unwrap();
        Policy::new(net, Standardizer::identity(3), MaskRule::None).unwrap()
    }

    fn fv(v: &[f64]) -> FeatureVector {
        FeatureVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn argmax_and_masking() {
        use InterventionAction::*;
        let p = echo_policy();
        assert_eq!(
            select_action(&p, &fv(&[0.2, 0.9, 0.5]), ActionMask::ALL).unwrap(),
            Nudge
        );
        assert_eq!(
            select_action(&p, &fv(&[0.7, 0.9, 0.5]), ActionMask([true, false, true])).unwrap(),
            NoIntervention
        );
        assert_eq!(
            select_action(&p, &fv(&[0.1, 0.9, 5.0]), ActionMask::ONLY_NONE).unwrap(),
            NoIntervention
        );
        assert_eq!(
            select_action(&p, &fv(&[1.0, 1.0, 1.0]), ActionMask::ALL).unwrap(),
            NoIntervention
        );
        assert!(matches!(
            select_action(&p, &fv(&[1.0, 1.0, 1.0]), ActionMask([false; 3])),
            Err(DeepQError::EmptyMask)
        ));
    }

    fn random_policy(seed: u64, dim: usize) -> Policy {
        let mut r = rng::seeded(seed);
        let net = Mlp::he_uniform(&[dim, 16, 16, 3], &mut r).unwrap();
        let mean = (0..dim).map(|_| r.random_range(-1.0..1.0)).collect();
        let sd = (0..dim).map(|_| r.random_range(0.1..3.0)).collect();
        Policy::new(
            net,
            Standardizer::new(mean, sd).unwrap(),
            MaskRule::TutorSlots,
        )
        .unwrap()
    }

    #[test]
    fn file_round_trip_is_bit_exact() {
        let p = random_policy(5, 152);
        let q = Policy::load(p.to_json().as_bytes()).unwrap();
        assert_eq!(p, q);
        let mut r = rng::seeded(6);
        for _ in 0..100 {
            let x = fv(&(0..152)
                .map(|_| r.random_range(-5.0..5.0))
                .collect::<Vec<_>>());
            let (a, b) = (p.q_values(&x).unwrap(), q.q_values(&x).unwrap());
            assert_eq!(a.map(f64::to_bits), b.map(f64::to_bits));
        }
    }

    #[test]
    fn truncated_or_foreign_files_rejected() {
        let text = random_policy(1, 8).to_json();
        assert!(Policy::load(&text.as_bytes()[..text.len() / 2]).is_err());
        let bumped = text.replace("\"version\":1", "\"version\":2");
        assert!(matches!(
            Policy::load(bumped.as_bytes()),
            Err(DeepQError::Format(_))
        ));
    }

    #[test]
    fn narrower_policy_rejects_wider_state() {
        let p = random_policy(2, 151);
        let q = Policy::load(p.to_json().as_bytes()).unwrap();
        assert!(matches!(
            q.q_values(&FeatureVector::zeros(152)),
            Err(DeepQError::Dimension {
                expected: 151,
                found: 152
            })
        ));
    }

    #[test]
    fn corrupted_dimensions_rejected() {
        let text = random_policy(3, 4).to_json();
        let broken = text.replacen("\"layer_sizes\":[4,", "\"layer_sizes\":[5,", 1);
        assert!(Policy::load(broken.as_bytes()).is_err());
    }

    #[test]
    fn standardizer_clamps_constant_columns() {
        let rows = [vec![1.0, 2.0], vec![1.0, 4.0]];
        let s = Standardizer::fit(rows.iter().map(|r| r.as_slice()), 2);
        assert_eq!(s.mean(), &[1.0, 3.0]);
        assert_eq!(s.sd(), &[1e-8, 1.0]);
        assert_eq!(s.apply(&[1.0, 5.0]), vec![0.0, 2.0]);
    }
}
