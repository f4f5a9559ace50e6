//! Offline Double-DQN training over a replay corpus.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::mlp::{Mlp, Workspace};
use super::policy::{Policy, Standardizer};
use super::{masked_argmax, DeepQError, MaskRule};
use crate::domain::{split_corpus, ActionMask, ReplayCorpus, TransitionRecord, N_ACTIONS};
use crate::{exec, rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub gamma: f64,
    pub batch_size: usize,
    /// Hard-copy the main network into the target network every this many
    /// gradient updates.
    pub sync_every: usize,
    pub epochs: usize,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub hidden: Vec<usize>,
    /// Share of students used for training; the rest measure held-out loss.
    pub train_fraction: f64,
    /// Mask applied to the successor-state argmax.
    pub mask: MaskRule,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            gamma: 0.9,
            batch_size: 32,
            sync_every: 4,
            epochs: 2000,
            seed: 0,
            optimizer: OptimizerKind::Adam,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            hidden: vec![16, 16],
            train_fraction: 0.8,
            mask: MaskRule::TutorSlots,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), DeepQError> {
        let bad = |m: &str| Err(DeepQError::Config(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be > 0");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1");
        }
        if self.sync_every == 0 {
            return bad("sync_every must be >= 1");
        }
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return bad("train_fraction must lie in (0, 1]");
        }
        if self.hidden.contains(&0) {
            return bad("hidden layer widths must be >= 1");
        }
        Ok(())
    }

    fn layer_sizes(&self, input: usize) -> Vec<usize> {
        let mut s = vec![input];
        s.extend(&self.hidden);
        s.push(N_ACTIONS);
        s
    }
}

/// Double-DQN target. A terminal record yields its reward; otherwise the main
/// network picks the successor action (within `mask`, ties to the lowest
/// code) and the target network scores it:
/// `r + γ · Q_target(s′, argmax_a Q_main(s′, a))`.
pub fn ddqn_target(
    record: &TransitionRecord,
    successor: Option<&[f64]>,
    mask: ActionMask,
    main: &Mlp,
    target: &Mlp,
    gamma: f64,
) -> Result<f64, DeepQError> {
    let r = record.reward.value();
    match (record.done, successor) {
        (true, _) => Ok(r),
        (false, None) => Err(DeepQError::MissingSuccessor {
            student: record.student_id.clone(),
            position: record.position,
        }),
        (false, Some(next)) => bootstrap(r, next, mask, main, target, gamma),
    }
}

fn bootstrap(
    r: f64,
    next: &[f64],
    mask: ActionMask,
    main: &Mlp,
    target: &Mlp,
    gamma: f64,
) -> Result<f64, DeepQError> {
    if gamma == 0.0 {
        return Ok(r);
    }
    let a = masked_argmax(&main.forward(next)?, mask)?;
    Ok(r + gamma * target.forward(next)?[a])
}

/// A corpus record prepared for training: standardized state, taken action,
/// reward, and the standardized successor with its mask (absent when done).
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next: Option<(Vec<f64>, ActionMask)>,
}

fn prepare(
    corpus: &ReplayCorpus,
    std: &Standardizer,
    rule: &MaskRule,
) -> Result<Vec<Transition>, DeepQError> {
    corpus
        .records()
        .iter()
        .enumerate()
        .map(|(i, rec)| {
            let next = if rec.done {
                None
            } else {
                let s = corpus
                    .successor(i)
                    .ok_or_else(|| DeepQError::MissingSuccessor {
                        student: rec.student_id.clone(),
                        position: rec.position,
                    })?;
                Some((std.apply(s.state.as_slice()), rule.mask_for(s.position)))
            };
            Ok(Transition {
                state: std.apply(rec.state.as_slice()),
                action: rec.action.index(),
                reward: rec.reward.value(),
                next,
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
struct Adam {
    m: Mlp,
    v: Mlp,
    t: i32,
}

/// Main and target networks plus optimizer state.
#[derive(Debug, Clone)]
pub struct Trainer {
    main: Mlp,
    target: Mlp,
    config: TrainConfig,
    adam: Option<Adam>,
    updates: u64,
}

impl Trainer {
    /// Starts from `main`; the target network begins as an exact copy.
    pub fn new(main: Mlp, config: TrainConfig) -> Result<Self, DeepQError> {
        config.validate()?;
        let adam = match config.optimizer {
            OptimizerKind::Adam => Some(Adam {
                m: Mlp::zeros(main.sizes())?,
                v: Mlp::zeros(main.sizes())?,
                t: 0,
            }),
            OptimizerKind::Sgd => None,
        };
        Ok(Trainer {
            target: main.clone(),
            main,
            config,
            adam,
            updates: 0,
        })
    }

    pub fn main(&self) -> &Mlp {
        &self.main
    }

    pub fn target(&self) -> &Mlp {
        &self.target
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    fn check(&self, t: &Transition) -> Result<(), DeepQError> {
        let dim = self.main.input_dim();
        for len in std::iter::once(t.state.len()).chain(t.next.iter().map(|(n, _)| n.len())) {
            if len != dim {
                return Err(DeepQError::Dimension {
                    expected: dim,
                    found: len,
                });
            }
        }
        if t.action >= self.main.output_dim() {
            return Err(DeepQError::Shape(format!("action index {}", t.action)));
        }
        Ok(())
    }

    /// Double-DQN regression target of a checked transition.
    fn target_for(&self, t: &Transition, ws: &mut Workspace) -> Result<f64, DeepQError> {
        match &t.next {
            Some((next, mask)) if self.config.gamma != 0.0 => {
                let a = masked_argmax(self.main.forward_in(next, ws), *mask)?;
                Ok(t.reward + self.config.gamma * self.target.forward_in(next, ws)[a])
            }
            _ => Ok(t.reward),
        }
    }

    /// Mean squared TD error over `batch` with the current networks. Chunks
    /// are fixed-size and summed in order, so the value does not depend on
    /// the worker count.
    pub fn evaluate(&self, batch: &[Transition]) -> Result<f64, DeepQError> {
        const CHUNK: usize = 256;
        let partial = exec::map_range(batch.len().div_ceil(CHUNK), |c| {
            let mut ws = Workspace::default();
            let mut sum = 0.0;
            for t in &batch[c * CHUNK..((c + 1) * CHUNK).min(batch.len())] {
                self.check(t)?;
                let y = self.target_for(t, &mut ws)?;
                let err = self.main.forward_in(&t.state, &mut ws)[t.action] - y;
                sum += err * err;
            }
            Ok::<_, DeepQError>(sum)
        });
        let mut total = 0.0;
        for p in partial {
            total += p?;
        }
        Ok(total / batch.len().max(1) as f64)
    }

    /// One gradient update of the main network on `batch`; returns the loss
    /// before the update. The target network is re-synced every
    /// `sync_every` updates.
    pub fn train_step(&mut self, batch: &[&Transition]) -> Result<f64, DeepQError> {
        if batch.is_empty() {
            return Err(DeepQError::EmptyBatch);
        }
        let mut ws = Workspace::default();
        let mut targets = Vec::with_capacity(batch.len());
        for t in batch {
            self.check(t)?;
            targets.push(self.target_for(t, &mut ws)?);
        }
        let items = batch
            .iter()
            .zip(&targets)
            .map(|(t, y)| (t.state.as_slice(), t.action, *y));
        let (loss, grad) = self.main.loss_and_grad_on(items, batch.len(), &mut ws);
        let lr = self.config.learning_rate;
        match &mut self.adam {
            None => {
                for (p, g) in self.main.param_slices_mut().zip(grad.param_slices()) {
                    for (pi, gi) in p.iter_mut().zip(g) {
                        *pi -= lr * gi;
                    }
                }
            }
            Some(adam) => {
                let (b1, b2, eps) = (
                    self.config.adam_beta1,
                    self.config.adam_beta2,
                    self.config.adam_epsilon,
                );
                adam.t += 1;
                let c1 = 1.0 - b1.powi(adam.t);
                let c2 = 1.0 - b2.powi(adam.t);
                let params = self.main.param_slices_mut();
                let moments = adam.m.param_slices_mut().zip(adam.v.param_slices_mut());
                for ((p, g), (m, v)) in params.zip(grad.param_slices()).zip(moments) {
                    for k in 0..p.len() {
                        m[k] = b1 * m[k] + (1.0 - b1) * g[k];
                        v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
                        p[k] -= lr * (m[k] / c1) / ((v[k] / c2).sqrt() + eps);
                    }
                }
            }
        }
        self.updates += 1;
        if self.updates.is_multiple_of(self.config.sync_every as u64) {
            self.target = self.main.clone();
        }
        Ok(loss)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    /// Mean of the minibatch losses seen during the epoch.
    pub train_mse: f64,
    /// Full-pass loss on the held-out students after the epoch.
    pub held_out_mse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub train_students: usize,
    pub held_out_students: usize,
    pub updates: u64,
    pub epochs: Vec<EpochLoss>,
    /// Epoch (1-based) with the lowest held-out loss, or the lowest full-pass
    /// training loss when no students were held out.
    pub best_epoch: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Network after the full epoch budget.
    pub policy: Policy,
    /// Network at [`TrainReport::best_epoch`]: the lowest-loss model, which
    /// is the one to deploy. With a constant Adam step the final network keeps
    /// jittering around the fixed point.
    pub best_policy: Policy,
    pub report: TrainReport,
}

/// Splits the corpus by student, fits standardization on the training side,
/// and runs `epochs` passes of shuffled minibatch Double-DQN updates.
pub fn train(corpus: &ReplayCorpus, config: &TrainConfig) -> Result<TrainOutcome, DeepQError> {
    config.validate()?;
    let dim = match corpus.feature_dim() {
        Some(d) if !corpus.is_empty() => d,
        _ => return Err(DeepQError::EmptyCorpus),
    };
    let (train_set, held_out) = if config.train_fraction < 1.0 && corpus.n_students() > 1 {
        split_corpus(corpus, config.train_fraction, config.seed)?
    } else {
        (corpus.clone(), ReplayCorpus::default())
    };
    if train_set.is_empty() {
        return Err(DeepQError::EmptyCorpus);
    }
    let std = Standardizer::fit(train_set.records().iter().map(|r| r.state.as_slice()), dim);
    let train_data = prepare(&train_set, &std, &config.mask)?;
    let test_data = prepare(&held_out, &std, &config.mask)?;

    let init = Mlp::he_uniform(
        &config.layer_sizes(dim),
        &mut rng::stream_rng(config.seed, 0),
    )?;
    let mut trainer = Trainer::new(init, config.clone())?;
    let mut shuffle_rng = rng::stream_rng(config.seed, 1);
    let mut order: Vec<usize> = (0..train_data.len()).collect();

    let mut epochs = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, Mlp)> = None;
    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut sum = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&Transition> = chunk.iter().map(|&i| &train_data[i]).collect();
            sum += trainer.train_step(&batch)?;
            batches += 1;
        }
        let train_mse = sum / batches as f64;
        let held_out_mse = if test_data.is_empty() {
            None
        } else {
            Some(trainer.evaluate(&test_data)?)
        };
        if !train_mse.is_finite() || held_out_mse.is_some_and(|l| !l.is_finite()) {
            return Err(DeepQError::Diverged { epoch });
        }
        let score = match held_out_mse {
            Some(l) => l,
            None => trainer.evaluate(&train_data)?,
        };
        if best.as_ref().is_none_or(|(b, _, _)| score < *b) {
            best = Some((score, epoch, trainer.main().clone()));
        }
        epochs.push(EpochLoss {
            epoch,
            train_mse,
            held_out_mse,
        });
    }

    let report = TrainReport {
        train_students: train_set.n_students(),
        held_out_students: held_out.n_students(),
        updates: trainer.updates(),
        epochs,
        best_epoch: best.as_ref().map(|b| b.1),
    };
    let best_net = best.map_or_else(|| trainer.main().clone(), |b| b.2);
    Ok(TrainOutcome {
        policy: Policy::new(trainer.main().clone(), std.clone(), config.mask.clone())?,
        best_policy: Policy::new(best_net, std, config.mask.clone())?,
        report,
    })
}
