//! Self-play training of the policy from search visit counts.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mcts::{mcts_plan, MoveRecord};
use super::policy::{Adam, PolicyExample, PolicyModel};
use super::GeneratorConfig;
use crate::belief::MixturePrior;
use crate::env::RecourseEnv;
use crate::error::{Error, Result};
use crate::schema::State;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRow {
    pub epoch: usize,
    /// Mean minibatch cross-entropy during this epoch's fitting passes.
    pub loss: f64,
    /// Fraction of this epoch's episodes that reached recourse.
    pub validity: f64,
    pub examples: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub rows: Vec<TrainingRow>,
}

impl TrainingLog {
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn example_from(model: &PolicyModel, record: &MoveRecord, w: &[f64]) -> Option<PolicyExample> {
    let total: u32 = record.visits.iter().map(|(_, n)| n).sum();
    if total == 0 {
        return None;
    }
    let mut target_f = vec![0.0; model.functions()];
    let mut target_x = vec![0.0; model.bins()];
    for (a, n) in &record.visits {
        let p = *n as f64 / total as f64;
        target_f[a.function] += p;
        target_x[a.arg] += p;
    }
    Some(PolicyExample {
        input: model.encode_input(&record.state, w),
        target_f,
        target_x,
    })
}

fn fit_passes<R: Rng + ?Sized>(
    model: &mut PolicyModel,
    adam: &mut Adam,
    examples: &[&PolicyExample],
    passes: usize,
    batch_size: usize,
    rng: &mut R,
) -> Vec<f64> {
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut grad = vec![0.0; model.parameters().len()];
    let mut per_pass = Vec::with_capacity(passes);
    for _ in 0..passes {
        order.shuffle(rng);
        let mut loss = 0.0;
        for batch in order.chunks(batch_size.max(1)) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for &i in batch {
                loss += model.accumulate_gradient(examples[i], &mut grad);
            }
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            adam.step(model.params_mut(), &grad);
        }
        per_pass.push(loss / examples.len().max(1) as f64);
    }
    per_pass
}

/// Supervised fit on a fixed example set; returns the mean loss of each pass.
pub fn fit_policy(
    model: &mut PolicyModel,
    examples: &[PolicyExample],
    passes: usize,
    batch_size: usize,
    learning_rate: f64,
    seed: u64,
) -> Vec<f64> {
    let mut adam = Adam::new(model.parameters().len(), learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let refs: Vec<&PolicyExample> = examples.iter().collect();
    fit_passes(model, &mut adam, &refs, passes, batch_size, &mut rng)
}

/// AlphaZero-style loop: plan with the current policy on sampled `(s, w)`
/// pairs, keep root visit distributions of successful episodes in a replay
/// buffer, and fit both heads to them by cross-entropy.
///
/// Epochs without any successful episode are logged and skipped, never fatal.
pub fn train_wfare(
    env: &RecourseEnv,
    train_states: &[State],
    weights: &MixturePrior,
    cfg: &GeneratorConfig,
    seed: u64,
) -> Result<(PolicyModel, TrainingLog)> {
    cfg.validate()?;
    let pool: Vec<&State> = train_states.iter().filter(|s| !env.is_favorable(s)).collect();
    if pool.is_empty() {
        return Err(Error::Empty("training set of unfavorable states"));
    }
    if weights.dim() != env.problem.m() {
        return Err(Error::WeightArity {
            expected: env.problem.m(),
            got: weights.dim(),
        });
    }
    let mut model = PolicyModel::new(&env.problem, cfg.hidden, seed)?;
    let mut log = TrainingLog::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let mut adam = Adam::new(model.parameters().len(), cfg.learning_rate);
    let mut buffer: VecDeque<PolicyExample> = VecDeque::with_capacity(cfg.replay_capacity);

    for epoch in 0..cfg.epochs {
        let mut successes = 0usize;
        for _ in 0..cfg.episodes_per_epoch {
            let s = pool[rng.random_range(0..pool.len())];
            let w = weights.sample(&mut rng).1;
            let episode_cfg = GeneratorConfig {
                rollout_seed: rng.random(),
                root_noise: cfg.training_root_noise,
                ..cfg.clone()
            };
            let out = mcts_plan(env, s, &w, &model, &episode_cfg, None)?;
            if !out.success {
                continue;
            }
            successes += 1;
            for record in &out.moves {
                if let Some(ex) = example_from(&model, record, w.values()) {
                    if buffer.len() == cfg.replay_capacity.max(1) {
                        buffer.pop_front();
                    }
                    buffer.push_back(ex);
                }
            }
        }
        let validity = successes as f64 / cfg.episodes_per_epoch.max(1) as f64;
        let loss = if buffer.is_empty() {
            tracing::warn!(epoch, "no successful episodes yet; skipping fit");
            f64::NAN
        } else {
            let refs: Vec<&PolicyExample> = buffer.iter().collect();
            let losses = fit_passes(&mut model, &mut adam, &refs, cfg.fit_passes, cfg.batch_size, &mut rng);
            losses.iter().sum::<f64>() / losses.len().max(1) as f64
        };
        tracing::info!(epoch, loss, validity, examples = buffer.len(), "training epoch");
        log.rows.push(TrainingRow {
            epoch,
            loss,
            validity,
            examples: buffer.len(),
        });
    }
    Ok((model, log))
}
