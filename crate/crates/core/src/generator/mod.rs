//! Cost-aware recourse generators.
//!
//! Every generator implements [`RecourseGenerator`], the `delta(s, w | a)`
//! interface used by the elicitation loop: given a state, a weight estimate
//! and optionally a forced first action, return a candidate intervention.

mod mcts;
mod policy;
mod train;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::action::{Action, Intervention};
use crate::efare::BooleanRule;
use crate::env::RecourseEnv;
use crate::error::{Error, Result};
use crate::graph::ScmWeights;
use crate::schema::State;
use crate::search::exhaustive_search;

pub use mcts::{mcts_plan, MoveRecord, PlanOutcome};
pub use policy::{PolicyExample, PolicyModel};
pub use train::{fit_policy, train_wfare, TrainingLog, TrainingRow};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generated {
    pub intervention: Intervention,
    /// The intervention ends in a favorable state.
    pub success: bool,
    /// One rule per action, for generators that explain themselves.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rules: Option<Vec<BooleanRule>>,
}

pub trait RecourseGenerator: Send + Sync {
    fn generate(&self, s: &State, w: &ScmWeights, forced_first: Option<Action>) -> Result<Generated>;

    fn name(&self) -> &'static str;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub max_horizon: usize,
    pub simulations: usize,
    /// Base of the cost-penalised reward `penalty_base^C(I|w)`.
    pub penalty_base: f64,
    pub c_puct: f64,
    /// Ablation: reward `penalty_base^|I|` instead of the cost-aware reward.
    pub length_reward: bool,
    pub rollout_seed: u64,
    /// Weight of Dirichlet noise mixed into root priors before each move.
    /// Zero at inference; training episodes use `training_root_noise`.
    pub root_noise: f64,
    pub training_root_noise: f64,
    pub dirichlet_alpha: f64,
    pub hidden: usize,
    pub epochs: usize,
    pub episodes_per_epoch: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub fit_passes: usize,
    pub replay_capacity: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            max_horizon: 6,
            simulations: 200,
            penalty_base: 0.8,
            c_puct: 1.0,
            length_reward: false,
            rollout_seed: 0,
            root_noise: 0.0,
            training_root_noise: 0.25,
            dirichlet_alpha: 0.3,
            hidden: 32,
            epochs: 20,
            episodes_per_epoch: 32,
            batch_size: 32,
            learning_rate: 0.01,
            fit_passes: 4,
            replay_capacity: 4096,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_horizon == 0 || self.simulations == 0 {
            return Err(Error::Config("horizon and simulations must be positive".into()));
        }
        if !(self.penalty_base > 0.0 && self.penalty_base < 1.0) {
            return Err(Error::Config("penalty base must lie strictly inside (0, 1)".into()));
        }
        if !(self.c_puct > 0.0) {
            return Err(Error::Config("c_puct must be positive".into()));
        }
        for noise in [self.root_noise, self.training_root_noise] {
            if !(0.0..=1.0).contains(&noise) {
                return Err(Error::Config("root noise weights must lie in [0, 1]".into()));
            }
        }
        if !(self.dirichlet_alpha > 0.0) {
            return Err(Error::Config("Dirichlet concentration must be positive".into()));
        }
        Ok(())
    }

    pub(crate) fn terminal_reward(&self, cost: f64, len: usize) -> f64 {
        if self.length_reward {
            self.penalty_base.powi(len as i32)
        } else {
            self.penalty_base.powf(cost)
        }
    }
}

/// `r = penalty_base^C(I|w)` when `I` achieves recourse from `s0`, else 0.
pub fn reward(env: &RecourseEnv, intervention: &[Action], s0: &State, w: &ScmWeights, penalty_base: f64) -> Result<f64> {
    if !env.achieves_recourse(intervention, s0)? {
        return Ok(0.0);
    }
    Ok(penalty_base.powf(env.cost(intervention, s0, w)?))
}

/// W-FARE: MCTS guided by a learned policy and the cost-aware reward.
#[derive(Debug, Clone)]
pub struct WfareGenerator {
    pub env: Arc<RecourseEnv>,
    pub policy: Arc<PolicyModel>,
    pub config: GeneratorConfig,
}

impl WfareGenerator {
    pub fn new(env: Arc<RecourseEnv>, policy: Arc<PolicyModel>, config: GeneratorConfig) -> Self {
        Self { env, policy, config }
    }
}

impl RecourseGenerator for WfareGenerator {
    fn generate(&self, s: &State, w: &ScmWeights, forced_first: Option<Action>) -> Result<Generated> {
        let out = mcts_plan(&self.env, s, w, &self.policy, &self.config, forced_first)?;
        Ok(Generated {
            intervention: out.intervention,
            success: out.success,
            rules: None,
        })
    }

    fn name(&self) -> &'static str {
        "wfare"
    }
}

/// Brute-force optimal generator; only practical on desk-scale problems.
#[derive(Debug, Clone)]
pub struct ExhaustiveGenerator {
    pub env: Arc<RecourseEnv>,
    pub max_len: usize,
}

impl RecourseGenerator for ExhaustiveGenerator {
    fn generate(&self, s: &State, w: &ScmWeights, forced_first: Option<Action>) -> Result<Generated> {
        let outcome = exhaustive_search(&self.env, s, w, self.max_len, forced_first)?;
        match outcome.best {
            Some(best) => Ok(Generated {
                intervention: best.intervention,
                success: true,
                rules: None,
            }),
            None => Ok(Generated {
                intervention: forced_first.into_iter().collect(),
                success: false,
                rules: None,
            }),
        }
    }

    fn name(&self) -> &'static str {
        "exhaustive"
    }
}
