//! The interactive elicitation loop as a resumable state machine.
//!
//! ```text
//! start ──► Querying ──► AwaitingChoice(O_t) ──choose──► Querying ... ──► Finalized(I*)
//! ```
//!
//! `Querying` is transient: it builds the next choice set (or finalises when
//! the budget is spent) inside the call that entered it. Posterior particles
//! are never stored; each round re-derives them from the dataset with a seed
//! that depends only on the session seed and the round number, so a session
//! reloaded from disk continues exactly as the original would have.

use serde::{Deserialize, Serialize};

use super::{candidate_pool, submod_choice, CandidateIntervention, ChoiceSet};
use crate::action::Intervention;
use crate::belief::{
    posterior_sample, prior_sample, ChoiceLikelihood, ChoiceRecord, ElicitationDataset, MixturePrior, ParticleSet,
    SamplerConfig,
};
use crate::efare::BooleanRule;
use crate::env::RecourseEnv;
use crate::error::{Error, Result};
use crate::generator::RecourseGenerator;
use crate::graph::ScmWeights;
use crate::schema::State;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    /// Number of questions `q`.
    pub budget: usize,
    /// Choice-set size `k`.
    pub set_size: usize,
    /// Logistic temperature used by the inference likelihood.
    pub temperature: f64,
    /// Failed candidates are padded by this multiple of the largest successful cost.
    pub failure_penalty: f64,
    /// Fraction of highest-likelihood particles averaged into `w_hat`.
    pub top_fraction: f64,
    pub sampler: SamplerConfig,
    /// Restart from `s0` once the accumulated intervention achieves recourse.
    pub reset_on_recourse: bool,
    pub seed: u64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            budget: 10,
            set_size: 2,
            temperature: 5.0,
            failure_penalty: 2.0,
            top_fraction: 0.1,
            sampler: SamplerConfig::default(),
            reset_on_recourse: true,
            seed: 0,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.set_size == 0 {
            return Err(Error::Config("set size k must be at least 1".into()));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(Error::Config("temperature must be finite and non-negative".into()));
        }
        if !(self.top_fraction > 0.0 && self.top_fraction <= 1.0) {
            return Err(Error::Config("top_fraction must lie in (0, 1]".into()));
        }
        if !(self.failure_penalty >= 0.0) {
            return Err(Error::Config("failure penalty must be non-negative".into()));
        }
        self.sampler.validate()
    }

    fn particle_count(&self) -> usize {
        let kept = self.sampler.steps - self.sampler.burn_in();
        kept.div_ceil(self.sampler.thin) * self.sampler.walkers
    }
}

/// Everything a session needs besides its own state. Shared and immutable.
#[derive(Clone, Copy)]
pub struct SessionContext<'a> {
    pub env: &'a RecourseEnv,
    pub prior: &'a MixturePrior,
    pub generator: &'a dyn RecourseGenerator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalResult {
    pub intervention: Intervention,
    pub success: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rules: Option<Vec<BooleanRule>>,
    /// Cost of the intervention under the final weight estimate.
    pub estimated_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "phase", rename_all = "snake_case")]
pub enum Phase {
    Querying,
    AwaitingChoice { set: ChoiceSet },
    Finalized { result: FinalResult },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRound {
    pub round: usize,
    pub state: State,
    pub items: Vec<CandidateIntervention>,
    pub chosen: Option<usize>,
    /// Weight estimate the candidates were generated under.
    pub w_hat: Vec<f64>,
}

/// Replayable record of a session: inputs plus every round and the result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub s0: State,
    pub config: SessionConfig,
    pub rounds: Vec<TranscriptRound>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<FinalResult>,
}

impl Transcript {
    pub fn choices(&self) -> Vec<usize> {
        self.rounds.iter().filter_map(|r| r.chosen).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub config: SessionConfig,
    pub s0: State,
    pub state: State,
    pub accumulated: Intervention,
    pub dataset: ElicitationDataset,
    pub round: usize,
    pub w_hat: ScmWeights,
    pub phase: Phase,
    pub history: Vec<TranscriptRound>,
}

fn round_seed(seed: u64, round: usize) -> u64 {
    // splitmix64 finaliser over (seed, round)
    let mut z = seed ^ (round as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Session {
    /// Creates a session and runs it to its first choice set (or straight to
    /// the final intervention when the budget is 0).
    pub fn start(ctx: SessionContext<'_>, s0: State, config: SessionConfig) -> Result<Self> {
        config.validate()?;
        ctx.env.problem.schema.validate(&s0)?;
        if ctx.prior.dim() != ctx.env.problem.m() {
            return Err(Error::WeightArity {
                expected: ctx.env.problem.m(),
                got: ctx.prior.dim(),
            });
        }
        let mut session = Self {
            w_hat: ctx.prior.mean(),
            state: s0.clone(),
            s0,
            accumulated: Vec::new(),
            dataset: Vec::new(),
            round: 0,
            phase: Phase::Querying,
            history: Vec::new(),
            config,
        };
        let particles = session.particles(ctx)?;
        session.advance(ctx, &particles)?;
        Ok(session)
    }

    /// Particles for the current dataset: prior draws while it is empty,
    /// posterior MCMC afterwards.
    pub fn particles(&self, ctx: SessionContext<'_>) -> Result<ParticleSet> {
        let seed = round_seed(self.config.seed, self.round);
        if self.dataset.is_empty() {
            return prior_sample(ctx.prior, self.config.particle_count(), seed);
        }
        let likelihood = ChoiceLikelihood::compile(
            &ctx.env.problem,
            &self.dataset,
            self.config.temperature,
            self.config.failure_penalty,
        )?;
        posterior_sample(ctx.prior, &likelihood, &self.config.sampler, seed)
    }

    pub fn current_set(&self) -> Option<&ChoiceSet> {
        match &self.phase {
            Phase::AwaitingChoice { set } => Some(set),
            _ => None,
        }
    }

    pub fn result(&self) -> Option<&FinalResult> {
        match &self.phase {
            Phase::Finalized { result } => Some(result),
            _ => None,
        }
    }

    pub fn is_finalized(&self) -> bool {
        matches!(self.phase, Phase::Finalized { .. })
    }

    /// From `Querying`: build the next set, or finalise.
    fn advance(&mut self, ctx: SessionContext<'_>, particles: &ParticleSet) -> Result<()> {
        debug_assert!(matches!(self.phase, Phase::Querying));
        if self.round >= self.config.budget {
            return self.finalize(ctx);
        }
        let pool = match candidate_pool(
            ctx.env,
            ctx.generator,
            &self.state,
            &self.w_hat,
            particles,
            self.config.failure_penalty,
        ) {
            Ok(pool) => pool,
            Err(Error::NoFeasibleAction) => {
                tracing::warn!(round = self.round, "no feasible action left; finalising early");
                return self.finalize(ctx);
            }
            Err(e) => return Err(e),
        };
        let set = submod_choice(pool, self.config.set_size)?;
        self.history.push(TranscriptRound {
            round: self.round,
            state: self.state.clone(),
            items: set.items.clone(),
            chosen: None,
            w_hat: self.w_hat.values().to_vec(),
        });
        self.phase = Phase::AwaitingChoice { set };
        Ok(())
    }

    /// Records the user's pick, updates the belief and moves on.
    pub fn choose(&mut self, ctx: SessionContext<'_>, index: usize) -> Result<()> {
        let set = match &self.phase {
            Phase::AwaitingChoice { set } => set,
            _ => return Err(Error::Session("no choice set is awaiting an answer".into())),
        };
        if index >= set.len() {
            return Err(Error::Session(format!(
                "choice {index} is outside a set of {} items",
                set.len()
            )));
        }
        let first = set.items[index].first;
        let record = ChoiceRecord::new(
            self.state.clone(),
            set.items.iter().map(CandidateIntervention::as_item).collect(),
            index,
        )?;
        self.dataset.push(record);
        if let Some(last) = self.history.last_mut() {
            last.chosen = Some(index);
        }
        self.accumulated.push(first);
        self.state = ctx.env.problem.apply(&self.accumulated, &self.s0)?;
        self.round += 1;
        self.phase = Phase::Querying;

        let particles = self.particles(ctx)?;
        self.w_hat = particles.point_estimate(self.config.top_fraction)?;

        if self.config.reset_on_recourse && ctx.env.achieves_recourse(&self.accumulated, &self.s0)? {
            self.accumulated.clear();
            self.state = self.s0.clone();
        }
        self.advance(ctx, &particles)
    }

    /// `delta(s0, w_hat)`: what the session would recommend right now.
    pub fn recommend(&self, ctx: SessionContext<'_>) -> Result<FinalResult> {
        let generated = match ctx.generator.generate(&self.s0, &self.w_hat, None) {
            Ok(g) => g,
            Err(Error::NoFeasibleAction) => crate::generator::Generated {
                intervention: Vec::new(),
                success: false,
                rules: None,
            },
            Err(e) => return Err(e),
        };
        let success = generated.success && ctx.env.reaches_favorable(&generated.intervention, &self.s0)?;
        let estimated_cost = ctx.env.cost(&generated.intervention, &self.s0, &self.w_hat)?;
        Ok(FinalResult {
            intervention: generated.intervention,
            success,
            rules: generated.rules,
            estimated_cost,
        })
    }

    fn finalize(&mut self, ctx: SessionContext<'_>) -> Result<()> {
        let result = self.recommend(ctx)?;
        self.phase = Phase::Finalized { result };
        Ok(())
    }

    pub fn transcript(&self) -> Transcript {
        Transcript {
            s0: self.s0.clone(),
            config: self.config.clone(),
            rounds: self.history.clone(),
            result: self.result().cloned(),
        }
    }
}

/// Re-runs a session from its transcript's inputs and recorded choices.
pub fn replay_session(ctx: SessionContext<'_>, transcript: &Transcript) -> Result<Session> {
    let mut session = Session::start(ctx, transcript.s0.clone(), transcript.config.clone())?;
    for choice in transcript.choices() {
        session.choose(ctx, choice)?;
    }
    Ok(session)
}
