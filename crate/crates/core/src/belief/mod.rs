//! Beliefs over SCM weights: mixture prior, choice likelihood, posterior
//! particles and the expected costs derived from them.

mod likelihood;
mod prior;
mod sampler;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::action::Action;
use crate::error::{Error, Result};
use crate::graph::ScmWeights;
use crate::problem::RecourseProblem;
use crate::schema::State;

pub use likelihood::{
    choice_log_likelihood, logistic_probabilities, penalize_failures, ChoiceItem, ChoiceLikelihood, ChoiceRecord,
    CompiledRecord, ElicitationDataset,
};
pub use prior::{Covariance, MixtureComponent, MixturePrior};
pub use sampler::{run_ensemble, EnsembleMove, SamplerConfig, SamplerDiagnostics};

/// Weighted posterior samples over `w`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleSet {
    particles: Vec<ScmWeights>,
    log_likelihoods: Vec<f64>,
    pub diagnostics: SamplerDiagnostics,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    /// Plain Monte Carlo mean over particles.
    #[default]
    Uniform,
    /// Self-normalised importance weights `exp(loglik)`.
    LikelihoodWeighted,
}

impl ParticleSet {
    pub fn new(particles: Vec<ScmWeights>, log_likelihoods: Vec<f64>) -> Result<Self> {
        if particles.is_empty() {
            return Err(Error::Empty("particle set"));
        }
        if particles.len() != log_likelihoods.len() {
            return Err(Error::Config("one log-likelihood per particle is required".into()));
        }
        let m = particles[0].len();
        if particles.iter().any(|p| p.len() != m) {
            return Err(Error::Config("particles have inconsistent lengths".into()));
        }
        if log_likelihoods.iter().any(|l| l.is_nan() || *l == f64::INFINITY) {
            return Err(Error::NonFinite("log-likelihoods"));
        }
        Ok(Self {
            particles,
            log_likelihoods,
            diagnostics: SamplerDiagnostics::default(),
        })
    }

    pub fn from_weights(particles: Vec<ScmWeights>) -> Result<Self> {
        let n = particles.len();
        Self::new(particles, vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.particles[0].len()
    }

    pub fn particles(&self) -> &[ScmWeights] {
        &self.particles
    }

    pub fn log_likelihoods(&self) -> &[f64] {
        &self.log_likelihoods
    }

    pub fn mean(&self) -> ScmWeights {
        mean_of(self.particles.iter())
    }

    /// Mean of the `ceil(top_fraction * n)` highest-likelihood particles.
    /// Particles tied with the cut-off likelihood are all included, so an
    /// uninformative set (all likelihoods equal) yields the full mean.
    pub fn point_estimate(&self, top_fraction: f64) -> Result<ScmWeights> {
        if !(top_fraction > 0.0 && top_fraction <= 1.0) {
            return Err(Error::Config("top_fraction must lie in (0, 1]".into()));
        }
        let n = self.len();
        let take = ((top_fraction * n as f64).ceil() as usize).clamp(1, n);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            self.log_likelihoods[b]
                .total_cmp(&self.log_likelihoods[a])
                .then(a.cmp(&b))
        });
        let cutoff = self.log_likelihoods[order[take - 1]];
        let chosen = order
            .iter()
            .take_while(|&&i| self.log_likelihoods[i] >= cutoff)
            .map(|&i| &self.particles[i]);
        Ok(mean_of(chosen))
    }

    fn normalised_weights(&self, averaging: Averaging) -> Vec<f64> {
        let n = self.len() as f64;
        match averaging {
            Averaging::Uniform => vec![1.0 / n; self.len()],
            Averaging::LikelihoodWeighted => {
                let z = prior::log_sum_exp(&self.log_likelihoods);
                self.log_likelihoods.iter().map(|l| (l - z).exp()).collect()
            }
        }
    }

    /// `(1/n) sum_j C(I | w_j)` (or its likelihood-weighted version).
    pub fn expected_intervention_cost(
        &self,
        problem: &RecourseProblem,
        intervention: &[Action],
        s0: &State,
        averaging: Averaging,
    ) -> Result<f64> {
        let profile = problem.cost_profile(intervention, s0)?;
        let weights = self.normalised_weights(averaging);
        match averaging {
            Averaging::Uniform => {
                Ok(self.particles.iter().map(|w| profile.cost(w.values())).sum::<f64>() / self.len() as f64)
            }
            Averaging::LikelihoodWeighted => Ok(self
                .particles
                .iter()
                .zip(&weights)
                .map(|(w, p)| p * profile.cost(w.values()))
                .sum()),
        }
    }

    /// Per-particle costs of `intervention`.
    pub fn cost_vector(&self, problem: &RecourseProblem, intervention: &[Action], s0: &State) -> Result<Vec<f64>> {
        let profile = problem.cost_profile(intervention, s0)?;
        Ok(self.particles.iter().map(|w| profile.cost(w.values())).collect())
    }

    /// Concatenates two sets (diagnostics of `self` are kept).
    pub fn concat(&self, other: &ParticleSet) -> Result<ParticleSet> {
        let mut particles = self.particles.clone();
        particles.extend(other.particles.iter().cloned());
        let mut ll = self.log_likelihoods.clone();
        ll.extend_from_slice(&other.log_likelihoods);
        ParticleSet::new(particles, ll)
    }

    /// Writes `w_0..w_{m-1},log_likelihood` rows.
    pub fn write_csv<W: std::io::Write>(&self, out: W, labels: &[String]) -> Result<()> {
        let mut csv = csv::Writer::from_writer(out);
        let mut header: Vec<String> = labels.to_vec();
        header.push("log_likelihood".into());
        csv.write_record(&header)?;
        for (p, ll) in self.particles.iter().zip(&self.log_likelihoods) {
            let mut row: Vec<String> = p.values().iter().map(|v| v.to_string()).collect();
            row.push(ll.to_string());
            csv.write_record(&row)?;
        }
        csv.flush()?;
        Ok(())
    }
}

fn mean_of<'a>(it: impl Iterator<Item = &'a ScmWeights>) -> ScmWeights {
    let mut acc: Vec<f64> = Vec::new();
    let mut n = 0usize;
    for p in it {
        if acc.is_empty() {
            acc = vec![0.0; p.len()];
        }
        for (a, v) in acc.iter_mut().zip(p.values()) {
            *a += v;
        }
        n += 1;
    }
    ScmWeights::new(acc.into_iter().map(|a| a / n as f64).collect())
}

/// I.i.d. draws from the prior: component by mixing weight, then Gaussian.
pub fn prior_sample(prior: &MixturePrior, n: usize, seed: u64) -> Result<ParticleSet> {
    if n == 0 {
        return Err(Error::Empty("particle request"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let particles = (0..n).map(|_| prior.sample(&mut rng).1).collect();
    ParticleSet::from_weights(particles)
}

/// Target: `log P(D | w) + log P(w)`.
pub struct Posterior<'a> {
    pub prior: &'a MixturePrior,
    pub likelihood: &'a ChoiceLikelihood,
}

impl Posterior<'_> {
    pub fn log_density(&self, w: &[f64]) -> f64 {
        let lp = self.prior.log_density(w);
        if lp == f64::NEG_INFINITY {
            return lp;
        }
        lp + self.likelihood.log_likelihood(w)
    }
}

/// Ensemble-MCMC posterior sample. Walkers start from prior draws; burn-in
/// is discarded. Reproducible under `seed`.
pub fn posterior_sample(
    prior: &MixturePrior,
    likelihood: &ChoiceLikelihood,
    cfg: &SamplerConfig,
    seed: u64,
) -> Result<ParticleSet> {
    cfg.validate()?;
    if !prior.has_density() {
        return Err(Error::Prior("posterior sampling requires a prior with a density".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let target = Posterior { prior, likelihood };
    let init: Vec<Vec<f64>> = (0..cfg.walkers)
        .map(|_| prior.sample(&mut rng).1.into_inner())
        .collect();
    let (kept, mut diag) = run_ensemble(|w| target.log_density(w), init, cfg, &mut rng)?;
    let log_likelihoods = kept.iter().map(|w| likelihood.log_likelihood(w)).collect();
    let particles = kept.into_iter().map(ScmWeights::new).collect();
    let mut set = ParticleSet::new(particles, log_likelihoods)?;
    diag.walkers = cfg.walkers;
    set.diagnostics = diag;
    tracing::debug!(
        acceptance = set.diagnostics.acceptance_rate,
        particles = set.len(),
        "posterior sampled"
    );
    Ok(set)
}
