//! Simulated users, recourse metrics and the experiment runner.

mod metrics;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::action::Intervention;
use crate::belief::{logistic_probabilities, penalize_failures, MixturePrior};
use crate::config::Dataset;
use crate::elicit::{CandidateIntervention, FinalResult, Session, SessionConfig, SessionContext, Transcript};
use crate::env::RecourseEnv;
use crate::error::{Error, Result};
use crate::generator::RecourseGenerator;
use crate::graph::ScmWeights;
use crate::schema::State;
use crate::search::exhaustive_search;

pub use metrics::{
    average_regret, error_taxonomy, lcs_len, mean_ci, normalized_regret, sequence_similarity, validity,
    ErrorTaxonomy,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResponseModel {
    /// Always the cheapest item under the true weights; ties drawn uniformly.
    Noiseless,
    /// Softmax of `-temperature * cost` under the true weights.
    Logistic { temperature: f64 },
}

impl ResponseModel {
    pub fn name(&self) -> &'static str {
        match self {
            ResponseModel::Noiseless => "noiseless",
            ResponseModel::Logistic { .. } => "logistic",
        }
    }
}

/// Picks an index for a vector of set costs.
pub fn simulate_response<R: Rng + ?Sized>(costs: &[f64], model: ResponseModel, rng: &mut R) -> usize {
    assert!(!costs.is_empty(), "choice set is empty");
    match model {
        ResponseModel::Noiseless => {
            let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
            let ties: Vec<usize> = (0..costs.len()).filter(|&i| costs[i] == min).collect();
            if ties.len() == 1 {
                ties[0]
            } else {
                ties[rng.random_range(0..ties.len())]
            }
        }
        ResponseModel::Logistic { temperature } => {
            let p = logistic_probabilities(costs, temperature);
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (i, pi) in p.iter().enumerate() {
                acc += pi;
                if u < acc {
                    return i;
                }
            }
            p.len() - 1
        }
    }
}

/// A respondent with hidden true weights.
#[derive(Debug, Clone)]
pub struct SimulatedUser {
    pub weights: ScmWeights,
    pub response: ResponseModel,
    pub failure_penalty: f64,
    rng: ChaCha8Rng,
}

impl SimulatedUser {
    pub fn new(weights: ScmWeights, response: ResponseModel, failure_penalty: f64, seed: u64) -> Self {
        Self {
            weights,
            response,
            failure_penalty,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// True costs of the shown items from `state`, failures padded.
    pub fn costs(&self, env: &RecourseEnv, state: &State, items: &[CandidateIntervention]) -> Result<Vec<f64>> {
        let mut costs = items
            .iter()
            .map(|it| env.cost(&it.intervention, state, &self.weights))
            .collect::<Result<Vec<_>>>()?;
        let success: Vec<bool> = items.iter().map(|it| it.success).collect();
        penalize_failures(&mut costs, &success, self.failure_penalty);
        Ok(costs)
    }

    pub fn respond(&mut self, env: &RecourseEnv, state: &State, items: &[CandidateIntervention]) -> Result<usize> {
        if items.is_empty() {
            return Err(Error::Empty("choice set"));
        }
        let costs = self.costs(env, state, items)?;
        Ok(simulate_response(&costs, self.response, &mut self.rng))
    }
}

/// One `(component, w*)` draw per user.
pub fn sample_true_weights(mixture: &MixturePrior, n_users: usize, seed: u64) -> Vec<(usize, ScmWeights)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_users).map(|_| mixture.sample(&mut rng)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    Wfare,
    Wefare,
    Exhaustive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub users: usize,
    /// Curves cover `q = 0..=q_max`.
    pub q_max: usize,
    pub set_sizes: Vec<usize>,
    pub response: ResponseModel,
    /// Length bound of the exhaustive best/worst oracle.
    pub oracle_max_len: usize,
    pub generator: GeneratorKind,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            users: 50,
            q_max: 10,
            set_sizes: vec![2, 4],
            response: ResponseModel::Logistic { temperature: 5.0 },
            oracle_max_len: 4,
            generator: GeneratorKind::Wfare,
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.users == 0 {
            return Err(Error::Config("an experiment needs at least one user".into()));
        }
        if self.set_sizes.is_empty() || self.set_sizes.contains(&0) {
            return Err(Error::Config("set sizes must be non-empty and positive".into()));
        }
        if self.oracle_max_len == 0 {
            return Err(Error::Config("oracle length bound must be positive".into()));
        }
        Ok(())
    }
}

/// Metrics of one recommendation against the user's oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub q: usize,
    pub intervention: Intervention,
    pub success: bool,
    /// True-weight cost (of the intervention as returned, even when it fails).
    pub cost: f64,
    pub regret: f64,
    pub normalized_regret: f64,
    pub degenerate: bool,
    pub similarity: f64,
    pub errors: ErrorTaxonomy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserRun {
    pub user: usize,
    pub k: usize,
    pub s0: State,
    pub component: usize,
    pub true_weights: Vec<f64>,
    pub best: Intervention,
    pub best_cost: f64,
    pub worst_cost: f64,
    pub checkpoints: Vec<Checkpoint>,
    pub transcript: Transcript,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub dataset: String,
    pub model: String,
    pub noise: String,
    pub k: usize,
    pub q: usize,
    pub mean_norm_regret: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub validity: f64,
    pub mean_regret: f64,
    pub mean_similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub dataset: String,
    pub model: String,
    pub noise: String,
    pub k: usize,
    pub users: usize,
    pub norm_regret_q0: f64,
    pub norm_regret_q1: f64,
    pub norm_regret_qmax: f64,
    /// `1 - R(q=1) / R(q=0)`.
    pub improvement_q1: f64,
    /// `1 - R(q_max) / R(q=0)`.
    pub improvement_qmax: f64,
    /// Standard error of `improvement_qmax` (delta method, `R(0)` fixed).
    pub improvement_qmax_se: f64,
    pub validity_qmax: f64,
    pub similarity_qmax: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub dataset: String,
    pub model: String,
    pub noise: String,
    pub k: usize,
    pub q: usize,
    pub users: usize,
    pub extra: usize,
    pub wrong_action: usize,
    pub wrong_order: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub curves: Vec<CurveRow>,
    pub summary: Vec<SummaryRow>,
    pub errors: Vec<ErrorRow>,
    pub runs: Vec<UserRun>,
    /// Users dropped because the oracle found no successful intervention.
    pub excluded_users: usize,
}

fn write_rows<T: Serialize, W: std::io::Write>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

impl ExperimentReport {
    pub fn write_curves<W: std::io::Write>(&self, out: W) -> Result<()> {
        write_rows(&self.curves, out)
    }

    pub fn write_summary<W: std::io::Write>(&self, out: W) -> Result<()> {
        write_rows(&self.summary, out)
    }

    pub fn write_errors<W: std::io::Write>(&self, out: W) -> Result<()> {
        write_rows(&self.errors, out)
    }

    pub fn summary_for(&self, k: usize) -> Option<&SummaryRow> {
        self.summary.iter().find(|r| r.k == k)
    }
}

fn mix(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed
        ^ a.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ b.wrapping_add(7).wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Scores one recommendation for a user whose oracle is `(best, best_cost, worst_cost)`.
pub fn score(
    env: &RecourseEnv,
    s0: &State,
    w_true: &ScmWeights,
    result: &FinalResult,
    q: usize,
    best: &Intervention,
    best_cost: f64,
    worst_cost: f64,
) -> Result<Checkpoint> {
    let cost = env.cost(&result.intervention, s0, w_true)?;
    let success = result.success && env.reaches_favorable(&result.intervention, s0)?;
    let (norm, degenerate) = if success {
        normalized_regret(cost, best_cost, worst_cost)
    } else {
        (1.0, worst_cost <= best_cost)
    };
    let regret = if success { cost - best_cost } else { worst_cost - best_cost };
    Ok(Checkpoint {
        q,
        intervention: result.intervention.clone(),
        success,
        cost,
        regret,
        normalized_regret: norm,
        degenerate,
        similarity: sequence_similarity(&result.intervention, best),
        errors: error_taxonomy(&result.intervention, best),
    })
}

/// One simulated session with budget `q_max`; the recommendation
/// `delta(s0, w_hat_t)` is checkpointed after every round `t`.
#[allow(clippy::too_many_arguments)]
pub fn run_user(
    ctx: SessionContext<'_>,
    template: &SessionConfig,
    cfg: &ExperimentConfig,
    user: usize,
    k: usize,
    s0: &State,
    component: usize,
    w_true: &ScmWeights,
) -> Result<Option<UserRun>> {
    let oracle = exhaustive_search(ctx.env, s0, w_true, cfg.oracle_max_len, None)?;
    let (Some(best), Some(worst)) = (oracle.best, oracle.worst) else {
        return Ok(None);
    };
    let session_cfg = SessionConfig {
        budget: cfg.q_max,
        set_size: k,
        seed: mix(cfg.seed, user as u64, k as u64),
        ..template.clone()
    };
    let mut respondent = SimulatedUser::new(
        w_true.clone(),
        cfg.response,
        session_cfg.failure_penalty,
        mix(cfg.seed ^ 0x5EED, user as u64, k as u64),
    );
    let mut session = Session::start(ctx, s0.clone(), session_cfg)?;
    let mut checkpoints = Vec::with_capacity(cfg.q_max + 1);
    for q in 0..=cfg.q_max {
        if q > 0 && !session.is_finalized() {
            let set = session.current_set().expect("an unfinalized session awaits a choice");
            let pick = respondent.respond(ctx.env, &session.state, &set.items)?;
            session.choose(ctx, pick)?;
        }
        let result = match session.result() {
            Some(r) => r.clone(),
            None => session.recommend(ctx)?,
        };
        checkpoints.push(score(
            ctx.env,
            s0,
            w_true,
            &result,
            q,
            &best.intervention,
            best.cost,
            worst.cost,
        )?);
    }
    Ok(Some(UserRun {
        user,
        k,
        s0: s0.clone(),
        component,
        true_weights: w_true.values().to_vec(),
        best: best.intervention,
        best_cost: best.cost,
        worst_cost: worst.cost,
        checkpoints,
        transcript: session.transcript(),
    }))
}

/// Full experiment over `cfg.users` simulated users and every `k` in
/// `cfg.set_sizes`. Users are independent and run in parallel; aggregation
/// is in fixed user order, so the output is identical for identical seeds.
pub fn run_experiment(
    dataset: &Dataset,
    generator: &dyn RecourseGenerator,
    cfg: &ExperimentConfig,
    template: &SessionConfig,
) -> Result<ExperimentReport> {
    cfg.validate()?;
    let mut pool = dataset.unfavorable_states();
    if pool.is_empty() {
        return Err(Error::Empty("population of unfavorable users"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    pool.shuffle(&mut rng);
    let truths = sample_true_weights(&dataset.true_weights, cfg.users, mix(cfg.seed, 0xA11, 0));
    let ctx = SessionContext {
        env: &dataset.env,
        prior: &dataset.prior,
        generator,
    };
    let jobs: Vec<(usize, usize)> = cfg
        .set_sizes
        .iter()
        .flat_map(|&k| (0..cfg.users).map(move |u| (k, u)))
        .collect();
    let results: Vec<Result<Option<UserRun>>> = jobs
        .par_iter()
        .map(|&(k, u)| {
            let (component, w) = &truths[u];
            run_user(ctx, template, cfg, u, k, &pool[u % pool.len()], *component, w)
        })
        .collect();
    let mut runs = Vec::with_capacity(results.len());
    let mut excluded = 0usize;
    for r in results {
        match r? {
            Some(run) => runs.push(run),
            None => excluded += 1,
        }
    }
    let excluded_users = excluded / cfg.set_sizes.len().max(1);

    let (model, noise) = (generator.name().to_string(), cfg.response.name().to_string());
    let mut curves = Vec::new();
    let mut summary = Vec::new();
    let mut errors = Vec::new();
    for &k in &cfg.set_sizes {
        let group: Vec<&UserRun> = runs.iter().filter(|r| r.k == k).collect();
        let mut means = Vec::with_capacity(cfg.q_max + 1);
        let mut half_widths = Vec::with_capacity(cfg.q_max + 1);
        for q in 0..=cfg.q_max {
            let cps: Vec<&Checkpoint> = group.iter().map(|r| &r.checkpoints[q]).collect();
            let norm: Vec<f64> = cps.iter().map(|c| c.normalized_regret).collect();
            let (mean, half) = mean_ci(&norm);
            means.push(mean);
            half_widths.push(half);
            let n = cps.len().max(1) as f64;
            curves.push(CurveRow {
                dataset: dataset.name.clone(),
                model: model.clone(),
                noise: noise.clone(),
                k,
                q,
                mean_norm_regret: mean,
                ci_low: (mean - half).max(0.0),
                ci_high: (mean + half).min(1.0),
                validity: validity(&cps.iter().map(|c| c.success).collect::<Vec<_>>()),
                mean_regret: cps.iter().map(|c| c.regret).sum::<f64>() / n,
                mean_similarity: cps.iter().map(|c| c.similarity).sum::<f64>() / n,
            });
            let mut tax = ErrorTaxonomy::default();
            for c in &cps {
                tax += c.errors;
            }
            errors.push(ErrorRow {
                dataset: dataset.name.clone(),
                model: model.clone(),
                noise: noise.clone(),
                k,
                q,
                users: cps.len(),
                extra: tax.extra,
                wrong_action: tax.wrong_action,
                wrong_order: tax.wrong_order,
            });
        }
        let r0 = means[0];
        let improvement = |r: f64| if r0 > 0.0 { 1.0 - r / r0 } else { 0.0 };
        let q1 = 1.min(cfg.q_max);
        let last = curves.last().expect("at least one curve row");
        summary.push(SummaryRow {
            dataset: dataset.name.clone(),
            model: model.clone(),
            noise: noise.clone(),
            k,
            users: group.len(),
            norm_regret_q0: r0,
            norm_regret_q1: means[q1],
            norm_regret_qmax: means[cfg.q_max],
            improvement_q1: improvement(means[q1]),
            improvement_qmax: improvement(means[cfg.q_max]),
            improvement_qmax_se: if r0 > 0.0 {
                half_widths[cfg.q_max] / 1.96 / r0
            } else {
                0.0
            },
            validity_qmax: last.validity,
            similarity_qmax: last.mean_similarity,
        });
    }
    Ok(ExperimentReport {
        curves,
        summary,
        errors,
        runs,
        excluded_users,
    })
}
