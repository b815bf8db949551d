//! Choice-set elicitation: expected utilities, greedy set construction and
//! the interactive session.
//!
//! Every quantity here is a Monte Carlo average over posterior particles.
//! Candidate costs are computed once per round into an `n`-vector per
//! candidate; all set functions then work on those vectors only.

mod session;

use serde::{Deserialize, Serialize};

use crate::action::{Action, Intervention};
use crate::belief::{penalize_failures, ChoiceItem, ParticleSet};
use crate::efare::BooleanRule;
use crate::env::RecourseEnv;
use crate::error::{Error, Result};
use crate::generator::RecourseGenerator;
use crate::graph::ScmWeights;
use crate::schema::State;

pub use session::{
    replay_session, FinalResult, Phase, Session, SessionConfig, SessionContext, Transcript, TranscriptRound,
};

/// `(a, I_a)` with its per-particle cost cache.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateIntervention {
    pub first: Action,
    pub intervention: Intervention,
    pub success: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rules: Option<Vec<BooleanRule>>,
    /// Mean cost over the particles, before any failure padding.
    pub expected_cost: f64,
    /// Per-particle costs, padded when `success` is false. Not persisted.
    #[serde(skip)]
    pub costs: Vec<f64>,
}

impl CandidateIntervention {
    pub fn as_item(&self) -> ChoiceItem {
        ChoiceItem {
            first: self.first,
            intervention: self.intervention.clone(),
            success: self.success,
        }
    }
}

/// Ordered candidates with pairwise distinct first actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceSet {
    pub items: Vec<CandidateIntervention>,
}

impl ChoiceSet {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// `EU(I) = -E[C(I|w)]` over the cached particle costs.
pub fn expected_utility(c: &CandidateIntervention) -> Result<f64> {
    if c.costs.is_empty() {
        return Err(Error::Empty("particle cost cache"));
    }
    Ok(-mean(&c.costs))
}

/// Softmax of `-temperature * cost` evaluated at `index`.
pub fn response_probability_logistic(costs: &[f64], index: usize, temperature: f64) -> Result<f64> {
    if index >= costs.len() {
        return Err(Error::Session(format!("item {index} is not in a set of {}", costs.len())));
    }
    Ok(crate::belief::logistic_probabilities(costs, temperature)[index])
}

/// Mass `1/#minimisers` on each exact minimiser, 0 elsewhere.
pub fn response_probability_noiseless(costs: &[f64], index: usize) -> Result<f64> {
    if index >= costs.len() {
        return Err(Error::Session(format!("item {index} is not in a set of {}", costs.len())));
    }
    let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
    if costs[index] != min {
        return Ok(0.0);
    }
    Ok(1.0 / costs.iter().filter(|&&c| c == min).count() as f64)
}

fn check_set(set: &[&[f64]]) -> Result<usize> {
    let n = set.first().ok_or(Error::Empty("choice set"))?.len();
    if n == 0 || set.iter().any(|c| c.len() != n) {
        return Err(Error::Config("cost vectors must be non-empty and equally long".into()));
    }
    Ok(n)
}

/// `-(1/n) sum_j min_{I in O} C(I|w_j)`.
pub fn eus_noiseless(set: &[&[f64]]) -> Result<f64> {
    let n = check_set(set)?;
    let total: f64 = (0..n)
        .map(|j| set.iter().map(|c| c[j]).fold(f64::INFINITY, f64::min))
        .sum();
    Ok(-total / n as f64)
}

/// `-(1/n) sum_j sum_{I in O} P_L(I|w_j) C(I|w_j)`.
pub fn eus_logistic(set: &[&[f64]], temperature: f64) -> Result<f64> {
    let n = check_set(set)?;
    let mut total = 0.0;
    let mut column = vec![0.0; set.len()];
    for j in 0..n {
        for (slot, c) in column.iter_mut().zip(set) {
            *slot = c[j];
        }
        let p = crate::belief::logistic_probabilities(&column, temperature);
        total += p.iter().zip(&column).map(|(p, c)| p * c).sum::<f64>();
    }
    Ok(-total / n as f64)
}

/// Greedy maximisation of the noiseless EUS over cost vectors. Returns pool
/// indices in pick order. The first pick is the candidate with the highest
/// expected utility; every later pick maximises the EUS increment, computed
/// against running per-particle minima. Ties go to the lowest pool index.
pub fn greedy_choice(pool: &[&[f64]], k: usize) -> Result<Vec<usize>> {
    if k == 0 {
        return Err(Error::Config("choice-set size must be at least 1".into()));
    }
    let n = check_set(pool)?;
    let mut current = vec![f64::INFINITY; n];
    let mut chosen: Vec<usize> = Vec::with_capacity(k.min(pool.len()));
    let mut taken = vec![false; pool.len()];
    while chosen.len() < k && chosen.len() < pool.len() {
        let mut best: Option<(usize, f64)> = None;
        for (i, c) in pool.iter().enumerate() {
            if taken[i] {
                continue;
            }
            let gain = if chosen.is_empty() {
                -mean(c)
            } else {
                current.iter().zip(c.iter()).map(|(m, x)| m - m.min(*x)).sum::<f64>() / n as f64
            };
            if best.is_none_or(|(_, g)| gain > g) {
                best = Some((i, gain));
            }
        }
        let (i, _) = best.expect("pool has an untaken candidate");
        taken[i] = true;
        chosen.push(i);
        for (m, x) in current.iter_mut().zip(pool[i].iter()) {
            *m = m.min(*x);
        }
    }
    Ok(chosen)
}

/// One candidate per feasible action, `I_a = delta(s, w_hat | a)`, with
/// per-particle costs. Failed candidates are padded by `failure_penalty`
/// times the largest successful cost in the pool, per particle.
pub fn candidate_pool(
    env: &RecourseEnv,
    generator: &dyn RecourseGenerator,
    s: &State,
    w_hat: &ScmWeights,
    particles: &ParticleSet,
    failure_penalty: f64,
) -> Result<Vec<CandidateIntervention>> {
    let feasible = env.problem.feasible_actions(s);
    if feasible.is_empty() {
        return Err(Error::NoFeasibleAction);
    }
    let mut pool = Vec::with_capacity(feasible.len());
    for a in feasible {
        let g = generator.generate(s, w_hat, Some(a))?;
        let success = g.success && env.reaches_favorable(&g.intervention, s)?;
        let costs = particles.cost_vector(&env.problem, &g.intervention, s)?;
        pool.push(CandidateIntervention {
            first: a,
            intervention: g.intervention,
            success,
            rules: g.rules,
            expected_cost: mean(&costs),
            costs,
        });
    }
    let success: Vec<bool> = pool.iter().map(|c| c.success).collect();
    let mut column = vec![0.0; pool.len()];
    for j in 0..particles.len() {
        for (slot, c) in column.iter_mut().zip(&pool) {
            *slot = c.costs[j];
        }
        penalize_failures(&mut column, &success, failure_penalty);
        for (c, v) in pool.iter_mut().zip(&column) {
            c.costs[j] = *v;
        }
    }
    Ok(pool)
}

/// Greedy choice set of size at most `k` from the candidate pool.
pub fn submod_choice(pool: Vec<CandidateIntervention>, k: usize) -> Result<ChoiceSet> {
    let picks = {
        let vectors: Vec<&[f64]> = pool.iter().map(|c| c.costs.as_slice()).collect();
        greedy_choice(&vectors, k)?
    };
    let mut slots: Vec<Option<CandidateIntervention>> = pool.into_iter().map(Some).collect();
    Ok(ChoiceSet {
        items: picks.into_iter().map(|i| slots[i].take().expect("picked once")).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_fixture_eus() {
        let a = [1.0, 4.0];
        let b = [3.0, 2.0];
        assert_eq!(eus_noiseless(&[&a, &b]).unwrap(), -1.5);
        assert_eq!(eus_noiseless(&[&a]).unwrap(), -2.5);
        assert_eq!(eus_logistic(&[&a], 5.0).unwrap(), -2.5);
    }

    #[test]
    fn noiseless_ties_split_mass() {
        assert_eq!(response_probability_noiseless(&[2.0, 2.0, 3.0], 0).unwrap(), 0.5);
        assert_eq!(response_probability_noiseless(&[2.0, 2.0, 3.0], 2).unwrap(), 0.0);
        assert_eq!(response_probability_noiseless(&[1.0, 2.0], 0).unwrap(), 1.0);
        assert!(response_probability_noiseless(&[1.0], 1).is_err());
    }

    #[test]
    fn logistic_limits() {
        assert!((response_probability_logistic(&[3.0, 3.0], 0, 5.0).unwrap() - 0.5).abs() < 1e-15);
        let p = response_probability_logistic(&[1.0, 7.0, 2.0], 1, 0.0).unwrap();
        assert!((p - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn greedy_first_pick_is_best_eu_and_exhausts_small_pools() {
        let a = [5.0, 5.0];
        let b = [1.0, 6.0];
        let c = [6.0, 1.0];
        assert_eq!(greedy_choice(&[&a, &b, &c], 1).unwrap(), vec![1]);
        assert_eq!(greedy_choice(&[&a, &b, &c], 2).unwrap(), vec![1, 2]);
        assert_eq!(greedy_choice(&[&a, &b], 5).unwrap().len(), 2);
    }
}
