//! Choice likelihood under the logistic response model.
//!
//! `P_L(O ~> a | w) = exp(-lambda C(I_a|w)) / sum_{a' in O} exp(-lambda C(I_a'|w))`

use serde::{Deserialize, Serialize};

use crate::action::{Action, Intervention};
use crate::error::{Error, Result};
use crate::graph::ScmWeights;
use crate::problem::{CostProfile, RecourseProblem};
use crate::schema::State;

use super::prior::log_sum_exp;

/// One `(a, I_a)` tuple as shown to the user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceItem {
    pub first: Action,
    pub intervention: Intervention,
    /// Whether `intervention` achieves recourse from the query state.
    pub success: bool,
}

/// A choice set, the state it was asked in, and the index the user picked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceRecord {
    pub state: State,
    pub items: Vec<ChoiceItem>,
    pub chosen: usize,
}

impl ChoiceRecord {
    pub fn new(state: State, items: Vec<ChoiceItem>, chosen: usize) -> Result<Self> {
        if chosen >= items.len() {
            return Err(Error::Session(format!(
                "chosen index {chosen} is outside a set of {}",
                items.len()
            )));
        }
        Ok(Self { state, items, chosen })
    }
}

pub type ElicitationDataset = Vec<ChoiceRecord>;

/// Failed candidates (no recourse) get `factor * max successful cost` added
/// to their own cost. Sets without any success are left untouched.
pub fn penalize_failures(costs: &mut [f64], success: &[bool], factor: f64) {
    let max_ok = costs
        .iter()
        .zip(success)
        .filter(|(_, ok)| **ok)
        .map(|(c, _)| *c)
        .fold(f64::NEG_INFINITY, f64::max);
    if max_ok == f64::NEG_INFINITY {
        return;
    }
    for (c, ok) in costs.iter_mut().zip(success) {
        if !ok {
            *c += factor * max_ok;
        }
    }
}

/// Logistic choice probabilities for a vector of set costs.
pub fn logistic_probabilities(costs: &[f64], temperature: f64) -> Vec<f64> {
    let logits: Vec<f64> = costs.iter().map(|c| -temperature * c).collect();
    let z = log_sum_exp(&logits);
    logits.iter().map(|l| (l - z).exp()).collect()
}

/// A record with every item pre-compiled into linear cost forms.
#[derive(Debug, Clone)]
pub struct CompiledRecord {
    profiles: Vec<CostProfile>,
    success: Vec<bool>,
    chosen: usize,
}

impl CompiledRecord {
    pub fn costs(&self, w: &[f64], penalty: f64) -> Vec<f64> {
        let mut costs: Vec<f64> = self.profiles.iter().map(|p| p.cost(w)).collect();
        penalize_failures(&mut costs, &self.success, penalty);
        costs
    }

    pub fn log_probability(&self, w: &[f64], temperature: f64, penalty: f64) -> f64 {
        let costs = self.costs(w, penalty);
        let logits: Vec<f64> = costs.iter().map(|c| -temperature * c).collect();
        logits[self.chosen] - log_sum_exp(&logits)
    }
}

/// Elicitation dataset compiled against a problem; cheap to evaluate per `w`.
#[derive(Debug, Clone)]
pub struct ChoiceLikelihood {
    records: Vec<CompiledRecord>,
    pub temperature: f64,
    pub failure_penalty: f64,
}

impl ChoiceLikelihood {
    pub fn compile(
        problem: &RecourseProblem,
        data: &[ChoiceRecord],
        temperature: f64,
        failure_penalty: f64,
    ) -> Result<Self> {
        if !(temperature >= 0.0 && temperature.is_finite()) {
            return Err(Error::Config("temperature must be finite and non-negative".into()));
        }
        let records = data
            .iter()
            .map(|r| {
                Ok(CompiledRecord {
                    profiles: r
                        .items
                        .iter()
                        .map(|it| problem.cost_profile(&it.intervention, &r.state))
                        .collect::<Result<_>>()?,
                    success: r.items.iter().map(|it| it.success).collect(),
                    chosen: r.chosen,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            records,
            temperature,
            failure_penalty,
        })
    }

    pub fn records(&self) -> &[CompiledRecord] {
        &self.records
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Sum of per-record log-probabilities; 0 for an empty dataset.
    pub fn log_likelihood(&self, w: &[f64]) -> f64 {
        self.records
            .iter()
            .map(|r| r.log_probability(w, self.temperature, self.failure_penalty))
            .sum()
    }
}

/// Convenience wrapper compiling `data` on every call.
pub fn choice_log_likelihood(
    problem: &RecourseProblem,
    data: &[ChoiceRecord],
    w: &ScmWeights,
    temperature: f64,
    failure_penalty: f64,
) -> Result<f64> {
    Ok(ChoiceLikelihood::compile(problem, data, temperature, failure_penalty)?.log_likelihood(w.values()))
}
