//! Exhaustive enumeration of interventions up to a length bound.
//!
//! Sequences stop being extended as soon as they reach a favorable state, so
//! the enumerated space is "interventions that achieve recourse at their last
//! action". Used as the regret oracle and as a reference generator on
//! desk-scale problems.

use crate::action::{Action, Intervention};
use crate::env::RecourseEnv;
use crate::error::{Error, Result};
use crate::graph::ScmWeights;
use crate::schema::State;

#[derive(Debug, Clone, PartialEq)]
pub struct Scored {
    pub intervention: Intervention,
    pub cost: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SearchOutcome {
    /// Cheapest successful intervention (first in catalog order on ties).
    pub best: Option<Scored>,
    /// Most expensive successful intervention.
    pub worst: Option<Scored>,
    pub successful: usize,
}

pub fn exhaustive_search(
    env: &RecourseEnv,
    s0: &State,
    w: &ScmWeights,
    max_len: usize,
    forced_first: Option<Action>,
) -> Result<SearchOutcome> {
    let mut out = SearchOutcome::default();
    if env.is_favorable(s0) && forced_first.is_none() {
        out.best = Some(Scored {
            intervention: Vec::new(),
            cost: 0.0,
        });
        out.worst = out.best.clone();
        out.successful = 1;
        return Ok(out);
    }
    let mut prefix = Vec::with_capacity(max_len);
    match forced_first {
        Some(a) => {
            if !env.problem.is_applicable(a, s0) {
                return Err(Error::ForcedActionInfeasible(env.problem.catalog.label(a, &env.problem.schema)));
            }
            let c = env.problem.action_cost_unchecked(a, s0, w.values());
            let next = env.problem.step_unchecked(a, s0);
            prefix.push(a);
            visit(env, &next, w, max_len, &mut prefix, c, &mut out);
        }
        None => visit(env, s0, w, max_len, &mut prefix, 0.0, &mut out),
    }
    Ok(out)
}

fn visit(
    env: &RecourseEnv,
    s: &State,
    w: &ScmWeights,
    max_len: usize,
    prefix: &mut Vec<Action>,
    cost: f64,
    out: &mut SearchOutcome,
) {
    if !prefix.is_empty() && env.is_favorable(s) {
        out.successful += 1;
        if out.best.as_ref().is_none_or(|b| cost < b.cost) {
            out.best = Some(Scored {
                intervention: prefix.clone(),
                cost,
            });
        }
        if out.worst.as_ref().is_none_or(|b| cost > b.cost) {
            out.worst = Some(Scored {
                intervention: prefix.clone(),
                cost,
            });
        }
        return;
    }
    if prefix.len() >= max_len {
        return;
    }
    for a in env.problem.feasible_actions(s) {
        let c = env.problem.action_cost_unchecked(a, s, w.values());
        let next = env.problem.step_unchecked(a, s);
        prefix.push(a);
        visit(env, &next, w, max_len, prefix, cost + c, out);
        prefix.pop();
    }
}
