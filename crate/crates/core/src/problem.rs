//! The linear-SCM cost model and intervention semantics.
//!
//! The cost of taking action `a` (which moves feature `i` from `s_i` to
//! `s_i'`) in state `s` is
//!
//! ```text
//! C(a, s | w) = w_i (s_i' - s_i) + sum_{j in Pa(i)} w_ji s_j
//! ```
//!
//! evaluated on the state *before* the action, clamped from below at the
//! configured floor (0 by default). Categorical features contribute their
//! level index. The cost is linear in `w` before clamping, which is what
//! [`CostForm`] captures: belief and elicitation code compile interventions
//! into linear forms once and then evaluate them for thousands of particles.

use serde::{Deserialize, Serialize};

use crate::action::{Action, ActionCatalog, Intervention};
use crate::classifier::Classifier;
use crate::error::{Error, Result};
use crate::graph::{CausalGraph, ScmWeights};
use crate::schema::{FeatureSchema, State};

/// `C = max(floor, sum_k coef_k * w[index_k])` for one action taken in one state.
#[derive(Debug, Clone, PartialEq)]
pub struct CostForm {
    terms: Vec<(usize, f64)>,
}

impl CostForm {
    pub fn terms(&self) -> &[(usize, f64)] {
        &self.terms
    }

    pub fn raw(&self, w: &[f64]) -> f64 {
        let mut acc = 0.0;
        for &(idx, coef) in &self.terms {
            acc += w[idx] * coef;
        }
        acc
    }

    pub fn eval(&self, w: &[f64], floor: Option<f64>) -> f64 {
        clamp(self.raw(w), floor)
    }
}

/// Sequence of per-step cost forms for one intervention from one start state.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CostProfile {
    steps: Vec<CostForm>,
    floor: Option<f64>,
}

impl CostProfile {
    pub fn cost(&self, w: &[f64]) -> f64 {
        let mut total = 0.0;
        for step in &self.steps {
            total += step.eval(w, self.floor);
        }
        total
    }

    pub fn steps(&self) -> &[CostForm] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

#[inline]
fn clamp(raw: f64, floor: Option<f64>) -> f64 {
    match floor {
        Some(f) if raw < f => f,
        _ => raw,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecourseProblem {
    pub schema: FeatureSchema,
    pub graph: CausalGraph,
    pub catalog: ActionCatalog,
    /// Lower bound applied to every action cost; `None` disables clamping.
    #[serde(default = "default_floor")]
    pub cost_floor: Option<f64>,
}

fn default_floor() -> Option<f64> {
    Some(0.0)
}

impl RecourseProblem {
    pub fn new(schema: FeatureSchema, graph: CausalGraph, catalog: ActionCatalog) -> Result<Self> {
        if graph.node_count() != schema.len() {
            return Err(Error::Graph(format!(
                "graph has {} nodes but the schema declares {} features",
                graph.node_count(),
                schema.len()
            )));
        }
        catalog.check_against(&schema)?;
        Ok(Self {
            schema,
            graph,
            catalog,
            cost_floor: default_floor(),
        })
    }

    pub fn with_cost_floor(mut self, floor: Option<f64>) -> Self {
        self.cost_floor = floor;
        self
    }

    /// Length of the weight vector.
    pub fn m(&self) -> usize {
        self.graph.weight_len()
    }

    /// Precondition holds and the target feature stays in its domain.
    pub fn is_applicable(&self, a: Action, s: &State) -> bool {
        let f = self.catalog.function(a.function);
        f.precondition.holds(s) && self.schema.feature(f.target).contains(f.new_value(s[f.target], a.arg))
    }

    fn check_applicable(&self, a: Action, s: &State) -> Result<()> {
        if !self.catalog.contains(a) {
            return Err(Error::Config(format!("action {a:?} is not in the catalog")));
        }
        let f = self.catalog.function(a.function);
        if !f.precondition.holds(s) {
            return Err(Error::PreconditionViolated {
                action: self.catalog.label(a, &self.schema),
            });
        }
        let new = f.new_value(s[f.target], a.arg);
        let feature = self.schema.feature(f.target);
        if !feature.contains(new) {
            return Err(Error::OutOfDomain {
                feature: feature.name.clone(),
                value: new,
            });
        }
        Ok(())
    }

    /// Applies one action; changes exactly the target feature.
    pub fn step(&self, a: Action, s: &State) -> Result<State> {
        self.check_applicable(a, s)?;
        Ok(self.step_unchecked(a, s))
    }

    pub(crate) fn step_unchecked(&self, a: Action, s: &State) -> State {
        let f = self.catalog.function(a.function);
        s.with(f.target, f.new_value(s[f.target], a.arg))
    }

    pub fn cost_form(&self, a: Action, s: &State) -> CostForm {
        let f = self.catalog.function(a.function);
        let i = f.target;
        let delta = f.new_value(s[i], a.arg) - s[i];
        let parents = self.graph.parents(i);
        let mut terms = Vec::with_capacity(1 + parents.len());
        terms.push((i, delta));
        terms.extend(parents.iter().map(|&(j, widx)| (widx, s[j])));
        CostForm { terms }
    }

    /// Unclamped cost; linear in `w`.
    pub fn raw_action_cost(&self, a: Action, s: &State, w: &ScmWeights) -> Result<f64> {
        self.check_applicable(a, s)?;
        Ok(self.cost_form(a, s).raw(w.values()))
    }

    pub fn action_cost(&self, a: Action, s: &State, w: &ScmWeights) -> Result<f64> {
        self.check_applicable(a, s)?;
        Ok(self.cost_form(a, s).eval(w.values(), self.cost_floor))
    }

    pub(crate) fn action_cost_unchecked(&self, a: Action, s: &State, w: &[f64]) -> f64 {
        self.cost_form(a, s).eval(w, self.cost_floor)
    }

    /// All visited states, starting with `s0`; `len = |I| + 1`.
    pub fn trajectory(&self, intervention: &[Action], s0: &State) -> Result<Vec<State>> {
        let mut states = Vec::with_capacity(intervention.len() + 1);
        states.push(s0.clone());
        for (t, &a) in intervention.iter().enumerate() {
            let next = self
                .step(a, &states[t])
                .map_err(|e| Error::InapplicableAtStep {
                    step: t,
                    reason: e.to_string(),
                })?;
            states.push(next);
        }
        Ok(states)
    }

    pub fn apply(&self, intervention: &[Action], s0: &State) -> Result<State> {
        Ok(self.trajectory(intervention, s0)?.pop().expect("trajectory is never empty"))
    }

    pub fn intervention_cost(&self, intervention: &[Action], s0: &State, w: &ScmWeights) -> Result<f64> {
        let states = self.trajectory(intervention, s0)?;
        let mut total = 0.0;
        for (a, s) in intervention.iter().zip(&states) {
            total += self.cost_form(*a, s).eval(w.values(), self.cost_floor);
        }
        Ok(total)
    }

    pub fn cost_profile(&self, intervention: &[Action], s0: &State) -> Result<CostProfile> {
        let states = self.trajectory(intervention, s0)?;
        Ok(CostProfile {
            steps: intervention
                .iter()
                .zip(&states)
                .map(|(a, s)| self.cost_form(*a, s))
                .collect(),
            floor: self.cost_floor,
        })
    }

    /// Catalog actions applicable in `s`, in catalog order.
    pub fn feasible_actions(&self, s: &State) -> Vec<Action> {
        self.catalog
            .actions()
            .iter()
            .copied()
            .filter(|&a| self.is_applicable(a, s))
            .collect()
    }

    /// `h(I(s0)) != h(s0)`.
    pub fn achieves_recourse(&self, intervention: &[Action], s0: &State, h: &dyn Classifier) -> Result<bool> {
        let end = self.apply(intervention, s0)?;
        Ok(h.predict(&end) != h.predict(s0))
    }

    pub fn describe_intervention(&self, intervention: &Intervention, s0: &State) -> Result<Vec<String>> {
        let states = self.trajectory(intervention, s0)?;
        Ok(intervention
            .iter()
            .zip(&states)
            .map(|(a, s)| self.catalog.describe(*a, s, &self.schema))
            .collect())
    }

    pub fn weight_labels(&self) -> Vec<String> {
        let names: Vec<String> = self.schema.features().iter().map(|f| f.name.clone()).collect();
        self.graph.weight_labels(&names)
    }

    /// SHA-256 of the canonical JSON encoding; stamped into trained artifacts
    /// so that a model is never loaded against a different problem.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let bytes = serde_json::to_vec(self).expect("problem serialises");
        hex::encode(Sha256::digest(bytes))
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::action::{ActionFunction, Effect};
    use crate::classifier::RuleClassifier;
    use crate::precondition::Precondition;
    use crate::schema::Feature;

    pub(crate) fn single_node() -> RecourseProblem {
        let schema = FeatureSchema::new(vec![Feature::numeric("x", 0.0, 10.0, None)]).unwrap();
        let graph = CausalGraph::new(1, vec![]).unwrap();
        let catalog = ActionCatalog::new(vec![ActionFunction {
            name: "raise".into(),
            target: 0,
            effect: Effect::Add,
            arguments: vec![2.0, -1.0],
            precondition: Precondition::always(),
        }])
        .unwrap();
        RecourseProblem::new(schema, graph, catalog).unwrap()
    }

    fn income_problem() -> RecourseProblem {
        let schema = FeatureSchema::new(vec![
            Feature::numeric("income", 0.0, 5000.0, None),
            Feature::numeric("age", 18.0, 90.0, None),
        ])
        .unwrap();
        let catalog = ActionCatalog::new(vec![ActionFunction {
            name: "change_income".into(),
            target: 0,
            effect: Effect::Add,
            arguments: vec![500.0, 600.0],
            precondition: Precondition::parse("age >= 18", &schema).unwrap(),
        }])
        .unwrap();
        let graph = CausalGraph::new(2, vec![(1, 0)]).unwrap();
        RecourseProblem::new(schema, graph, catalog).unwrap()
    }

    #[test]
    fn single_node_cost() {
        let p = single_node();
        let w = ScmWeights::new(vec![2.0]);
        let s = State::new(vec![1.0]);
        assert_eq!(p.action_cost(Action::new(0, 0), &s, &w).unwrap(), 4.0);
    }

    #[test]
    fn zero_weights_cost_nothing() {
        let p = income_problem();
        let s = State::new(vec![1000.0, 30.0]);
        let w = ScmWeights::zeros(p.m());
        assert_eq!(p.action_cost(Action::new(0, 1), &s, &w).unwrap(), 0.0);
    }

    #[test]
    fn negative_raw_costs_are_clamped() {
        let p = single_node();
        let w = ScmWeights::new(vec![2.0]);
        let s = State::new(vec![5.0]);
        assert_eq!(p.raw_action_cost(Action::new(0, 1), &s, &w).unwrap(), -2.0);
        assert_eq!(p.action_cost(Action::new(0, 1), &s, &w).unwrap(), 0.0);
        let unclamped = p.clone().with_cost_floor(None);
        assert_eq!(unclamped.action_cost(Action::new(0, 1), &s, &w).unwrap(), -2.0);
    }

    #[test]
    fn parent_term_uses_pre_action_state() {
        let p = income_problem();
        let s = State::new(vec![1000.0, 30.0]);
        let w = ScmWeights::new(vec![0.01, 0.0, 0.5]);
        // 0.01 * 500 + 0.5 * 30
        assert_eq!(p.action_cost(Action::new(0, 0), &s, &w).unwrap(), 5.0 + 15.0);
    }

    #[test]
    fn apply_edits_a_single_feature() {
        let p = income_problem();
        let s = State::new(vec![1000.0, 30.0]);
        assert_eq!(p.apply(&[], &s).unwrap(), s);
        let end = p.apply(&[Action::new(0, 0)], &s).unwrap();
        assert_eq!(end.values(), &[1500.0, 30.0]);
    }

    #[test]
    fn errors_name_the_failing_step() {
        let p = single_node();
        let s = State::new(vec![7.0]);
        let err = p.apply(&[Action::new(0, 0), Action::new(0, 0)], &s).unwrap_err();
        assert!(matches!(err, Error::InapplicableAtStep { step: 1, .. }));
        assert!(matches!(
            p.action_cost(Action::new(0, 0), &State::new(vec![9.0]), &ScmWeights::new(vec![1.0])),
            Err(Error::OutOfDomain { .. })
        ));
    }

    #[test]
    fn recourse_check() {
        let p = income_problem();
        let h = RuleClassifier::parse(&["income >= 2000"], &p.schema).unwrap();
        let s = State::new(vec![1500.0, 30.0]);
        assert!(!p.achieves_recourse(&[], &s, &h).unwrap());
        assert!(p.achieves_recourse(&[Action::new(0, 1)], &s, &h).unwrap());
        assert!(!p.achieves_recourse(&[Action::new(0, 1)], &State::new(vec![0.0, 30.0]), &h).unwrap());
    }

    #[test]
    fn feasible_actions_respect_domain_and_preconditions() {
        let p = single_node();
        assert_eq!(p.feasible_actions(&State::new(vec![0.0])), vec![Action::new(0, 0)]);
        assert_eq!(p.feasible_actions(&State::new(vec![9.0])), vec![Action::new(0, 1)]);
        assert_eq!(p.feasible_actions(&State::new(vec![5.0])).len(), 2);
    }

    #[test]
    fn profile_matches_direct_cost() {
        let p = income_problem();
        let s = State::new(vec![1000.0, 40.0]);
        let w = ScmWeights::new(vec![0.003, 0.2, 0.07]);
        let i = vec![Action::new(0, 0), Action::new(0, 1), Action::new(0, 0)];
        let direct = p.intervention_cost(&i, &s, &w).unwrap();
        assert_eq!(p.cost_profile(&i, &s).unwrap().cost(w.values()), direct);
    }
}
