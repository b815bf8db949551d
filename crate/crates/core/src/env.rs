use serde::{Deserialize, Serialize};

use crate::action::Action;
use crate::classifier::{Classifier, ClassifierModel};
use crate::error::Result;
use crate::graph::ScmWeights;
use crate::problem::RecourseProblem;
use crate::schema::State;

/// A cost model paired with the classifier whose decision is being contested.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecourseEnv {
    pub problem: RecourseProblem,
    pub classifier: ClassifierModel,
}

impl RecourseEnv {
    pub fn new(problem: RecourseProblem, classifier: ClassifierModel) -> Self {
        Self { problem, classifier }
    }

    pub fn is_favorable(&self, s: &State) -> bool {
        self.classifier.is_favorable(s)
    }

    pub fn achieves_recourse(&self, intervention: &[Action], s0: &State) -> Result<bool> {
        self.problem.achieves_recourse(intervention, s0, &self.classifier)
    }

    /// True iff the intervention ends in a favorable state.
    pub fn reaches_favorable(&self, intervention: &[Action], s0: &State) -> Result<bool> {
        Ok(self.is_favorable(&self.problem.apply(intervention, s0)?))
    }

    pub fn cost(&self, intervention: &[Action], s0: &State, w: &ScmWeights) -> Result<f64> {
        self.problem.intervention_cost(intervention, s0, w)
    }
}
