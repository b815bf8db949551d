//! JSON wire types. These are the only shapes that leave the service; none
//! of them carries weights, weight estimates or posterior particles.

use std::collections::BTreeMap;

use recourse_core::efare::{augmented_names, BooleanRule};
use recourse_core::elicit::{CandidateIntervention, Phase, Session};
use recourse_core::eval::GeneratorKind;
use recourse_core::{Action, Feature, FeatureValue, RecourseProblem, State};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateSessionRequest {
    pub dataset: String,
    pub features: BTreeMap<String, FeatureValue>,
    /// Question budget; the dataset default when absent.
    #[serde(default)]
    pub q: Option<usize>,
    /// Choice-set size; the dataset default when absent.
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub generator: Option<GeneratorKind>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChoiceRequest {
    pub index: usize,
    /// Round being answered. Re-sending an answered `(round, index)` pair
    /// returns the stored response instead of advancing again.
    #[serde(default)]
    pub round: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiAction {
    pub label: String,
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiItem {
    pub index: usize,
    pub first_action: String,
    pub actions: Vec<ApiAction>,
    pub expected_cost: f64,
    pub achieves_recourse: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiChoiceSet {
    pub round: usize,
    pub items: Vec<ApiItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiResult {
    pub actions: Vec<ApiAction>,
    pub achieves_recourse: bool,
    pub estimated_cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    AwaitingChoice,
    Finalized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub schema_version: u32,
    pub session_id: String,
    pub dataset: String,
    pub generator: GeneratorKind,
    pub status: SessionStatus,
    pub round: usize,
    pub budget: usize,
    pub set_size: usize,
    pub created_at: u64,
    pub updated_at: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub choice_set: Option<ApiChoiceSet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<ApiResult>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub name: String,
    pub description: String,
    pub generators: Vec<GeneratorKind>,
    pub trained: bool,
    pub default_q: usize,
    pub default_k: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ActionSummary {
    pub name: String,
    pub target: String,
    pub arguments: Vec<String>,
    pub precondition: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetSchema {
    pub schema_version: u32,
    pub name: String,
    pub features: Vec<Feature>,
    pub actions: Vec<ActionSummary>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ApiErrorBody {
    pub error: String,
}

pub fn describe_actions(
    problem: &RecourseProblem,
    intervention: &[Action],
    s0: &State,
    rules: Option<&[BooleanRule]>,
) -> Vec<ApiAction> {
    let descriptions = problem
        .describe_intervention(&intervention.to_vec(), s0)
        .unwrap_or_else(|_| vec![String::new(); intervention.len()]);
    let names = augmented_names(problem);
    intervention
        .iter()
        .zip(descriptions)
        .enumerate()
        .map(|(i, (a, description))| ApiAction {
            label: problem.catalog.label(*a, &problem.schema),
            description,
            rule: rules.and_then(|r| r.get(i)).map(|r| r.render(&problem.schema, &names)),
        })
        .collect()
}

pub fn item_view(problem: &RecourseProblem, state: &State, index: usize, c: &CandidateIntervention) -> ApiItem {
    ApiItem {
        index,
        first_action: problem.catalog.label(c.first, &problem.schema),
        actions: describe_actions(problem, &c.intervention, state, c.rules.as_deref()),
        expected_cost: c.expected_cost,
        achieves_recourse: c.success,
    }
}

pub struct ViewMeta<'a> {
    pub id: &'a str,
    pub dataset: &'a str,
    pub generator: GeneratorKind,
    pub created_at: u64,
    pub updated_at: u64,
}

pub fn session_view(problem: &RecourseProblem, session: &Session, meta: ViewMeta<'_>) -> SessionView {
    let (status, choice_set, result) = match &session.phase {
        Phase::AwaitingChoice { set } => (
            SessionStatus::AwaitingChoice,
            Some(ApiChoiceSet {
                round: session.round,
                items: set
                    .items
                    .iter()
                    .enumerate()
                    .map(|(i, c)| item_view(problem, &session.state, i, c))
                    .collect(),
            }),
            None,
        ),
        Phase::Finalized { result } => (
            SessionStatus::Finalized,
            None,
            Some(ApiResult {
                actions: describe_actions(problem, &result.intervention, &session.s0, result.rules.as_deref()),
                achieves_recourse: result.success,
                estimated_cost: result.estimated_cost,
            }),
        ),
        // transient; never persisted
        Phase::Querying => (SessionStatus::AwaitingChoice, None, None),
    };
    SessionView {
        schema_version: SCHEMA_VERSION,
        session_id: meta.id.to_string(),
        dataset: meta.dataset.to_string(),
        generator: meta.generator,
        status,
        round: session.round,
        budget: session.config.budget,
        set_size: session.config.set_size,
        created_at: meta.created_at,
        updated_at: meta.updated_at,
        choice_set,
        result,
    }
}
