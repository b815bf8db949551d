use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("feature `{feature}` value {value} is outside its domain")]
    OutOfDomain { feature: String, value: f64 },

    #[error("unknown feature `{0}`")]
    UnknownFeature(String),

    #[error("state has {got} values, schema declares {expected} features")]
    StateArity { expected: usize, got: usize },

    #[error("precondition of action `{action}` does not hold")]
    PreconditionViolated { action: String },

    #[error("intervention is not applicable at step {step}: {reason}")]
    InapplicableAtStep { step: usize, reason: String },

    #[error("invalid causal graph: {0}")]
    Graph(String),

    #[error("weight vector has length {got}, expected {expected}")]
    WeightArity { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("precondition parse error at `{input}`: {reason}")]
    Parse { input: String, reason: String },

    #[error("degenerate training data: {0}")]
    DegenerateData(String),

    #[error("invalid prior: {0}")]
    Prior(String),

    #[error("no feasible action in the current state")]
    NoFeasibleAction,

    #[error("forced first action `{0}` is infeasible")]
    ForcedActionInfeasible(String),

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("session error: {0}")]
    Session(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("artifact mismatch: {0}")]
    Artifact(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
