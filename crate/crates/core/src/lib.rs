pub mod action;
pub mod belief;
pub mod classifier;
pub mod config;
pub mod efare;
pub mod elicit;
pub mod encoding;
pub mod env;
pub mod eval;
pub mod error;
pub mod generator;
pub mod graph;
pub mod precondition;
pub mod problem;
pub mod schema;
pub mod search;

pub use action::{Action, ActionCatalog, ActionFunction, Effect, Intervention};
pub use classifier::{Classifier, ClassifierModel, LogisticClassifier, RuleClassifier, FAVORABLE, UNFAVORABLE};
pub use error::{Error, Result};
pub use graph::{CausalGraph, ScmWeights};
pub use precondition::Precondition;
pub use problem::{CostForm, CostProfile, RecourseProblem};
pub use schema::{Feature, FeatureKind, FeatureSchema, FeatureValue, State};
pub use env::RecourseEnv;
pub use generator::{Generated, GeneratorConfig, RecourseGenerator};
pub use config::Dataset;
pub use elicit::{Session, SessionConfig, SessionContext, Transcript};
pub use eval::{ExperimentConfig, ExperimentReport, ResponseModel};
