//! Dataset documents: one TOML file declaring the schema, the action
//! catalog with precondition expressions, causal edges, the classifier, the
//! weight prior, the ground-truth weight mixture and run defaults.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::action::{ActionCatalog, ActionFunction, Effect};
use crate::belief::{MixtureComponent, MixturePrior};
use crate::classifier::{
    read_labeled_csv, train_logistic_classifier, ClassifierModel, LogisticTraining, RuleClassifier,
};
use crate::env::RecourseEnv;
use crate::error::{Error, Result};
use crate::eval::ExperimentConfig;
use crate::generator::GeneratorConfig;
use crate::graph::CausalGraph;
use crate::elicit::SessionConfig;
use crate::precondition::Precondition;
use crate::problem::RecourseProblem;
use crate::schema::{Feature, FeatureSchema, FeatureValue, State};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSpec {
    pub name: String,
    pub target: String,
    pub effect: Effect,
    /// Numbers, or level names for `set` actions on categorical features.
    pub arguments: Vec<FeatureValue>,
    #[serde(default)]
    pub precondition: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassifierSpec {
    /// Favorable iff any rule holds.
    Rule { rules: Vec<String> },
    /// Logistic regression trained on a labelled CSV (path relative to the document).
    Logistic {
        data: String,
        #[serde(default)]
        training: LogisticTraining,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum PopulationSpec {
    /// Uniform draws from the schema domain.
    Sample { count: usize, seed: u64 },
    /// Rows of a CSV with one column per feature (extra columns ignored).
    Csv { path: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetDocument {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub features: Vec<Feature>,
    pub actions: Vec<ActionSpec>,
    #[serde(default)]
    pub causal_edges: Vec<(String, String)>,
    pub classifier: ClassifierSpec,
    /// Belief prior over `w` used by elicitation.
    pub prior: Vec<MixtureComponent>,
    /// Generative mixture the simulated users' true weights come from.
    pub true_weights: Vec<MixtureComponent>,
    pub population: PopulationSpec,
    #[serde(default)]
    pub generator: GeneratorConfig,
    #[serde(default)]
    pub session: SessionConfig,
    #[serde(default)]
    pub experiment: ExperimentConfig,
}

/// A loaded dataset: environment, priors, user population and defaults.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub description: String,
    pub env: RecourseEnv,
    pub prior: MixturePrior,
    pub true_weights: MixturePrior,
    pub population: Vec<State>,
    pub generator: GeneratorConfig,
    pub session: SessionConfig,
    pub experiment: ExperimentConfig,
    pub document: DatasetDocument,
}

impl Dataset {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let doc: DatasetDocument = toml::from_str(&text)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_document(doc, &base)
    }

    pub fn from_document(doc: DatasetDocument, base: &Path) -> Result<Self> {
        let schema = FeatureSchema::new(doc.features.clone())?;
        let functions = doc
            .actions
            .iter()
            .map(|a| resolve_action(a, &schema))
            .collect::<Result<Vec<_>>>()?;
        let catalog = ActionCatalog::new(functions)?;
        let edges = doc
            .causal_edges
            .iter()
            .map(|(from, to)| Ok((schema.index_of(from)?, schema.index_of(to)?)))
            .collect::<Result<Vec<_>>>()?;
        let graph = CausalGraph::new(schema.len(), edges)?;
        let problem = RecourseProblem::new(schema, graph, catalog)?;
        let classifier = match &doc.classifier {
            ClassifierSpec::Rule { rules } => ClassifierModel::Rule(RuleClassifier::parse(rules, &problem.schema)?),
            ClassifierSpec::Logistic { data, training } => {
                let file = std::fs::File::open(resolve(base, data))?;
                let rows = read_labeled_csv(file, &problem.schema)?;
                ClassifierModel::Logistic(train_logistic_classifier(&problem.schema, &rows, training.clone())?)
            }
        };
        let prior = MixturePrior::new(doc.prior.clone())?;
        let true_weights = MixturePrior::new(doc.true_weights.clone())?;
        for (what, p) in [("prior", &prior), ("true_weights", &true_weights)] {
            if p.dim() != problem.m() {
                return Err(Error::Config(format!(
                    "{what} has dimension {}, the weight vector has {} entries ({})",
                    p.dim(),
                    problem.m(),
                    problem.weight_labels().join(", ")
                )));
            }
        }
        let population = match &doc.population {
            PopulationSpec::Sample { count, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                (0..*count).map(|_| problem.schema.sample_state(&mut rng)).collect()
            }
            PopulationSpec::Csv { path } => {
                let file = std::fs::File::open(resolve(base, path))?;
                read_states_csv(file, &problem.schema)?
            }
        };
        doc.generator.validate()?;
        doc.session.validate()?;
        Ok(Self {
            name: doc.name.clone(),
            description: doc.description.clone(),
            env: RecourseEnv::new(problem, classifier),
            prior,
            true_weights,
            population,
            generator: doc.generator.clone(),
            session: doc.session.clone(),
            experiment: doc.experiment.clone(),
            document: doc,
        })
    }

    /// Seeded shuffle of the unfavorable population split into a training
    /// part (`train_fraction`, at least one state) and a held-out part.
    pub fn split_unfavorable(&self, train_fraction: f64, seed: u64) -> (Vec<State>, Vec<State>) {
        let mut states = self.unfavorable_states();
        states.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let cut = ((states.len() as f64 * train_fraction).round() as usize).clamp(1.min(states.len()), states.len());
        let held = states.split_off(cut);
        (states, held)
    }

    /// Population members the classifier currently rejects.
    pub fn unfavorable_states(&self) -> Vec<State> {
        self.population
            .iter()
            .filter(|s| !self.env.is_favorable(s))
            .cloned()
            .collect()
    }
}

fn resolve(base: &Path, file: &str) -> PathBuf {
    let p = Path::new(file);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn resolve_action(spec: &ActionSpec, schema: &FeatureSchema) -> Result<ActionFunction> {
    let target = schema.index_of(&spec.target)?;
    let feature = schema.feature(target);
    let arguments = spec
        .arguments
        .iter()
        .map(|v| match v {
            FeatureValue::Number(x) => Ok(*x),
            FeatureValue::Level(l) => feature.level_index(l).map(|i| i as f64).ok_or_else(|| {
                Error::Config(format!("action `{}`: `{l}` is not a level of `{}`", spec.name, feature.name))
            }),
        })
        .collect::<Result<Vec<_>>>()?;
    let precondition = match &spec.precondition {
        Some(text) => Precondition::parse(text, schema)?,
        None => Precondition::always(),
    };
    Ok(ActionFunction {
        name: spec.name.clone(),
        target,
        effect: spec.effect,
        arguments,
        precondition,
    })
}

/// Reads states from a CSV whose header names the schema features.
pub fn read_states_csv<R: std::io::Read>(reader: R, schema: &FeatureSchema) -> Result<Vec<State>> {
    let mut csv = csv::Reader::from_reader(reader);
    let headers = csv.headers()?.clone();
    let cols = schema
        .features()
        .iter()
        .map(|f| {
            headers
                .iter()
                .position(|h| h == f.name)
                .ok_or_else(|| Error::Config(format!("missing column `{}`", f.name)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::new();
    for record in csv.records() {
        let record = record?;
        let pairs: Vec<(&str, FeatureValue)> = schema
            .features()
            .iter()
            .zip(&cols)
            .map(|(f, &c)| {
                let cell = record[c].trim();
                let value = match cell.parse::<f64>() {
                    Ok(v) if !f.is_categorical() || f.level_index(cell).is_none() => FeatureValue::Number(v),
                    _ => FeatureValue::Level(cell.to_string()),
                };
                (f.name.as_str(), value)
            })
            .collect();
        out.push(schema.state_from_pairs(pairs)?);
    }
    Ok(out)
}
