//! Datasets and their generators, loaded once and shared immutably.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::Context;
use recourse_core::efare::EfareGenerator;
use recourse_core::eval::GeneratorKind;
use recourse_core::generator::{ExhaustiveGenerator, PolicyModel, WfareGenerator};
use recourse_core::{Dataset, RecourseEnv, RecourseGenerator};

use crate::artifacts::{dataset_artifact, load_automaton, load_policy, AUTOMATON_FILE, POLICY_FILE};

pub fn kind_name(kind: GeneratorKind) -> &'static str {
    match kind {
        GeneratorKind::Wfare => "wfare",
        GeneratorKind::Wefare => "wefare",
        GeneratorKind::Exhaustive => "exhaustive",
    }
}

pub fn parse_kind(name: &str) -> Option<GeneratorKind> {
    match name {
        "wfare" => Some(GeneratorKind::Wfare),
        "wefare" => Some(GeneratorKind::Wefare),
        "exhaustive" => Some(GeneratorKind::Exhaustive),
        _ => None,
    }
}

/// Where to find trained models for one dataset.
#[derive(Debug, Clone, Default)]
pub struct ModelPaths {
    pub policy: Option<PathBuf>,
    pub automaton: Option<PathBuf>,
}

impl ModelPaths {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            policy: Some(dir.join(POLICY_FILE)),
            automaton: Some(dir.join(AUTOMATON_FILE)),
        }
    }
}

pub struct DatasetEntry {
    pub dataset: Dataset,
    pub env: Arc<RecourseEnv>,
    pub wfare: Option<WfareGenerator>,
    pub wefare: Option<EfareGenerator>,
    pub exhaustive: ExhaustiveGenerator,
    /// True when the W-FARE policy was loaded from a trained artifact.
    pub trained: bool,
}

impl DatasetEntry {
    /// Loads whatever models exist. A missing W-FARE model falls back to
    /// the untrained (uniform-prior) policy; a missing automaton simply
    /// makes W-EFARE unavailable.
    pub fn load(dataset: Dataset, paths: &ModelPaths) -> anyhow::Result<Self> {
        let env = Arc::new(dataset.env.clone());
        let (policy, trained) = match paths.policy.as_deref().filter(|p| p.is_file()) {
            Some(p) => (load_policy(p, &env.problem)?, true),
            None => {
                tracing::warn!(dataset = %dataset.name, "no trained W-FARE model; using the uniform prior policy");
                (PolicyModel::new(&env.problem, dataset.generator.hidden, 0)?, false)
            }
        };
        let wfare = Some(WfareGenerator {
            env: env.clone(),
            policy: Arc::new(policy),
            config: dataset.generator.clone(),
        });
        let wefare = match paths.automaton.as_deref().filter(|p| p.is_file()) {
            Some(p) => Some(EfareGenerator {
                env: env.clone(),
                automaton: Arc::new(load_automaton(p, &env.problem)?),
                max_len: dataset.generator.max_horizon,
            }),
            None => None,
        };
        let exhaustive = ExhaustiveGenerator {
            env: env.clone(),
            max_len: dataset.experiment.oracle_max_len,
        };
        Ok(Self {
            dataset,
            env,
            wfare,
            wefare,
            exhaustive,
            trained,
        })
    }

    /// Loads a generator that must be backed by its artifact (no fallback).
    pub fn load_strict(dataset: Dataset, kind: GeneratorKind, paths: &ModelPaths) -> anyhow::Result<Self> {
        match kind {
            GeneratorKind::Wfare => {
                let p = paths.policy.clone().context("no model path given")?;
                load_policy(&p, &dataset.env.problem)?;
            }
            GeneratorKind::Wefare => {
                let p = paths.automaton.clone().context("no automaton path given")?;
                load_automaton(&p, &dataset.env.problem)?;
            }
            GeneratorKind::Exhaustive => {}
        }
        Self::load(dataset, paths)
    }

    pub fn generator(&self, kind: GeneratorKind) -> Option<&dyn RecourseGenerator> {
        match kind {
            GeneratorKind::Wfare => self.wfare.as_ref().map(|g| g as &dyn RecourseGenerator),
            GeneratorKind::Wefare => self.wefare.as_ref().map(|g| g as &dyn RecourseGenerator),
            GeneratorKind::Exhaustive => Some(&self.exhaustive),
        }
    }

    pub fn available(&self) -> Vec<GeneratorKind> {
        [GeneratorKind::Wfare, GeneratorKind::Wefare, GeneratorKind::Exhaustive]
            .into_iter()
            .filter(|k| self.generator(*k).is_some())
            .collect()
    }
}

#[derive(Default)]
pub struct Registry {
    entries: BTreeMap<String, Arc<DatasetEntry>>,
}

impl Registry {
    /// Loads every dataset document; models come from `<artifacts>/<name>/`.
    pub fn load(configs: &[PathBuf], artifacts: &Path) -> anyhow::Result<Self> {
        let mut registry = Self::default();
        for path in configs {
            let dataset = Dataset::load(path).with_context(|| format!("loading dataset {}", path.display()))?;
            let paths = ModelPaths {
                policy: Some(dataset_artifact(artifacts, &dataset.name, POLICY_FILE)),
                automaton: Some(dataset_artifact(artifacts, &dataset.name, AUTOMATON_FILE)),
            };
            registry.insert(DatasetEntry::load(dataset, &paths)?);
        }
        Ok(registry)
    }

    pub fn insert(&mut self, entry: DatasetEntry) {
        self.entries.insert(entry.dataset.name.clone(), Arc::new(entry));
    }

    pub fn get(&self, name: &str) -> Option<Arc<DatasetEntry>> {
        self.entries.get(name).cloned()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Arc<DatasetEntry>> {
        self.entries.values()
    }
}
