//! Feature schemas and user states.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DOMAIN_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureKind {
    Categorical {
        levels: Vec<String>,
    },
    Numeric {
        min: f64,
        max: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        step: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feature {
    pub name: String,
    #[serde(flatten)]
    pub kind: FeatureKind,
}

impl Feature {
    pub fn numeric(name: &str, min: f64, max: f64, step: Option<f64>) -> Self {
        Self {
            name: name.to_string(),
            kind: FeatureKind::Numeric { min, max, step },
        }
    }

    pub fn categorical(name: &str, levels: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            kind: FeatureKind::Categorical {
                levels: levels.iter().map(|l| l.to_string()).collect(),
            },
        }
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self.kind, FeatureKind::Categorical { .. })
    }

    /// Numeric bounds; categoricals span their level indices.
    pub fn bounds(&self) -> (f64, f64) {
        match &self.kind {
            FeatureKind::Categorical { levels } => (0.0, (levels.len() - 1) as f64),
            FeatureKind::Numeric { min, max, .. } => (*min, *max),
        }
    }

    pub fn contains(&self, value: f64) -> bool {
        if !value.is_finite() {
            return false;
        }
        match &self.kind {
            FeatureKind::Categorical { levels } => {
                value >= 0.0 && value.fract() == 0.0 && (value as usize) < levels.len()
            }
            FeatureKind::Numeric { min, max, .. } => {
                value >= min - DOMAIN_EPS && value <= max + DOMAIN_EPS
            }
        }
    }

    pub fn level_index(&self, level: &str) -> Option<usize> {
        match &self.kind {
            FeatureKind::Categorical { levels } => levels.iter().position(|l| l == level),
            FeatureKind::Numeric { .. } => None,
        }
    }

    /// Human-readable rendering of a value of this feature.
    pub fn display_value(&self, value: f64) -> String {
        match &self.kind {
            FeatureKind::Categorical { levels } => levels
                .get(value as usize)
                .cloned()
                .unwrap_or_else(|| format!("#{value}")),
            FeatureKind::Numeric { .. } => format_number(value),
        }
    }
}

pub(crate) fn format_number(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// Ordered list of features with name lookup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Feature>", into = "Vec<Feature>")]
pub struct FeatureSchema {
    features: Vec<Feature>,
    index: HashMap<String, usize>,
}

impl TryFrom<Vec<Feature>> for FeatureSchema {
    type Error = Error;

    fn try_from(features: Vec<Feature>) -> Result<Self> {
        Self::new(features)
    }
}

impl From<FeatureSchema> for Vec<Feature> {
    fn from(schema: FeatureSchema) -> Self {
        schema.features
    }
}

impl FeatureSchema {
    pub fn new(features: Vec<Feature>) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::Schema("schema declares no features".into()));
        }
        let mut index = HashMap::with_capacity(features.len());
        for (i, f) in features.iter().enumerate() {
            if index.insert(f.name.clone(), i).is_some() {
                return Err(Error::Schema(format!("duplicate feature name `{}`", f.name)));
            }
            match &f.kind {
                FeatureKind::Numeric { min, max, step } => {
                    if !(min.is_finite() && max.is_finite()) || min >= max {
                        return Err(Error::Schema(format!(
                            "feature `{}` needs finite bounds with min < max",
                            f.name
                        )));
                    }
                    if let Some(step) = step {
                        if !(step.is_finite() && *step > 0.0) {
                            return Err(Error::Schema(format!(
                                "feature `{}` has a non-positive step",
                                f.name
                            )));
                        }
                    }
                }
                FeatureKind::Categorical { levels } => {
                    if levels.is_empty() {
                        return Err(Error::Schema(format!("feature `{}` has no levels", f.name)));
                    }
                    let mut seen = std::collections::HashSet::new();
                    for l in levels {
                        if !seen.insert(l) {
                            return Err(Error::Schema(format!(
                                "feature `{}` repeats level `{l}`",
                                f.name
                            )));
                        }
                    }
                }
            }
        }
        Ok(Self { features, index })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn feature(&self, i: usize) -> &Feature {
        &self.features[i]
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownFeature(name.to_string()))
    }

    pub fn validate(&self, state: &State) -> Result<()> {
        if state.len() != self.len() {
            return Err(Error::StateArity {
                expected: self.len(),
                got: state.len(),
            });
        }
        for (f, &v) in self.features.iter().zip(state.values()) {
            if !f.contains(v) {
                return Err(Error::OutOfDomain {
                    feature: f.name.clone(),
                    value: v,
                });
            }
        }
        Ok(())
    }

    /// Builds a state from `(name, value)` pairs; categorical values may be
    /// given as level names through [`FeatureValue::Level`].
    pub fn state_from_pairs<'a, I>(&self, pairs: I) -> Result<State>
    where
        I: IntoIterator<Item = (&'a str, FeatureValue)>,
    {
        let mut values = vec![f64::NAN; self.len()];
        for (name, value) in pairs {
            let i = self.index_of(name)?;
            values[i] = match value {
                FeatureValue::Number(v) => v,
                FeatureValue::Level(level) => {
                    self.features[i]
                        .level_index(&level)
                        .ok_or_else(|| Error::OutOfDomain {
                            feature: name.to_string(),
                            value: f64::NAN,
                        })? as f64
                }
            };
        }
        if let Some(i) = values.iter().position(|v| v.is_nan()) {
            return Err(Error::Schema(format!(
                "missing value for feature `{}`",
                self.features[i].name
            )));
        }
        let state = State::new(values);
        self.validate(&state)?;
        Ok(state)
    }

    /// Uniform draw over the domain, snapped to the step grid when one is declared.
    pub fn sample_state<R: Rng + ?Sized>(&self, rng: &mut R) -> State {
        let values = self
            .features
            .iter()
            .map(|f| match &f.kind {
                FeatureKind::Categorical { levels } => rng.random_range(0..levels.len()) as f64,
                FeatureKind::Numeric { min, max, step } => match step {
                    Some(step) => {
                        let n = ((max - min) / step + DOMAIN_EPS).floor() as usize;
                        min + step * rng.random_range(0..=n) as f64
                    }
                    None => rng.random_range(*min..=*max),
                },
            })
            .collect();
        State::new(values)
    }

    pub fn describe(&self, state: &State) -> String {
        self.features
            .iter()
            .zip(state.values())
            .map(|(f, &v)| format!("{}={}", f.name, f.display_value(v)))
            .collect::<Vec<_>>()
            .join(", ")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FeatureValue {
    Number(f64),
    Level(String),
}

/// A user's feature vector; categoricals hold their level index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct State(Vec<f64>);

impl State {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }

    pub(crate) fn with(&self, i: usize, value: f64) -> Self {
        let mut values = self.0.clone();
        values[i] = value;
        Self(values)
    }
}

impl std::ops::Index<usize> for State {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}
