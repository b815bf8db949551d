//! Black-box binary classifiers. Label [`FAVORABLE`] is the desired outcome.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::encoding::FeatureEncoder;
use crate::error::{Error, Result};
use crate::precondition::Precondition;
use crate::schema::{FeatureKind, FeatureSchema, State};

pub const FAVORABLE: u8 = 1;
pub const UNFAVORABLE: u8 = 0;

pub trait Classifier: Send + Sync {
    fn predict(&self, state: &State) -> u8;

    fn is_favorable(&self, state: &State) -> bool {
        self.predict(state) == FAVORABLE
    }
}

/// Disjunction of conjunctive rules: favorable iff any rule holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleClassifier {
    pub rules: Vec<Precondition>,
}

impl RuleClassifier {
    pub fn parse<S: AsRef<str>>(rules: &[S], schema: &FeatureSchema) -> Result<Self> {
        let rules = rules
            .iter()
            .map(|r| Precondition::parse(r.as_ref(), schema))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { rules })
    }
}

impl Classifier for RuleClassifier {
    fn predict(&self, state: &State) -> u8 {
        if self.rules.iter().any(|r| r.holds(state)) {
            FAVORABLE
        } else {
            UNFAVORABLE
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticClassifier {
    pub encoder: FeatureEncoder,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub threshold: f64,
    pub training_accuracy: f64,
}

impl LogisticClassifier {
    pub fn probability(&self, state: &State) -> f64 {
        let x = self.encoder.encode(state);
        let z = self.bias + x.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>();
        sigmoid(z)
    }
}

impl Classifier for LogisticClassifier {
    fn predict(&self, state: &State) -> u8 {
        if self.probability(state) >= self.threshold {
            FAVORABLE
        } else {
            UNFAVORABLE
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticTraining {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
}

impl Default for LogisticTraining {
    fn default() -> Self {
        Self {
            epochs: 2000,
            learning_rate: 0.5,
            l2: 1e-4,
        }
    }
}

/// Full-batch gradient descent on the regularised log-loss.
pub fn train_logistic_classifier(
    schema: &FeatureSchema,
    rows: &[(State, u8)],
    opts: LogisticTraining,
) -> Result<LogisticClassifier> {
    let positives = rows.iter().filter(|(_, y)| *y == FAVORABLE).count();
    if rows.is_empty() || positives == 0 || positives == rows.len() {
        return Err(Error::DegenerateData("training data must contain both classes".into()));
    }
    for (s, _) in rows {
        schema.validate(s)?;
    }
    let states: Vec<State> = rows.iter().map(|(s, _)| s.clone()).collect();
    let encoder = FeatureEncoder::fit(schema, &states);
    let xs: Vec<Vec<f64>> = states.iter().map(|s| encoder.encode(s)).collect();
    let ys: Vec<f64> = rows.iter().map(|(_, y)| f64::from(*y)).collect();
    let n = rows.len() as f64;
    let dim = encoder.width();
    let mut weights = vec![0.0; dim];
    let mut bias = 0.0;
    let mut grad = vec![0.0; dim];
    for _ in 0..opts.epochs {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut grad_b = 0.0;
        for (x, y) in xs.iter().zip(&ys) {
            let z = bias + x.iter().zip(&weights).map(|(a, b)| a * b).sum::<f64>();
            let err = sigmoid(z) - y;
            grad_b += err;
            for (g, xi) in grad.iter_mut().zip(x) {
                *g += err * xi;
            }
        }
        for (w, g) in weights.iter_mut().zip(&grad) {
            *w -= opts.learning_rate * (g / n + opts.l2 * *w);
        }
        bias -= opts.learning_rate * grad_b / n;
    }
    let mut model = LogisticClassifier {
        encoder,
        weights,
        bias,
        threshold: 0.5,
        training_accuracy: 0.0,
    };
    let correct = rows.iter().filter(|(s, y)| model.predict(s) == *y).count();
    model.training_accuracy = correct as f64 / n;
    Ok(model)
}

/// Serializable classifier choice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassifierModel {
    Rule(RuleClassifier),
    Logistic(LogisticClassifier),
}

impl Classifier for ClassifierModel {
    fn predict(&self, state: &State) -> u8 {
        match self {
            ClassifierModel::Rule(c) => c.predict(state),
            ClassifierModel::Logistic(c) => c.predict(state),
        }
    }
}

/// Reads a labelled CSV whose header names the schema features plus `label`.
/// Categorical cells may hold a level name or a level index.
pub fn read_labeled_csv<R: Read>(reader: R, schema: &FeatureSchema) -> Result<Vec<(State, u8)>> {
    let mut csv = csv::Reader::from_reader(reader);
    let headers = csv.headers()?.clone();
    let label_col = headers
        .iter()
        .position(|h| h == "label")
        .ok_or_else(|| Error::Config("dataset has no `label` column".into()))?;
    let cols = schema
        .features()
        .iter()
        .map(|f| {
            headers
                .iter()
                .position(|h| h == f.name)
                .ok_or_else(|| Error::Config(format!("dataset is missing column `{}`", f.name)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for record in csv.records() {
        let record = record?;
        let mut values = Vec::with_capacity(cols.len());
        for (f, &c) in schema.features().iter().zip(&cols) {
            let cell = record[c].trim();
            let v = match &f.kind {
                FeatureKind::Categorical { .. } => match f.level_index(cell) {
                    Some(i) => i as f64,
                    None => cell.parse::<f64>().map_err(|_| Error::OutOfDomain {
                        feature: f.name.clone(),
                        value: f64::NAN,
                    })?,
                },
                FeatureKind::Numeric { .. } => cell
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad number `{cell}` in `{}`", f.name)))?,
            };
            values.push(v);
        }
        let state = State::new(values);
        schema.validate(&state)?;
        let label = match record[label_col].trim() {
            "1" | "true" => FAVORABLE,
            "0" | "false" => UNFAVORABLE,
            other => return Err(Error::Config(format!("bad label `{other}`"))),
        };
        rows.push((state, label));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::schema::Feature;

    fn schema() -> FeatureSchema {
        FeatureSchema::new(vec![
            Feature::numeric("a", -5.0, 5.0, None),
            Feature::numeric("b", -5.0, 5.0, None),
        ])
        .unwrap()
    }

    #[test]
    fn separable_toy_set_is_fit_exactly() {
        let s = schema();
        let rows: Vec<(State, u8)> = [(-2.0, -1.0), (-1.0, -2.0), (-3.0, 0.5), (2.0, 1.0), (1.0, 2.5), (3.0, -0.5)]
            .iter()
            .map(|&(a, b)| (State::new(vec![a, b]), u8::from(a + b > 0.0)))
            .collect();
        let m = train_logistic_classifier(&s, &rows, LogisticTraining::default()).unwrap();
        assert_eq!(m.training_accuracy, 1.0);
    }

    #[test]
    fn single_class_is_rejected() {
        let s = schema();
        let rows = vec![(State::new(vec![0.0, 0.0]), 1), (State::new(vec![1.0, 0.0]), 1)];
        assert!(matches!(
            train_logistic_classifier(&s, &rows, LogisticTraining::default()),
            Err(Error::DegenerateData(_))
        ));
    }

    #[test]
    fn noisy_linear_rule_reaches_85_percent() {
        // Known rule 2a - b > 0.5 with 10% of labels flipped.
        let s = schema();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rows: Vec<(State, u8)> = (0..600)
            .map(|_| {
                let a = rng.random_range(-5.0..5.0);
                let b = rng.random_range(-5.0..5.0);
                let mut y = u8::from(2.0 * a - b > 0.5);
                if rng.random_bool(0.1) {
                    y = 1 - y;
                }
                (State::new(vec![a, b]), y)
            })
            .collect();
        let m = train_logistic_classifier(&s, &rows, LogisticTraining::default()).unwrap();
        assert!(m.training_accuracy >= 0.85, "accuracy {}", m.training_accuracy);
    }

    #[test]
    fn csv_loading_and_serialization() {
        let schema = FeatureSchema::new(vec![
            Feature::categorical("job", &["none", "worker"]),
            Feature::numeric("income", 0.0, 10.0, None),
        ])
        .unwrap();
        let data = "income,job,label\n1,none,0\n9,worker,1\n8,1,1\n2,0,0\n";
        let rows = read_labeled_csv(data.as_bytes(), &schema).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[1].0.values(), &[1.0, 9.0]);
        let m = ClassifierModel::Logistic(
            train_logistic_classifier(&schema, &rows, LogisticTraining::default()).unwrap(),
        );
        let json = serde_json::to_string(&m).unwrap();
        let back: ClassifierModel = serde_json::from_str(&json).unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), json);
        for (s, _) in &rows {
            assert_eq!(back.predict(s), m.predict(s));
        }
        assert!(read_labeled_csv("income,label\n1,0\n".as_bytes(), &schema).is_err());
    }
}
