use serde::{Deserialize, Serialize};

use crate::schema::{FeatureKind, FeatureSchema, State};

/// Numeric features are standardised with stored mean/stdev; categoricals
/// are one-hot encoded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureEncoder {
    columns: Vec<Column>,
    width: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Column {
    Numeric { mean: f64, std: f64 },
    OneHot { levels: usize },
}

impl FeatureEncoder {
    /// Centre numerics on their range midpoint and scale by the half-range.
    pub fn from_schema(schema: &FeatureSchema) -> Self {
        let columns = schema
            .features()
            .iter()
            .map(|f| match &f.kind {
                FeatureKind::Numeric { min, max, .. } => Column::Numeric {
                    mean: 0.5 * (min + max),
                    std: 0.5 * (max - min),
                },
                FeatureKind::Categorical { levels } => Column::OneHot {
                    levels: levels.len(),
                },
            })
            .collect();
        Self::with_columns(columns)
    }

    /// Fits means and standard deviations on `states`.
    pub fn fit(schema: &FeatureSchema, states: &[State]) -> Self {
        let n = states.len().max(1) as f64;
        let columns = schema
            .features()
            .iter()
            .enumerate()
            .map(|(i, f)| match &f.kind {
                FeatureKind::Numeric { .. } => {
                    let mean = states.iter().map(|s| s[i]).sum::<f64>() / n;
                    let var = states.iter().map(|s| (s[i] - mean).powi(2)).sum::<f64>() / n;
                    let std = if var > 1e-12 { var.sqrt() } else { 1.0 };
                    Column::Numeric { mean, std }
                }
                FeatureKind::Categorical { levels } => Column::OneHot {
                    levels: levels.len(),
                },
            })
            .collect();
        Self::with_columns(columns)
    }

    fn with_columns(columns: Vec<Column>) -> Self {
        let width = columns
            .iter()
            .map(|c| match c {
                Column::Numeric { .. } => 1,
                Column::OneHot { levels } => *levels,
            })
            .sum();
        Self { columns, width }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn encode_into(&self, state: &State, out: &mut Vec<f64>) {
        for (c, &v) in self.columns.iter().zip(state.values()) {
            match c {
                Column::Numeric { mean, std } => out.push((v - mean) / std),
                Column::OneHot { levels } => {
                    let hot = v as usize;
                    out.extend((0..*levels).map(|l| if l == hot { 1.0 } else { 0.0 }));
                }
            }
        }
    }

    pub fn encode(&self, state: &State) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.width);
        self.encode_into(state, &mut out);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::Feature;

    #[test]
    fn one_hot_and_standardise() {
        let schema = FeatureSchema::new(vec![
            Feature::numeric("x", 0.0, 10.0, None),
            Feature::categorical("c", &["a", "b", "c"]),
        ])
        .unwrap();
        let enc = FeatureEncoder::from_schema(&schema);
        assert_eq!(enc.width(), 4);
        assert_eq!(enc.encode(&State::new(vec![10.0, 1.0])), vec![1.0, 0.0, 1.0, 0.0]);

        let fitted = FeatureEncoder::fit(
            &schema,
            &[State::new(vec![1.0, 0.0]), State::new(vec![3.0, 2.0])],
        );
        assert_eq!(fitted.encode(&State::new(vec![3.0, 2.0])), vec![1.0, 0.0, 0.0, 1.0]);
    }
}
