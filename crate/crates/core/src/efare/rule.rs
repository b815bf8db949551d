use serde::{Deserialize, Serialize};

use crate::schema::{format_number, FeatureKind, FeatureSchema};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleOp {
    Le,
    Gt,
}

/// `x[feature] <= threshold` or `x[feature] > threshold` over an augmented state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuleLiteral {
    pub feature: usize,
    pub op: RuleOp,
    pub threshold: f64,
}

impl RuleLiteral {
    pub fn holds(&self, x: &[f64]) -> bool {
        match self.op {
            RuleOp::Le => x[self.feature] <= self.threshold,
            RuleOp::Gt => x[self.feature] > self.threshold,
        }
    }
}

/// Conjunction of literals; the empty rule is always true.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BooleanRule {
    pub literals: Vec<RuleLiteral>,
}

impl BooleanRule {
    pub fn holds(&self, x: &[f64]) -> bool {
        self.literals.iter().all(|l| l.holds(x))
    }

    /// Human-readable text. Base features use schema names (categorical
    /// thresholds become level sets); the remaining columns use `names`.
    pub fn render(&self, schema: &FeatureSchema, names: &[String]) -> String {
        if self.literals.is_empty() {
            return "always".into();
        }
        let parts: Vec<String> = self
            .literals
            .iter()
            .map(|l| {
                let name = names.get(l.feature).map(String::as_str).unwrap_or("?");
                if l.feature < schema.len() {
                    if let FeatureKind::Categorical { levels } = &schema.feature(l.feature).kind {
                        let chosen: Vec<&str> = levels
                            .iter()
                            .enumerate()
                            .filter(|(i, _)| l.holds(&with_value(l.feature, *i as f64)))
                            .map(|(_, s)| s.as_str())
                            .collect();
                        return format!("{name} in {{{}}}", chosen.join(", "));
                    }
                }
                let op = match l.op {
                    RuleOp::Le => "<=",
                    RuleOp::Gt => ">",
                };
                format!("{name} {op} {}", format_number(l.threshold))
            })
            .collect();
        parts.join(" and ")
    }
}

fn with_value(index: usize, v: f64) -> Vec<f64> {
    let mut x = vec![0.0; index + 1];
    x[index] = v;
    x
}
