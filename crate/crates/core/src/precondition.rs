//! Conjunctive predicates over states: `feature OP literal [and ...]`.
//!
//! Supported operators are `<`, `<=` (`≤`), `=` (`==`), `>=` (`≥`), `>` and
//! `in [a, b, ...]`. Categorical literals are level names and are resolved to
//! level indices against the schema at parse time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schema::{FeatureKind, FeatureSchema, State};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CmpOp {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = "in")]
    In,
}

impl CmpOp {
    fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Eq => "=",
            CmpOp::Ge => ">=",
            CmpOp::Gt => ">",
            CmpOp::In => "in",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Literal {
    pub feature: usize,
    pub op: CmpOp,
    /// One value for comparisons, the member list for `in`.
    pub values: Vec<f64>,
}

impl Literal {
    pub fn holds(&self, state: &State) -> bool {
        let v = state[self.feature];
        match self.op {
            CmpOp::Lt => v < self.values[0],
            CmpOp::Le => v <= self.values[0],
            CmpOp::Eq => v == self.values[0],
            CmpOp::Ge => v >= self.values[0],
            CmpOp::Gt => v > self.values[0],
            CmpOp::In => self.values.contains(&v),
        }
    }

    pub fn render(&self, schema: &FeatureSchema) -> String {
        let f = schema.feature(self.feature);
        if self.op == CmpOp::In {
            let members: Vec<String> = self.values.iter().map(|&v| f.display_value(v)).collect();
            format!("{} in [{}]", f.name, members.join(", "))
        } else {
            format!("{} {} {}", f.name, self.op.symbol(), f.display_value(self.values[0]))
        }
    }
}

/// Conjunction of literals; the empty conjunction is always true.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Precondition {
    pub literals: Vec<Literal>,
}

impl Precondition {
    pub fn always() -> Self {
        Self::default()
    }

    pub fn holds(&self, state: &State) -> bool {
        self.literals.iter().all(|l| l.holds(state))
    }

    pub fn parse(input: &str, schema: &FeatureSchema) -> Result<Self> {
        let trimmed = input.trim();
        if trimmed.is_empty() || trimmed.eq_ignore_ascii_case("true") {
            return Ok(Self::always());
        }
        let literals = split_conjuncts(trimmed)
            .into_iter()
            .map(|clause| parse_literal(clause, schema))
            .collect::<Result<_>>()?;
        Ok(Self { literals })
    }

    pub fn render(&self, schema: &FeatureSchema) -> String {
        if self.literals.is_empty() {
            return "true".into();
        }
        self.literals
            .iter()
            .map(|l| l.render(schema))
            .collect::<Vec<_>>()
            .join(" and ")
    }
}

fn split_conjuncts(input: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut start = 0;
    let mut skip_until = 0;
    for (i, c) in input.char_indices() {
        if i < skip_until {
            continue;
        }
        match c {
            '[' => depth += 1,
            ']' => depth = depth.saturating_sub(1),
            '&' if depth == 0 => {
                out.push(&input[start..i]);
                start = if input[i + 1..].starts_with('&') { i + 2 } else { i + 1 };
                skip_until = start;
            }
            _ if depth == 0 && is_and_keyword(input, i) => {
                out.push(&input[start..i]);
                start = i + 3;
                skip_until = start;
            }
            _ => {}
        }
    }
    out.push(&input[start..]);
    out.into_iter().map(str::trim).collect()
}

fn is_and_keyword(input: &str, i: usize) -> bool {
    let rest = &input[i..];
    if !(rest.len() >= 3 && rest.is_char_boundary(3) && rest[..3].eq_ignore_ascii_case("and")) {
        return false;
    }
    let before = input[..i].chars().next_back();
    let after = rest[3..].chars().next();
    before.is_some_and(char::is_whitespace) && after.is_some_and(char::is_whitespace)
}

fn parse_err(input: &str, reason: impl Into<String>) -> Error {
    Error::Parse {
        input: input.to_string(),
        reason: reason.into(),
    }
}

fn parse_literal(clause: &str, schema: &FeatureSchema) -> Result<Literal> {
    const OPS: [(&str, CmpOp); 9] = [
        ("<=", CmpOp::Le),
        (">=", CmpOp::Ge),
        ("==", CmpOp::Eq),
        ("≤", CmpOp::Le),
        ("≥", CmpOp::Ge),
        ("<", CmpOp::Lt),
        (">", CmpOp::Gt),
        ("=", CmpOp::Eq),
        (" in ", CmpOp::In),
    ];
    let (pos, token, op) = OPS
        .iter()
        .filter_map(|(tok, op)| clause.find(tok).map(|p| (p, *tok, *op)))
        .min_by_key(|(p, tok, _)| (*p, std::cmp::Reverse(tok.len())))
        .ok_or_else(|| parse_err(clause, "expected an operator"))?;
    let name = clause[..pos].trim();
    let rhs = clause[pos + token.len()..].trim();
    if name.is_empty() || rhs.is_empty() {
        return Err(parse_err(clause, "expected `feature OP literal`"));
    }
    let feature = schema
        .index_of(name)
        .map_err(|_| parse_err(clause, format!("unknown feature `{name}`")))?;
    let values = if op == CmpOp::In {
        let inner = rhs
            .strip_prefix('[')
            .and_then(|r| r.strip_suffix(']'))
            .ok_or_else(|| parse_err(clause, "`in` expects a bracketed list"))?;
        inner
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(|t| parse_value(t, feature, schema, clause))
            .collect::<Result<Vec<_>>>()?
    } else {
        vec![parse_value(rhs, feature, schema, clause)?]
    };
    if values.is_empty() {
        return Err(parse_err(clause, "empty literal list"));
    }
    Ok(Literal {
        feature,
        op,
        values,
    })
}

fn parse_value(token: &str, feature: usize, schema: &FeatureSchema, clause: &str) -> Result<f64> {
    let token = token.trim_matches(|c| c == '"' || c == '\'');
    let f = schema.feature(feature);
    match &f.kind {
        FeatureKind::Categorical { .. } => {
            if let Some(i) = f.level_index(token) {
                return Ok(i as f64);
            }
            token
                .parse::<usize>()
                .ok()
                .filter(|&i| f.contains(i as f64))
                .map(|i| i as f64)
                .ok_or_else(|| parse_err(clause, format!("`{token}` is not a level of `{}`", f.name)))
        }
        FeatureKind::Numeric { .. } => token
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| parse_err(clause, format!("`{token}` is not a number"))),
    }
}
