//! Action functions, their argument grids, and interventions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::precondition::Precondition;
use crate::schema::{format_number, FeatureSchema, State};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Effect {
    /// `s_i' = s_i + x`
    Add,
    /// `s_i' = x`
    Set,
}

/// A function `f` with its finite argument grid `X_f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionFunction {
    pub name: String,
    pub target: usize,
    pub effect: Effect,
    pub arguments: Vec<f64>,
    #[serde(default)]
    pub precondition: Precondition,
}

impl ActionFunction {
    pub fn new_value(&self, current: f64, arg: usize) -> f64 {
        let x = self.arguments[arg];
        match self.effect {
            Effect::Add => current + x,
            Effect::Set => x,
        }
    }
}

/// One `(f, x)` pair, addressed by function index and argument index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Action {
    pub function: usize,
    pub arg: usize,
}

impl Action {
    pub const fn new(function: usize, arg: usize) -> Self {
        Self { function, arg }
    }
}

pub type Intervention = Vec<Action>;

/// Ordered collection of action functions. Catalog order (functions in
/// declaration order, then arguments in grid order) is the tie-break order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ActionFunction>", into = "Vec<ActionFunction>")]
pub struct ActionCatalog {
    functions: Vec<ActionFunction>,
    actions: Vec<Action>,
    offsets: Vec<usize>,
}

impl TryFrom<Vec<ActionFunction>> for ActionCatalog {
    type Error = Error;

    fn try_from(functions: Vec<ActionFunction>) -> Result<Self> {
        Self::new(functions)
    }
}

impl From<ActionCatalog> for Vec<ActionFunction> {
    fn from(c: ActionCatalog) -> Self {
        c.functions
    }
}

impl ActionCatalog {
    pub fn new(functions: Vec<ActionFunction>) -> Result<Self> {
        if functions.is_empty() {
            return Err(Error::Config("action catalog is empty".into()));
        }
        let mut actions = Vec::new();
        let mut offsets = Vec::with_capacity(functions.len());
        for (fi, f) in functions.iter().enumerate() {
            if f.arguments.is_empty() {
                return Err(Error::Config(format!("function `{}` has an empty argument grid", f.name)));
            }
            if f.arguments.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("argument grid"));
            }
            if functions[..fi].iter().any(|g| g.name == f.name) {
                return Err(Error::Config(format!("duplicate function `{}`", f.name)));
            }
            offsets.push(actions.len());
            actions.extend((0..f.arguments.len()).map(|a| Action::new(fi, a)));
        }
        Ok(Self {
            functions,
            actions,
            offsets,
        })
    }

    pub fn check_against(&self, schema: &FeatureSchema) -> Result<()> {
        for f in &self.functions {
            if f.target >= schema.len() {
                return Err(Error::Config(format!("function `{}` targets a missing feature", f.name)));
            }
            for l in &f.precondition.literals {
                if l.feature >= schema.len() {
                    return Err(Error::Config(format!(
                        "precondition of `{}` references a missing feature",
                        f.name
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn functions(&self) -> &[ActionFunction] {
        &self.functions
    }

    pub fn function(&self, i: usize) -> &ActionFunction {
        &self.functions[i]
    }

    pub fn function_index(&self, name: &str) -> Option<usize> {
        self.functions.iter().position(|f| f.name == name)
    }

    /// All actions in catalog order.
    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Position of `a` in catalog order.
    pub fn flat_index(&self, a: Action) -> usize {
        self.offsets[a.function] + a.arg
    }

    pub fn contains(&self, a: Action) -> bool {
        a.function < self.functions.len() && a.arg < self.functions[a.function].arguments.len()
    }

    pub fn max_grid(&self) -> usize {
        self.functions.iter().map(|f| f.arguments.len()).max().unwrap_or(0)
    }

    /// Short label such as `change_income(+2)`.
    pub fn label(&self, a: Action, schema: &FeatureSchema) -> String {
        let f = &self.functions[a.function];
        let x = f.arguments[a.arg];
        let arg = match f.effect {
            Effect::Add if x >= 0.0 => format!("+{}", format_number(x)),
            Effect::Add => format_number(x),
            Effect::Set => schema.feature(f.target).display_value(x),
        };
        format!("{}({arg})", f.name)
    }

    /// Plain-language rendering of `a` taken in `state`.
    pub fn describe(&self, a: Action, state: &State, schema: &FeatureSchema) -> String {
        let f = &self.functions[a.function];
        let feature = schema.feature(f.target);
        let old = state[f.target];
        let new = f.new_value(old, a.arg);
        let verb = if new > old {
            "Increase"
        } else if new < old {
            "Decrease"
        } else {
            "Keep"
        };
        if feature.is_categorical() {
            format!(
                "Change {} from {} to {}",
                feature.name,
                feature.display_value(old),
                feature.display_value(new)
            )
        } else {
            format!(
                "{verb} {} from {} to {}",
                feature.name,
                feature.display_value(old),
                feature.display_value(new)
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::Feature;

    fn catalog() -> ActionCatalog {
        ActionCatalog::new(vec![
            ActionFunction {
                name: "change_income".into(),
                target: 1,
                effect: Effect::Add,
                arguments: vec![1.0, 2.0, -1.0],
                precondition: Precondition::always(),
            },
            ActionFunction {
                name: "set_job".into(),
                target: 0,
                effect: Effect::Set,
                arguments: vec![1.0],
                precondition: Precondition::always(),
            },
        ])
        .unwrap()
    }

    #[test]
    fn flat_order_follows_declaration() {
        let c = catalog();
        assert_eq!(c.len(), 4);
        assert_eq!(c.actions()[3], Action::new(1, 0));
        assert_eq!(c.flat_index(Action::new(1, 0)), 3);
        assert_eq!(c.flat_index(Action::new(0, 2)), 2);
        assert_eq!(c.max_grid(), 3);
    }

    #[test]
    fn labels_and_descriptions() {
        let c = catalog();
        let schema = FeatureSchema::new(vec![
            Feature::categorical("job", &["none", "worker"]),
            Feature::numeric("income", 0.0, 10.0, None),
        ])
        .unwrap();
        assert_eq!(c.label(Action::new(0, 1), &schema), "change_income(+2)");
        assert_eq!(c.label(Action::new(0, 2), &schema), "change_income(-1)");
        assert_eq!(c.label(Action::new(1, 0), &schema), "set_job(worker)");
        let s = State::new(vec![0.0, 3.0]);
        assert_eq!(c.describe(Action::new(0, 1), &s, &schema), "Increase income from 3 to 5");
        assert_eq!(c.describe(Action::new(1, 0), &s, &schema), "Change job from none to worker");
    }

    #[test]
    fn rejects_empty_grids_and_duplicates() {
        let mut f = catalog().functions().to_vec();
        f[1].arguments.clear();
        assert!(ActionCatalog::new(f).is_err());
        let mut f = catalog().functions().to_vec();
        f[1].name = "change_income".into();
        assert!(ActionCatalog::new(f).is_err());
    }
}
