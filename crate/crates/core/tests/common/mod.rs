#![allow(dead_code)]

pub mod oracle;

use std::path::PathBuf;

use rand::Rng;
use recourse_core::{
    Action, ActionCatalog, ActionFunction, CausalGraph, Dataset, Effect, Feature, FeatureSchema, Precondition,
    RecourseProblem, ScmWeights, State,
};

use oracle::RawAction;

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(format!("{name}.toml"))
}

pub fn load(name: &str) -> Dataset {
    Dataset::load(config_path(name)).unwrap_or_else(|e| panic!("loading {name}: {e}"))
}

/// A random cost model together with its raw description for the oracle.
pub struct RandomFixture {
    pub problem: RecourseProblem,
    pub d: usize,
    pub edges: Vec<(usize, usize)>,
    pub actions: Vec<RawAction>,
    pub w: Vec<f64>,
    pub s0: Vec<f64>,
    pub intervention: Vec<(usize, usize)>,
}

/// Numeric and categorical features with wide domains, a random DAG (edges
/// only go from lower to higher index), additive and setting actions, and a
/// random applicable intervention of length up to `max_len`.
pub fn random_fixture<R: Rng>(rng: &mut R, max_len: usize) -> RandomFixture {
    let d = rng.random_range(1..=6);
    let mut features = Vec::with_capacity(d);
    let mut s0 = Vec::with_capacity(d);
    for i in 0..d {
        if rng.random_bool(0.3) {
            features.push(Feature::categorical(&format!("c{i}"), &["l0", "l1", "l2", "l3"]));
            s0.push(rng.random_range(0..4) as f64);
        } else {
            features.push(Feature::numeric(&format!("x{i}"), -1000.0, 1000.0, None));
            s0.push(rng.random_range(-10.0..10.0));
        }
    }
    let mut edges = Vec::new();
    for to in 1..d {
        for from in 0..to {
            if rng.random_bool(0.35) {
                edges.push((from, to));
            }
        }
    }
    let mut functions = Vec::new();
    let mut actions = Vec::new();
    let n_functions = rng.random_range(1..=4);
    for f in 0..n_functions {
        let target = rng.random_range(0..d);
        let categorical = features[target].is_categorical();
        let n_args = rng.random_range(1..=3);
        let (additive, args): (bool, Vec<f64>) = if categorical {
            (false, (0..n_args).map(|_| rng.random_range(0..4) as f64).collect())
        } else if rng.random_bool(0.7) {
            (true, (0..n_args).map(|_| rng.random_range(-5.0..5.0)).collect())
        } else {
            (false, (0..n_args).map(|_| rng.random_range(-20.0..20.0)).collect())
        };
        functions.push(ActionFunction {
            name: format!("f{f}"),
            target,
            effect: if additive { Effect::Add } else { Effect::Set },
            arguments: args.clone(),
            precondition: Precondition::always(),
        });
        actions.push(RawAction { target, additive, args });
    }
    let schema = FeatureSchema::new(features).unwrap();
    let graph = CausalGraph::new(d, edges.clone()).unwrap();
    let catalog = ActionCatalog::new(functions).unwrap();
    let problem = RecourseProblem::new(schema, graph, catalog).unwrap();
    let m = d + edges.len();
    let w: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..3.0)).collect();
    let len = rng.random_range(0..=max_len);
    let intervention = (0..len)
        .map(|_| {
            let f = rng.random_range(0..actions.len());
            (f, rng.random_range(0..actions[f].args.len()))
        })
        .collect();
    RandomFixture {
        problem,
        d,
        edges,
        actions,
        w,
        s0,
        intervention,
    }
}

impl RandomFixture {
    pub fn lib_intervention(&self) -> Vec<Action> {
        self.intervention.iter().map(|&(f, x)| Action::new(f, x)).collect()
    }

    pub fn state(&self) -> State {
        State::new(self.s0.clone())
    }

    pub fn weights(&self) -> ScmWeights {
        ScmWeights::new(self.w.clone())
    }

    pub fn oracle_cost(&self) -> f64 {
        oracle::intervention_cost(self.d, &self.edges, &self.actions, &self.w, &self.s0, &self.intervention)
    }
}

/// `|a - b| <= tol * max(1, |a|, |b|)`.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * 1f64.max(a.abs()).max(b.abs())
}
