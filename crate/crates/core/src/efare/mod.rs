//! W-EFARE: an explainable automaton distilled from generator traces.
//!
//! States are augmented with one cost feature per action function (its mean
//! cost over the feasible arguments under the current `w`), successful
//! traces are merged into a graph over function ids, and every graph node
//! gets a small decision tree that picks the next function. Each edge has an
//! argument selector of its own. Traversing the graph yields an intervention
//! together with one Boolean rule per action.

mod cart;
mod rule;

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::action::{Action, Intervention};
use crate::belief::MixturePrior;
use crate::env::RecourseEnv;
use crate::error::{Error, Result};
use crate::generator::{Generated, RecourseGenerator};
use crate::graph::ScmWeights;
use crate::problem::RecourseProblem;
use crate::schema::State;

pub use cart::{DecisionTree, TreeDecision, TreeNode, TreeParams};
pub use rule::{BooleanRule, RuleLiteral, RuleOp};

/// Appends `(1/|X_f'|) sum_{x in X_f'} C((f, x), s | w)` for every function
/// `f`, where `X_f'` are the arguments feasible in `s`. Functions without a
/// feasible argument get `sentinel`.
pub fn augment(problem: &RecourseProblem, s: &State, w: &ScmWeights, sentinel: f64) -> Vec<f64> {
    let mut x = s.values().to_vec();
    x.extend(cost_features(problem, s, w.values(), sentinel));
    x
}

fn cost_features(problem: &RecourseProblem, s: &State, w: &[f64], sentinel: f64) -> Vec<f64> {
    problem
        .catalog
        .functions()
        .iter()
        .enumerate()
        .map(|(fi, f)| {
            let mut sum = 0.0;
            let mut n = 0usize;
            for arg in 0..f.arguments.len() {
                let a = Action::new(fi, arg);
                if problem.is_applicable(a, s) {
                    sum += problem.action_cost_unchecked(a, s, w);
                    n += 1;
                }
            }
            if n == 0 {
                sentinel
            } else {
                sum / n as f64
            }
        })
        .collect()
}

/// Column names of the augmented state: schema features, then `cost_<f>`.
pub fn augmented_names(problem: &RecourseProblem) -> Vec<String> {
    let mut names: Vec<String> = problem.schema.features().iter().map(|f| f.name.clone()).collect();
    names.extend(problem.catalog.functions().iter().map(|f| format!("cost_{}", f.name)));
    names
}

/// One successful intervention and the states it visits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub user: usize,
    pub weights: ScmWeights,
    pub actions: Intervention,
    /// `|actions| + 1` states starting at the initial one.
    pub states: Vec<State>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePool {
    pub traces: Vec<Trace>,
    pub attempts: usize,
    pub failures: usize,
}

impl TracePool {
    /// Ten times the largest feasible action cost seen along any trace (1 if
    /// every such cost is 0).
    pub fn sentinel(&self, problem: &RecourseProblem) -> f64 {
        let mut max = 0.0f64;
        for t in &self.traces {
            for s in &t.states {
                for a in problem.feasible_actions(s) {
                    max = max.max(problem.action_cost_unchecked(a, s, t.weights.values()));
                }
            }
        }
        if max > 0.0 {
            10.0 * max
        } else {
            1.0
        }
    }
}

/// Runs `generator` on `n` `(state, w)` pairs (states cycled in order, `w`
/// drawn from `weights`) and keeps the non-empty successful interventions.
pub fn extract_traces(
    generator: &dyn RecourseGenerator,
    env: &RecourseEnv,
    states: &[State],
    weights: &MixturePrior,
    n: usize,
    seed: u64,
) -> Result<TracePool> {
    if states.is_empty() {
        return Err(Error::Empty("trace source states"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool = TracePool {
        traces: Vec::new(),
        attempts: 0,
        failures: 0,
    };
    for i in 0..n {
        let s = &states[i % states.len()];
        let w = weights.sample(&mut rng).1;
        pool.attempts += 1;
        let out = generator.generate(s, &w, None)?;
        let replayed = !out.intervention.is_empty() && env.achieves_recourse(&out.intervention, s)?;
        if !(out.success && replayed) {
            pool.failures += 1;
            continue;
        }
        let trajectory = env.problem.trajectory(&out.intervention, s)?;
        pool.traces.push(Trace {
            user: i,
            weights: w,
            actions: out.intervention,
            states: trajectory,
        });
    }
    tracing::info!(kept = pool.traces.len(), failures = pool.failures, "traces extracted");
    Ok(pool)
}

/// Node ids: `0` is START, `1..=F` are action functions, `F + 1` is STOP.
pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArgSelector {
    pub function: usize,
    /// Classes are argument indices of `function`.
    pub tree: DecisionTree,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutomatonNode {
    pub id: NodeId,
    /// Observed successors, ascending; tree class `c` means `successors[c]`.
    pub successors: Vec<NodeId>,
    pub tree: DecisionTree,
    /// One selector per successor that is a function node, same order.
    pub selectors: Vec<Option<ArgSelector>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Automaton {
    pub version: u32,
    pub problem_fingerprint: String,
    pub feature_names: Vec<String>,
    pub sentinel: f64,
    pub params: TreeParams,
    pub function_count: usize,
    pub nodes: Vec<AutomatonNode>,
}

/// One observed step: at `node`, in augmented state `x`, the trace moved to
/// `next` using argument `arg` (none for STOP).
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub node: NodeId,
    pub x: Vec<f64>,
    pub next: NodeId,
    pub arg: Option<usize>,
}

pub const START: NodeId = 0;

impl Automaton {
    pub fn stop(&self) -> NodeId {
        self.function_count + 1
    }

    pub fn node(&self, id: NodeId) -> Option<&AutomatonNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn edges(&self) -> Vec<(NodeId, NodeId)> {
        self.nodes
            .iter()
            .flat_map(|n| n.successors.iter().map(move |&s| (n.id, s)))
            .collect()
    }

    pub fn check_compatible(&self, problem: &RecourseProblem) -> Result<()> {
        if self.problem_fingerprint != problem.fingerprint() {
            return Err(Error::Artifact("automaton was built for a different problem".into()));
        }
        Ok(())
    }
}

/// Flattens traces into per-node transitions (STOP after the last action).
pub fn transitions(problem: &RecourseProblem, pool: &TracePool, sentinel: f64) -> Vec<Transition> {
    let stop = problem.catalog.functions().len() + 1;
    let mut out = Vec::new();
    for t in &pool.traces {
        let mut node = START;
        for (a, s) in t.actions.iter().zip(&t.states) {
            out.push(Transition {
                node,
                x: augment(problem, s, &t.weights, sentinel),
                next: a.function + 1,
                arg: Some(a.arg),
            });
            node = a.function + 1;
        }
        let last = t.states.last().expect("trajectory is never empty");
        out.push(Transition {
            node,
            x: augment(problem, last, &t.weights, sentinel),
            next: stop,
            arg: None,
        });
    }
    out
}

pub fn build_automaton(problem: &RecourseProblem, pool: &TracePool, params: TreeParams) -> Result<Automaton> {
    if pool.traces.is_empty() {
        return Err(Error::Empty("trace set"));
    }
    let sentinel = pool.sentinel(problem);
    let steps = transitions(problem, pool, sentinel);
    let function_count = problem.catalog.functions().len();
    let stop = function_count + 1;

    let mut by_node: BTreeMap<NodeId, Vec<&Transition>> = BTreeMap::new();
    for t in &steps {
        by_node.entry(t.node).or_default().push(t);
    }
    let mut nodes = Vec::with_capacity(by_node.len());
    for (&id, samples) in &by_node {
        let mut successors: Vec<NodeId> = samples.iter().map(|t| t.next).collect();
        successors.sort_unstable();
        successors.dedup();
        let xs: Vec<Vec<f64>> = samples.iter().map(|t| t.x.clone()).collect();
        let ys: Vec<usize> = samples
            .iter()
            .map(|t| successors.binary_search(&t.next).expect("successor listed"))
            .collect();
        let tree = DecisionTree::fit(&xs, &ys, successors.len(), params);
        let selectors = successors
            .iter()
            .map(|&next| {
                if next == stop {
                    return None;
                }
                let function = next - 1;
                let grid = problem.catalog.function(function).arguments.len();
                let edge: Vec<&&Transition> = samples.iter().filter(|t| t.next == next).collect();
                let xs: Vec<Vec<f64>> = edge.iter().map(|t| t.x.clone()).collect();
                let ys: Vec<usize> = edge.iter().map(|t| t.arg.expect("function step has an argument")).collect();
                Some(ArgSelector {
                    function,
                    tree: DecisionTree::fit(&xs, &ys, grid, params),
                })
            })
            .collect();
        nodes.push(AutomatonNode {
            id,
            successors,
            tree,
            selectors,
        });
    }
    Ok(Automaton {
        version: 1,
        problem_fingerprint: problem.fingerprint(),
        feature_names: augmented_names(problem),
        sentinel,
        params,
        function_count,
        nodes,
    })
}

/// Fidelity of the automaton on a set of observed transitions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fidelity {
    /// Fraction of transitions whose next node the node tree reproduces.
    pub transition: f64,
    /// Fraction of function steps whose argument the edge selector reproduces.
    pub argument: f64,
}

pub fn fidelity(aut: &Automaton, steps: &[Transition]) -> Fidelity {
    let mut hit = 0usize;
    let mut arg_total = 0usize;
    let mut arg_hit = 0usize;
    for t in steps {
        let Some(node) = aut.node(t.node) else { continue };
        if node.successors[node.tree.predict(&t.x)] == t.next {
            hit += 1;
        }
        if let Some(arg) = t.arg {
            arg_total += 1;
            let pos = node.successors.binary_search(&t.next);
            if let Ok(pos) = pos {
                if let Some(sel) = &node.selectors[pos] {
                    if sel.tree.predict(&t.x) == arg {
                        arg_hit += 1;
                    }
                }
            }
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 1.0 } else { a as f64 / b as f64 };
    Fidelity {
        transition: ratio(hit, steps.len()),
        argument: ratio(arg_hit, arg_total),
    }
}

/// Output of one traversal, with the augmented state seen at each emission.
#[derive(Debug, Clone, PartialEq)]
pub struct Traversal {
    pub intervention: Intervention,
    pub rules: Vec<BooleanRule>,
    pub augmented: Vec<Vec<f64>>,
    pub success: bool,
}

/// Deterministic traversal from START. Candidate transitions are tried in
/// descending tree vote; STOP is skipped until recourse is reached, and a
/// transition is skipped when no argument of its function is feasible. The
/// walk ends at recourse, at `max_len`, or when nothing feasible remains.
pub fn efare_generate(
    env: &RecourseEnv,
    aut: &Automaton,
    s0: &State,
    w: &ScmWeights,
    max_len: usize,
    forced_first: Option<Action>,
) -> Result<Traversal> {
    let problem = &env.problem;
    if w.len() != problem.m() {
        return Err(Error::WeightArity {
            expected: problem.m(),
            got: w.len(),
        });
    }
    let mut out = Traversal {
        intervention: Vec::new(),
        rules: Vec::new(),
        augmented: Vec::new(),
        success: false,
    };
    let mut state = s0.clone();
    let mut node = START;
    if let Some(a) = forced_first {
        if !problem.catalog.contains(a) || !problem.is_applicable(a, &state) {
            return Err(Error::ForcedActionInfeasible(format!("{a:?}")));
        }
        out.augmented.push(augment(problem, &state, w, aut.sentinel));
        out.rules.push(BooleanRule::default());
        out.intervention.push(a);
        state = problem.step_unchecked(a, &state);
        node = a.function + 1;
    }
    let stop = aut.stop();
    while out.intervention.len() < max_len && !env.is_favorable(&state) {
        let Some(n) = aut.node(node) else { break };
        let x = augment(problem, &state, w, aut.sentinel);
        let decision = n.tree.decide(&x);
        let mut chosen = None;
        for class in decision.ranked() {
            let next = n.successors[class];
            if next == stop {
                continue;
            }
            let Some(sel) = &n.selectors[class] else { continue };
            let arg_decision = sel.tree.decide(&x);
            let voted = arg_decision.ranked();
            if let Some(arg) = voted
                .into_iter()
                .find(|&arg| problem.is_applicable(Action::new(sel.function, arg), &state))
            {
                let mut rule = decision.rule();
                rule.literals.extend(arg_decision.path.iter().copied());
                chosen = Some((Action::new(sel.function, arg), rule));
                break;
            }
        }
        let Some((a, rule)) = chosen else { break };
        out.augmented.push(x);
        out.rules.push(rule);
        out.intervention.push(a);
        state = problem.step_unchecked(a, &state);
        node = a.function + 1;
    }
    out.success = env.is_favorable(&state);
    Ok(out)
}

/// The automaton behind the generator interface.
#[derive(Debug, Clone)]
pub struct EfareGenerator {
    pub env: Arc<RecourseEnv>,
    pub automaton: Arc<Automaton>,
    pub max_len: usize,
}

impl RecourseGenerator for EfareGenerator {
    fn generate(&self, s: &State, w: &ScmWeights, forced_first: Option<Action>) -> Result<Generated> {
        let t = efare_generate(&self.env, &self.automaton, s, w, self.max_len, forced_first)?;
        Ok(Generated {
            intervention: t.intervention,
            success: t.success,
            rules: Some(t.rules),
        })
    }

    fn name(&self) -> &'static str {
        "wefare"
    }
}
