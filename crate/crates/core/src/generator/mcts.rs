//! PUCT tree search over action sequences.
//!
//! Edges carry `(N, W, P)`; selection maximises
//! `Q + c_puct * P * sqrt(max(N_parent, 1)) / (1 + N)` with ties going to the
//! earliest edge in catalog order. Leaves are valued by a single rollout that
//! samples from the policy prior. Each move commits to the most-visited root
//! edge and keeps the subtree below it.
//!
//! The planner also remembers the highest-reward complete trajectory met in
//! any simulation or rollout and returns it when it beats the committed path.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use super::policy::PolicyModel;
use super::GeneratorConfig;
use crate::action::{Action, Intervention};
use crate::env::RecourseEnv;
use crate::error::{Error, Result};
use crate::graph::ScmWeights;
use crate::schema::State;

/// Root visit counts at one committed move; the policy training target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoveRecord {
    pub state: State,
    pub visits: Vec<(Action, u32)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanOutcome {
    pub intervention: Intervention,
    pub success: bool,
    pub cost: f64,
    pub moves: Vec<MoveRecord>,
}

#[derive(Debug)]
struct Edge {
    action: Action,
    prior: f64,
    step_cost: f64,
    visits: u32,
    total: f64,
    child: Option<usize>,
}

#[derive(Debug)]
struct Node {
    state: State,
    cost: f64,
    depth: usize,
    favorable: bool,
    expanded: bool,
    edges: Vec<Edge>,
}

struct Search<'a> {
    env: &'a RecourseEnv,
    w: &'a [f64],
    policy: &'a PolicyModel,
    cfg: &'a GeneratorConfig,
    nodes: Vec<Node>,
    rng: ChaCha8Rng,
    best: Option<(Vec<Action>, f64, f64)>,
}

impl<'a> Search<'a> {
    fn new_node(&mut self, state: State, cost: f64, depth: usize) -> usize {
        let favorable = self.env.is_favorable(&state);
        self.nodes.push(Node {
            state,
            cost,
            depth,
            favorable,
            expanded: false,
            edges: Vec::new(),
        });
        self.nodes.len() - 1
    }

    /// Renormalised `pi_f(f) * pi_x(x)` over the feasible actions.
    fn priors(&self, state: &State, feasible: &[Action]) -> Vec<f64> {
        let (pf, px) = self.policy.predict(state, self.w);
        let mut p: Vec<f64> = feasible.iter().map(|a| pf[a.function] * px[a.arg]).collect();
        let z: f64 = p.iter().sum();
        if z > 0.0 && z.is_finite() {
            p.iter_mut().for_each(|v| *v /= z);
        } else {
            let u = 1.0 / p.len() as f64;
            p.iter_mut().for_each(|v| *v = u);
        }
        p
    }

    fn expand(&mut self, id: usize) {
        let state = self.nodes[id].state.clone();
        let feasible = self.env.problem.feasible_actions(&state);
        let priors = if feasible.is_empty() {
            Vec::new()
        } else {
            self.priors(&state, &feasible)
        };
        let problem = &self.env.problem;
        let edges = feasible
            .into_iter()
            .zip(priors)
            .map(|(action, prior)| Edge {
                action,
                prior,
                step_cost: problem.action_cost_unchecked(action, &state, self.w),
                visits: 0,
                total: 0.0,
                child: None,
            })
            .collect();
        let node = &mut self.nodes[id];
        node.edges = edges;
        node.expanded = true;
    }

    /// Mixes `Dir(alpha)` noise into the priors of `id`'s edges.
    fn perturb_root(&mut self, id: usize) {
        if !self.nodes[id].expanded {
            self.expand(id);
        }
        let n = self.nodes[id].edges.len();
        if n < 2 {
            return;
        }
        let gamma = Gamma::new(self.cfg.dirichlet_alpha, 1.0).expect("validated concentration");
        let mut noise: Vec<f64> = (0..n).map(|_| gamma.sample(&mut self.rng)).collect();
        let z: f64 = noise.iter().sum();
        if !(z > 0.0) {
            return;
        }
        noise.iter_mut().for_each(|v| *v /= z);
        let eps = self.cfg.root_noise;
        for (e, eta) in self.nodes[id].edges.iter_mut().zip(noise) {
            e.prior = (1.0 - eps) * e.prior + eps * eta;
        }
    }

    fn record(&mut self, actions: &[Action], cost: f64) -> f64 {
        let r = self.cfg.terminal_reward(cost, actions.len());
        if self.best.as_ref().is_none_or(|b| r > b.2) {
            self.best = Some((actions.to_vec(), cost, r));
        }
        r
    }

    fn select(&self, id: usize) -> usize {
        let node = &self.nodes[id];
        let parent: u32 = node.edges.iter().map(|e| e.visits).sum();
        let explore = self.cfg.c_puct * (parent.max(1) as f64).sqrt();
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (i, e) in node.edges.iter().enumerate() {
            let q = if e.visits > 0 { e.total / e.visits as f64 } else { 0.0 };
            let score = q + explore * e.prior / (1.0 + e.visits as f64);
            if score > best_score {
                best = i;
                best_score = score;
            }
        }
        best
    }

    fn simulate(&mut self, root: usize, prefix: &[Action]) {
        let mut path: Vec<(usize, usize)> = Vec::new();
        let mut actions = prefix.to_vec();
        let mut id = root;
        let value = loop {
            let (favorable, depth, cost) = {
                let n = &self.nodes[id];
                (n.favorable, n.depth, n.cost)
            };
            if favorable && depth > 0 {
                break self.record(&actions, cost);
            }
            if depth >= self.cfg.max_horizon {
                break 0.0;
            }
            if !self.nodes[id].expanded {
                self.expand(id);
                break self.rollout(id, &mut actions);
            }
            if self.nodes[id].edges.is_empty() {
                break 0.0;
            }
            let e = self.select(id);
            path.push((id, e));
            let edge = &self.nodes[id].edges[e];
            actions.push(edge.action);
            id = match edge.child {
                Some(c) => c,
                None => {
                    let (action, step_cost) = (edge.action, edge.step_cost);
                    let parent = &self.nodes[id];
                    let state = self.env.problem.step_unchecked(action, &parent.state);
                    let (cost, depth) = (parent.cost + step_cost, parent.depth + 1);
                    let c = self.new_node(state, cost, depth);
                    self.nodes[id].edges[e].child = Some(c);
                    c
                }
            };
        };
        for (n, e) in path {
            let edge = &mut self.nodes[n].edges[e];
            edge.visits += 1;
            edge.total += value;
        }
    }

    /// Samples actions from the policy prior until recourse or the horizon.
    fn rollout(&mut self, id: usize, actions: &mut Vec<Action>) -> f64 {
        let node = &self.nodes[id];
        let mut state = node.state.clone();
        let mut cost = node.cost;
        let mut depth = node.depth;
        let problem = &self.env.problem;
        while depth < self.cfg.max_horizon {
            let feasible = problem.feasible_actions(&state);
            if feasible.is_empty() {
                return 0.0;
            }
            let priors = self.priors(&state, &feasible);
            let u: f64 = self.rng.random();
            let mut acc = 0.0;
            let mut pick = feasible.len() - 1;
            for (i, p) in priors.iter().enumerate() {
                acc += p;
                if u < acc {
                    pick = i;
                    break;
                }
            }
            let a = feasible[pick];
            cost += problem.action_cost_unchecked(a, &state, self.w);
            state = problem.step_unchecked(a, &state);
            depth += 1;
            actions.push(a);
            if self.env.is_favorable(&state) {
                return self.record(actions, cost);
            }
        }
        0.0
    }
}

/// Plans an intervention for `(s0, w)`. With `forced_first` the returned
/// intervention starts with that action.
pub fn mcts_plan(
    env: &RecourseEnv,
    s0: &State,
    w: &ScmWeights,
    policy: &PolicyModel,
    cfg: &GeneratorConfig,
    forced_first: Option<Action>,
) -> Result<PlanOutcome> {
    cfg.validate()?;
    let problem = &env.problem;
    if w.len() != problem.m() {
        return Err(Error::WeightArity {
            expected: problem.m(),
            got: w.len(),
        });
    }
    if forced_first.is_none() && env.is_favorable(s0) {
        return Ok(PlanOutcome {
            intervention: Vec::new(),
            success: true,
            cost: 0.0,
            moves: Vec::new(),
        });
    }
    let mut search = Search {
        env,
        w: w.values(),
        policy,
        cfg,
        nodes: Vec::new(),
        rng: ChaCha8Rng::seed_from_u64(cfg.rollout_seed),
        best: None,
    };
    let mut committed: Vec<Action> = Vec::new();
    let mut current = match forced_first {
        Some(a) => {
            if !problem.catalog.contains(a) || !problem.is_applicable(a, s0) {
                return Err(Error::ForcedActionInfeasible(if problem.catalog.contains(a) {
                    problem.catalog.label(a, &problem.schema)
                } else {
                    format!("{a:?}")
                }));
            }
            let cost = problem.action_cost_unchecked(a, s0, w.values());
            committed.push(a);
            search.new_node(problem.step_unchecked(a, s0), cost, 1)
        }
        None => {
            if problem.feasible_actions(s0).is_empty() {
                return Err(Error::NoFeasibleAction);
            }
            search.new_node(s0.clone(), 0.0, 0)
        }
    };

    let mut moves = Vec::new();
    loop {
        let node = &search.nodes[current];
        if (node.favorable && node.depth > 0) || node.depth >= cfg.max_horizon {
            break;
        }
        if cfg.root_noise > 0.0 {
            search.perturb_root(current);
        }
        for _ in 0..cfg.simulations {
            search.simulate(current, &committed);
        }
        let node = &search.nodes[current];
        if node.edges.is_empty() {
            break;
        }
        let mut pick = 0;
        for (i, e) in node.edges.iter().enumerate() {
            if e.visits > node.edges[pick].visits {
                pick = i;
            }
        }
        moves.push(MoveRecord {
            state: node.state.clone(),
            visits: node.edges.iter().map(|e| (e.action, e.visits)).collect(),
        });
        let edge = &node.edges[pick];
        committed.push(edge.action);
        current = edge.child.expect("most-visited edge has been expanded");
    }

    let end = &search.nodes[current];
    let mut outcome = PlanOutcome {
        success: end.favorable,
        cost: end.cost,
        intervention: committed,
        moves,
    };
    if let Some((actions, cost, r)) = search.best.take() {
        let committed_reward = if outcome.success {
            cfg.terminal_reward(outcome.cost, outcome.intervention.len())
        } else {
            0.0
        };
        if r > committed_reward {
            outcome.intervention = actions;
            outcome.cost = cost;
            outcome.success = true;
        }
    }
    Ok(outcome)
}
