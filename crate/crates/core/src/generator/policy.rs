//! Two-head multilayer perceptron `(s, w) -> (pi_f, pi_x)`.
//!
//! The input is the encoded state concatenated with the weight vector. A
//! single tanh hidden layer feeds two softmax heads: one over action
//! functions, one over argument-grid positions. Output layers start at zero,
//! so a freshly initialised model is exactly the uniform policy.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoding::FeatureEncoder;
use crate::error::{Error, Result};
use crate::problem::RecourseProblem;
use crate::schema::State;

const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyModel {
    pub version: u32,
    /// Fingerprint of the problem the model was built for.
    pub problem_fingerprint: String,
    encoder: FeatureEncoder,
    weight_dim: usize,
    hidden: usize,
    functions: usize,
    bins: usize,
    params: Vec<f64>,
}

/// One supervised target: the encoded input and the two visit distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyExample {
    pub input: Vec<f64>,
    pub target_f: Vec<f64>,
    pub target_x: Vec<f64>,
}

struct Layout {
    w1: usize,
    b1: usize,
    wf: usize,
    bf: usize,
    wx: usize,
    bx: usize,
    total: usize,
}

pub(crate) struct Forward {
    hidden: Vec<f64>,
    pub pf: Vec<f64>,
    pub px: Vec<f64>,
}

fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        z += *x;
    }
    for x in v.iter_mut() {
        *x /= z;
    }
}

impl PolicyModel {
    pub fn new(problem: &RecourseProblem, hidden: usize, seed: u64) -> Result<Self> {
        if hidden == 0 {
            return Err(Error::Config("hidden width must be positive".into()));
        }
        let mut model = Self {
            version: FORMAT_VERSION,
            problem_fingerprint: problem.fingerprint(),
            encoder: FeatureEncoder::from_schema(&problem.schema),
            weight_dim: problem.m(),
            hidden,
            functions: problem.catalog.functions().len(),
            bins: problem.catalog.max_grid(),
            params: Vec::new(),
        };
        let layout = model.layout();
        model.params = vec![0.0; layout.total];
        let fan_in = model.input_width() as f64;
        let bound = (3.0 / fan_in).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for p in &mut model.params[layout.w1..layout.b1] {
            *p = rng.random_range(-bound..bound);
        }
        Ok(model)
    }

    fn layout(&self) -> Layout {
        let w1 = 0;
        let b1 = w1 + self.hidden * self.input_width();
        let wf = b1 + self.hidden;
        let bf = wf + self.functions * self.hidden;
        let wx = bf + self.functions;
        let bx = wx + self.bins * self.hidden;
        Layout {
            w1,
            b1,
            wf,
            bf,
            wx,
            bx,
            total: bx + self.bins,
        }
    }

    pub fn input_width(&self) -> usize {
        self.encoder.width() + self.weight_dim
    }

    pub fn functions(&self) -> usize {
        self.functions
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn parameters(&self) -> &[f64] {
        &self.params
    }

    /// Rejects a model trained for a different problem.
    pub fn check_compatible(&self, problem: &RecourseProblem) -> Result<()> {
        if self.version != FORMAT_VERSION {
            return Err(Error::Artifact(format!("unsupported policy format version {}", self.version)));
        }
        if self.problem_fingerprint != problem.fingerprint() {
            return Err(Error::Artifact("policy was trained for a different problem".into()));
        }
        Ok(())
    }

    pub fn encode_input(&self, s: &State, w: &[f64]) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.input_width());
        self.encoder.encode_into(s, &mut x);
        x.extend_from_slice(w);
        x
    }

    pub(crate) fn forward(&self, input: &[f64]) -> Forward {
        let l = self.layout();
        let n_in = self.input_width();
        let p = &self.params;
        let hidden: Vec<f64> = (0..self.hidden)
            .map(|h| {
                let row = &p[l.w1 + h * n_in..l.w1 + (h + 1) * n_in];
                let z: f64 = row.iter().zip(input).map(|(a, b)| a * b).sum::<f64>() + p[l.b1 + h];
                z.tanh()
            })
            .collect();
        let head = |w: usize, b: usize, k: usize| -> Vec<f64> {
            let mut out: Vec<f64> = (0..k)
                .map(|o| {
                    let row = &p[w + o * self.hidden..w + (o + 1) * self.hidden];
                    row.iter().zip(&hidden).map(|(a, b)| a * b).sum::<f64>() + p[b + o]
                })
                .collect();
            softmax_in_place(&mut out);
            out
        };
        let pf = head(l.wf, l.bf, self.functions);
        let px = head(l.wx, l.bx, self.bins);
        Forward { hidden, pf, px }
    }

    /// `(pi_f, pi_x)` for the given state and weights.
    pub fn predict(&self, s: &State, w: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let out = self.forward(&self.encode_input(s, w));
        (out.pf, out.px)
    }

    /// Cross-entropy of both heads against their targets.
    pub fn loss(&self, example: &PolicyExample) -> f64 {
        let out = self.forward(&example.input);
        cross_entropy(&out.pf, &example.target_f) + cross_entropy(&out.px, &example.target_x)
    }

    /// Accumulates the gradient of [`Self::loss`] into `grad`; returns the loss.
    pub(crate) fn accumulate_gradient(&self, example: &PolicyExample, grad: &mut [f64]) -> f64 {
        let l = self.layout();
        let n_in = self.input_width();
        let out = self.forward(&example.input);
        let p = &self.params;
        let mut d_hidden = vec![0.0; self.hidden];
        let mut head = |probs: &[f64], target: &[f64], w: usize, b: usize| {
            for (o, (pr, t)) in probs.iter().zip(target).enumerate() {
                let d = pr - t;
                if d == 0.0 {
                    continue;
                }
                grad[b + o] += d;
                for h in 0..self.hidden {
                    grad[w + o * self.hidden + h] += d * out.hidden[h];
                    d_hidden[h] += d * p[w + o * self.hidden + h];
                }
            }
        };
        head(&out.pf, &example.target_f, l.wf, l.bf);
        head(&out.px, &example.target_x, l.wx, l.bx);
        for h in 0..self.hidden {
            let dz = d_hidden[h] * (1.0 - out.hidden[h] * out.hidden[h]);
            if dz == 0.0 {
                continue;
            }
            grad[l.b1 + h] += dz;
            let row = &mut grad[l.w1 + h * n_in..l.w1 + (h + 1) * n_in];
            for (g, x) in row.iter_mut().zip(&example.input) {
                *g += dz * x;
            }
        }
        cross_entropy(&out.pf, &example.target_f) + cross_entropy(&out.px, &example.target_x)
    }

    pub(crate) fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }
}

fn cross_entropy(p: &[f64], target: &[f64]) -> f64 {
    -p.iter()
        .zip(target)
        .filter(|(_, t)| **t > 0.0)
        .map(|(p, t)| t * p.max(1e-300).ln())
        .sum::<f64>()
}

/// Adam optimiser state over a flat parameter vector.
pub(crate) struct Adam {
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    pub fn new(n: usize, lr: f64) -> Self {
        Self {
            lr,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * grad[i];
            self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * grad[i] * grad[i];
            params[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + Self::EPS);
        }
    }
}
