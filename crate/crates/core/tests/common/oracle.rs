//! Reference implementations written directly from the model definitions,
//! sharing no code with the library. They work on plain vectors so that a
//! bug in the library's data structures cannot leak into the expected values.

#![allow(dead_code)]

/// A raw action description: target feature, `true` for additive effects,
/// and the argument grid.
#[derive(Debug, Clone)]
pub struct RawAction {
    pub target: usize,
    pub additive: bool,
    pub args: Vec<f64>,
}

/// Applies `(function, arg)` pairs from `s0` and sums per-step costs.
///
/// Step cost, on the state before the step:
/// `w[i] * (new_i - old_i) + sum over edges (j -> i) of w[d + e] * s[j]`,
/// where `e` is the position of the edge in lexicographic edge order,
/// clamped below at zero.
pub fn intervention_cost(
    d: usize,
    edges: &[(usize, usize)],
    actions: &[RawAction],
    w: &[f64],
    s0: &[f64],
    intervention: &[(usize, usize)],
) -> f64 {
    let mut sorted = edges.to_vec();
    sorted.sort();
    let mut s = s0.to_vec();
    let mut total = 0.0;
    for &(f, x) in intervention {
        let act = &actions[f];
        let i = act.target;
        let new = if act.additive { s[i] + act.args[x] } else { act.args[x] };
        let mut c = w[i] * (new - s[i]);
        for (e, &(from, to)) in sorted.iter().enumerate() {
            if to == i {
                c += w[d + e] * s[from];
            }
        }
        total += c.max(0.0);
        s[i] = new;
    }
    total
}

/// Final state after applying the intervention.
pub fn apply(actions: &[RawAction], s0: &[f64], intervention: &[(usize, usize)]) -> Vec<f64> {
    let mut s = s0.to_vec();
    for &(f, x) in intervention {
        let act = &actions[f];
        s[act.target] = if act.additive { s[act.target] + act.args[x] } else { act.args[x] };
    }
    s
}

/// `-(1/n) sum_j min_i costs[i][j]`.
pub fn eus_noiseless(set: &[Vec<f64>]) -> f64 {
    let n = set[0].len();
    let mut total = 0.0;
    for j in 0..n {
        let mut m = f64::INFINITY;
        for c in set {
            if c[j] < m {
                m = c[j];
            }
        }
        total += m;
    }
    -total / n as f64
}

/// `-(1/n) sum_j sum_i p_i(j) costs[i][j]` with a max-shifted softmax.
pub fn eus_logistic(set: &[Vec<f64>], lambda: f64) -> f64 {
    let n = set[0].len();
    let mut total = 0.0;
    for j in 0..n {
        let logits: Vec<f64> = set.iter().map(|c| -lambda * c[j]).collect();
        let top = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = logits.iter().map(|l| (l - top).exp()).sum();
        for (c, l) in set.iter().zip(&logits) {
            total += (l - top).exp() / z * c[j];
        }
    }
    -total / n as f64
}

/// Best noiseless EUS over all subsets of `pool` of size exactly `min(k, |pool|)`.
pub fn brute_force_best(pool: &[Vec<f64>], k: usize) -> f64 {
    fn rec(pool: &[Vec<f64>], k: usize, from: usize, picked: &mut Vec<Vec<f64>>, best: &mut f64) {
        if picked.len() == k {
            *best = best.max(eus_noiseless(picked));
            return;
        }
        for i in from..pool.len() {
            picked.push(pool[i].clone());
            rec(pool, k, i + 1, picked, best);
            picked.pop();
        }
    }
    let mut best = f64::NEG_INFINITY;
    rec(pool, k.min(pool.len()), 0, &mut Vec::new(), &mut best);
    best
}

/// Log density of a Gaussian mixture with diagonal covariances.
pub fn mixture_log_density(components: &[(f64, Vec<f64>, Vec<f64>)], x: &[f64]) -> f64 {
    let mut terms = Vec::new();
    for (weight, mean, var) in components {
        let mut lp = weight.ln();
        for ((xi, mi), vi) in x.iter().zip(mean).zip(var) {
            lp += -0.5 * ((xi - mi) * (xi - mi) / vi + (2.0 * std::f64::consts::PI * vi).ln());
        }
        terms.push(lp);
    }
    let top = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln()
}
