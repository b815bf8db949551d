use serde::{Deserialize, Serialize};

use crate::action::Action;

/// Successes over attempts; 0 for an empty run.
pub fn validity(successes: &[bool]) -> f64 {
    if successes.is_empty() {
        return 0.0;
    }
    successes.iter().filter(|&&s| s).count() as f64 / successes.len() as f64
}

/// `(1/N) sum_i (C_i - C*_i)`.
pub fn average_regret(costs: &[f64], optimal: &[f64]) -> f64 {
    assert_eq!(costs.len(), optimal.len(), "one optimum per recommendation");
    if costs.is_empty() {
        return 0.0;
    }
    costs.iter().zip(optimal).map(|(c, o)| c - o).sum::<f64>() / costs.len() as f64
}

/// `(C - C_best) / (C_worst - C_best)` clamped to `[0, 1]`. The second value
/// flags a degenerate range (`C_worst == C_best`), reported as regret 0.
pub fn normalized_regret(cost: f64, best: f64, worst: f64) -> (f64, bool) {
    let range = worst - best;
    if !(range > 0.0) {
        return (0.0, true);
    }
    (((cost - best) / range).clamp(0.0, 1.0), false)
}

fn lcs_table(a: &[Action], b: &[Action]) -> Vec<Vec<usize>> {
    let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            t[i][j] = if a[i - 1] == b[j - 1] {
                t[i - 1][j - 1] + 1
            } else {
                t[i - 1][j].max(t[i][j - 1])
            };
        }
    }
    t
}

pub fn lcs_len(a: &[Action], b: &[Action]) -> usize {
    lcs_table(a, b)[a.len()][b.len()]
}

/// `LCS(a, b) / max(|a|, |b|)` over full `(f, x)` tuples; two empty
/// sequences are identical.
pub fn sequence_similarity(a: &[Action], b: &[Action]) -> f64 {
    let longest = a.len().max(b.len());
    if longest == 0 {
        return 1.0;
    }
    lcs_len(a, b) as f64 / longest as f64
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorTaxonomy {
    /// Actions of the recommendation outside the longest common subsequence.
    pub extra: usize,
    /// Aligned positions using the right function with a different argument.
    pub wrong_action: usize,
    /// Pairs of shared actions that appear in opposite orders.
    pub wrong_order: usize,
}

impl std::ops::AddAssign for ErrorTaxonomy {
    fn add_assign(&mut self, o: Self) {
        self.extra += o.extra;
        self.wrong_action += o.wrong_action;
        self.wrong_order += o.wrong_order;
    }
}

pub fn error_taxonomy(recommended: &[Action], optimal: &[Action]) -> ErrorTaxonomy {
    let extra = recommended.len() - lcs_len(recommended, optimal);
    let wrong_action = recommended
        .iter()
        .zip(optimal)
        .filter(|(r, o)| r.function == o.function && r.arg != o.arg)
        .count();
    let first = |seq: &[Action], a: &Action| seq.iter().position(|x| x == a);
    let mut shared: Vec<Action> = Vec::new();
    for a in recommended {
        if optimal.contains(a) && !shared.contains(a) {
            shared.push(a.to_owned());
        }
    }
    let mut wrong_order = 0;
    for i in 0..shared.len() {
        for j in i + 1..shared.len() {
            // shared is ordered by first position in `recommended`
            if first(optimal, &shared[i]) > first(optimal, &shared[j]) {
                wrong_order += 1;
            }
        }
    }
    ErrorTaxonomy {
        extra,
        wrong_action,
        wrong_order,
    }
}

/// Mean and the half-width of a normal 95% interval.
pub fn mean_ci(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, 1.96 * (var / n).sqrt())
}
