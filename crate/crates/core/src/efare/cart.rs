//! CART classification trees with Gini splitting.
//!
//! Splits test `x[feature] <= threshold` (left) against `> threshold`
//! (right), with thresholds at midpoints between consecutive distinct values.
//! Among splits of equal gain the lowest feature index wins, then the lowest
//! threshold, which keeps training fully deterministic.

use serde::{Deserialize, Serialize};

use super::rule::{BooleanRule, RuleLiteral, RuleOp};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: Some(4),
            min_samples_leaf: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        /// Training samples per class that reached this leaf.
        counts: Vec<usize>,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub classes: usize,
    pub root: TreeNode,
}

/// Leaf reached by one input, with the literals along its path.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeDecision<'a> {
    pub counts: &'a [usize],
    pub path: Vec<RuleLiteral>,
}

impl TreeDecision<'_> {
    /// Majority class; ties go to the lowest class index.
    pub fn class(&self) -> usize {
        let mut best = 0;
        for (c, &n) in self.counts.iter().enumerate() {
            if n > self.counts[best] {
                best = c;
            }
        }
        best
    }

    /// Classes by descending vote, ties by class index; zero-vote classes last.
    pub fn ranked(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.counts.len()).collect();
        order.sort_by(|&a, &b| self.counts[b].cmp(&self.counts[a]).then(a.cmp(&b)));
        order
    }

    pub fn rule(&self) -> BooleanRule {
        BooleanRule {
            literals: self.path.clone(),
        }
    }
}

fn gini(counts: &[usize], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

const MIN_GAIN: f64 = 1e-12;

impl DecisionTree {
    /// A single leaf predicting `class`.
    pub fn constant(classes: usize, class: usize) -> Self {
        let mut counts = vec![0; classes];
        counts[class] = 1;
        Self {
            classes,
            root: TreeNode::Leaf { counts },
        }
    }

    pub fn fit(xs: &[Vec<f64>], ys: &[usize], classes: usize, params: TreeParams) -> Self {
        assert_eq!(xs.len(), ys.len(), "one label per sample");
        assert!(ys.iter().all(|&y| y < classes), "label out of range");
        let ids: Vec<usize> = (0..xs.len()).collect();
        let root = grow(xs, ys, classes, &ids, 0, &params);
        Self { classes, root }
    }

    pub fn decide(&self, x: &[f64]) -> TreeDecision<'_> {
        let mut node = &self.root;
        let mut path = Vec::new();
        loop {
            match node {
                TreeNode::Leaf { counts } => return TreeDecision { counts, path },
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    let goes_left = x[*feature] <= *threshold;
                    path.push(RuleLiteral {
                        feature: *feature,
                        op: if goes_left { RuleOp::Le } else { RuleOp::Gt },
                        threshold: *threshold,
                    });
                    node = if goes_left { left } else { right };
                }
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        self.decide(x).class()
    }

    pub fn depth(&self) -> usize {
        fn d(n: &TreeNode) -> usize {
            match n {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + d(left).max(d(right)),
            }
        }
        d(&self.root)
    }

    /// Feature tested at the root, if the tree splits at all.
    pub fn root_feature(&self) -> Option<usize> {
        match &self.root {
            TreeNode::Leaf { .. } => None,
            TreeNode::Split { feature, .. } => Some(*feature),
        }
    }
}

fn grow(xs: &[Vec<f64>], ys: &[usize], classes: usize, ids: &[usize], depth: usize, p: &TreeParams) -> TreeNode {
    let mut counts = vec![0; classes];
    for &i in ids {
        counts[ys[i]] += 1;
    }
    let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
    let depth_ok = p.max_depth.is_none_or(|d| depth < d);
    let min_leaf = p.min_samples_leaf.max(1);
    if pure || !depth_ok || ids.len() < 2 * min_leaf {
        return TreeNode::Leaf { counts };
    }
    let Some((feature, threshold)) = best_split(xs, ys, classes, ids, &counts, min_leaf) else {
        return TreeNode::Leaf { counts };
    };
    let (l, r): (Vec<usize>, Vec<usize>) = ids.iter().partition(|&&i| xs[i][feature] <= threshold);
    TreeNode::Split {
        feature,
        threshold,
        left: Box::new(grow(xs, ys, classes, &l, depth + 1, p)),
        right: Box::new(grow(xs, ys, classes, &r, depth + 1, p)),
    }
}

fn best_split(
    xs: &[Vec<f64>],
    ys: &[usize],
    classes: usize,
    ids: &[usize],
    counts: &[usize],
    min_leaf: usize,
) -> Option<(usize, f64)> {
    let n = ids.len();
    let parent = gini(counts, n);
    let dims = xs[ids[0]].len();
    let mut best: Option<(usize, f64, f64)> = None;
    let mut sorted = ids.to_vec();
    for f in 0..dims {
        sorted.sort_by(|&a, &b| xs[a][f].total_cmp(&xs[b][f]).then(a.cmp(&b)));
        let mut left = vec![0usize; classes];
        for k in 0..n - 1 {
            left[ys[sorted[k]]] += 1;
            let (lo, hi) = (xs[sorted[k]][f], xs[sorted[k + 1]][f]);
            let n_left = k + 1;
            if lo == hi || n_left < min_leaf || n - n_left < min_leaf {
                continue;
            }
            let right: Vec<usize> = counts.iter().zip(&left).map(|(c, l)| c - l).collect();
            let child = (n_left as f64 * gini(&left, n_left) + (n - n_left) as f64 * gini(&right, n - n_left))
                / n as f64;
            let gain = parent - child;
            if gain > MIN_GAIN && best.is_none_or(|(_, _, g)| gain > g + MIN_GAIN) {
                best = Some((f, lo + 0.5 * (hi - lo), gain));
            }
        }
    }
    best.map(|(f, t, _)| (f, t))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pure_data_gives_a_leaf() {
        let xs = vec![vec![1.0], vec![2.0], vec![3.0]];
        let tree = DecisionTree::fit(&xs, &[1, 1, 1], 2, TreeParams::default());
        assert_eq!(tree.depth(), 0);
        assert_eq!(tree.predict(&[10.0]), 1);
    }

    #[test]
    fn separable_on_second_feature_gives_depth_one() {
        let xs = vec![
            vec![0.0, 1.0],
            vec![5.0, 2.0],
            vec![1.0, 8.0],
            vec![4.0, 9.0],
        ];
        let tree = DecisionTree::fit(&xs, &[0, 0, 1, 1], 2, TreeParams::default());
        assert_eq!(tree.depth(), 1);
        assert_eq!(tree.root_feature(), Some(1));
        match &tree.root {
            TreeNode::Split { threshold, .. } => assert_eq!(*threshold, 5.0),
            _ => unreachable!(),
        }
        let d = tree.decide(&[0.0, 7.0]);
        assert_eq!(d.class(), 1);
        assert!(d.rule().holds(&[0.0, 7.0]));
    }

    #[test]
    fn equal_gain_prefers_lowest_feature() {
        // Both features separate the classes perfectly.
        let xs = vec![vec![0.0, 0.0], vec![0.0, 0.0], vec![1.0, 1.0], vec![1.0, 1.0]];
        let tree = DecisionTree::fit(&xs, &[0, 0, 1, 1], 2, TreeParams::default());
        assert_eq!(tree.root_feature(), Some(0));
    }

    #[test]
    fn min_leaf_blocks_singleton_splits() {
        let xs = vec![vec![0.0], vec![1.0], vec![2.0]];
        let tree = DecisionTree::fit(&xs, &[0, 1, 0], 2, TreeParams::default());
        assert_eq!(tree.depth(), 0);
        assert_eq!(tree.predict(&[1.0]), 0);
    }

    #[test]
    fn ranked_orders_by_votes_then_index() {
        let tree = DecisionTree {
            classes: 4,
            root: TreeNode::Leaf {
                counts: vec![1, 3, 0, 3],
            },
        };
        assert_eq!(tree.decide(&[]).ranked(), vec![1, 3, 0, 2]);
        assert_eq!(tree.predict(&[]), 1);
    }
}
