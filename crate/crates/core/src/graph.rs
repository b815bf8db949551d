//! Causal cost graph and the SCM weight vector laid out over it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Directed acyclic graph with one cost node per feature.
///
/// Edges are kept sorted lexicographically; that order fixes the layout of
/// the edge block in [`ScmWeights`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GraphRepr", into = "GraphRepr")]
pub struct CausalGraph {
    nodes: usize,
    edges: Vec<(usize, usize)>,
    /// For every node, `(parent, weight index)` sorted by parent.
    parents: Vec<Vec<(usize, usize)>>,
}

#[derive(Serialize, Deserialize)]
struct GraphRepr {
    nodes: usize,
    edges: Vec<(usize, usize)>,
}

impl TryFrom<GraphRepr> for CausalGraph {
    type Error = Error;

    fn try_from(r: GraphRepr) -> Result<Self> {
        Self::new(r.nodes, r.edges)
    }
}

impl From<CausalGraph> for GraphRepr {
    fn from(g: CausalGraph) -> Self {
        GraphRepr {
            nodes: g.nodes,
            edges: g.edges,
        }
    }
}

impl CausalGraph {
    pub fn new(nodes: usize, mut edges: Vec<(usize, usize)>) -> Result<Self> {
        edges.sort_unstable();
        for w in edges.windows(2) {
            if w[0] == w[1] {
                return Err(Error::Graph(format!("duplicate edge {:?}", w[0])));
            }
        }
        for &(from, to) in &edges {
            if from >= nodes || to >= nodes {
                return Err(Error::Graph(format!("edge ({from}, {to}) references a missing node")));
            }
            if from == to {
                return Err(Error::Graph(format!("self-loop on node {from}")));
            }
        }
        let mut parents = vec![Vec::new(); nodes];
        for (e, &(from, to)) in edges.iter().enumerate() {
            parents[to].push((from, nodes + e));
        }
        let graph = Self {
            nodes,
            edges,
            parents,
        };
        graph.check_acyclic()?;
        Ok(graph)
    }

    /// Kahn's algorithm; fails if some node is never freed.
    fn check_acyclic(&self) -> Result<()> {
        let mut indegree: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut ready: Vec<usize> = (0..self.nodes).filter(|&i| indegree[i] == 0).collect();
        let mut seen = 0;
        while let Some(n) = ready.pop() {
            seen += 1;
            for &(from, to) in &self.edges {
                if from == n {
                    indegree[to] -= 1;
                    if indegree[to] == 0 {
                        ready.push(to);
                    }
                }
            }
        }
        if seen == self.nodes {
            Ok(())
        } else {
            Err(Error::Graph("graph contains a cycle".into()))
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// `m = |V| + |E|`.
    pub fn weight_len(&self) -> usize {
        self.nodes + self.edges.len()
    }

    pub fn parents(&self, node: usize) -> &[(usize, usize)] {
        &self.parents[node]
    }

    pub fn weight_labels(&self, names: &[String]) -> Vec<String> {
        let mut labels: Vec<String> = names.iter().map(|n| format!("w[{n}]")).collect();
        labels.extend(
            self.edges
                .iter()
                .map(|&(a, b)| format!("w[{}->{}]", names[a], names[b])),
        );
        labels
    }
}

/// Weight vector: node weights by feature index, then edge weights in edge order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScmWeights(Vec<f64>);

impl ScmWeights {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(m: usize) -> Self {
        Self(vec![0.0; m])
    }

    pub fn checked(values: Vec<f64>, graph: &CausalGraph) -> Result<Self> {
        let w = Self(values);
        w.validate(graph)?;
        Ok(w)
    }

    pub fn validate(&self, graph: &CausalGraph) -> Result<()> {
        if self.0.len() != graph.weight_len() {
            return Err(Error::WeightArity {
                expected: graph.weight_len(),
                got: self.0.len(),
            });
        }
        if self.0.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("weights"));
        }
        Ok(())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self(self.0.iter().map(|v| v * alpha).collect())
    }

    pub fn distance(&self, other: &ScmWeights) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for ScmWeights {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edges_are_canonicalised() {
        let g = CausalGraph::new(3, vec![(1, 2), (0, 2), (0, 1)]).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (0, 2), (1, 2)]);
        assert_eq!(g.weight_len(), 6);
        assert_eq!(g.parents(2), &[(0, 4), (1, 5)]);
        assert!(g.parents(0).is_empty());
    }

    #[test]
    fn rejects_cycles_duplicates_and_bad_endpoints() {
        assert!(CausalGraph::new(3, vec![(0, 1), (1, 2), (2, 0)]).is_err());
        assert!(CausalGraph::new(2, vec![(0, 1), (0, 1)]).is_err());
        assert!(CausalGraph::new(2, vec![(0, 2)]).is_err());
        assert!(CausalGraph::new(2, vec![(1, 1)]).is_err());
    }

    #[test]
    fn weight_validation() {
        let g = CausalGraph::new(2, vec![(0, 1)]).unwrap();
        assert!(ScmWeights::checked(vec![1.0, 2.0, 3.0], &g).is_ok());
        assert!(ScmWeights::checked(vec![1.0, 2.0], &g).is_err());
        assert!(ScmWeights::checked(vec![1.0, f64::NAN, 3.0], &g).is_err());
    }

    #[test]
    fn graph_serde_roundtrip_is_byte_identical() {
        let g = CausalGraph::new(4, vec![(2, 3), (0, 1), (1, 3)]).unwrap();
        let a = serde_json::to_string(&g).unwrap();
        let back: CausalGraph = serde_json::from_str(&a).unwrap();
        assert_eq!(back, g);
        assert_eq!(serde_json::to_string(&back).unwrap(), a);
        let cyclic = r#"{"nodes":2,"edges":[[0,1],[1,0]]}"#;
        assert!(serde_json::from_str::<CausalGraph>(cyclic).is_err());
    }
}
