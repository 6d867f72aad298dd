//! Undirected weighted similarity graph over articles.
//!
//! Edge weights come from cosine similarity passed through a
//! [`WeightTransform`]. Weighted degrees and the total edge weight `m` are
//! maintained incrementally as nodes come and go.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::Bound::{Excluded, Unbounded};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::DocVector;

pub type NodeId = u64;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("cosine of a zero vector is undefined")]
    ZeroVector,
    #[error("vector dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("node {0} already present")]
    DuplicateNode(NodeId),
    #[error("node {0} not in graph")]
    UnknownNode(NodeId),
    #[error("neighbour vectors do not cover the graph's nodes")]
    CoverageMismatch,
    #[error("edge weight must be finite and positive, got {0}")]
    InvalidWeight(f64),
    #[error("self-loop on node {0}")]
    SelfLoop(NodeId),
    #[error("threshold must lie in [0, 1), got {0}")]
    BadThreshold(f64),
}

/// Cosine similarity, clamped to `[-1, 1]` against rounding.
pub fn cosine(u: &DocVector, v: &DocVector) -> Result<f64, GraphError> {
    if u.dim() != v.dim() {
        return Err(GraphError::DimensionMismatch(u.dim(), v.dim()));
    }
    let nu = u.norm();
    let nv = v.norm();
    if nu == 0.0 || nv == 0.0 {
        return Err(GraphError::ZeroVector);
    }
    Ok((u.dot(v) / (nu * nv)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransformKind {
    /// `w = max(0, cos)`
    Clamp,
    /// `w = (cos + 1) / 2`
    Shift,
}

/// Maps a cosine similarity to an edge weight; weights `<= epsilon` are
/// dropped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightTransform {
    pub kind: TransformKind,
    #[serde(default)]
    pub epsilon: f64,
}

impl Default for WeightTransform {
    fn default() -> Self {
        Self {
            kind: TransformKind::Clamp,
            epsilon: 0.0,
        }
    }
}

impl WeightTransform {
    pub fn new(kind: TransformKind, epsilon: f64) -> Result<Self, GraphError> {
        let t = Self { kind, epsilon };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), GraphError> {
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(GraphError::BadThreshold(self.epsilon));
        }
        Ok(())
    }

    /// Edge weight for a cosine value, or `None` if the edge is dropped.
    pub fn weight(&self, cos: f64) -> Option<f64> {
        let w = match self.kind {
            TransformKind::Clamp => cos.max(0.0),
            TransformKind::Shift => (cos + 1.0) / 2.0,
        };
        (w > self.epsilon).then_some(w)
    }

    /// Transformed similarity between two vectors.
    pub fn edge(&self, u: &DocVector, v: &DocVector) -> Result<Option<f64>, GraphError> {
        Ok(self.weight(cosine(u, v)?))
    }
}

/// Undirected weighted graph without self-loops.
///
/// `degree(i)` is the sum of weights incident to `i`, and
/// `total_weight()` is `m = ½ Σ_i k_i`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightedGraph {
    adj: BTreeMap<NodeId, BTreeMap<NodeId, f64>>,
    degree: BTreeMap<NodeId, f64>,
    total_weight: f64,
    edge_count: usize,
}

impl WeightedGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds the graph over every unordered pair of `vectors`.
    pub fn build(
        vectors: &BTreeMap<NodeId, DocVector>,
        transform: &WeightTransform,
    ) -> Result<Self, GraphError> {
        let mut g = Self::new();
        for &id in vectors.keys() {
            g.insert_node(id)?;
        }
        let entries: Vec<_> = vectors.iter().collect();
        for (i, (&a, va)) in entries.iter().enumerate() {
            for (&b, vb) in &entries[i + 1..] {
                if let Some(w) = transform.edge(va, vb)? {
                    g.set_edge(a, b, w)?;
                }
            }
        }
        Ok(g)
    }

    /// Adds `id` and connects it to every current node.
    ///
    /// `others` must hold a vector for exactly the nodes already present.
    pub fn add_node(
        &mut self,
        id: NodeId,
        vector: &DocVector,
        others: &BTreeMap<NodeId, DocVector>,
        transform: &WeightTransform,
    ) -> Result<(), GraphError> {
        if self.contains(id) {
            return Err(GraphError::DuplicateNode(id));
        }
        if others.len() != self.adj.len() || others.keys().any(|k| !self.adj.contains_key(k)) {
            return Err(GraphError::CoverageMismatch);
        }
        let mut edges = Vec::new();
        for (&other, ov) in others {
            if let Some(w) = transform.edge(vector, ov)? {
                edges.push((other, w));
            }
        }
        self.insert_node(id)?;
        for (other, w) in edges {
            self.set_edge(id, other, w)?;
        }
        Ok(())
    }

    /// Removes `ids` and their incident edges. Fails without mutating if any
    /// id is absent.
    pub fn remove_nodes(&mut self, ids: &BTreeSet<NodeId>) -> Result<(), GraphError> {
        if let Some(&missing) = ids.iter().find(|id| !self.adj.contains_key(id)) {
            return Err(GraphError::UnknownNode(missing));
        }
        for id in ids {
            let Some(neighbours) = self.adj.remove(id) else {
                continue;
            };
            self.degree.remove(id);
            for (n, w) in neighbours {
                let nadj = self.adj.get_mut(&n).expect("symmetric adjacency");
                nadj.remove(id);
                let empty = nadj.is_empty();
                let d = self.degree.get_mut(&n).expect("degree entry");
                // an isolated node has degree exactly zero, whatever the drift
                *d = if empty { 0.0 } else { *d - w };
                self.total_weight -= w;
                self.edge_count -= 1;
            }
        }
        if self.edge_count == 0 {
            self.total_weight = 0.0;
        }
        Ok(())
    }

    /// Adds an isolated node.
    pub fn insert_node(&mut self, id: NodeId) -> Result<(), GraphError> {
        if self.contains(id) {
            return Err(GraphError::DuplicateNode(id));
        }
        self.adj.insert(id, BTreeMap::new());
        self.degree.insert(id, 0.0);
        Ok(())
    }

    /// Sets the weight of edge `{a, b}`, replacing any previous weight.
    pub fn set_edge(&mut self, a: NodeId, b: NodeId, w: f64) -> Result<(), GraphError> {
        if a == b {
            return Err(GraphError::SelfLoop(a));
        }
        if !(w.is_finite() && w > 0.0) {
            return Err(GraphError::InvalidWeight(w));
        }
        for id in [a, b] {
            if !self.contains(id) {
                return Err(GraphError::UnknownNode(id));
            }
        }
        let old = self.adj.get_mut(&a).unwrap().insert(b, w);
        self.adj.get_mut(&b).unwrap().insert(a, w);
        let delta = w - old.unwrap_or(0.0);
        *self.degree.get_mut(&a).unwrap() += delta;
        *self.degree.get_mut(&b).unwrap() += delta;
        self.total_weight += delta;
        if old.is_none() {
            self.edge_count += 1;
        }
        Ok(())
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.adj.contains_key(&id)
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    /// Node ids in ascending order.
    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.adj.keys().copied()
    }

    pub fn neighbours(&self, id: NodeId) -> impl Iterator<Item = (NodeId, f64)> + '_ {
        self.adj
            .get(&id)
            .into_iter()
            .flat_map(|m| m.iter().map(|(&n, &w)| (n, w)))
    }

    /// Weight of `{a, b}`, zero when absent.
    pub fn weight(&self, a: NodeId, b: NodeId) -> f64 {
        self.adj
            .get(&a)
            .and_then(|m| m.get(&b))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn degree(&self, id: NodeId) -> f64 {
        self.degree.get(&id).copied().unwrap_or(0.0)
    }

    /// Total edge weight `m`.
    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    /// Every edge once, as `(low, high, weight)` in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId, f64)> + '_ {
        self.adj.iter().flat_map(|(&a, m)| {
            m.range((Excluded(a), Unbounded))
                .map(move |(&b, &w)| (a, b, w))
        })
    }

    /// Verifies symmetry, positivity and that stored degrees and `m` agree
    /// with a recount to within `tol`.
    pub fn check_consistency(&self, tol: f64) -> Result<(), String> {
        let mut total = 0.0;
        let mut count = 0;
        for (&a, m) in &self.adj {
            let mut k = 0.0;
            for (&b, &w) in m {
                if a == b {
                    return Err(format!("self-loop on {a}"));
                }
                if w <= 0.0 {
                    return Err(format!("non-positive weight on {a}-{b}"));
                }
                if self.weight(b, a) != w {
                    return Err(format!("asymmetric edge {a}-{b}"));
                }
                k += w;
                if a < b {
                    total += w;
                    count += 1;
                }
            }
            if (k - self.degree(a)).abs() > tol {
                return Err(format!("degree drift on {a}: {} vs {k}", self.degree(a)));
            }
        }
        if count != self.edge_count {
            return Err(format!("edge count {} vs {count}", self.edge_count));
        }
        if (total - self.total_weight).abs() > tol {
            return Err(format!("m drift: {} vs {total}", self.total_weight));
        }
        Ok(())
    }
}
