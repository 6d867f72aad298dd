//! Weighted modularity, hierarchical Louvain detection, and single-node
//! assignment by modularity comparison.
//!
//! Modularity follows the weighted Newman-Girvan form
//!
//! ```text
//! Q = 1/(2m) Σ_ij [A_ij - γ k_i k_j / (2m)] δ(c_i, c_j)
//! ```
//!
//! evaluated per community as `Σ_c [in_c / m - γ (tot_c / 2m)²]`, where
//! `in_c` is the edge weight inside `c` and `tot_c` the summed degree of its
//! members.
//!
//! Louvain alternates local moving (nodes visited in ascending id order,
//! each moved to the neighbouring community with the largest gain) with
//! aggregation of communities into super-nodes, until a level produces no
//! merge.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::simgraph::{NodeId, WeightedGraph};

pub type CommunityId = u64;

/// Upper bound on local-moving passes per level.
const MAX_PASSES: usize = 1_000;

#[derive(Debug, Error, PartialEq)]
pub enum LouvainError {
    #[error("partition does not cover exactly the graph's nodes")]
    PartitionMismatch,
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("node {0} is not in the graph")]
    NodeMissing(NodeId),
    #[error("resolution must be positive and finite, got {0}")]
    BadResolution(f64),
    #[error("minimum gain must be positive and finite, got {0}")]
    BadMinGain(f64),
}

/// Assignment of nodes to communities.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    assignment: BTreeMap<NodeId, CommunityId>,
}

impl Partition {
    pub fn new() -> Self {
        Self::default()
    }

    /// Every node of `g` in its own community, numbered in node order.
    pub fn singletons(g: &WeightedGraph) -> Self {
        g.nodes().zip(0..).collect()
    }

    /// Every node of `g` in community 0.
    pub fn all_in_one(g: &WeightedGraph) -> Self {
        g.nodes().map(|n| (n, 0)).collect()
    }

    pub fn get(&self, node: NodeId) -> Option<CommunityId> {
        self.assignment.get(&node).copied()
    }

    pub fn insert(&mut self, node: NodeId, community: CommunityId) -> Option<CommunityId> {
        self.assignment.insert(node, community)
    }

    pub fn remove(&mut self, node: NodeId) -> Option<CommunityId> {
        self.assignment.remove(&node)
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, CommunityId)> + '_ {
        self.assignment.iter().map(|(&n, &c)| (n, c))
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.assignment.keys().copied()
    }

    /// Members of each community, in ascending node order.
    pub fn communities(&self) -> BTreeMap<CommunityId, Vec<NodeId>> {
        let mut out: BTreeMap<CommunityId, Vec<NodeId>> = BTreeMap::new();
        for (n, c) in self.iter() {
            out.entry(c).or_default().push(n);
        }
        out
    }

    pub fn community_count(&self) -> usize {
        self.assignment.values().collect::<BTreeSet<_>>().len()
    }

    /// Largest community id in use.
    pub fn max_community(&self) -> Option<CommunityId> {
        self.assignment.values().copied().max()
    }

    /// Relabels communities 0, 1, ... by first appearance in node order.
    pub fn normalized(&self) -> Self {
        let mut relabel = BTreeMap::new();
        self.iter()
            .map(|(n, c)| {
                let next = relabel.len() as CommunityId;
                (n, *relabel.entry(c).or_insert(next))
            })
            .collect()
    }

    fn covers_exactly(&self, g: &WeightedGraph) -> bool {
        self.len() == g.node_count() && g.nodes().all(|n| self.assignment.contains_key(&n))
    }
}

impl FromIterator<(NodeId, CommunityId)> for Partition {
    fn from_iter<T: IntoIterator<Item = (NodeId, CommunityId)>>(iter: T) -> Self {
        Self {
            assignment: iter.into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LouvainConfig {
    /// Resolution γ.
    pub resolution: f64,
    /// A local-moving pass that improves Q by no more than this ends the level.
    pub min_gain: f64,
}

impl Default for LouvainConfig {
    fn default() -> Self {
        Self {
            resolution: 1.0,
            min_gain: 1e-7,
        }
    }
}

impl LouvainConfig {
    pub fn validate(&self) -> Result<(), LouvainError> {
        if !(self.resolution.is_finite() && self.resolution > 0.0) {
            return Err(LouvainError::BadResolution(self.resolution));
        }
        if !(self.min_gain.is_finite() && self.min_gain > 0.0) {
            return Err(LouvainError::BadMinGain(self.min_gain));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Level {
    pub partition: Partition,
    pub modularity: f64,
}

/// Partitions found at successive aggregation levels, finest first.
#[derive(Debug, Clone, PartialEq)]
pub struct Hierarchy {
    pub levels: Vec<Level>,
}

impl Hierarchy {
    /// The coarsest level.
    pub fn top(&self) -> &Level {
        self.levels
            .last()
            .expect("hierarchy has at least one level")
    }

    pub fn into_top(mut self) -> Level {
        self.levels.pop().expect("hierarchy has at least one level")
    }
}

/// Modularity of `p` over `g`. Zero when the graph has no edges.
pub fn modularity(g: &WeightedGraph, p: &Partition, resolution: f64) -> Result<f64, LouvainError> {
    if !p.covers_exactly(g) {
        return Err(LouvainError::PartitionMismatch);
    }
    let mut inside: BTreeMap<CommunityId, f64> = BTreeMap::new();
    let mut tot: BTreeMap<CommunityId, f64> = BTreeMap::new();
    let mut m = 0.0;
    for (a, b, w) in g.edges() {
        let (ca, cb) = (p.assignment[&a], p.assignment[&b]);
        *tot.entry(ca).or_default() += w;
        *tot.entry(cb).or_default() += w;
        if ca == cb {
            *inside.entry(ca).or_default() += w;
        }
        m += w;
    }
    if m == 0.0 {
        return Ok(0.0);
    }
    let q = tot
        .iter()
        .map(|(c, &t)| {
            let i = inside.get(c).copied().unwrap_or(0.0);
            i / m - resolution * (t / (2.0 * m)).powi(2)
        })
        .sum();
    Ok(q)
}

/// Picks the community for `new_node` that maximizes modularity, given a
/// partition `p` of every other node.
///
/// Candidates are each existing community and a fresh singleton. Ties go
/// to the singleton first, then to the lowest community id. The fresh id
/// is one past the largest id in `p`.
///
/// The choice is made from the modularity change relative to the
/// singleton placement, `w_c / m - γ tot_c k / (2m²)`, which only needs the
/// new node's neighbourhood; it ranks candidates exactly as recomputing Q
/// for each would.
pub fn assign_on_the_fly(
    g: &WeightedGraph,
    p: &Partition,
    new_node: NodeId,
    resolution: f64,
) -> Result<CommunityId, LouvainError> {
    if !g.contains(new_node) {
        return Err(LouvainError::NodeMissing(new_node));
    }
    if p.get(new_node).is_some()
        || p.len() + 1 != g.node_count()
        || p.nodes().any(|n| !g.contains(n))
    {
        return Err(LouvainError::PartitionMismatch);
    }
    let fresh = p.max_community().map_or(0, |c| c + 1);
    let m = g.total_weight();
    if m <= 0.0 {
        return Ok(fresh);
    }

    let mut links: BTreeMap<CommunityId, f64> = BTreeMap::new();
    let mut k_new = 0.0;
    for (n, w) in g.neighbours(new_node) {
        *links.entry(p.assignment[&n]).or_default() += w;
        k_new += w;
    }
    if links.is_empty() {
        return Ok(fresh);
    }
    let mut tot: BTreeMap<CommunityId, f64> = links.keys().map(|&c| (c, 0.0)).collect();
    for (n, c) in p.iter() {
        if let Some(t) = tot.get_mut(&c) {
            *t += g.degree(n);
        }
    }

    let mut best = fresh;
    let mut best_gain = 0.0;
    for (&c, &w_c) in &links {
        let gain = w_c / m - resolution * tot[&c] * k_new / (2.0 * m * m);
        if gain > best_gain {
            best = c;
            best_gain = gain;
        }
    }
    Ok(best)
}

/// Compact graph for one aggregation level.
struct LevelGraph {
    adj: Vec<Vec<(usize, f64)>>,
    self_loop: Vec<f64>,
    degree: Vec<f64>,
    m: f64,
}

impl LevelGraph {
    fn from_graph(g: &WeightedGraph, index: &BTreeMap<NodeId, usize>) -> Self {
        let n = index.len();
        let mut adj = vec![Vec::new(); n];
        let mut degree = vec![0.0; n];
        let mut m = 0.0;
        for (a, b, w) in g.edges() {
            let (ia, ib) = (index[&a], index[&b]);
            adj[ia].push((ib, w));
            adj[ib].push((ia, w));
            degree[ia] += w;
            degree[ib] += w;
            m += w;
        }
        for list in &mut adj {
            list.sort_by_key(|&(j, _)| j);
        }
        Self {
            adj,
            self_loop: vec![0.0; n],
            degree,
            m,
        }
    }

    fn len(&self) -> usize {
        self.adj.len()
    }

    /// Greedy local moving. Returns the community of each node, numbered
    /// 0..k by first appearance.
    fn local_moving(&self, cfg: &LouvainConfig) -> Vec<usize> {
        let n = self.len();
        let mut comm: Vec<usize> = (0..n).collect();
        if self.m <= 0.0 {
            return comm;
        }
        let two_m = 2.0 * self.m;
        let mut tot = self.degree.clone();
        let mut links = vec![0.0; n];
        let mut touched: Vec<usize> = Vec::new();

        for _ in 0..MAX_PASSES {
            let mut pass_gain = 0.0;
            for i in 0..n {
                let current = comm[i];
                let k_i = self.degree[i];
                for &(j, w) in &self.adj[i] {
                    let c = comm[j];
                    if links[c] == 0.0 {
                        touched.push(c);
                    }
                    links[c] += w;
                }
                if !touched.contains(&current) {
                    touched.push(current);
                }
                touched.sort_unstable();
                tot[current] -= k_i;

                let gain_of = |c: usize, links: &[f64], tot: &[f64]| {
                    links[c] - cfg.resolution * tot[c] * k_i / two_m
                };
                let stay = gain_of(current, &links, &tot);
                let mut best = current;
                let mut best_gain = f64::NEG_INFINITY;
                for &c in &touched {
                    let g = gain_of(c, &links, &tot);
                    if g > best_gain {
                        best = c;
                        best_gain = g;
                    }
                }
                tot[best] += k_i;
                comm[i] = best;
                if best != current {
                    pass_gain += (best_gain - stay) / self.m;
                }
                for &c in &touched {
                    links[c] = 0.0;
                }
                touched.clear();
            }
            if pass_gain <= cfg.min_gain {
                break;
            }
        }

        let mut relabel = vec![usize::MAX; n];
        let mut next = 0;
        for c in comm.iter_mut() {
            if relabel[*c] == usize::MAX {
                relabel[*c] = next;
                next += 1;
            }
            *c = relabel[*c];
        }
        comm
    }

    fn aggregate(&self, comm: &[usize], k: usize) -> Self {
        let mut weights: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); k];
        let mut self_loop = vec![0.0; k];
        let mut degree = vec![0.0; k];
        for i in 0..self.len() {
            let ci = comm[i];
            self_loop[ci] += self.self_loop[i];
            degree[ci] += self.degree[i];
            for &(j, w) in &self.adj[i] {
                // visit each edge once
                if j < i {
                    continue;
                }
                let cj = comm[j];
                if ci == cj {
                    self_loop[ci] += w;
                } else {
                    *weights[ci].entry(cj).or_default() += w;
                    *weights[cj].entry(ci).or_default() += w;
                }
            }
        }
        Self {
            adj: weights
                .into_iter()
                .map(|m| m.into_iter().collect())
                .collect(),
            self_loop,
            degree,
            m: self.m,
        }
    }
}

/// Runs hierarchical Louvain over `g`.
///
/// Deterministic: nodes are visited in ascending id order and gain ties go
/// to the lowest community id. Each recorded level merged at least one
/// pair of communities; if the first level merges nothing, the single
/// level is the singleton partition.
pub fn louvain(g: &WeightedGraph, cfg: &LouvainConfig) -> Result<Hierarchy, LouvainError> {
    cfg.validate()?;
    if g.is_empty() {
        return Err(LouvainError::EmptyGraph);
    }
    let nodes: Vec<NodeId> = g.nodes().collect();
    let index: BTreeMap<NodeId, usize> = nodes.iter().enumerate().map(|(i, &n)| (n, i)).collect();
    let mut level = LevelGraph::from_graph(g, &index);
    // community of each original node at the current level
    let mut membership: Vec<usize> = (0..nodes.len()).collect();
    let mut levels = Vec::new();

    loop {
        let comm = level.local_moving(cfg);
        let k = comm.iter().copied().max().map_or(0, |c| c + 1);
        if k == level.len() {
            break;
        }
        for c in membership.iter_mut() {
            *c = comm[*c];
        }
        let partition: Partition = nodes
            .iter()
            .zip(&membership)
            .map(|(&n, &c)| (n, c as CommunityId))
            .collect();
        let q = modularity(g, &partition, cfg.resolution)?;
        levels.push(Level {
            partition,
            modularity: q,
        });
        level = level.aggregate(&comm, k);
        if k == 1 {
            break;
        }
    }

    if levels.is_empty() {
        let partition = Partition::singletons(g);
        let q = modularity(g, &partition, cfg.resolution)?;
        levels.push(Level {
            partition,
            modularity: q,
        });
    }
    Ok(Hierarchy { levels })
}
