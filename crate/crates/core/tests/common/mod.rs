//! Test-only oracles, kept independent of the library's own code paths.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::Rng;
use storystream_core::louvain::{CommunityId, Partition};
use storystream_core::simgraph::{NodeId, WeightedGraph};

/// Modularity straight from the definition: a double sum over all ordered
/// node pairs.
pub fn brute_modularity(
    g: &WeightedGraph,
    labels: &BTreeMap<NodeId, CommunityId>,
    gamma: f64,
) -> f64 {
    let nodes: Vec<NodeId> = g.nodes().collect();
    let k: BTreeMap<NodeId, f64> = nodes
        .iter()
        .map(|&i| (i, nodes.iter().map(|&j| g.weight(i, j)).sum()))
        .collect();
    let two_m: f64 = k.values().sum();
    if two_m == 0.0 {
        return 0.0;
    }
    let mut q = 0.0;
    for &i in &nodes {
        for &j in &nodes {
            if labels[&i] == labels[&j] {
                q += g.weight(i, j) - gamma * k[&i] * k[&j] / two_m;
            }
        }
    }
    q / two_m
}

pub fn random_graph<R: Rng>(rng: &mut R, n: u64, density: f64) -> WeightedGraph {
    let mut g = WeightedGraph::new();
    for i in 0..n {
        g.insert_node(i).unwrap();
    }
    for a in 0..n {
        for b in a + 1..n {
            if rng.gen_bool(density) {
                let w: f64 = rng.gen_range(0.0..1.0);
                if w > 0.0 {
                    g.set_edge(a, b, w).unwrap();
                }
            }
        }
    }
    g
}

/// All set partitions of `0..n` as restricted-growth label strings.
pub fn set_partitions(n: usize) -> Vec<Vec<u64>> {
    fn rec(prefix: &mut Vec<u64>, max: u64, n: usize, out: &mut Vec<Vec<u64>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        for c in 0..=max + 1 {
            prefix.push(c);
            rec(prefix, max.max(c), n, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if n == 0 {
        return out;
    }
    let mut prefix = vec![0];
    rec(&mut prefix, 0, n, &mut out);
    out
}

pub fn labels_of(p: &Partition) -> BTreeMap<NodeId, CommunityId> {
    p.iter().collect()
}

/// NMI with arithmetic-mean normalization, computed from a contingency
/// table.
pub fn nmi_oracle(a: &[u64], b: &[u64]) -> f64 {
    let n = a.len() as f64;
    let mut joint: BTreeMap<(u64, u64), f64> = BTreeMap::new();
    let mut ca: BTreeMap<u64, f64> = BTreeMap::new();
    let mut cb: BTreeMap<u64, f64> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_default() += 1.0;
        *ca.entry(x).or_default() += 1.0;
        *cb.entry(y).or_default() += 1.0;
    }
    let h = |c: &BTreeMap<u64, f64>| -c.values().map(|&v| v / n * (v / n).ln()).sum::<f64>();
    let (ha, hb) = (h(&ca), h(&cb));
    let mi: f64 = joint
        .iter()
        .map(|(&(x, y), &v)| v / n * ((v * n) / (ca[&x] * cb[&y])).ln())
        .sum();
    if ha == 0.0 && hb == 0.0 {
        return 1.0;
    }
    if ha == 0.0 || hb == 0.0 {
        return 0.0;
    }
    mi / ((ha + hb) / 2.0)
}
