mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use storystream_core::louvain::{
    assign_on_the_fly, louvain, modularity, CommunityId, LouvainConfig, Partition,
};
use storystream_core::simgraph::WeightedGraph;

use common::{brute_modularity, labels_of, random_graph, set_partitions};

#[test]
fn aggregate_form_matches_double_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let n = rng.gen_range(1..9);
        let g = random_graph(&mut rng, n, 0.6);
        let p: Partition = (0..n).map(|i| (i, rng.gen_range(0..3))).collect();
        let gamma = rng.gen_range(0.5..2.0);
        let fast = modularity(&g, &p, gamma).unwrap();
        let slow = brute_modularity(&g, &labels_of(&p), gamma);
        assert!((fast - slow).abs() <= 1e-12, "{fast} vs {slow}");
    }
}

#[test]
fn two_triangles_is_the_global_optimum() {
    let mut g = WeightedGraph::new();
    for i in 0..6 {
        g.insert_node(i).unwrap();
    }
    for (a, b) in [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)] {
        g.set_edge(a, b, 1.0).unwrap();
    }
    let mut best = f64::NEG_INFINITY;
    let mut best_labels = Vec::new();
    for labels in set_partitions(6) {
        let map: BTreeMap<u64, CommunityId> = labels
            .iter()
            .enumerate()
            .map(|(i, &c)| (i as u64, c))
            .collect();
        let q = brute_modularity(&g, &map, 1.0);
        if q > best + 1e-12 {
            best = q;
            best_labels = labels;
        }
    }
    assert!((best - 0.5).abs() <= 1e-9);
    assert_eq!(best_labels, vec![0, 0, 0, 1, 1, 1]);

    let top = louvain(&g, &LouvainConfig::default()).unwrap().into_top();
    let got: Vec<u64> = top.partition.normalized().iter().map(|(_, c)| c).collect();
    assert_eq!(got, best_labels);
}

/// Exhaustive argmax over candidate placements of the newcomer, scored with
/// the double-sum definition. Ties: singleton first, then lowest id.
fn oracle_choice(g: &WeightedGraph, p: &Partition, new_node: u64) -> CommunityId {
    let fresh = p.max_community().map_or(0, |c| c + 1);
    let mut labels = labels_of(p);
    labels.insert(new_node, fresh);
    let mut best = fresh;
    let mut best_q = brute_modularity(g, &labels, 1.0);
    let candidates: std::collections::BTreeSet<CommunityId> = p.iter().map(|(_, c)| c).collect();
    for c in candidates {
        labels.insert(new_node, c);
        let q = brute_modularity(g, &labels, 1.0);
        if q > best_q {
            best = c;
            best_q = q;
        }
    }
    best
}

#[test]
fn on_the_fly_agrees_with_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for trial in 0..1000 {
        let n = rng.gen_range(1..=8);
        let density = rng.gen_range(0.2..1.0);
        let g = random_graph(&mut rng, n, density);
        let new_node = n - 1;
        let k = rng.gen_range(1..=3);
        let p: Partition = (0..new_node)
            .map(|i| (i, rng.gen_range(0..k) * 3))
            .collect();
        let got = assign_on_the_fly(&g, &p, new_node, 1.0).unwrap();
        assert_eq!(got, oracle_choice(&g, &p, new_node), "trial {trial}");
    }
}

/// Communities X, Y, Z of a small article network and a newcomer whose
/// strongest ties go to X.
#[test]
fn newcomer_joins_the_modularity_maximizing_community() {
    let mut g = WeightedGraph::new();
    for i in 0..8 {
        g.insert_node(i).unwrap();
    }
    let edges = [
        // X = {0, 1, 2}
        (0, 1, 0.9),
        (1, 2, 0.8),
        (0, 2, 0.85),
        // Y = {3, 4}
        (3, 4, 0.9),
        // Z = {5, 6}
        (5, 6, 0.95),
        // weak cross links
        (2, 3, 0.1),
        (4, 5, 0.1),
        // newcomer 7
        (7, 0, 0.8),
        (7, 1, 0.7),
        (7, 4, 0.15),
        (7, 6, 0.05),
    ];
    for (a, b, w) in edges {
        g.set_edge(a, b, w).unwrap();
    }
    let (x, y, z) = (0, 1, 2);
    let p: Partition = [(0, x), (1, x), (2, x), (3, y), (4, y), (5, z), (6, z)]
        .into_iter()
        .collect();
    let choice = assign_on_the_fly(&g, &p, 7, 1.0).unwrap();
    assert_eq!(choice, x);
    assert_eq!(choice, oracle_choice(&g, &p, 7));
}

fn planted(
    groups: u64,
    size: u64,
    intra: impl Fn(&mut ChaCha8Rng) -> f64,
    inter: impl Fn(&mut ChaCha8Rng) -> f64,
    seed: u64,
) -> WeightedGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = groups * size;
    let mut g = WeightedGraph::new();
    for i in 0..n {
        g.insert_node(i).unwrap();
    }
    for a in 0..n {
        for b in a + 1..n {
            let w = if a / size == b / size {
                intra(&mut rng)
            } else {
                inter(&mut rng)
            };
            if w > 0.0 {
                g.set_edge(a, b, w).unwrap();
            }
        }
    }
    g
}

#[test]
fn planted_partition_is_recovered() {
    let g = planted(4, 8, |_| 1.0, |_| 0.05, 0);
    let planted_p: Partition = (0..32).map(|i| (i, i / 8)).collect();
    let top = louvain(&g, &LouvainConfig::default()).unwrap().into_top();
    assert_eq!(top.partition.normalized(), planted_p);
    let q_planted = modularity(&g, &planted_p, 1.0).unwrap();
    assert!(top.modularity > q_planted - 1e-9);
}

#[test]
fn hierarchy_levels_are_monotone_and_nested() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let g = random_graph(&mut rng, 20, 0.3);
        let h = louvain(&g, &LouvainConfig::default()).unwrap();
        let singles = modularity(&g, &Partition::singletons(&g), 1.0).unwrap();
        assert!(h.top().modularity >= singles - 1e-12);
        for pair in h.levels.windows(2) {
            assert!(pair[1].modularity >= pair[0].modularity - 1e-12);
            // a coarser community is a union of finer ones
            let mut up: BTreeMap<CommunityId, CommunityId> = BTreeMap::new();
            for (n, fine) in pair[0].partition.iter() {
                let coarse = pair[1].partition.get(n).unwrap();
                assert_eq!(*up.entry(fine).or_insert(coarse), coarse);
            }
        }
    }
}

#[test]
fn louvain_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let g = random_graph(&mut rng, 40, 0.4);
    let a = louvain(&g, &LouvainConfig::default()).unwrap();
    let b = louvain(&g, &LouvainConfig::default()).unwrap();
    assert_eq!(a, b);
}

fn scaled(g: &WeightedGraph, alpha: f64) -> WeightedGraph {
    let mut out = WeightedGraph::new();
    for n in g.nodes() {
        out.insert_node(n).unwrap();
    }
    for (a, b, w) in g.edges() {
        out.set_edge(a, b, w * alpha).unwrap();
    }
    out
}

proptest! {
    #[test]
    fn modularity_ignores_community_names(seed in any::<u64>(), shift in 1u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(&mut rng, 7, 0.5);
        let p: Partition = (0..7).map(|i| (i, rng.gen_range(0..3))).collect();
        let renamed: Partition = p.iter().map(|(n, c)| (n, 1000 - c * shift % 997)).collect();
        prop_assume!(renamed.community_count() == p.community_count());
        let a = modularity(&g, &p, 1.0).unwrap();
        let b = modularity(&g, &renamed, 1.0).unwrap();
        prop_assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn weight_scaling_changes_nothing(seed in any::<u64>(), alpha in 0.01f64..100.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(&mut rng, 12, 0.5);
        let g2 = scaled(&g, alpha);
        let p: Partition = (0..12).map(|i| (i, rng.gen_range(0..3))).collect();
        prop_assert!((modularity(&g, &p, 1.0).unwrap() - modularity(&g2, &p, 1.0).unwrap()).abs() <= 1e-9);
        let a = louvain(&g, &LouvainConfig::default()).unwrap().into_top();
        let b = louvain(&g2, &LouvainConfig::default()).unwrap().into_top();
        prop_assert_eq!(a.partition, b.partition);
    }
}
