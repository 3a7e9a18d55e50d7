mod common;

use std::collections::{BTreeMap, BTreeSet};

use commevolve::community::{
    detect_communities, maximal_cliques, maximal_cliques_capped, merge_cliques, MajorityBasis,
};
use commevolve::temporal::{NodeId, SnapshotNetwork};
use commevolve::Error;
use common::{brute_force_cliques, brute_force_percolation, node, random_graph, set};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn sorted(mut v: Vec<BTreeSet<NodeId>>) -> Vec<BTreeSet<NodeId>> {
    v.sort();
    v
}

#[test]
fn cliques_match_subset_enumeration_on_random_graphs() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for trial in 0..60 {
        let n = 4 + trial % 9;
        let p = [0.3, 0.5, 0.7][trial % 3];
        let g = random_graph(&mut rng, n, p);
        for k_min in [3, 4] {
            let fast = sorted(maximal_cliques(&g, k_min).unwrap());
            assert_eq!(fast, brute_force_cliques(&g, k_min), "trial {trial}, k_min {k_min}");
        }
    }
}

#[test]
fn percolation_matches_clique_graph_components() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for trial in 0..60 {
        let g = random_graph(&mut rng, 12, 0.55);
        let cliques = brute_force_cliques(&g, 3);
        for basis in [MajorityBasis::Smaller, MajorityBasis::Larger, MajorityBasis::Union] {
            let fast = sorted(merge_cliques(&cliques, basis));
            assert_eq!(
                fast,
                brute_force_percolation(&cliques, basis),
                "trial {trial}, {basis:?}"
            );
        }
    }
}

#[test]
fn majority_rule_examples() {
    let merged = merge_cliques(&[set(&[1, 2, 3]), set(&[2, 3, 4])], MajorityBasis::Smaller);
    assert_eq!(merged, vec![set(&[1, 2, 3, 4])]);
    let apart = merge_cliques(&[set(&[1, 2, 3]), set(&[3, 4, 5])], MajorityBasis::Smaller);
    assert_eq!(apart.len(), 2);
    assert_eq!(
        merge_cliques(&[set(&[1, 2, 3])], MajorityBasis::Smaller),
        vec![set(&[1, 2, 3])]
    );
}

#[test]
fn clique_cap_is_a_clear_error() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let g = random_graph(&mut rng, 12, 0.6);
    let total = maximal_cliques(&g, 3).unwrap().len();
    assert!(total > 2);
    assert!(matches!(
        maximal_cliques_capped(&g, 3, total - 1),
        Err(Error::CliqueLimit { .. })
    ));
    assert_eq!(maximal_cliques_capped(&g, 3, total).unwrap().len(), total);
}

fn snapshot_from(g: &commevolve::temporal::UndirectedGraph) -> SnapshotNetwork {
    let edges: BTreeMap<(NodeId, NodeId), u32> = g.edges().map(|(u, v)| ((u.clone(), v.clone()), 1)).collect();
    SnapshotNetwork::new(1, (0, 10), edges)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn communities_cover_cliques_and_bound_neighbours(seed in any::<u64>(), n in 3usize..12, p in 0.2f64..0.8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(&mut rng, n, p);
        let snap = snapshot_from(&g);
        let comms = detect_communities(&snap, 3).unwrap();
        let proj = snap.undirected_projection();
        for clique in maximal_cliques(proj, 3).unwrap() {
            let holders = comms.iter().filter(|c| clique.is_subset(&c.members)).count();
            prop_assert_eq!(holders, 1);
        }
        for (i, c) in comms.iter().enumerate() {
            prop_assert_eq!(c.id.i, i);
            prop_assert!(c.members.is_disjoint(&c.neighbors));
            for m in &c.members {
                prop_assert!(proj.degree(m) >= 2);
                for nb in proj.neighbors(m).unwrap() {
                    prop_assert!(c.members.contains(nb) || c.neighbors.contains(nb));
                }
            }
            for nb in &c.neighbors {
                let adjacent = proj.neighbors(nb).unwrap().iter().any(|x| c.members.contains(x));
                prop_assert!(adjacent);
            }
        }
        for w in comms.windows(2) {
            let ordered = w[0].members.len() > w[1].members.len()
                || (w[0].members.len() == w[1].members.len() && w[0].members < w[1].members);
            prop_assert!(ordered);
        }
    }

    #[test]
    fn clique_enumeration_ignores_node_labels(seed in any::<u64>(), n in 3usize..11) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(&mut rng, n, 0.5);
        let relabel = |v: &NodeId| node(n - 1 - v.as_str()[1..].parse::<usize>().unwrap());
        let mut h = commevolve::temporal::UndirectedGraph::new();
        for v in g.nodes() {
            h.add_node(relabel(v));
        }
        for (u, v) in g.edges() {
            h.add_edge(relabel(u), relabel(v));
        }
        let mapped: Vec<BTreeSet<NodeId>> = maximal_cliques(&g, 3).unwrap().iter()
            .map(|c| c.iter().map(relabel).collect()).collect();
        prop_assert_eq!(sorted(mapped), sorted(maximal_cliques(&h, 3).unwrap()));
    }
}
