#![allow(dead_code)]

use std::collections::BTreeSet;

use commevolve::community::MajorityBasis;
use commevolve::evolution::EVENT_COUNT;
use commevolve::features::{FeatureConfig, GroupExample, GROUP_ATTRIBUTES};
use commevolve::models::EventModel;
use commevolve::neural::Tape;
use commevolve::temporal::{NodeId, UndirectedGraph};
use rand::Rng;

pub fn node(i: usize) -> NodeId {
    NodeId(format!("v{i:02}"))
}

pub fn set(ids: &[usize]) -> BTreeSet<NodeId> {
    ids.iter().map(|&i| node(i)).collect()
}

/// G(n, p) on nodes `v00..`.
pub fn random_graph<R: Rng>(rng: &mut R, n: usize, p: f64) -> UndirectedGraph {
    let mut g = UndirectedGraph::new();
    for i in 0..n {
        g.add_node(node(i));
        for j in 0..i {
            if rng.random_bool(p) {
                g.add_edge(node(i), node(j));
            }
        }
    }
    g
}

/// Maximal cliques of size `>= k_min` by checking every node subset.
pub fn brute_force_cliques(g: &UndirectedGraph, k_min: usize) -> Vec<BTreeSet<NodeId>> {
    let nodes: Vec<NodeId> = g.nodes().cloned().collect();
    let n = nodes.len();
    assert!(n <= 16, "exhaustive enumeration is exponential");
    let is_clique = |mask: u32| {
        (0..n).all(|i| mask & (1 << i) == 0 || (0..i).all(|j| mask & (1 << j) == 0 || g.has_edge(&nodes[i], &nodes[j])))
    };
    let cliques: Vec<u32> = (1u32..1 << n).filter(|&m| is_clique(m)).collect();
    let mut maximal: Vec<BTreeSet<NodeId>> = cliques
        .iter()
        .filter(|&&m| m.count_ones() as usize >= k_min)
        .filter(|&&m| (0..n).all(|i| m & (1 << i) != 0 || !is_clique(m | (1 << i))))
        .map(|&m| (0..n).filter(|i| m & (1 << i) != 0).map(|i| nodes[i].clone()).collect())
        .collect();
    maximal.sort();
    maximal
}

/// Unions of connected components of the clique graph, found by transitive
/// closure of the overlap relation.
pub fn brute_force_percolation(cliques: &[BTreeSet<NodeId>], basis: MajorityBasis) -> Vec<BTreeSet<NodeId>> {
    let k = cliques.len();
    let linked = |a: &BTreeSet<NodeId>, b: &BTreeSet<NodeId>| {
        let shared = 2 * a.intersection(b).count();
        match basis {
            MajorityBasis::Smaller => shared > a.len().min(b.len()),
            MajorityBasis::Larger => shared > a.len().max(b.len()),
            MajorityBasis::Union => shared > a.union(b).count(),
        }
    };
    let mut reach = vec![vec![false; k]; k];
    for i in 0..k {
        for j in 0..k {
            reach[i][j] = i == j || linked(&cliques[i], &cliques[j]);
        }
    }
    for m in 0..k {
        for i in 0..k {
            for j in 0..k {
                if reach[i][m] && reach[m][j] {
                    reach[i][j] = true;
                }
            }
        }
    }
    let mut out: Vec<BTreeSet<NodeId>> = (0..k)
        .map(|i| {
            (0..k)
                .filter(|&j| reach[i][j])
                .flat_map(|j| cliques[j].iter().cloned())
                .collect()
        })
        .collect();
    out.sort();
    out.dedup();
    out
}

/// Random example with `n` node rows, the first `members` of them members.
pub fn random_example<R: Rng>(rng: &mut R, n: usize, members: usize, features: &FeatureConfig) -> GroupExample {
    assert!(members >= 1 && members <= n);
    let mut y = [0u8; EVENT_COUNT];
    for b in &mut y {
        *b = u8::from(rng.random_bool(0.4));
    }
    GroupExample {
        t: 1,
        i: 0,
        node_order: (0..n).map(node).collect(),
        x: (0..n)
            .map(|_| (0..features.node_width()).map(|_| rng.random_range(0.0..4.0)).collect())
            .collect(),
        m: (0..n).map(|j| u8::from(j < members)).collect(),
        g: (0..GROUP_ATTRIBUTES).map(|_| rng.random_range(-1.0..1.0)).collect(),
        y,
    }
}

/// Example with node rows reordered by `perm`.
pub fn permute_rows(e: &GroupExample, perm: &[usize]) -> GroupExample {
    GroupExample {
        node_order: perm.iter().map(|&j| e.node_order[j].clone()).collect(),
        x: perm.iter().map(|&j| e.x[j].clone()).collect(),
        m: perm.iter().map(|&j| e.m[j]).collect(),
        ..e.clone()
    }
}

pub fn targets(e: &GroupExample) -> Vec<f64> {
    e.y.iter().map(|&b| f64::from(b)).collect()
}

/// Loss and ReLU activation pattern at the current parameters.
pub fn loss_at<M: EventModel<f64>>(model: &M, input: &M::Input, y: &[f64]) -> (f64, Vec<bool>) {
    let mut tape = Tape::new();
    let (bound, _) = model.bind(&mut tape).unwrap();
    let out = model.apply(&bound, &mut tape, input).unwrap();
    let loss = tape.bce(out, y).unwrap();
    (tape.value(loss).data()[0], tape.relu_signature())
}

/// Analytic gradients in `named_parameters` order.
pub fn analytic_gradients<M: EventModel<f64>>(model: &M, input: &M::Input, y: &[f64]) -> Vec<Vec<f64>> {
    let mut tape = Tape::new();
    let (bound, vars) = model.bind(&mut tape).unwrap();
    let out = model.apply(&bound, &mut tape, input).unwrap();
    let loss = tape.bce(out, y).unwrap();
    let grads = tape.backward(loss).unwrap();
    vars.iter().map(|&v| grads.wrt(v, tape.value(v)).into_data()).collect()
}

#[derive(Debug, Default, Clone, Copy)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub checked: usize,
    /// Coordinates whose perturbation flips a ReLU.
    pub skipped: usize,
}

/// Relative error `|a - n| / max(|a|, |n|, floor)`.
pub fn rel_error(a: f64, n: f64, floor: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(floor)
}

/// Central differences with step `h` against the tape gradient for every
/// parameter entry.
pub fn finite_difference_check<M: EventModel<f64>>(
    model: &M,
    input: &M::Input,
    y: &[f64],
    h: f64,
    floor: f64,
) -> GradCheck {
    let analytic = analytic_gradients(model, input, y);
    let (_, signature) = loss_at(model, input, y);
    let mut report = GradCheck::default();
    for (p, grad) in analytic.iter().enumerate() {
        for (j, &a) in grad.iter().enumerate() {
            let eval = |delta: f64| {
                let mut m = model.clone();
                m.parameters_mut()[p].data_mut()[j] += delta;
                loss_at(&m, input, y)
            };
            let (plus, sig_plus) = eval(h);
            let (minus, sig_minus) = eval(-h);
            if sig_plus != signature || sig_minus != signature {
                report.skipped += 1;
                continue;
            }
            let numeric = (plus - minus) / (2.0 * h);
            report.max_rel_error = report.max_rel_error.max(rel_error(a, numeric, floor));
            report.checked += 1;
        }
    }
    report
}
