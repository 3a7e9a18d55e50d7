//! Overlapping community detection by percolation over a clique graph.
//!
//! Maximal cliques of the undirected projection become vertices of a clique
//! graph; two cliques are joined when they share a strict majority of members
//! (measured against a configurable basis). Each connected component of the
//! clique graph is one community.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::temporal::{NodeId, SnapshotNetwork, UndirectedGraph};
use crate::{Error, Result};

/// `(snapshot index, ordinal)` of a community. Ordinals are 0-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroupId {
    pub t: usize,
    pub i: usize,
}

impl GroupId {
    pub fn new(t: usize, i: usize) -> Self {
        Self { t, i }
    }
}

impl fmt::Display for GroupId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.t, self.i)
    }
}

/// A community in one snapshot: its members and its one-hop neighbours.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CommunitySubgraph {
    pub id: GroupId,
    pub members: BTreeSet<NodeId>,
    pub neighbors: BTreeSet<NodeId>,
}

impl CommunitySubgraph {
    /// Builds the subgraph for `members`, deriving neighbours from `graph`.
    pub fn new(id: GroupId, members: BTreeSet<NodeId>, graph: &UndirectedGraph) -> Self {
        let neighbors = members
            .iter()
            .filter_map(|m| graph.neighbors(m))
            .flatten()
            .filter(|n| !members.contains(*n))
            .cloned()
            .collect();
        Self { id, members, neighbors }
    }

    pub fn snapshot_index(&self) -> usize {
        self.id.t
    }

    /// `N_i = |members| + |neighbors|`.
    pub fn node_count(&self) -> usize {
        self.members.len() + self.neighbors.len()
    }
}

/// Size the clique overlap is compared against when deciding whether two
/// cliques share a majority of members.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MajorityBasis {
    /// `|A ∩ B| > ½·min(|A|, |B|)`
    #[default]
    Smaller,
    /// `|A ∩ B| > ½·max(|A|, |B|)`
    Larger,
    /// `|A ∩ B| > ½·|A ∪ B|`
    Union,
}

impl MajorityBasis {
    pub fn overlaps(self, a: &BTreeSet<NodeId>, b: &BTreeSet<NodeId>) -> bool {
        let shared = a.intersection(b).count();
        let basis = match self {
            MajorityBasis::Smaller => a.len().min(b.len()),
            MajorityBasis::Larger => a.len().max(b.len()),
            MajorityBasis::Union => a.len() + b.len() - shared,
        };
        2 * shared > basis
    }
}

impl std::str::FromStr for MajorityBasis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "smaller" => Ok(Self::Smaller),
            "larger" => Ok(Self::Larger),
            "union" => Ok(Self::Union),
            other => Err(Error::InvalidParameter(format!("unknown majority basis {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CpmConfig {
    pub k_min: usize,
    pub basis: MajorityBasis,
    /// Enumeration aborts once more qualifying cliques than this are found.
    pub max_cliques: usize,
}

impl Default for CpmConfig {
    fn default() -> Self {
        Self {
            k_min: 3,
            basis: MajorityBasis::Smaller,
            max_cliques: 1_000_000,
        }
    }
}

struct CliqueSearch<'a> {
    adj: &'a [Vec<usize>],
    k_min: usize,
    cap: usize,
    found: Vec<Vec<usize>>,
}

fn intersect_sorted(a: &[usize], b: &[usize]) -> Vec<usize> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

fn count_common(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

impl CliqueSearch<'_> {
    // Bron–Kerbosch with Tomita pivoting. `p` and `x` stay sorted.
    fn expand(&mut self, r: &mut Vec<usize>, mut p: Vec<usize>, mut x: Vec<usize>) -> Result<()> {
        if p.is_empty() {
            if x.is_empty() && r.len() >= self.k_min {
                if self.found.len() >= self.cap {
                    return Err(Error::CliqueLimit(self.cap));
                }
                let mut c = r.clone();
                c.sort_unstable();
                self.found.push(c);
            }
            return Ok(());
        }
        if r.len() + p.len() < self.k_min {
            return Ok(());
        }
        let pivot = p
            .iter()
            .chain(x.iter())
            .copied()
            .max_by_key(|&u| (count_common(&p, &self.adj[u]), std::cmp::Reverse(u)))
            .expect("p is non-empty");
        let candidates: Vec<usize> = p
            .iter()
            .copied()
            .filter(|v| self.adj[pivot].binary_search(v).is_err())
            .collect();
        for v in candidates {
            let np = intersect_sorted(&p, &self.adj[v]);
            let nx = intersect_sorted(&x, &self.adj[v]);
            r.push(v);
            self.expand(r, np, nx)?;
            r.pop();
            if let Ok(pos) = p.binary_search(&v) {
                p.remove(pos);
            }
            if let Err(pos) = x.binary_search(&v) {
                x.insert(pos, v);
            }
        }
        Ok(())
    }
}

/// All maximal cliques with at least `k_min` nodes.
pub fn maximal_cliques(graph: &UndirectedGraph, k_min: usize) -> Result<Vec<BTreeSet<NodeId>>> {
    maximal_cliques_capped(graph, k_min, CpmConfig::default().max_cliques)
}

/// [`maximal_cliques`] with an explicit cap on the number of reported cliques.
pub fn maximal_cliques_capped(graph: &UndirectedGraph, k_min: usize, cap: usize) -> Result<Vec<BTreeSet<NodeId>>> {
    if k_min < 3 {
        return Err(Error::InvalidParameter(format!(
            "k_min must be at least 3, got {k_min}"
        )));
    }
    let nodes: Vec<&NodeId> = graph.nodes().collect();
    let index: BTreeMap<&NodeId, usize> = nodes.iter().enumerate().map(|(i, n)| (*n, i)).collect();
    let adj: Vec<Vec<usize>> = nodes
        .iter()
        .map(|n| {
            let mut ns: Vec<usize> = graph.neighbors(n).into_iter().flatten().map(|m| index[m]).collect();
            ns.sort_unstable();
            ns
        })
        .collect();

    // Degeneracy order keeps the outer candidate sets small.
    let order = degeneracy_order(&adj);
    let mut position = vec![0usize; adj.len()];
    for (pos, &v) in order.iter().enumerate() {
        position[v] = pos;
    }

    let mut search = CliqueSearch {
        adj: &adj,
        k_min,
        cap,
        found: Vec::new(),
    };
    for &v in &order {
        if adj[v].len() + 1 < k_min {
            continue;
        }
        let p: Vec<usize> = adj[v].iter().copied().filter(|&u| position[u] > position[v]).collect();
        let x: Vec<usize> = adj[v].iter().copied().filter(|&u| position[u] < position[v]).collect();
        let mut r = vec![v];
        search.expand(&mut r, p, x)?;
    }
    Ok(search
        .found
        .into_iter()
        .map(|c| c.into_iter().map(|i| nodes[i].clone()).collect())
        .collect())
}

fn degeneracy_order(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut removed = vec![false; n];
    let mut buckets: BTreeSet<(usize, usize)> = (0..n).map(|v| (degree[v], v)).collect();
    let mut order = Vec::with_capacity(n);
    while let Some((_, v)) = buckets.pop_first() {
        removed[v] = true;
        order.push(v);
        for &u in &adj[v] {
            if !removed[u] {
                buckets.remove(&(degree[u], u));
                degree[u] -= 1;
                buckets.insert((degree[u], u));
            }
        }
    }
    order
}

/// Percolates cliques into communities: connected components of the graph
/// joining cliques that share a strict majority of members under `basis`.
///
/// Returned member sets are distinct and ordered by descending size, ties by
/// the lexicographically smaller sorted member list.
pub fn merge_cliques(cliques: &[BTreeSet<NodeId>], basis: MajorityBasis) -> Vec<BTreeSet<NodeId>> {
    let mut uf = UnionFind::new(cliques.len());
    let mut by_node: BTreeMap<&NodeId, Vec<usize>> = BTreeMap::new();
    for (ci, c) in cliques.iter().enumerate() {
        for n in c {
            by_node.entry(n).or_default().push(ci);
        }
    }
    let mut checked: BTreeSet<(usize, usize)> = BTreeSet::new();
    for list in by_node.values() {
        for (a_pos, &a) in list.iter().enumerate() {
            for &b in &list[a_pos + 1..] {
                if uf.find(a) == uf.find(b) || !checked.insert((a, b)) {
                    continue;
                }
                if basis.overlaps(&cliques[a], &cliques[b]) {
                    uf.union(a, b);
                }
            }
        }
    }
    let mut components: BTreeMap<usize, BTreeSet<NodeId>> = BTreeMap::new();
    for (ci, c) in cliques.iter().enumerate() {
        components.entry(uf.find(ci)).or_default().extend(c.iter().cloned());
    }
    let distinct: BTreeSet<BTreeSet<NodeId>> = components.into_values().collect();
    let mut out: Vec<BTreeSet<NodeId>> = distinct.into_iter().collect();
    sort_member_sets(&mut out);
    out
}

fn sort_member_sets(sets: &mut [BTreeSet<NodeId>]) {
    sets.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.iter().cmp(b.iter())));
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Communities of one snapshot with the default majority basis and clique cap.
pub fn detect_communities(snapshot: &SnapshotNetwork, k_min: usize) -> Result<Vec<CommunitySubgraph>> {
    detect_communities_with(
        snapshot,
        &CpmConfig {
            k_min,
            ..CpmConfig::default()
        },
    )
}

pub fn detect_communities_with(snapshot: &SnapshotNetwork, config: &CpmConfig) -> Result<Vec<CommunitySubgraph>> {
    let graph = snapshot.undirected_projection();
    let cliques = maximal_cliques_capped(graph, config.k_min, config.max_cliques)?;
    Ok(merge_cliques(&cliques, config.basis)
        .into_iter()
        .enumerate()
        .map(|(i, members)| CommunitySubgraph::new(GroupId::new(snapshot.index(), i), members, graph))
        .collect())
}
