//! Interaction logs and fixed-window snapshot networks.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Opaque node identifier. Ordering is lexicographic on the raw string.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub String);

impl NodeId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId(s.to_owned())
    }
}

impl From<String> for NodeId {
    fn from(s: String) -> Self {
        NodeId(s)
    }
}

/// One directed, timestamped interaction between two distinct nodes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemporalInteraction {
    pub source: NodeId,
    pub target: NodeId,
    /// Seconds since the epoch.
    pub timestamp: i64,
}

impl TemporalInteraction {
    pub fn new(source: impl Into<NodeId>, target: impl Into<NodeId>, timestamp: i64) -> Self {
        Self {
            source: source.into(),
            target: target.into(),
            timestamp,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParsedInteractions {
    pub interactions: Vec<TemporalInteraction>,
    pub self_loops_dropped: usize,
}

/// Reads `source,target,timestamp` records, one per line.
///
/// Blank lines and lines starting with `%` or `#` are skipped. Self-loops are
/// dropped and tallied rather than rejected.
pub fn parse_interactions<R: BufRead>(reader: R) -> Result<ParsedInteractions> {
    let mut out = ParsedInteractions::default();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 3 fields, found {}", fields.len()),
            });
        }
        if fields[0].is_empty() || fields[1].is_empty() {
            return Err(Error::Parse {
                line: line_no,
                message: "missing node id".into(),
            });
        }
        let timestamp: i64 = fields[2].parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("timestamp {:?} is not an integer", fields[2]),
        })?;
        if timestamp < 0 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("negative timestamp {timestamp}"),
            });
        }
        if fields[0] == fields[1] {
            out.self_loops_dropped += 1;
            continue;
        }
        out.interactions
            .push(TemporalInteraction::new(fields[0], fields[1], timestamp));
    }
    Ok(out)
}

/// Undirected simple graph stored as sorted adjacency sets.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct UndirectedGraph {
    adjacency: BTreeMap<NodeId, BTreeSet<NodeId>>,
}

impl UndirectedGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_edges<'a, I>(edges: I) -> Self
    where
        I: IntoIterator<Item = (&'a NodeId, &'a NodeId)>,
    {
        let mut g = Self::new();
        for (u, v) in edges {
            g.add_edge(u.clone(), v.clone());
        }
        g
    }

    /// Adds `{u, v}`; self-loops are ignored.
    pub fn add_edge(&mut self, u: NodeId, v: NodeId) {
        if u == v {
            return;
        }
        self.adjacency.entry(u.clone()).or_default().insert(v.clone());
        self.adjacency.entry(v).or_default().insert(u);
    }

    pub fn add_node(&mut self, u: NodeId) {
        self.adjacency.entry(u).or_default();
    }

    pub fn nodes(&self) -> impl Iterator<Item = &NodeId> {
        self.adjacency.keys()
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.values().map(BTreeSet::len).sum::<usize>() / 2
    }

    pub fn neighbors(&self, u: &NodeId) -> Option<&BTreeSet<NodeId>> {
        self.adjacency.get(u)
    }

    pub fn degree(&self, u: &NodeId) -> usize {
        self.adjacency.get(u).map_or(0, BTreeSet::len)
    }

    pub fn has_edge(&self, u: &NodeId, v: &NodeId) -> bool {
        self.adjacency.get(u).is_some_and(|n| n.contains(v))
    }

    /// Each undirected edge once, as `(smaller, larger)`.
    pub fn edges(&self) -> impl Iterator<Item = (&NodeId, &NodeId)> {
        self.adjacency
            .iter()
            .flat_map(|(u, ns)| ns.iter().filter(move |v| u < *v).map(move |v| (u, v)))
    }
}

/// Directed network of one time window.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotNetwork {
    index: usize,
    window: (i64, i64),
    edges: BTreeMap<(NodeId, NodeId), u32>,
    nodes: BTreeSet<NodeId>,
    in_degree: BTreeMap<NodeId, usize>,
    out_degree: BTreeMap<NodeId, usize>,
    undirected: UndirectedGraph,
}

impl SnapshotNetwork {
    /// Builds a snapshot from directed edge counts. Self-loops and zero counts
    /// are discarded; the node set is the set of edge endpoints.
    pub fn new(index: usize, window: (i64, i64), edges: BTreeMap<(NodeId, NodeId), u32>) -> Self {
        let edges: BTreeMap<_, _> = edges.into_iter().filter(|((u, v), c)| u != v && *c > 0).collect();
        let mut nodes = BTreeSet::new();
        let mut in_degree = BTreeMap::new();
        let mut out_degree = BTreeMap::new();
        let mut undirected = UndirectedGraph::new();
        for (u, v) in edges.keys() {
            nodes.insert(u.clone());
            nodes.insert(v.clone());
            *out_degree.entry(u.clone()).or_insert(0) += 1;
            *in_degree.entry(v.clone()).or_insert(0) += 1;
            undirected.add_edge(u.clone(), v.clone());
        }
        Self {
            index,
            window,
            edges,
            nodes,
            in_degree,
            out_degree,
            undirected,
        }
    }

    /// 1-based snapshot index.
    pub fn index(&self) -> usize {
        self.index
    }

    /// Half-open window `[start, end)` in seconds.
    pub fn window(&self) -> (i64, i64) {
        self.window
    }

    pub fn nodes(&self) -> &BTreeSet<NodeId> {
        &self.nodes
    }

    pub fn edges(&self) -> &BTreeMap<(NodeId, NodeId), u32> {
        &self.edges
    }

    pub fn directed_edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn contains_node(&self, u: &NodeId) -> bool {
        self.nodes.contains(u)
    }

    /// `(in_degree, out_degree)` counted as distinct neighbours; `(0, 0)` for
    /// nodes absent from the snapshot.
    pub fn degrees(&self, node: &NodeId) -> (usize, usize) {
        (
            self.in_degree.get(node).copied().unwrap_or(0),
            self.out_degree.get(node).copied().unwrap_or(0),
        )
    }

    /// Undirected simple projection: `{u, v}` iff `u→v` or `v→u`.
    pub fn undirected_projection(&self) -> &UndirectedGraph {
        &self.undirected
    }
}

/// Free-function form of [`SnapshotNetwork::degrees`].
pub fn degrees(snapshot: &SnapshotNetwork, node: &NodeId) -> (usize, usize) {
    snapshot.degrees(node)
}

/// Free-function form of [`SnapshotNetwork::undirected_projection`].
pub fn undirected_projection(snapshot: &SnapshotNetwork) -> UndirectedGraph {
    snapshot.undirected_projection().clone()
}

/// Ordered series of contiguous, equal-length snapshots.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotSeries {
    snapshots: Vec<SnapshotNetwork>,
    origin: i64,
    window_length: i64,
}

impl SnapshotSeries {
    pub fn new(snapshots: Vec<SnapshotNetwork>, origin: i64, window_length: i64) -> Self {
        Self {
            snapshots,
            origin,
            window_length,
        }
    }

    /// Number of snapshots, `T`.
    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn window_length(&self) -> i64 {
        self.window_length
    }

    pub fn origin(&self) -> i64 {
        self.origin
    }

    /// Snapshot by 1-based index.
    pub fn get(&self, t: usize) -> Option<&SnapshotNetwork> {
        t.checked_sub(1).and_then(|i| self.snapshots.get(i))
    }

    pub fn snapshots(&self) -> &[SnapshotNetwork] {
        &self.snapshots
    }

    /// Snapshot index for a timestamp, if it falls inside the series.
    pub fn index_of(&self, timestamp: i64) -> Option<usize> {
        if timestamp < self.origin {
            return None;
        }
        let t = ((timestamp - self.origin) / self.window_length) as usize + 1;
        (t <= self.len()).then_some(t)
    }
}

/// Partitions interactions into windows of `window_length` seconds starting at
/// the earliest timestamp.
///
/// A directed edge `u→v` survives in a window iff the pair `{u, v}` has at
/// least `min_pair_interactions` interactions there (both directions counted
/// together) and at least one of them goes `u→v`. The trailing window is
/// dropped when the data ends before its final second, unless it is the only
/// window.
pub fn build_snapshots(
    interactions: &[TemporalInteraction],
    window_length: i64,
    min_pair_interactions: u32,
) -> Result<SnapshotSeries> {
    if window_length <= 0 {
        return Err(Error::InvalidParameter(format!(
            "window_length must be positive, got {window_length}"
        )));
    }
    if min_pair_interactions == 0 {
        return Err(Error::InvalidParameter(
            "min_pair_interactions must be at least 1".into(),
        ));
    }
    let origin = interactions.iter().map(|i| i.timestamp).min().ok_or(Error::NoData)?;
    let last = interactions.iter().map(|i| i.timestamp).max().ok_or(Error::NoData)?;
    let full_windows = ((last - origin + 1) / window_length) as usize;
    let count = full_windows.max(1);

    let mut per_window: Vec<BTreeMap<(NodeId, NodeId), u32>> = vec![BTreeMap::new(); count];
    for it in interactions {
        if it.source == it.target {
            continue;
        }
        let w = ((it.timestamp - origin) / window_length) as usize;
        if w < count {
            *per_window[w].entry((it.source.clone(), it.target.clone())).or_insert(0) += 1;
        }
    }

    let snapshots = per_window
        .into_iter()
        .enumerate()
        .map(|(w, directed)| {
            let mut pair_totals: BTreeMap<(&NodeId, &NodeId), u32> = BTreeMap::new();
            for ((u, v), c) in &directed {
                let key = if u < v { (u, v) } else { (v, u) };
                *pair_totals.entry(key).or_insert(0) += c;
            }
            let kept: BTreeMap<(NodeId, NodeId), u32> = directed
                .iter()
                .filter(|((u, v), _)| {
                    let key = if u < v { (u, v) } else { (v, u) };
                    pair_totals[&key] >= min_pair_interactions
                })
                .map(|(k, c)| (k.clone(), *c))
                .collect();
            let start = origin + w as i64 * window_length;
            SnapshotNetwork::new(w + 1, (start, start + window_length), kept)
        })
        .collect();
    Ok(SnapshotSeries::new(snapshots, origin, window_length))
}
