//! Per-group training examples: node attribute matrix with temporal mixing,
//! member/neighbour position vector, group attribute vector and target.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::community::{CommunitySubgraph, GroupId};
use crate::evolution::{incoming_event_counts, EventTargetVector, EvolutionEvent, EVENT_COUNT};
use crate::temporal::{NodeId, SnapshotNetwork, SnapshotSeries};
use crate::{Error, Result};

/// Node attributes per snapshot: in-degree and out-degree.
pub const NODE_ATTRIBUTES: usize = 2;
/// Density, affinity, size and six incoming event counts.
pub const GROUP_ATTRIBUTES: usize = 3 + EVENT_COUNT;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    /// Snapshots of node history, newest first (`P`).
    pub history: usize,
    /// Per-feature z-scoring fitted on training examples.
    pub standardize: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            history: 2,
            standardize: false,
        }
    }
}

impl FeatureConfig {
    /// `D_n`.
    pub fn node_attributes(&self) -> usize {
        NODE_ATTRIBUTES
    }

    /// `D_g`.
    pub fn group_attributes(&self) -> usize {
        GROUP_ATTRIBUTES
    }

    /// Row width of `X`: `D_n · P`.
    pub fn node_width(&self) -> usize {
        NODE_ATTRIBUTES * self.history
    }

    /// Width of the flattened baseline input: `2 · D_n · P + D_g`.
    pub fn flat_width(&self) -> usize {
        2 * self.node_width() + GROUP_ATTRIBUTES
    }

    pub fn validate(&self) -> Result<()> {
        if self.history == 0 {
            return Err(Error::InvalidParameter("history must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupExample {
    pub t: usize,
    pub i: usize,
    pub node_order: Vec<NodeId>,
    /// `N_i × D_n·P`, rows aligned with `node_order`.
    #[serde(rename = "X")]
    pub x: Vec<Vec<f64>>,
    /// 1 for members, 0 for neighbours.
    pub m: Vec<u8>,
    pub g: Vec<f64>,
    pub y: [u8; EVENT_COUNT],
}

impl GroupExample {
    pub fn group(&self) -> GroupId {
        GroupId::new(self.t, self.i)
    }

    pub fn node_count(&self) -> usize {
        self.node_order.len()
    }

    pub fn member_count(&self) -> usize {
        self.m.iter().filter(|&&b| b == 1).count()
    }

    /// Checks the structural invariants against a feature configuration.
    pub fn validate(&self, cfg: &FeatureConfig) -> Result<()> {
        let fail = |message: String| Error::Group {
            group: self.group(),
            message,
        };
        if self.x.len() != self.node_order.len() || self.m.len() != self.node_order.len() {
            return Err(fail("X, m and node_order lengths differ".into()));
        }
        if let Some(row) = self.x.iter().find(|r| r.len() != cfg.node_width()) {
            return Err(fail(format!("X row width {} != {}", row.len(), cfg.node_width())));
        }
        if self.g.len() != cfg.group_attributes() {
            return Err(fail(format!("g length {} != {}", self.g.len(), cfg.group_attributes())));
        }
        if self.m.iter().any(|&b| b > 1) || self.y.iter().any(|&b| b > 1) {
            return Err(fail("m and y must be binary".into()));
        }
        if self.member_count() == 0 {
            return Err(fail("no member rows".into()));
        }
        if !self.x.iter().flatten().chain(self.g.iter()).all(|v| v.is_finite()) {
            return Err(fail("non-finite feature".into()));
        }
        Ok(())
    }
}

/// `[in^t, out^t, in^{t-1}, out^{t-1}, …]` over `history` snapshots; missing
/// snapshots and absent nodes contribute zeros.
pub fn node_feature_vector(node: &NodeId, series: &SnapshotSeries, t: usize, history: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(NODE_ATTRIBUTES * history);
    for p in 0..history {
        let (din, dout) = t
            .checked_sub(p)
            .filter(|&s| s >= 1)
            .and_then(|s| series.get(s))
            .map_or((0, 0), |snap| snap.degrees(node));
        out.push(din as f64);
        out.push(dout as f64);
    }
    out
}

fn internal_edges(group: &CommunitySubgraph, snapshot: &SnapshotNetwork) -> usize {
    let g = snapshot.undirected_projection();
    group
        .members
        .iter()
        .filter_map(|m| g.neighbors(m).map(|ns| (m, ns)))
        .map(|(m, ns)| ns.iter().filter(|n| *n > m && group.members.contains(*n)).count())
        .sum()
}

/// Member-internal undirected edges over `n(n-1)/2`.
pub fn group_density(group: &CommunitySubgraph, snapshot: &SnapshotNetwork) -> Result<f64> {
    let n = group.members.len();
    if n < 2 {
        return Err(Error::Group {
            group: group.id,
            message: "density needs at least two members".into(),
        });
    }
    Ok(internal_edges(group, snapshot) as f64 / (n * (n - 1) / 2) as f64)
}

/// Member-internal undirected edges over all undirected edges touching a member.
pub fn group_affinity(group: &CommunitySubgraph, snapshot: &SnapshotNetwork) -> Result<f64> {
    let g = snapshot.undirected_projection();
    let internal = internal_edges(group, snapshot);
    let external: usize = group
        .members
        .iter()
        .filter_map(|m| g.neighbors(m))
        .map(|ns| ns.iter().filter(|n| !group.members.contains(*n)).count())
        .sum();
    let incident = internal + external;
    if incident == 0 {
        return Err(Error::Group {
            group: group.id,
            message: "members have no incident edges".into(),
        });
    }
    Ok(internal as f64 / incident as f64)
}

/// `[density, affinity, |members|, incoming event counts…]`.
pub fn group_feature_vector(
    group: &CommunitySubgraph,
    snapshot: &SnapshotNetwork,
    events_prev: &[EvolutionEvent],
) -> Result<Vec<f64>> {
    let mut g = Vec::with_capacity(GROUP_ATTRIBUTES);
    g.push(group_density(group, snapshot)?);
    g.push(group_affinity(group, snapshot)?);
    g.push(group.members.len() as f64);
    g.extend(incoming_event_counts(group.id, events_prev).iter().map(|&c| c as f64));
    Ok(g)
}

/// Builds one example per group at snapshots `1..T-1`.
///
/// `communities[t-1]` holds the groups of snapshot `t`, `events[t-1]` the
/// events of the transition `t → t+1`. Nodes are ordered members first, then
/// neighbours, each block sorted by id.
pub fn assemble_examples(
    series: &SnapshotSeries,
    communities: &[Vec<CommunitySubgraph>],
    events: &[Vec<EvolutionEvent>],
    targets: &[EventTargetVector],
    cfg: &FeatureConfig,
) -> Result<Vec<GroupExample>> {
    cfg.validate()?;
    let target_of: BTreeMap<GroupId, &EventTargetVector> = targets.iter().map(|y| (y.group, y)).collect();
    let last = series.len();
    let mut out = Vec::new();
    for t in 1..last {
        let snapshot = series.get(t).expect("t within series");
        let groups = communities.get(t - 1).map(Vec::as_slice).unwrap_or(&[]);
        let events_prev: &[EvolutionEvent] = if t >= 2 {
            events.get(t - 2).map(Vec::as_slice).unwrap_or(&[])
        } else {
            &[]
        };
        let mut ordered: Vec<&CommunitySubgraph> = groups.iter().collect();
        ordered.sort_by_key(|g| g.id);
        for group in ordered {
            let y = target_of.get(&group.id).ok_or(Error::MissingTarget(group.id))?;
            let node_order: Vec<NodeId> = group.members.iter().chain(group.neighbors.iter()).cloned().collect();
            let x = node_order
                .iter()
                .map(|n| node_feature_vector(n, series, t, cfg.history))
                .collect();
            let m = std::iter::repeat_n(1u8, group.members.len())
                .chain(std::iter::repeat_n(0u8, group.neighbors.len()))
                .collect();
            out.push(GroupExample {
                t,
                i: group.id.i,
                node_order,
                x,
                m,
                g: group_feature_vector(group, snapshot, events_prev)?,
                y: y.y,
            });
        }
    }
    Ok(out)
}

/// `[mean member row ‖ mean neighbour row ‖ g]`; the neighbour block is zero
/// when the group has no neighbours.
pub fn flatten_for_baseline(example: &GroupExample) -> Vec<f64> {
    let width = example.x.first().map_or(0, Vec::len);
    let mut members = vec![0.0; width];
    let mut neighbors = vec![0.0; width];
    let (mut n_mem, mut n_nb) = (0usize, 0usize);
    for (row, &flag) in example.x.iter().zip(&example.m) {
        let (acc, count) = if flag == 1 {
            (&mut members, &mut n_mem)
        } else {
            (&mut neighbors, &mut n_nb)
        };
        for (a, v) in acc.iter_mut().zip(row) {
            *a += v;
        }
        *count += 1;
    }
    for (acc, count) in [(&mut members, n_mem), (&mut neighbors, n_nb)] {
        if count > 0 {
            acc.iter_mut().for_each(|a| *a /= count as f64);
        }
    }
    let mut out = members;
    out.extend(neighbors);
    out.extend_from_slice(&example.g);
    out
}

/// Per-column z-scoring of node rows and group vectors, fitted on a training
/// set and applied unchanged to validation and test examples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    node_mean: Vec<f64>,
    node_scale: Vec<f64>,
    group_mean: Vec<f64>,
    group_scale: Vec<f64>,
}

fn mean_and_scale<'a>(rows: impl Iterator<Item = &'a [f64]>, width: usize) -> (Vec<f64>, Vec<f64>) {
    let mut sum = vec![0.0; width];
    let mut sq = vec![0.0; width];
    let mut n = 0usize;
    for r in rows {
        for (j, v) in r.iter().enumerate() {
            sum[j] += v;
            sq[j] += v * v;
        }
        n += 1;
    }
    if n == 0 {
        return (vec![0.0; width], vec![1.0; width]);
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
    let scale = sq
        .iter()
        .zip(&mean)
        .map(|(s, m)| {
            let var = (s / n as f64 - m * m).max(0.0);
            if var > 1e-12 {
                var.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    (mean, scale)
}

impl FeatureScaler {
    pub fn fit(examples: &[GroupExample]) -> Self {
        let node_width = examples.iter().find_map(|e| e.x.first().map(Vec::len)).unwrap_or(0);
        let group_width = examples.first().map_or(0, |e| e.g.len());
        let (node_mean, node_scale) =
            mean_and_scale(examples.iter().flat_map(|e| e.x.iter().map(Vec::as_slice)), node_width);
        let (group_mean, group_scale) = mean_and_scale(examples.iter().map(|e| e.g.as_slice()), group_width);
        Self {
            node_mean,
            node_scale,
            group_mean,
            group_scale,
        }
    }

    pub fn transform(&self, example: &GroupExample) -> GroupExample {
        let mut out = example.clone();
        for row in &mut out.x {
            for ((v, m), s) in row.iter_mut().zip(&self.node_mean).zip(&self.node_scale) {
                *v = (*v - m) / s;
            }
        }
        for ((v, m), s) in out.g.iter_mut().zip(&self.group_mean).zip(&self.group_scale) {
            *v = (*v - m) / s;
        }
        out
    }
}
