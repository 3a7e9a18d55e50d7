//! Inclusion-based tracking of communities between consecutive snapshots.
//!
//! Every pair of communities `(G1 at t, G2 at t+1)` is scored by the
//! directional inclusion measures `I(G1, G2)` and `I(G2, G1)`. The thresholds
//! in [`GedParams`] turn those scores into the six evolution events, and every
//! community at `t` receives a binary target vector over the events it takes
//! part in.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::community::CommunitySubgraph;
pub use crate::community::GroupId;
use crate::temporal::{NodeId, SnapshotNetwork};
use crate::{Error, Result};

/// Number of event classes.
pub const EVENT_COUNT: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Continuing,
    Dissolving,
    Growing,
    Merging,
    Shrinking,
    Splitting,
}

impl EventKind {
    /// Canonical order of target vectors.
    pub const ALL: [EventKind; EVENT_COUNT] = [
        EventKind::Continuing,
        EventKind::Dissolving,
        EventKind::Growing,
        EventKind::Merging,
        EventKind::Shrinking,
        EventKind::Splitting,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            EventKind::Continuing => "continuing",
            EventKind::Dissolving => "dissolving",
            EventKind::Growing => "growing",
            EventKind::Merging => "merging",
            EventKind::Shrinking => "shrinking",
            EventKind::Splitting => "splitting",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EvolutionEvent {
    pub kind: EventKind,
    pub from: GroupId,
    /// `None` only for dissolving.
    pub to: Option<GroupId>,
}

/// Multi-label target `y` of one group, ordered as [`EventKind::ALL`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventTargetVector {
    pub group: GroupId,
    pub y: [u8; EVENT_COUNT],
}

impl EventTargetVector {
    pub fn has(&self, kind: EventKind) -> bool {
        self.y[kind.index()] == 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GedParams {
    pub alpha: f64,
    pub beta: f64,
    pub dissolve_floor: f64,
}

impl Default for GedParams {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            beta: 0.5,
            dissolve_floor: 0.1,
        }
    }
}

impl GedParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("dissolve_floor", self.dissolve_floor),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!("{name} = {v} is outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Positive weight of a node inside a group.
pub trait NodeImportance {
    fn importance(&self, node: &NodeId) -> f64;
}

impl<F: Fn(&NodeId) -> f64> NodeImportance for F {
    fn importance(&self, node: &NodeId) -> f64 {
        self(node)
    }
}

/// Undirected degree in a snapshot plus one.
pub struct DegreeImportance<'a>(pub &'a SnapshotNetwork);

impl NodeImportance for DegreeImportance<'_> {
    fn importance(&self, node: &NodeId) -> f64 {
        self.0.undirected_projection().degree(node) as f64 + 1.0
    }
}

/// Uniform importance of one for every node.
pub struct UniformImportance;

impl NodeImportance for UniformImportance {
    fn importance(&self, _: &NodeId) -> f64 {
        1.0
    }
}

/// Inclusion of `g1` in `g2`:
/// `|M1 ∩ M2| / |M1| · Σ_{M1 ∩ M2} w / Σ_{M1} w`.
pub fn inclusion(g1: &CommunitySubgraph, g2: &CommunitySubgraph, importance: &dyn NodeImportance) -> Result<f64> {
    inclusion_of_sets(&g1.members, &g2.members, importance).ok_or(Error::EmptyGroup(g1.id))
}

fn inclusion_of_sets(m1: &BTreeSet<NodeId>, m2: &BTreeSet<NodeId>, importance: &dyn NodeImportance) -> Option<f64> {
    if m1.is_empty() {
        return None;
    }
    let mut total = 0.0;
    let mut shared_weight = 0.0;
    let mut shared = 0usize;
    for x in m1 {
        let w = importance.importance(x);
        total += w;
        if m2.contains(x) {
            shared += 1;
            shared_weight += w;
        }
    }
    Some((shared as f64 / m1.len() as f64) * (shared_weight / total))
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Labeling {
    pub events: Vec<EvolutionEvent>,
    pub targets: Vec<EventTargetVector>,
}

/// Labels the transition from `comms_t` to `comms_t1` using degree-plus-one
/// importance in `snapshot_t`.
pub fn label_events(
    comms_t: &[CommunitySubgraph],
    comms_t1: &[CommunitySubgraph],
    params: &GedParams,
    snapshot_t: &SnapshotNetwork,
) -> Result<Labeling> {
    let t = snapshot_t.index();
    if let Some(g) = comms_t.iter().find(|g| g.id.t != t) {
        return Err(Error::SnapshotMismatch(format!(
            "group {} does not belong to snapshot {t}",
            g.id
        )));
    }
    if let Some(g) = comms_t1.iter().find(|g| g.id.t != t + 1) {
        return Err(Error::SnapshotMismatch(format!(
            "group {} does not belong to snapshot {}",
            g.id,
            t + 1
        )));
    }
    label_events_with(comms_t, comms_t1, params, &DegreeImportance(snapshot_t))
}

/// Event labelling with a caller-supplied importance function.
///
/// Rules, with `I12 = I(G1, G2)`, `I21 = I(G2, G1)` and sizes by member count:
/// - both inclusions pass: continuing, shrinking or growing by size;
/// - `I12 < α`, `I21 ≥ β`, `|G1| ≥ |G2|`: splitting when this holds for two or
///   more `G2`, otherwise shrinking;
/// - `I12 ≥ α`, `I21 < β`, `|G1| ≤ |G2|`: merging when this holds for two or
///   more `G1`, otherwise growing;
/// - a group with no event from the rules above dissolves.
pub fn label_events_with(
    comms_t: &[CommunitySubgraph],
    comms_t1: &[CommunitySubgraph],
    params: &GedParams,
    importance: &dyn NodeImportance,
) -> Result<Labeling> {
    params.validate()?;
    let mut events: BTreeSet<EvolutionEvent> = BTreeSet::new();
    let mut split_candidates: BTreeMap<GroupId, Vec<GroupId>> = BTreeMap::new();
    let mut merge_candidates: BTreeMap<GroupId, Vec<GroupId>> = BTreeMap::new();

    for g1 in comms_t {
        for g2 in comms_t1 {
            if g1.members.is_disjoint(&g2.members) {
                continue;
            }
            let i12 = inclusion(g1, g2, importance)?;
            let i21 = inclusion(g2, g1, importance)?;
            let (s1, s2) = (g1.members.len(), g2.members.len());
            let forward = i12 >= params.alpha;
            let backward = i21 >= params.beta;
            if forward && backward {
                let kind = match s1.cmp(&s2) {
                    std::cmp::Ordering::Equal => EventKind::Continuing,
                    std::cmp::Ordering::Greater => EventKind::Shrinking,
                    std::cmp::Ordering::Less => EventKind::Growing,
                };
                events.insert(EvolutionEvent {
                    kind,
                    from: g1.id,
                    to: Some(g2.id),
                });
            } else if !forward && backward && s1 >= s2 {
                split_candidates.entry(g1.id).or_default().push(g2.id);
            } else if forward && !backward && s1 <= s2 {
                merge_candidates.entry(g2.id).or_default().push(g1.id);
            }
        }
    }

    for (from, targets) in split_candidates {
        let kind = if targets.len() >= 2 {
            EventKind::Splitting
        } else {
            EventKind::Shrinking
        };
        for to in targets {
            events.insert(EvolutionEvent {
                kind,
                from,
                to: Some(to),
            });
        }
    }
    for (to, sources) in merge_candidates {
        let kind = if sources.len() >= 2 {
            EventKind::Merging
        } else {
            EventKind::Growing
        };
        for from in sources {
            events.insert(EvolutionEvent {
                kind,
                from,
                to: Some(to),
            });
        }
    }

    let mut labels: BTreeMap<GroupId, [u8; EVENT_COUNT]> = comms_t.iter().map(|g| (g.id, [0u8; EVENT_COUNT])).collect();
    for e in &events {
        if let Some(y) = labels.get_mut(&e.from) {
            y[e.kind.index()] = 1;
        }
    }
    for (group, y) in labels.iter_mut() {
        if y.iter().all(|&b| b == 0) {
            y[EventKind::Dissolving.index()] = 1;
            events.insert(EvolutionEvent {
                kind: EventKind::Dissolving,
                from: *group,
                to: None,
            });
        }
    }

    Ok(Labeling {
        events: events.into_iter().collect(),
        targets: labels
            .into_iter()
            .map(|(group, y)| EventTargetVector { group, y })
            .collect(),
    })
}

/// Whether `g1` has no counterpart whose inclusion in either direction reaches
/// the dissolve floor.
pub fn below_dissolve_floor(
    g1: &CommunitySubgraph,
    comms_t1: &[CommunitySubgraph],
    params: &GedParams,
    importance: &dyn NodeImportance,
) -> bool {
    comms_t1.iter().all(|g2| {
        let i12 = inclusion_of_sets(&g1.members, &g2.members, importance).unwrap_or(0.0);
        let i21 = inclusion_of_sets(&g2.members, &g1.members, importance).unwrap_or(0.0);
        i12 < params.dissolve_floor && i21 < params.dissolve_floor
    })
}

/// Per-kind counts of events from `events_prev` arriving at `group`.
pub fn incoming_event_counts(group: GroupId, events_prev: &[EvolutionEvent]) -> [u32; EVENT_COUNT] {
    let mut counts = [0u32; EVENT_COUNT];
    for e in events_prev.iter().filter(|e| e.to == Some(group)) {
        counts[e.kind.index()] += 1;
    }
    counts
}
