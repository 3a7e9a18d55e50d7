//! Synthetic interaction logs with planted community fates.
//!
//! Every community is a clique on its own node ids, so with no noise the
//! detected communities are exactly the planted ones and every planted fate
//! is recovered by event labelling:
//!
//! | fate       | realisation                                   |
//! |------------|-----------------------------------------------|
//! | continuing | same members                                  |
//! | growing    | one or two fresh members (size stays ≤ 8)     |
//! | shrinking  | one member leaves (size ≥ 5)                  |
//! | splitting  | an 8-clique becomes two disjoint 4-cliques    |
//! | merging    | two 4-cliques become one 8-clique             |
//! | dissolving | the clique stops interacting                  |
//!
//! Fate probabilities depend non-monotonically on size and on a per-lineage
//! cohesion trait: cohesive cliques interact in both directions, the others
//! in one direction only and dissolve more often.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::evolution::EventKind;
use crate::temporal::{NodeId, TemporalInteraction};
use crate::{Error, Result};

const MIN_SIZE: usize = 4;
const MAX_SIZE: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    /// `T`.
    pub snapshots: usize,
    /// Live communities per snapshot; births refill losses.
    pub communities: usize,
    pub window_length: i64,
    pub origin: i64,
    /// Random extra interactions per window between live nodes.
    pub noise_edges: usize,
    /// When false every community continues unchanged.
    pub churn: bool,
    /// Share of lineages interacting in both directions.
    pub cohesive_share: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            snapshots: 20,
            communities: 40,
            window_length: 1000,
            origin: 0,
            noise_edges: 0,
            churn: true,
            cohesive_share: 0.5,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_length < 2 {
            return Err(Error::InvalidParameter(format!(
                "window_length {} cannot hold distinct window boundaries",
                self.window_length
            )));
        }
        if self.snapshots < 2 || self.communities == 0 {
            return Err(Error::InvalidParameter(
                "need at least two snapshots and one community".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.cohesive_share) {
            return Err(Error::InvalidParameter("cohesive_share must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Fate of a planted community at snapshot `t`, realised at `t + 1`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PlantedEvent {
    pub t: usize,
    pub kind: EventKind,
    pub members: BTreeSet<NodeId>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticDataset {
    pub interactions: Vec<TemporalInteraction>,
    pub window_length: i64,
    /// Planted member sets of snapshot `t` at index `t - 1`.
    pub communities: Vec<Vec<BTreeSet<NodeId>>>,
    /// One fate per planted community at `t < T`.
    pub events: Vec<PlantedEvent>,
}

impl SyntheticDataset {
    /// `source,target,timestamp` lines.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in &self.interactions {
            let _ = writeln!(out, "{},{},{}", i.source, i.target, i.timestamp);
        }
        out
    }

    pub fn planted_kind(&self, t: usize, members: &BTreeSet<NodeId>) -> Option<EventKind> {
        self.events
            .iter()
            .find(|e| e.t == t && &e.members == members)
            .map(|e| e.kind)
    }
}

#[derive(Clone, Debug)]
struct Lineage {
    members: Vec<NodeId>,
    cohesive: bool,
}

struct Generator {
    rng: ChaCha8Rng,
    next_node: usize,
    cohesive_share: f64,
}

impl Generator {
    fn fresh(&mut self) -> NodeId {
        self.next_node += 1;
        NodeId(format!("n{:06}", self.next_node))
    }

    fn birth(&mut self) -> Lineage {
        let size = self.rng.random_range(MIN_SIZE..=MAX_SIZE);
        Lineage {
            members: (0..size).map(|_| self.fresh()).collect(),
            cohesive: self.rng.random_bool(self.cohesive_share),
        }
    }

    /// Weights in [`EventKind::ALL`] order.
    fn fate(&mut self, lineage: &Lineage) -> EventKind {
        let mut w: [f64; 6] = match lineage.members.len() {
            4 => [2.0, 1.0, 3.0, 4.0, 0.0, 0.0],
            5 | 7 => [2.0, 1.0, 5.0, 0.0, 1.0, 0.0],
            6 => [2.0, 1.0, 1.0, 0.0, 5.0, 0.0],
            _ => [2.0, 1.0, 0.0, 0.0, 2.0, 5.0],
        };
        if !lineage.cohesive {
            w[EventKind::Continuing.index()] *= 0.5;
            w[EventKind::Dissolving.index()] *= 4.0;
        }
        let dist = WeightedIndex::new(w).expect("positive weights");
        EventKind::ALL[dist.sample(&mut self.rng)]
    }
}

fn clique_interactions(
    members: &[NodeId],
    cohesive: bool,
    window: (i64, i64),
    rng: &mut ChaCha8Rng,
    out: &mut Vec<TemporalInteraction>,
) {
    let mut sorted = members.to_vec();
    sorted.sort();
    for (a, u) in sorted.iter().enumerate() {
        for v in &sorted[a + 1..] {
            out.push(TemporalInteraction::new(
                u.clone(),
                v.clone(),
                rng.random_range(window.0..window.1),
            ));
            if cohesive {
                out.push(TemporalInteraction::new(
                    v.clone(),
                    u.clone(),
                    rng.random_range(window.0..window.1),
                ));
            }
        }
    }
}

/// Pins the first and last interaction of a window to its boundaries so the
/// window is kept whole by snapshot construction.
fn pin_boundaries(window: &mut [TemporalInteraction], bounds: (i64, i64)) {
    if let Some(first) = window.first_mut() {
        first.timestamp = bounds.0;
    }
    if window.len() > 1 {
        if let Some(last) = window.last_mut() {
            last.timestamp = bounds.1 - 1;
        }
    }
}

/// Bidirectional clique interactions for explicitly given groups per window.
pub fn plant_windows(
    groups: &[Vec<BTreeSet<NodeId>>],
    window_length: i64,
    origin: i64,
    seed: u64,
) -> Vec<TemporalInteraction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for (w, window_groups) in groups.iter().enumerate() {
        let start = origin + w as i64 * window_length;
        let bounds = (start, start + window_length);
        let mut window = Vec::new();
        for g in window_groups {
            let members: Vec<NodeId> = g.iter().cloned().collect();
            clique_interactions(&members, true, bounds, &mut rng, &mut window);
        }
        pin_boundaries(&mut window, bounds);
        out.extend(window);
    }
    out
}

pub fn generate_synthetic(cfg: &SynthConfig, seed: u64) -> Result<SyntheticDataset> {
    cfg.validate()?;
    let mut gen = Generator {
        rng: ChaCha8Rng::seed_from_u64(seed),
        next_node: 0,
        cohesive_share: cfg.cohesive_share,
    };
    let mut live: Vec<Lineage> = (0..cfg.communities).map(|_| gen.birth()).collect();
    let mut interactions = Vec::new();
    let mut communities = Vec::with_capacity(cfg.snapshots);
    let mut events = Vec::new();

    for t in 1..=cfg.snapshots {
        let start = cfg.origin + (t as i64 - 1) * cfg.window_length;
        let bounds = (start, start + cfg.window_length);
        let mut window = Vec::new();
        for l in &live {
            clique_interactions(&l.members, l.cohesive, bounds, &mut gen.rng, &mut window);
        }
        let pool: Vec<NodeId> = live.iter().flat_map(|l| l.members.iter().cloned()).collect();
        for _ in 0..cfg.noise_edges {
            let u = pool[gen.rng.random_range(0..pool.len())].clone();
            let v = pool[gen.rng.random_range(0..pool.len())].clone();
            if u != v {
                window.push(TemporalInteraction::new(u, v, gen.rng.random_range(bounds.0..bounds.1)));
            }
        }
        pin_boundaries(&mut window, bounds);
        interactions.extend(window);
        communities.push(
            live.iter()
                .map(|l| l.members.iter().cloned().collect())
                .collect::<Vec<BTreeSet<_>>>(),
        );
        if t == cfg.snapshots {
            break;
        }

        let mut fates: Vec<EventKind> = live
            .iter()
            .map(|l| if cfg.churn { gen.fate(l) } else { EventKind::Continuing })
            .collect();
        let mergers: Vec<usize> = (0..live.len()).filter(|&i| fates[i] == EventKind::Merging).collect();
        if mergers.len() % 2 == 1 {
            fates[*mergers.last().expect("odd count is non-empty")] = EventKind::Continuing;
        }

        let mut next = Vec::with_capacity(live.len());
        let mut pending_merge: Option<Lineage> = None;
        for (lineage, &kind) in live.iter().zip(&fates) {
            events.push(PlantedEvent {
                t,
                kind,
                members: lineage.members.iter().cloned().collect(),
            });
            match kind {
                EventKind::Continuing => next.push(lineage.clone()),
                EventKind::Dissolving => {}
                EventKind::Growing => {
                    let room = MAX_SIZE - lineage.members.len();
                    let k = gen.rng.random_range(1..=room.min(2));
                    let mut grown = lineage.clone();
                    for _ in 0..k {
                        let n = gen.fresh();
                        grown.members.push(n);
                    }
                    next.push(grown);
                }
                EventKind::Shrinking => {
                    let mut shrunk = lineage.clone();
                    let drop = gen.rng.random_range(0..shrunk.members.len());
                    shrunk.members.remove(drop);
                    next.push(shrunk);
                }
                EventKind::Splitting => {
                    let mut members = lineage.members.clone();
                    members.shuffle(&mut gen.rng);
                    let (a, b) = members.split_at(members.len() / 2);
                    for half in [a, b] {
                        next.push(Lineage {
                            members: half.to_vec(),
                            cohesive: lineage.cohesive,
                        });
                    }
                }
                EventKind::Merging => match pending_merge.take() {
                    None => pending_merge = Some(lineage.clone()),
                    Some(first) => {
                        let mut members = first.members;
                        members.extend(lineage.members.iter().cloned());
                        next.push(Lineage {
                            members,
                            cohesive: first.cohesive || lineage.cohesive,
                        });
                    }
                },
            }
        }
        if cfg.churn {
            while next.len() < cfg.communities {
                next.push(gen.birth());
            }
        }
        live = next;
    }

    Ok(SyntheticDataset {
        interactions,
        window_length: cfg.window_length,
        communities,
        events,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stationary_network_only_continues() {
        let cfg = SynthConfig {
            snapshots: 4,
            communities: 5,
            churn: false,
            ..SynthConfig::default()
        };
        let data = generate_synthetic(&cfg, 3).unwrap();
        assert_eq!(data.events.len(), 15);
        assert!(data.events.iter().all(|e| e.kind == EventKind::Continuing));
    }

    #[test]
    fn sizes_stay_in_range() {
        let data = generate_synthetic(&SynthConfig::default(), 11).unwrap();
        for groups in &data.communities {
            assert!(groups.iter().all(|g| (MIN_SIZE..=MAX_SIZE).contains(&g.len())));
        }
    }

    #[test]
    fn degenerate_window_is_rejected() {
        let cfg = SynthConfig {
            window_length: 1,
            ..SynthConfig::default()
        };
        assert!(generate_synthetic(&cfg, 0).is_err());
    }

    #[test]
    fn same_seed_same_log() {
        let cfg = SynthConfig {
            noise_edges: 20,
            ..SynthConfig::default()
        };
        assert_eq!(
            generate_synthetic(&cfg, 5).unwrap(),
            generate_synthetic(&cfg, 5).unwrap()
        );
    }
}
