use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::community::{detect_communities_with, CommunitySubgraph, CpmConfig};
use crate::evolution::{label_events, EventTargetVector, EvolutionEvent, GedParams};
use crate::features::{assemble_examples, FeatureConfig, GroupExample};
use crate::temporal::{build_snapshots, SnapshotSeries, TemporalInteraction};
use crate::Result;

/// Parameters of every in-memory stage from interactions to examples.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub window_length: i64,
    pub min_pair_interactions: u32,
    pub cpm: CpmConfig,
    pub ged: GedParams,
    pub features: FeatureConfig,
}

impl AnalysisConfig {
    /// Default stage parameters for a given window length.
    pub fn new(window_length: i64) -> Self {
        Self {
            window_length,
            min_pair_interactions: 1,
            cpm: CpmConfig::default(),
            ged: GedParams::default(),
            features: FeatureConfig::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Analysis {
    pub series: SnapshotSeries,
    /// `communities[t-1]` are the groups of snapshot `t`.
    pub communities: Vec<Vec<CommunitySubgraph>>,
    /// `events[t-1]` label the transition `t → t+1`.
    pub events: Vec<Vec<EvolutionEvent>>,
    pub targets: Vec<EventTargetVector>,
    pub examples: Vec<GroupExample>,
}

pub fn detect_all(series: &SnapshotSeries, cpm: &CpmConfig) -> Result<Vec<Vec<CommunitySubgraph>>> {
    series
        .snapshots()
        .par_iter()
        .map(|s| detect_communities_with(s, cpm))
        .collect()
}

pub fn track_all(
    series: &SnapshotSeries,
    communities: &[Vec<CommunitySubgraph>],
    ged: &GedParams,
) -> Result<(Vec<Vec<EvolutionEvent>>, Vec<EventTargetVector>)> {
    let labelings = (1..series.len())
        .into_par_iter()
        .map(|t| {
            label_events(
                &communities[t - 1],
                &communities[t],
                ged,
                series.get(t).expect("t within series"),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let mut events = Vec::with_capacity(labelings.len());
    let mut targets = Vec::new();
    for l in labelings {
        events.push(l.events);
        targets.extend(l.targets);
    }
    Ok((events, targets))
}

/// Snapshots, communities, events and examples for an interaction log.
pub fn analyze(interactions: &[TemporalInteraction], cfg: &AnalysisConfig) -> Result<Analysis> {
    let series = build_snapshots(interactions, cfg.window_length, cfg.min_pair_interactions)?;
    let communities = detect_all(&series, &cfg.cpm)?;
    let (events, targets) = track_all(&series, &communities, &cfg.ged)?;
    let examples = assemble_examples(&series, &communities, &events, &targets, &cfg.features)?;
    Ok(Analysis {
        series,
        communities,
        events,
        targets,
        examples,
    })
}
