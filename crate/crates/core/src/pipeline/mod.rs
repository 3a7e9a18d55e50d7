//! Cached, hash-checked pipeline stages:
//! ingest → snapshots → detect → track → featurize.
//!
//! Each stage writes its artifacts and a `<stage>.manifest.json` recording
//! the hash of its inputs and of every output. A stage is skipped when its
//! input hash matches the manifest; outputs that no longer match their
//! recorded hash are never overwritten without `force`.

mod analysis;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use analysis::{analyze, detect_all, track_all, Analysis, AnalysisConfig};

use crate::artifacts::{header_line, read_jsonl, sha256_hex, to_jsonl, write_atomic, CommunityRecord, SnapshotRecord};
use crate::community::CommunitySubgraph;
use crate::config::RunConfig;
use crate::evolution::{EventKind, EventTargetVector, EvolutionEvent, EVENT_COUNT};
use crate::experiments::Dataset;
use crate::features::{assemble_examples, GroupExample};
use crate::temporal::{build_snapshots, parse_interactions, SnapshotSeries, TemporalInteraction};
use crate::{Error, Result};

pub const INTERACTIONS_FILE: &str = "interactions.jsonl";
pub const SNAPSHOTS_FILE: &str = "snapshots.jsonl";
pub const COMMUNITIES_FILE: &str = "communities.jsonl";
pub const EVENTS_FILE: &str = "events.jsonl";
pub const TARGETS_FILE: &str = "targets.jsonl";
pub const EXAMPLES_FILE: &str = "examples.jsonl";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Ingest,
    Snapshots,
    Detect,
    Track,
    Featurize,
}

impl Stage {
    pub const ALL: [Stage; 5] = [
        Stage::Ingest,
        Stage::Snapshots,
        Stage::Detect,
        Stage::Track,
        Stage::Featurize,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Ingest => "ingest",
            Self::Snapshots => "snapshots",
            Self::Detect => "detect",
            Self::Track => "track",
            Self::Featurize => "featurize",
        }
    }

    pub fn outputs(self) -> &'static [&'static str] {
        match self {
            Self::Ingest => &[INTERACTIONS_FILE],
            Self::Snapshots => &[SNAPSHOTS_FILE],
            Self::Detect => &[COMMUNITIES_FILE],
            Self::Track => &[EVENTS_FILE, TARGETS_FILE],
            Self::Featurize => &[EXAMPLES_FILE],
        }
    }

    pub fn manifest_name(self) -> String {
        format!("{}.manifest.json", self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageManifest {
    pub stage: String,
    pub input_hash: String,
    pub seed: u64,
    /// File name → SHA-256 of its contents.
    pub outputs: BTreeMap<String, String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StageStatus {
    Ran,
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StageReport {
    pub stage: Stage,
    pub status: StageStatus,
    pub input_hash: String,
}

fn stage_error(stage: Stage, message: impl Into<String>) -> Error {
    Error::Stage {
        stage: stage.name().into(),
        message: message.into(),
    }
}

fn hash_parts(parts: &[&str]) -> String {
    sha256_hex(parts.join("\n").as_bytes())
}

fn file_header(stage: Stage, input_hash: &str, seed: u64) -> String {
    header_line(&[
        ("stage", stage.name().into()),
        ("input_hash", input_hash.into()),
        ("seed", seed.to_string()),
    ])
}

struct Runner<'a> {
    dir: &'a Path,
    seed: u64,
    force: bool,
    reports: Vec<StageReport>,
}

impl Runner<'_> {
    /// Checks existing outputs against the manifest and decides whether the
    /// stage can be skipped.
    fn fresh(&self, stage: Stage, input_hash: &str) -> Result<Option<BTreeMap<String, String>>> {
        let manifest_path = self.dir.join(stage.manifest_name());
        if self.force {
            return Ok(None);
        }
        if !manifest_path.exists() {
            if let Some(f) = stage.outputs().iter().find(|f| self.dir.join(f).exists()) {
                return Err(stage_error(
                    stage,
                    format!("{f} exists without a manifest; rerun with --force to overwrite it"),
                ));
            }
            return Ok(None);
        }
        let manifest: StageManifest = serde_json::from_str(&fs::read_to_string(&manifest_path)?)?;
        for (file, recorded) in &manifest.outputs {
            let path = self.dir.join(file);
            let actual = fs::read(&path).map(|b| sha256_hex(&b)).ok();
            if actual.as_deref() != Some(recorded.as_str()) {
                return Err(stage_error(
                    stage,
                    format!(
                        "{file} does not match the hash recorded in {}; rerun with --force to regenerate it",
                        stage.manifest_name()
                    ),
                ));
            }
        }
        Ok((manifest.input_hash == input_hash).then_some(manifest.outputs))
    }

    /// Runs `produce` unless the stage is fresh; returns output hashes.
    fn stage(
        &mut self,
        stage: Stage,
        input_hash: String,
        produce: impl FnOnce(&str) -> Result<Vec<(&'static str, String)>>,
    ) -> Result<BTreeMap<String, String>> {
        if let Some(outputs) = self.fresh(stage, &input_hash)? {
            self.reports.push(StageReport {
                stage,
                status: StageStatus::Skipped,
                input_hash,
            });
            return Ok(outputs);
        }
        let header = file_header(stage, &input_hash, self.seed);
        let files = produce(&header)?;
        let mut outputs = BTreeMap::new();
        for (name, contents) in files {
            write_atomic(&self.dir.join(name), contents.as_bytes())?;
            outputs.insert(name.to_string(), sha256_hex(contents.as_bytes()));
        }
        let manifest = StageManifest {
            stage: stage.name().into(),
            input_hash: input_hash.clone(),
            seed: self.seed,
            outputs: outputs.clone(),
        };
        write_atomic(
            &self.dir.join(stage.manifest_name()),
            serde_json::to_string_pretty(&manifest)?.as_bytes(),
        )?;
        self.reports.push(StageReport {
            stage,
            status: StageStatus::Ran,
            input_hash,
        });
        Ok(outputs)
    }
}

/// Runs every stage for `cfg`, writing into `cfg.output_dir`.
pub fn run_pipeline(cfg: &RunConfig, force: bool) -> Result<Vec<StageReport>> {
    cfg.validate()?;
    let dir = cfg.output_dir.as_path();
    fs::create_dir_all(dir)?;
    let seed = cfg.seed;
    let mut runner = Runner {
        dir,
        seed,
        force,
        reports: Vec::new(),
    };
    let seed_s = format!("seed={seed}");

    let raw = fs::read(&cfg.dataset_path)?;
    let h_ingest = hash_parts(&["ingest", &sha256_hex(&raw), &seed_s]);
    let mut interactions: Option<Vec<TemporalInteraction>> = None;
    let out_ingest = runner.stage(Stage::Ingest, h_ingest, |header| {
        let parsed = parse_interactions(raw.as_slice())?;
        let text = to_jsonl(header, &parsed.interactions)?;
        interactions = Some(parsed.interactions);
        Ok(vec![(INTERACTIONS_FILE, text)])
    })?;

    let h_snap = hash_parts(&[
        "snapshots",
        &out_ingest[INTERACTIONS_FILE],
        &format!("window_length_seconds={}", cfg.window_length_seconds),
        &format!("min_pair_interactions={}", cfg.min_pair_interactions),
        &seed_s,
    ]);
    let mut series: Option<SnapshotSeries> = None;
    let out_snap = runner.stage(Stage::Snapshots, h_snap, |header| {
        let inter = match interactions.take() {
            Some(i) => i,
            None => read_jsonl(&dir.join(INTERACTIONS_FILE))?,
        };
        let s = build_snapshots(&inter, cfg.window_length_seconds, cfg.min_pair_interactions)?;
        let records: Vec<SnapshotRecord> = s.snapshots().iter().map(SnapshotRecord::from_snapshot).collect();
        let text = to_jsonl(header, &records)?;
        series = Some(s);
        Ok(vec![(SNAPSHOTS_FILE, text)])
    })?;
    let load_series = |series: &mut Option<SnapshotSeries>| -> Result<SnapshotSeries> {
        match series.take() {
            Some(s) => Ok(s),
            None => load_series(dir),
        }
    };

    let cpm = cfg.cpm();
    let h_detect = hash_parts(&[
        "detect",
        &out_snap[SNAPSHOTS_FILE],
        &format!("k_min={}", cpm.k_min),
        &format!("majority_basis={:?}", cpm.basis),
        &format!("max_cliques_per_snapshot={}", cpm.max_cliques),
        &seed_s,
    ]);
    let mut communities: Option<Vec<Vec<CommunitySubgraph>>> = None;
    let mut series_cache: Option<SnapshotSeries> = None;
    let out_detect = runner.stage(Stage::Detect, h_detect, |header| {
        let s = load_series(&mut series)?;
        let c = detect_all(&s, &cpm)?;
        let records: Vec<CommunityRecord> = c.iter().flatten().map(CommunityRecord::from_subgraph).collect();
        let text = to_jsonl(header, &records)?;
        communities = Some(c);
        series_cache = Some(s);
        Ok(vec![(COMMUNITIES_FILE, text)])
    })?;
    if series_cache.is_none() {
        series_cache = series.take();
    }

    let ged = cfg.ged();
    let h_track = hash_parts(&[
        "track",
        &out_snap[SNAPSHOTS_FILE],
        &out_detect[COMMUNITIES_FILE],
        &format!("ged_alpha={}", ged.alpha),
        &format!("ged_beta={}", ged.beta),
        &format!("ged_dissolve_floor={}", ged.dissolve_floor),
        &seed_s,
    ]);
    let mut tracked: Option<(Vec<Vec<EvolutionEvent>>, Vec<EventTargetVector>)> = None;
    let out_track = runner.stage(Stage::Track, h_track, |header| {
        let s = load_series(&mut series_cache)?;
        let c = match communities.take() {
            Some(c) => c,
            None => load_communities(dir, s.len())?,
        };
        let (events, targets) = track_all(&s, &c, &ged)?;
        let flat: Vec<&EvolutionEvent> = events.iter().flatten().collect();
        let files = vec![
            (EVENTS_FILE, to_jsonl(header, &flat)?),
            (TARGETS_FILE, to_jsonl(header, &targets)?),
        ];
        tracked = Some((events, targets));
        communities = Some(c);
        series_cache = Some(s);
        Ok(files)
    })?;

    let features = cfg.features();
    let h_feat = hash_parts(&[
        "featurize",
        &out_snap[SNAPSHOTS_FILE],
        &out_detect[COMMUNITIES_FILE],
        &out_track[EVENTS_FILE],
        &out_track[TARGETS_FILE],
        &format!("history_snapshots={}", features.history),
        &seed_s,
    ]);
    runner.stage(Stage::Featurize, h_feat, |header| {
        let s = load_series(&mut series_cache)?;
        let c = match communities.take() {
            Some(c) => c,
            None => load_communities(dir, s.len())?,
        };
        let (events, targets) = match tracked.take() {
            Some(t) => t,
            None => (load_events(dir, s.len())?, read_jsonl(&dir.join(TARGETS_FILE))?),
        };
        let examples = assemble_examples(&s, &c, &events, &targets, &features)?;
        Ok(vec![(EXAMPLES_FILE, to_jsonl(header, &examples)?)])
    })?;

    Ok(runner.reports)
}

fn require(dir: &Path, stage: Stage) -> Result<()> {
    for f in stage.outputs() {
        if !dir.join(f).is_file() {
            return Err(stage_error(
                stage,
                format!("{f} is missing from {}; run `commevolve pipeline` first", dir.display()),
            ));
        }
    }
    Ok(())
}

pub fn load_series(dir: &Path) -> Result<SnapshotSeries> {
    require(dir, Stage::Snapshots)?;
    let records: Vec<SnapshotRecord> = read_jsonl(&dir.join(SNAPSHOTS_FILE))?;
    let first = records
        .first()
        .ok_or_else(|| stage_error(Stage::Snapshots, "snapshot artifact is empty"))?;
    let (origin, window_length) = (first.window.0, first.window.1 - first.window.0);
    Ok(SnapshotSeries::new(
        records.iter().map(SnapshotRecord::to_snapshot).collect(),
        origin,
        window_length,
    ))
}

/// Communities grouped by snapshot, `T` groups-lists long.
pub fn load_communities(dir: &Path, snapshot_count: usize) -> Result<Vec<Vec<CommunitySubgraph>>> {
    require(dir, Stage::Detect)?;
    let records: Vec<CommunityRecord> = read_jsonl(&dir.join(COMMUNITIES_FILE))?;
    let mut out = vec![Vec::new(); snapshot_count];
    for r in records {
        let slot =
            r.t.checked_sub(1)
                .and_then(|i| out.get_mut(i))
                .ok_or_else(|| stage_error(Stage::Detect, format!("community at snapshot {} out of range", r.t)))?;
        slot.push(r.to_subgraph());
    }
    Ok(out)
}

/// Events grouped by source snapshot, `T - 1` lists long.
pub fn load_events(dir: &Path, snapshot_count: usize) -> Result<Vec<Vec<EvolutionEvent>>> {
    require(dir, Stage::Track)?;
    let flat: Vec<EvolutionEvent> = read_jsonl(&dir.join(EVENTS_FILE))?;
    let mut out = vec![Vec::new(); snapshot_count.saturating_sub(1)];
    for e in flat {
        let slot = e
            .from
            .t
            .checked_sub(1)
            .and_then(|i| out.get_mut(i))
            .ok_or_else(|| stage_error(Stage::Track, format!("event from snapshot {} out of range", e.from.t)))?;
        slot.push(e);
    }
    Ok(out)
}

pub fn load_examples(dir: &Path) -> Result<Vec<GroupExample>> {
    require(dir, Stage::Featurize)?;
    read_jsonl(&dir.join(EXAMPLES_FILE))
}

/// Examples and activity from pipeline artifacts.
pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let series = load_series(dir)?;
    let examples = load_examples(dir)?;
    Ok(Dataset {
        examples,
        snapshot_count: series.len(),
        activity: series
            .snapshots()
            .iter()
            .map(|s| s.undirected_projection().edge_count())
            .collect(),
    })
}

/// `index,nodes,directed_edges,undirected_edges` per snapshot.
pub fn snapshot_stats_csv(series: &SnapshotSeries, header: &str) -> String {
    let mut out = format!("{header}\nindex,nodes,directed_edges,undirected_edges\n");
    for s in series.snapshots() {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            s.index(),
            s.nodes().len(),
            s.directed_edge_count(),
            s.undirected_projection().edge_count()
        );
    }
    out
}

/// `index,event,count,percentage` per source snapshot and event kind.
pub fn event_stats_csv(events: &[Vec<EvolutionEvent>], header: &str) -> String {
    let mut out = format!("{header}\nindex,event,count,percentage\n");
    for (idx, list) in events.iter().enumerate() {
        let mut counts = [0usize; EVENT_COUNT];
        for e in list {
            counts[e.kind.index()] += 1;
        }
        let total: usize = counts.iter().sum();
        for kind in EventKind::ALL {
            let c = counts[kind.index()];
            let pct = if total == 0 {
                0.0
            } else {
                100.0 * c as f64 / total as f64
            };
            let _ = writeln!(out, "{},{},{},{}", idx + 1, kind.name(), c, pct);
        }
    }
    out
}

/// Path of an artifact inside the output directory.
pub fn artifact_path(cfg: &RunConfig, file: &str) -> PathBuf {
    cfg.output_dir.join(file)
}
