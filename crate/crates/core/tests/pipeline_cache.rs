use std::fs;
use std::path::Path;

use commevolve::config::RunConfig;
use commevolve::experiments::{generate_synthetic, Dataset, SynthConfig};
use commevolve::pipeline::{
    analyze, event_stats_csv, load_dataset, load_events, load_series, run_pipeline, snapshot_stats_csv, Stage,
    StageStatus,
};
use commevolve::Error;

fn fixture(dir: &Path) -> RunConfig {
    let cfg = SynthConfig {
        snapshots: 8,
        communities: 12,
        noise_edges: 30,
        ..SynthConfig::default()
    };
    let data = generate_synthetic(&cfg, 3).unwrap();
    let log = dir.join("log.csv");
    fs::write(&log, data.to_csv()).unwrap();
    let mut run = RunConfig::new(&log, data.window_length);
    run.output_dir = dir.join("out");
    run
}

fn statuses(cfg: &RunConfig, force: bool) -> Vec<StageStatus> {
    run_pipeline(cfg, force)
        .unwrap()
        .into_iter()
        .map(|r| r.status)
        .collect()
}

use StageStatus::{Ran, Skipped};

#[test]
fn reruns_skip_and_config_edits_rerun_downstream() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = fixture(tmp.path());
    assert_eq!(statuses(&cfg, false), vec![Ran; 5]);
    for stage in Stage::ALL {
        for f in stage.outputs() {
            assert!(cfg.output_dir.join(f).is_file(), "{f}");
        }
        assert!(cfg.output_dir.join(stage.manifest_name()).is_file());
    }
    assert_eq!(statuses(&cfg, false), vec![Skipped; 5]);

    cfg.k_min = 4;
    assert_eq!(statuses(&cfg, false), vec![Skipped, Skipped, Ran, Ran, Ran]);
    cfg.ged_alpha = 0.6;
    assert_eq!(statuses(&cfg, false), vec![Skipped, Skipped, Skipped, Ran, Ran]);
    cfg.seed = 99;
    assert_eq!(statuses(&cfg, false), vec![Ran; 5]);
    assert_eq!(statuses(&cfg, true), vec![Ran; 5]);
}

#[test]
fn modified_outputs_require_force() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = fixture(tmp.path());
    run_pipeline(&cfg, false).unwrap();
    let path = cfg.output_dir.join("communities.jsonl");
    let mut text = fs::read_to_string(&path).unwrap();
    text.push('\n');
    fs::write(&path, text).unwrap();
    match run_pipeline(&cfg, false) {
        Err(Error::Stage { stage, message }) => {
            assert_eq!(stage, "detect");
            assert!(message.contains("--force"), "{message}");
        }
        other => panic!("expected a stage error, got {other:?}"),
    }
    let reports = run_pipeline(&cfg, true).unwrap();
    assert!(reports.iter().all(|r| r.status == Ran));
    assert_eq!(statuses(&cfg, false), vec![Skipped; 5]);
}

#[test]
fn unmanaged_outputs_require_force() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = fixture(tmp.path());
    fs::create_dir_all(&cfg.output_dir).unwrap();
    fs::write(cfg.output_dir.join("interactions.jsonl"), "stale").unwrap();
    let err = run_pipeline(&cfg, false).unwrap_err();
    assert!(err.to_string().contains("--force"), "{err}");
    assert!(run_pipeline(&cfg, true).is_ok());
}

#[test]
fn identical_runs_write_identical_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (ca, cb) = (fixture(a.path()), fixture(b.path()));
    run_pipeline(&ca, false).unwrap();
    run_pipeline(&cb, false).unwrap();
    for stage in Stage::ALL {
        for f in stage.outputs().iter().copied().chain([stage.manifest_name().as_str()]) {
            assert_eq!(
                fs::read(ca.output_dir.join(f)).unwrap(),
                fs::read(cb.output_dir.join(f)).unwrap(),
                "{f}"
            );
        }
    }
    let header = fs::read_to_string(ca.output_dir.join("examples.jsonl")).unwrap();
    assert!(header.starts_with("# commevolve stage=featurize input_hash="));
    assert!(header.lines().next().unwrap().ends_with("seed=0"));
}

#[test]
fn artifacts_round_trip_to_in_memory_analysis() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = fixture(tmp.path());
    run_pipeline(&cfg, false).unwrap();
    let log = fs::read(&cfg.dataset_path).unwrap();
    let parsed = commevolve::temporal::parse_interactions(log.as_slice()).unwrap();
    let analysis = analyze(&parsed.interactions, &cfg.analysis()).unwrap();
    let from_disk = load_dataset(&cfg.output_dir).unwrap();
    let in_memory = Dataset::from_analysis(&analysis);
    assert_eq!(from_disk.examples, in_memory.examples);
    assert_eq!(from_disk.activity, in_memory.activity);
    assert_eq!(
        load_events(&cfg.output_dir, analysis.series.len()).unwrap(),
        analysis.events
    );
}

#[test]
fn missing_artifacts_name_the_stage() {
    let tmp = tempfile::tempdir().unwrap();
    match load_dataset(tmp.path()) {
        Err(Error::Stage { stage, .. }) => assert_eq!(stage, "snapshots"),
        other => panic!("expected a stage error, got {other:?}"),
    }
    let cfg = fixture(tmp.path());
    run_pipeline(&cfg, false).unwrap();
    fs::remove_file(cfg.output_dir.join("examples.jsonl")).unwrap();
    match load_dataset(&cfg.output_dir) {
        Err(Error::Stage { stage, .. }) => assert_eq!(stage, "featurize"),
        other => panic!("expected a stage error, got {other:?}"),
    }
}

#[test]
fn stats_conserve_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = fixture(tmp.path());
    run_pipeline(&cfg, false).unwrap();
    let series = load_series(&cfg.output_dir).unwrap();
    let events = load_events(&cfg.output_dir, series.len()).unwrap();
    let csv = event_stats_csv(&events, "# h");
    let rows: Vec<Vec<String>> = csv
        .lines()
        .skip(2)
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    let total: usize = rows.iter().map(|r| r[2].parse::<usize>().unwrap()).sum();
    assert_eq!(total, events.iter().map(Vec::len).sum::<usize>());
    for t in 1..series.len() {
        let pct: f64 = rows
            .iter()
            .filter(|r| r[0] == t.to_string())
            .map(|r| r[3].parse::<f64>().unwrap())
            .sum();
        assert!((pct - 100.0).abs() < 1e-9, "snapshot {t}: {pct}");
    }
    let dataset = load_dataset(&cfg.output_dir).unwrap();
    let snap = snapshot_stats_csv(&series, "# h");
    assert_eq!(snap.lines().nth(1), Some("index,nodes,directed_edges,undirected_edges"));
    for (line, &activity) in snap.lines().skip(2).zip(&dataset.activity) {
        assert_eq!(line.rsplit(',').next().unwrap().parse::<usize>().unwrap(), activity);
    }
}
