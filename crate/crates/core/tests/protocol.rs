mod common;

use std::collections::BTreeMap;

use commevolve::experiments::{
    build_training_intervals, evaluation_snapshots, generate_synthetic, make_splits, run_comparative,
    run_temporal_study, select_index, Dataset, ExperimentConfig, Method, SynthConfig, FIRST_SPLIT_POINT,
};
use commevolve::features::FeatureConfig;
use commevolve::models::{train, EventModel, GnanConfig, GnanModel, TrainConfig};
use commevolve::pipeline::{analyze, AnalysisConfig};
use commevolve::Error;
use common::random_example;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn interval_examples() {
    assert_eq!(build_training_intervals(14, 5), vec![(9, 13), (4, 13), (1, 13)]);
    assert_eq!(build_training_intervals(6, 5), vec![(1, 5)]);
    assert_eq!(build_training_intervals(12, 5), vec![(7, 11), (2, 11), (1, 11)]);
    assert_eq!(evaluation_snapshots(34, 5), vec![29, 24, 19, 14, 9]);
}

proptest! {
    #[test]
    fn interval_increments_tile_the_history(eval in 2usize..200, stride in 1usize..12) {
        let intervals = build_training_intervals(eval, stride);
        prop_assert!(intervals.iter().all(|&(_, e)| e == eval - 1));
        prop_assert_eq!(intervals.last().unwrap().0, 1);
        let mut covered = vec![0u32; eval];
        let mut upper = eval - 1;
        for &(start, _) in &intervals {
            prop_assert!(upper + 1 - start <= stride);
            for slot in &mut covered[start..=upper] {
                *slot += 1;
            }
            upper = start.saturating_sub(1);
        }
        prop_assert!(covered[1..].iter().all(|&c| c == 1));
    }

    #[test]
    fn split_points_stay_in_range(t in 6usize..60, n in 1usize..80, seed in any::<u64>()) {
        let plans = make_splits(t, n, seed).unwrap();
        prop_assert_eq!(plans.len(), n);
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for (i, p) in plans.iter().enumerate() {
            prop_assert_eq!(p.index, i);
            prop_assert!((FIRST_SPLIT_POINT..t).contains(&p.test));
            prop_assert_eq!(p.val, p.test - 1);
            prop_assert_eq!(p.train_start, 1);
            *counts.entry(p.test).or_default() += 1;
        }
        let (lo, hi) = (counts.values().min().unwrap(), counts.values().max().unwrap());
        prop_assert!(hi - lo <= 1, "points are drawn round by round");
        prop_assert_eq!(plans, make_splits(t, n, seed).unwrap());
    }
}

#[test]
fn too_short_series_is_rejected() {
    assert!(matches!(make_splits(5, 3, 0), Err(Error::InsufficientSnapshots { .. })));
}

#[test]
fn selection_prefers_macro_auc_then_lowest_seed() {
    let a = [Some(0.6); 6];
    let b = [Some(0.8), None, None, None, None, None];
    let c = [Some(0.8), Some(0.8), None, None, None, None];
    assert_eq!(select_index(&[(4, a), (7, b), (2, a)]), Some(1));
    assert_eq!(select_index(&[(9, c), (3, b), (5, a)]), Some(1));
    assert_eq!(select_index(&[(1, [None; 6]), (0, [None; 6])]), Some(1));
    assert_eq!(select_index(&[]), None);
}

fn constant_fixture() -> (GnanModel<f64>, Vec<commevolve::features::GroupExample>) {
    let features = FeatureConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let examples = (0..12).map(|_| random_example(&mut rng, 5, 2, &features)).collect();
    (
        GnanModel::new(GnanConfig::for_features(&features, 16, 4), 0).unwrap(),
        examples,
    )
}

#[test]
fn constant_validation_loss_stops_after_patience() {
    let (model, examples) = constant_fixture();
    // Zero learning rate and decay keep every epoch's validation loss equal.
    let cfg = TrainConfig {
        learning_rate: 0.0,
        weight_decay: 0.0,
        ..TrainConfig::default()
    };
    let (best, history) = train(model.clone(), &examples[..8], &examples[8..], &cfg).unwrap();
    assert!(history.stopped_early);
    assert_eq!(history.best_epoch, 1);
    assert_eq!(history.epochs.len(), 1 + cfg.patience);
    assert_eq!(best, model);
}

#[test]
fn training_is_deterministic_per_seed() {
    let (model, examples) = constant_fixture();
    let cfg = TrainConfig {
        max_epochs: 8,
        learning_rate: 0.01,
        seed: 5,
        batch_size: 4,
        ..TrainConfig::default()
    };
    let (a, ha) = train(model.clone(), &examples[..8], &examples[8..], &cfg).unwrap();
    let (b, hb) = train(model.clone(), &examples[..8], &examples[8..], &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(ha, hb);
    let (c, _) = train(
        model.clone(),
        &examples[..8],
        &examples[8..],
        &TrainConfig { seed: 6, ..cfg },
    )
    .unwrap();
    assert_ne!(a.named_parameters()[0].1, c.named_parameters()[0].1);
    assert!(ha
        .epochs
        .iter()
        .all(|e| e.train_loss.is_finite() && e.val_loss.is_finite()));
    assert!(ha.best_val_loss <= ha.epochs[0].val_loss);
}

#[test]
fn empty_sets_are_rejected() {
    let (model, examples) = constant_fixture();
    assert!(matches!(
        train(model, &examples, &[], &TrainConfig::default()),
        Err(Error::NoData)
    ));
}

fn small_dataset() -> Dataset {
    let cfg = SynthConfig {
        snapshots: 9,
        communities: 16,
        noise_edges: 20,
        ..SynthConfig::default()
    };
    let data = generate_synthetic(&cfg, 8).unwrap();
    Dataset::from_analysis(&analyze(&data.interactions, &AnalysisConfig::new(data.window_length)).unwrap())
}

fn quick_experiment() -> ExperimentConfig {
    ExperimentConfig {
        n_splits: 3,
        instances_per_split: 2,
        methods: vec![Method::Gnan, Method::Logreg, Method::Dummy],
        train: TrainConfig {
            max_epochs: 6,
            ..TrainConfig::default()
        },
        ..ExperimentConfig::default()
    }
}

#[test]
fn comparative_tables_are_reproducible_and_shaped() {
    let dataset = small_dataset();
    let cfg = quick_experiment();
    let a = run_comparative(&dataset, &cfg).unwrap();
    let b = run_comparative(&dataset, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.results_csv("# h"), b.results_csv("# h"));
    assert_eq!(a.records.len(), 3 * 3);
    let summary = a.summary();
    assert_eq!(summary.len(), 3);
    assert!(summary.iter().all(|r| r.cells.len() == 7));
    assert!(summary[0].cells.iter().all(|c| c.vs_gnan.is_none()));
    let csv = a.summary_csv("# h");
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[1], "method,event,mean_auc,significant_vs_gnan");
    assert_eq!(lines.len(), 2 + 3 * 7);
}

#[test]
fn identical_methods_are_never_significant() {
    let dataset = small_dataset();
    let mut cfg = quick_experiment();
    cfg.methods = vec![Method::Gnan, Method::Gnan];
    let table = run_comparative(&dataset, &cfg).unwrap();
    for row in table.summary() {
        assert!(row.cells.iter().all(|c| c.significant() != Some(true)));
    }
}

#[test]
fn temporal_rows_follow_the_schedule() {
    let dataset = small_dataset();
    let mut cfg = quick_experiment();
    cfg.temporal_stride = 2;
    let table = run_temporal_study(&dataset, &cfg).unwrap();
    let expected: usize = evaluation_snapshots(dataset.snapshot_count, 2)
        .iter()
        .map(|&e| build_training_intervals(e, 2).len())
        .sum();
    assert_eq!(table.records.len(), expected);
    let csv = table.to_csv("# h");
    assert_eq!(
        csv.lines().nth(1),
        Some("eval_snapshot,interval_start,interval_end,event,auc")
    );
    assert_eq!(csv.lines().count(), 2 + expected * 7);
    assert_eq!(table, run_temporal_study(&dataset, &cfg).unwrap());
}
