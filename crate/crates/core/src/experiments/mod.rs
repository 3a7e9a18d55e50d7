//! Evaluation protocol: random temporal splits, instance selection, AUC
//! scoring, significance tests, the training-interval study and a synthetic
//! data generator with planted events.

mod comparative;
mod splits;
pub mod stats;
mod synth;
mod temporal;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use comparative::{
    event_aucs, fit_and_select, instance_seeds, macro_auc, run_comparative, select_index, select_instance, ResultTable,
    SplitRecord, SummaryCell, SummaryRow, TrainedInstance, SIGNIFICANCE_LEVEL, SUMMARY_COLUMNS,
};
pub use splits::{make_splits, SplitPlan, FIRST_SPLIT_POINT};
pub use stats::{roc_auc, spearman_rho, wilcoxon_signed_rank, Correlation, WilcoxonResult};
pub use synth::{generate_synthetic, plant_windows, PlantedEvent, SynthConfig, SyntheticDataset};
pub use temporal::{
    activity_correlation, build_training_intervals, evaluation_snapshots, interval_length_correlation,
    run_temporal_study, TemporalRecord, TemporalTable,
};

use crate::evolution::EVENT_COUNT;
use crate::features::{FeatureConfig, FeatureScaler, GroupExample};
use crate::models::TrainConfig;
use crate::pipeline::Analysis;
use crate::{Error, Result};

/// Per-event AUC; `None` where the evaluated slice has a single class.
pub type EventAucs = [Option<f64>; EVENT_COUNT];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Gnan,
    Mlp3,
    Logreg,
    /// Uniform random scores.
    Dummy,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Self::Gnan => "gnan",
            Self::Mlp3 => "mlp3",
            Self::Logreg => "logreg",
            Self::Dummy => "dummy",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gnan" => Ok(Self::Gnan),
            "mlp3" | "mlp" => Ok(Self::Mlp3),
            "logreg" | "logistic_regression" => Ok(Self::Logreg),
            "dummy" => Ok(Self::Dummy),
            other => Err(Error::InvalidParameter(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub features: FeatureConfig,
    /// The seed field is replaced per trained instance.
    pub train: TrainConfig,
    pub hidden_dim: usize,
    pub heads: usize,
    pub n_splits: usize,
    pub instances_per_split: usize,
    pub temporal_stride: usize,
    pub methods: Vec<Method>,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            features: FeatureConfig::default(),
            train: TrainConfig::default(),
            hidden_dim: 16,
            heads: 4,
            n_splits: 30,
            instances_per_split: 5,
            temporal_stride: 5,
            methods: vec![Method::Gnan, Method::Mlp3, Method::Logreg],
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.features.validate()?;
        self.train.validate()?;
        if self.n_splits == 0 || self.instances_per_split == 0 || self.temporal_stride == 0 {
            return Err(Error::InvalidParameter(
                "n_splits, instances_per_split and temporal_stride must be at least 1".into(),
            ));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidParameter("no methods selected".into()));
        }
        if self.hidden_dim == 0 || self.heads == 0 || !self.hidden_dim.is_multiple_of(self.heads) {
            return Err(Error::InvalidParameter(format!(
                "hidden_dim {} must be a positive multiple of heads {}",
                self.hidden_dim, self.heads
            )));
        }
        Ok(())
    }
}

/// Examples of a snapshot series with per-snapshot activity.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub examples: Vec<GroupExample>,
    /// `T`.
    pub snapshot_count: usize,
    /// Undirected edge count of snapshot `t` at index `t - 1`.
    pub activity: Vec<usize>,
}

impl Dataset {
    pub fn from_analysis(analysis: &Analysis) -> Self {
        Self {
            examples: analysis.examples.clone(),
            snapshot_count: analysis.series.len(),
            activity: analysis
                .series
                .snapshots()
                .iter()
                .map(|s| s.undirected_projection().edge_count())
                .collect(),
        }
    }

    /// Examples with `start <= t <= end`.
    pub fn between(&self, start: usize, end: usize) -> Vec<GroupExample> {
        self.examples
            .iter()
            .filter(|e| (start..=end).contains(&e.t))
            .cloned()
            .collect()
    }
}

/// Train, validation and test examples of a plan, standardised on the
/// training part when requested.
pub fn partition(dataset: &Dataset, plan: &SplitPlan, features: &FeatureConfig) -> Result<[Vec<GroupExample>; 3]> {
    let train = dataset.between(plan.train_start, plan.train_end());
    let val = dataset.between(plan.val, plan.val);
    let test = dataset.between(plan.test, plan.test);
    for (name, part, t) in [
        ("training", &train, plan.train_start),
        ("validation", &val, plan.val),
        ("test", &test, plan.test),
    ] {
        if part.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "split at snapshot {} has no {name} examples (from snapshot {t})",
                plan.test
            )));
        }
    }
    if !features.standardize {
        return Ok([train, val, test]);
    }
    let scaler = FeatureScaler::fit(&train);
    let apply = |xs: Vec<GroupExample>| xs.iter().map(|e| scaler.transform(e)).collect();
    Ok([apply(train), apply(val), apply(test)])
}

/// Deterministic per-instance seed.
pub(crate) fn instance_seed(seed: u64, stream: u64, split: usize, instance: usize) -> u64 {
    let mut z = seed ^ stream.rotate_left(48) ^ (split as u64).rotate_left(20);
    // splitmix64 finaliser, shifted down so consecutive instances never wrap.
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    ((z ^ (z >> 31)) >> 16) + instance as u64
}
