use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::comparative::{evaluate_method, macro_auc, ResultTable, SUMMARY_COLUMNS};
use super::stats::{spearman_rho, Correlation};
use super::{partition, Dataset, EventAucs, ExperimentConfig, Method, SplitPlan, FIRST_SPLIT_POINT};
use crate::evolution::EVENT_COUNT;
use crate::{Error, Result};

/// Training intervals `[start, eval - 1]` with starts receding by `stride`;
/// the last interval starts at snapshot 1.
pub fn build_training_intervals(eval_snapshot: usize, stride: usize) -> Vec<(usize, usize)> {
    let end = eval_snapshot.saturating_sub(1);
    if end == 0 || stride == 0 {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut k = 1;
    loop {
        let start = (end + 1).saturating_sub(k * stride).max(1);
        out.push((start, end));
        if start == 1 {
            return out;
        }
        k += 1;
    }
}

/// `T, T - stride, …` restricted to usable test snapshots `[5, T - 1]`,
/// newest first.
pub fn evaluation_snapshots(snapshot_count: usize, stride: usize) -> Vec<usize> {
    if stride == 0 {
        return Vec::new();
    }
    (0..)
        .map_while(|k: usize| snapshot_count.checked_sub(k * stride))
        .take_while(|&e| e >= FIRST_SPLIT_POINT)
        .filter(|&e| e < snapshot_count)
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemporalRecord {
    pub eval_snapshot: usize,
    pub interval_start: usize,
    pub interval_end: usize,
    pub selected_seed: Option<u64>,
    pub auc: EventAucs,
}

impl TemporalRecord {
    pub fn interval_length(&self) -> usize {
        self.interval_end + 1 - self.interval_start
    }

    pub fn macro_auc(&self) -> Option<f64> {
        macro_auc(&self.auc)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemporalTable {
    pub seed: u64,
    pub records: Vec<TemporalRecord>,
}

impl TemporalTable {
    /// `eval_snapshot,interval_start,interval_end,event,auc` rows after `header`.
    pub fn to_csv(&self, header: &str) -> String {
        let mut out = format!("{header}\neval_snapshot,interval_start,interval_end,event,auc\n");
        for r in &self.records {
            for (c, name) in SUMMARY_COLUMNS.iter().enumerate() {
                let auc = if c < EVENT_COUNT { r.auc[c] } else { r.macro_auc() };
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    r.eval_snapshot,
                    r.interval_start,
                    r.interval_end,
                    name,
                    auc.map_or_else(|| "NA".to_string(), |v| v.to_string())
                );
            }
        }
        out
    }
}

/// GNAN trained on each training interval of each evaluation snapshot.
pub fn run_temporal_study(dataset: &Dataset, cfg: &ExperimentConfig) -> Result<TemporalTable> {
    cfg.validate()?;
    let evals = evaluation_snapshots(dataset.snapshot_count, cfg.temporal_stride);
    if evals.is_empty() {
        return Err(Error::InsufficientSnapshots {
            needed: FIRST_SPLIT_POINT + cfg.temporal_stride,
            have: dataset.snapshot_count,
        });
    }
    let jobs: Vec<(usize, (usize, usize))> = evals
        .iter()
        .flat_map(|&e| {
            build_training_intervals(e, cfg.temporal_stride)
                .into_iter()
                .map(move |iv| (e, iv))
        })
        .collect();
    let records = jobs
        .par_iter()
        .enumerate()
        .map(|(index, &(eval, (start, end)))| {
            let plan = SplitPlan::with_interval(index, start, eval)?;
            let parts = partition(dataset, &plan, &cfg.features)?;
            let (auc, selected_seed) = evaluate_method(Method::Gnan, &plan, &parts, cfg)?;
            Ok(TemporalRecord {
                eval_snapshot: eval,
                interval_start: start,
                interval_end: end,
                selected_seed,
                auc,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TemporalTable {
        seed: cfg.seed,
        records,
    })
}

/// Spearman correlation between training-interval length and macro AUC.
pub fn interval_length_correlation(table: &TemporalTable) -> Result<Correlation> {
    let (x, y): (Vec<f64>, Vec<f64>) = table
        .records
        .iter()
        .filter_map(|r| Some((r.interval_length() as f64, r.macro_auc()?)))
        .unzip();
    spearman_rho(&x, &y)
}

/// Spearman correlation between snapshot activity (undirected edge count)
/// and the mean macro AUC of `method` over splits testing on that snapshot.
pub fn activity_correlation(table: &ResultTable, method: Method, activity: &[usize]) -> Result<Correlation> {
    let mut per_snapshot: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in table.records.iter().filter(|r| r.method == method) {
        if let Some(m) = r.macro_auc() {
            per_snapshot.entry(r.split_point).or_default().push(m);
        }
    }
    let (x, y): (Vec<f64>, Vec<f64>) = per_snapshot
        .into_iter()
        .filter_map(|(t, aucs)| {
            let edges = *activity.get(t.checked_sub(1)?)?;
            Some((edges as f64, aucs.iter().sum::<f64>() / aucs.len() as f64))
        })
        .unzip();
    spearman_rho(&x, &y)
}
