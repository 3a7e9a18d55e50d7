use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{roc_auc, wilcoxon_signed_rank, WilcoxonResult};
use super::{instance_seed, make_splits, partition, Dataset, EventAucs, ExperimentConfig, Method, SplitPlan};
use crate::evolution::EVENT_COUNT;
use crate::features::GroupExample;
use crate::models::{predict, train, BaselineModel, EventModel, GnanConfig, GnanModel, ModelKind, TrainConfig};
use crate::Result;

pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

/// Six event columns followed by the macro average.
pub const SUMMARY_COLUMNS: [&str; EVENT_COUNT + 1] = [
    "continuing",
    "dissolving",
    "growing",
    "merging",
    "shrinking",
    "splitting",
    "macro",
];

pub fn event_aucs(scores: &[Vec<f64>], examples: &[GroupExample]) -> EventAucs {
    let mut out = [None; EVENT_COUNT];
    for (k, slot) in out.iter_mut().enumerate() {
        let s: Vec<f64> = scores.iter().map(|row| row[k]).collect();
        let y: Vec<u8> = examples.iter().map(|e| e.y[k]).collect();
        *slot = roc_auc(&s, &y);
    }
    out
}

/// Unweighted mean of the defined event AUCs.
pub fn macro_auc(aucs: &EventAucs) -> Option<f64> {
    let defined: Vec<f64> = aucs.iter().flatten().copied().collect();
    (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64)
}

#[derive(Clone, Debug)]
pub struct TrainedInstance<M> {
    pub seed: u64,
    pub model: M,
    pub val_aucs: EventAucs,
}

/// Index of the candidate with the highest validation macro AUC; ties and
/// undefined scores fall to the lowest seed.
pub fn select_index(candidates: &[(u64, EventAucs)]) -> Option<usize> {
    let key = |i: usize| macro_auc(&candidates[i].1).unwrap_or(f64::NEG_INFINITY);
    (0..candidates.len()).reduce(|best, i| {
        let (kb, ki) = (key(best), key(i));
        if ki > kb || (ki == kb && candidates[i].0 < candidates[best].0) {
            i
        } else {
            best
        }
    })
}

pub fn select_instance<M>(mut instances: Vec<TrainedInstance<M>>) -> Option<TrainedInstance<M>> {
    let keys: Vec<(u64, EventAucs)> = instances.iter().map(|i| (i.seed, i.val_aucs)).collect();
    select_index(&keys).map(|i| instances.swap_remove(i))
}

/// Trains one instance per seed concurrently and keeps the best on validation.
pub fn fit_and_select<M, F>(
    make: F,
    seeds: &[u64],
    train_set: &[GroupExample],
    val_set: &[GroupExample],
    cfg: &TrainConfig,
) -> Result<TrainedInstance<M>>
where
    M: EventModel<f64>,
    F: Fn(u64) -> Result<M> + Sync,
{
    let instances = seeds
        .par_iter()
        .map(|&seed| {
            let model = make(seed)?;
            let (model, _) = train(model, train_set, val_set, &TrainConfig { seed, ..*cfg })?;
            let val_aucs = event_aucs(&predict(&model, val_set)?, val_set);
            Ok(TrainedInstance { seed, model, val_aucs })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(select_instance(instances).expect("at least one seed"))
}

fn stream_of(method: Method) -> u64 {
    match method {
        Method::Gnan => 1,
        Method::Mlp3 => 2,
        Method::Logreg => 3,
        Method::Dummy => 4,
    }
}

fn random_scores(n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (0..EVENT_COUNT).map(|_| rng.random::<f64>()).collect())
        .collect()
}

/// Seeds of the instances trained for `method` on `plan`.
pub fn instance_seeds(method: Method, plan: &SplitPlan, cfg: &ExperimentConfig) -> Vec<u64> {
    let stream = stream_of(method) + ((plan.train_start as u64) << 8);
    (0..cfg.instances_per_split)
        .map(|i| instance_seed(cfg.seed, stream, plan.test * 1000 + plan.index, i))
        .collect()
}

/// Test-set AUCs of `method` on one split and the selected instance seed.
pub(crate) fn evaluate_method(
    method: Method,
    plan: &SplitPlan,
    parts: &[Vec<GroupExample>; 3],
    cfg: &ExperimentConfig,
) -> Result<(EventAucs, Option<u64>)> {
    let [train_set, val_set, test_set] = parts;
    let seeds = instance_seeds(method, plan, cfg);
    let flat = cfg.features.flat_width();
    let (scores, seed) = match method {
        Method::Dummy => (random_scores(test_set.len(), seeds[0]), None),
        Method::Gnan => {
            let gcfg = GnanConfig::for_features(&cfg.features, cfg.hidden_dim, cfg.heads);
            let best = fit_and_select(|s| GnanModel::new(gcfg, s), &seeds, train_set, val_set, &cfg.train)?;
            (predict(&best.model, test_set)?, Some(best.seed))
        }
        Method::Mlp3 | Method::Logreg => {
            let kind = if method == Method::Mlp3 {
                ModelKind::Mlp3
            } else {
                ModelKind::LogisticRegression
            };
            let best = fit_and_select(
                |s| BaselineModel::new(kind, flat, cfg.hidden_dim, s),
                &seeds,
                train_set,
                val_set,
                &cfg.train,
            )?;
            (predict(&best.model, test_set)?, Some(best.seed))
        }
    };
    Ok((event_aucs(&scores, test_set), seed))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub method: Method,
    /// Plan index.
    pub split: usize,
    /// Test snapshot.
    pub split_point: usize,
    pub selected_seed: Option<u64>,
    pub auc: EventAucs,
}

impl SplitRecord {
    pub fn macro_auc(&self) -> Option<f64> {
        macro_auc(&self.auc)
    }

    /// Column `c` of [`SUMMARY_COLUMNS`].
    pub fn column(&self, c: usize) -> Option<f64> {
        if c < EVENT_COUNT {
            self.auc[c]
        } else {
            self.macro_auc()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryCell {
    pub mean: Option<f64>,
    /// Splits where the AUC was undefined and excluded from the mean.
    pub undefined: usize,
    /// Wilcoxon test against GNAN; `None` for GNAN itself or without pairs.
    pub vs_gnan: Option<WilcoxonResult>,
}

impl SummaryCell {
    pub fn significant(&self) -> Option<bool> {
        self.vs_gnan.map(|w| w.p_value < SIGNIFICANCE_LEVEL)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub method: Method,
    pub cells: Vec<SummaryCell>,
}

/// Per-(method, split) AUCs of a comparative run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub seed: u64,
    pub methods: Vec<Method>,
    pub splits: Vec<SplitPlan>,
    /// Split-major, methods in configuration order.
    pub records: Vec<SplitRecord>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

impl ResultTable {
    /// Column `c` of `method` in split order.
    pub fn column(&self, method: Method, c: usize) -> Vec<Option<f64>> {
        self.records
            .iter()
            .filter(|r| r.method == method)
            .map(|r| r.column(c))
            .collect()
    }

    pub fn mean(&self, method: Method, c: usize) -> (Option<f64>, usize) {
        let col = self.column(method, c);
        let defined: Vec<f64> = col.iter().flatten().copied().collect();
        let mean = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
        (mean, col.len() - defined.len())
    }

    /// Wilcoxon test of `a` against `b` over splits where both are defined.
    pub fn compare(&self, a: Method, b: Method, c: usize) -> Option<WilcoxonResult> {
        let (xa, xb): (Vec<f64>, Vec<f64>) = self
            .column(a, c)
            .into_iter()
            .zip(self.column(b, c))
            .filter_map(|(x, y)| Some((x?, y?)))
            .unzip();
        if xa.is_empty() {
            return None;
        }
        wilcoxon_signed_rank(&xa, &xb).ok()
    }

    pub fn summary(&self) -> Vec<SummaryRow> {
        let has_gnan = self.methods.contains(&Method::Gnan);
        self.methods
            .iter()
            .map(|&method| SummaryRow {
                method,
                cells: (0..SUMMARY_COLUMNS.len())
                    .map(|c| {
                        let (mean, undefined) = self.mean(method, c);
                        let vs_gnan = (has_gnan && method != Method::Gnan)
                            .then(|| self.compare(Method::Gnan, method, c))
                            .flatten();
                        SummaryCell {
                            mean,
                            undefined,
                            vs_gnan,
                        }
                    })
                    .collect(),
            })
            .collect()
    }

    /// `method,split,event,auc` rows after `header`.
    pub fn results_csv(&self, header: &str) -> String {
        let mut out = format!("{header}\nmethod,split,event,auc\n");
        for r in &self.records {
            for (c, name) in SUMMARY_COLUMNS.iter().enumerate() {
                let _ = writeln!(out, "{},{},{},{}", r.method, r.split, name, fmt_opt(r.column(c)));
            }
        }
        out
    }

    /// `method,event,mean_auc,significant_vs_gnan` rows after `header`.
    pub fn summary_csv(&self, header: &str) -> String {
        let mut out = format!("{header}\nmethod,event,mean_auc,significant_vs_gnan\n");
        for row in self.summary() {
            for (cell, name) in row.cells.iter().zip(SUMMARY_COLUMNS) {
                let sig = cell.significant().map_or_else(|| "NA".to_string(), |b| b.to_string());
                let _ = writeln!(out, "{},{},{},{}", row.method, name, fmt_opt(cell.mean), sig);
            }
        }
        out
    }

    /// Plain-text table of mean AUCs; `*` marks a significant difference
    /// from GNAN.
    pub fn render_summary(&self) -> String {
        let mut out = format!("{:<8}", "method");
        for name in SUMMARY_COLUMNS {
            let _ = write!(out, " {name:>11}");
        }
        out.push('\n');
        for row in self.summary() {
            let _ = write!(out, "{:<8}", row.method.name());
            for cell in &row.cells {
                let mark = if cell.significant() == Some(true) { "*" } else { " " };
                let value = cell.mean.map_or_else(|| "NA".to_string(), |m| format!("{m:.4}"));
                let _ = write!(out, " {value:>10}{mark}");
            }
            out.push('\n');
        }
        out
    }
}

/// Trains and scores every method on `cfg.n_splits` random splits.
pub fn run_comparative(dataset: &Dataset, cfg: &ExperimentConfig) -> Result<ResultTable> {
    cfg.validate()?;
    let splits = make_splits(dataset.snapshot_count, cfg.n_splits, cfg.seed)?;
    let per_split = splits
        .par_iter()
        .map(|plan| {
            let parts = partition(dataset, plan, &cfg.features)?;
            cfg.methods
                .iter()
                .map(|&method| {
                    let (auc, selected_seed) = evaluate_method(method, plan, &parts, cfg)?;
                    Ok(SplitRecord {
                        method,
                        split: plan.index,
                        split_point: plan.test,
                        selected_seed,
                        auc,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ResultTable {
        seed: cfg.seed,
        methods: cfg.methods.clone(),
        splits,
        records: per_split.into_iter().flatten().collect(),
    })
}
