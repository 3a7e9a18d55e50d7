use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Earliest snapshot that may be used as a test snapshot.
pub const FIRST_SPLIT_POINT: usize = 5;

/// Train on `[train_start, val - 1]`, validate on `val`, test on `test`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    /// Position of this plan in its run.
    pub index: usize,
    pub train_start: usize,
    pub val: usize,
    pub test: usize,
}

impl SplitPlan {
    /// Standard split at snapshot `s`: train on `[1, s - 2]`.
    pub fn at(index: usize, s: usize) -> Result<Self> {
        Self::with_interval(index, 1, s)
    }

    /// Train on `[start, test - 2]`, validate on `test - 1`.
    pub fn with_interval(index: usize, start: usize, test: usize) -> Result<Self> {
        if start == 0 || test < start + 2 {
            return Err(Error::InvalidParameter(format!(
                "split at {test} with training start {start} leaves no training snapshot"
            )));
        }
        Ok(Self {
            index,
            train_start: start,
            val: test - 1,
            test,
        })
    }

    pub fn split_point(&self) -> usize {
        self.test
    }

    pub fn train_end(&self) -> usize {
        self.val - 1
    }

    pub fn is_train(&self, t: usize) -> bool {
        (self.train_start..self.val).contains(&t)
    }
}

/// `n_splits` split points from `[5, T - 1]`, cycling through seeded
/// permutations so no point repeats before all have been used.
pub fn make_splits(snapshot_count: usize, n_splits: usize, seed: u64) -> Result<Vec<SplitPlan>> {
    if snapshot_count < FIRST_SPLIT_POINT + 1 {
        return Err(Error::InsufficientSnapshots {
            needed: FIRST_SPLIT_POINT + 1,
            have: snapshot_count,
        });
    }
    let points: Vec<usize> = (FIRST_SPLIT_POINT..snapshot_count).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut drawn = Vec::with_capacity(n_splits);
    while drawn.len() < n_splits {
        let mut round = points.clone();
        round.shuffle(&mut rng);
        drawn.extend(round.into_iter().take(n_splits - drawn.len()));
    }
    drawn
        .into_iter()
        .enumerate()
        .map(|(i, s)| SplitPlan::at(i, s))
        .collect()
}
