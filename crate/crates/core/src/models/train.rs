use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{EventModel, EVAL_CHUNK};
use crate::features::GroupExample;
use crate::neural::{AdamW, AdamWConfig, Tape, Tensor};
use crate::scalar::Scalar;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub max_epochs: usize,
    /// Consecutive epochs without a validation-loss decrease before stopping.
    pub patience: usize,
    pub seed: u64,
    pub batch_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            weight_decay: 0.01,
            max_epochs: 200,
            patience: 5,
            seed: 0,
            batch_size: 32,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patience == 0 || self.max_epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidParameter(
                "patience, max_epochs and batch_size must be at least 1".into(),
            ));
        }
        if !(self.learning_rate >= 0.0 && self.weight_decay >= 0.0) {
            return Err(Error::InvalidParameter(
                "learning_rate and weight_decay must be non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn optimizer(&self) -> AdamWConfig {
        AdamWConfig {
            learning_rate: self.learning_rate,
            weight_decay: self.weight_decay,
            ..AdamWConfig::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were returned.
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_early: bool,
}

/// Mean BCE of `model` over `inputs`.
pub fn mean_loss<T: Scalar, M: EventModel<T>>(model: &M, inputs: &[(M::Input, Vec<T>)]) -> Result<f64> {
    let mut total = 0.0;
    for chunk in inputs.chunks(EVAL_CHUNK) {
        let mut tape = Tape::new();
        let (bound, _) = model.bind(&mut tape)?;
        for (input, target) in chunk {
            let out = model.apply(&bound, &mut tape, input)?;
            let loss = tape.bce(out, target)?;
            total += tape.value(loss).data()[0].as_f64();
        }
    }
    Ok(total / inputs.len() as f64)
}

fn targets<T: Scalar>(example: &GroupExample) -> Vec<T> {
    example.y.iter().map(|&b| T::of(f64::from(b))).collect()
}

fn diagnose(err: Error, epoch: usize, batch: usize) -> Error {
    match err {
        Error::NonFinite(what) => Error::NonFinite(format!("{what} during epoch {epoch}, batch {batch}")),
        other => other,
    }
}

/// Trains with seeded shuffling, AdamW and early stopping on validation BCE;
/// returns the parameters of the best validation epoch.
pub fn train<T: Scalar, M: EventModel<T>>(
    mut model: M,
    train: &[GroupExample],
    val: &[GroupExample],
    cfg: &TrainConfig,
) -> Result<(M, TrainingHistory)> {
    cfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::NoData);
    }
    let train_set = train
        .iter()
        .map(|e| Ok((model.prepare(e)?, targets::<T>(e))))
        .collect::<Result<Vec<_>>>()?;
    let val_set = val
        .iter()
        .map(|e| Ok((model.prepare(e)?, targets::<T>(e))))
        .collect::<Result<Vec<_>>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut optimizer = {
        let params = model.named_parameters();
        AdamW::new(cfg.optimizer(), params.iter().map(|(_, p)| *p))
    };
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut best = model.clone();
    let mut history = TrainingHistory {
        epochs: Vec::new(),
        best_epoch: 0,
        best_val_loss: f64::INFINITY,
        stopped_early: false,
    };
    let mut stale = 0;

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let mut tape = Tape::new();
            let step = (|| {
                let (bound, param_vars) = model.bind(&mut tape)?;
                let mut losses = Vec::with_capacity(batch.len());
                for &i in batch {
                    let (input, target) = &train_set[i];
                    let out = model.apply(&bound, &mut tape, input)?;
                    losses.push(tape.bce(out, target)?);
                }
                let loss = tape.mean(&losses)?;
                let grads = tape.backward(loss)?;
                let grads: Vec<Tensor<T>> = param_vars.iter().map(|&v| grads.wrt(v, tape.value(v))).collect();
                Ok::<_, Error>((tape.value(loss).data()[0].as_f64(), grads))
            })();
            let (loss, grads) = step.map_err(|e| diagnose(e, epoch, b))?;
            epoch_loss += loss * batch.len() as f64;
            optimizer.step(&mut model.parameters_mut(), &grads)?;
        }
        let train_loss = epoch_loss / train_set.len() as f64;
        let val_loss = mean_loss(&model, &val_set).map_err(|e| diagnose(e, epoch, usize::MAX))?;
        history.epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
        });
        if val_loss < history.best_val_loss {
            history.best_val_loss = val_loss;
            history.best_epoch = epoch;
            best = model.clone();
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                history.stopped_early = true;
                break;
            }
        }
    }
    Ok((best, history))
}
