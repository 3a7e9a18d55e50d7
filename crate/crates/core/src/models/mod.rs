//! GNAN and baseline models, training and prediction.

mod baseline;
mod gnan;
mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use baseline::{BaselineModel, FlatInput};
pub use gnan::{GnanConfig, GnanInput, GnanModel, GnanVars};
pub use train::{mean_loss, train, EpochRecord, TrainConfig, TrainingHistory};

use crate::features::{FeatureConfig, GroupExample};
use crate::neural::{ParameterManifest, Tape, Tensor, Var};
use crate::scalar::Scalar;
use crate::{Error, Result};

/// Examples recorded on one tape during untaped evaluation.
pub(crate) const EVAL_CHUNK: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Gnan,
    #[serde(rename = "logreg")]
    LogisticRegression,
    Mlp3,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Gnan => "gnan",
            Self::LogisticRegression => "logreg",
            Self::Mlp3 => "mlp3",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gnan" => Ok(Self::Gnan),
            "logreg" | "logistic_regression" => Ok(Self::LogisticRegression),
            "mlp3" | "mlp" => Ok(Self::Mlp3),
            other => Err(Error::InvalidParameter(format!("unknown model kind {other:?}"))),
        }
    }
}

/// A trainable multi-label event predictor.
///
/// `Input` is the model's view of a [`GroupExample`]; `bind` records the
/// parameters on a tape once so that `apply` can be called per example.
pub trait EventModel<T: Scalar>: Clone + Send + Sync {
    type Input: Clone + Send + Sync;
    type Bound;

    fn kind(&self) -> ModelKind;

    fn prepare(&self, example: &GroupExample) -> Result<Self::Input>;

    /// Stable names, in the same order as [`EventModel::parameters_mut`].
    fn named_parameters(&self) -> Vec<(String, &Tensor<T>)>;

    fn parameters_mut(&mut self) -> Vec<&mut Tensor<T>>;

    /// Records parameters; the returned vars follow `named_parameters` order.
    fn bind(&self, tape: &mut Tape<T>) -> Result<(Self::Bound, Vec<Var>)>;

    /// Records the `1 × E` prediction for one input.
    fn apply(&self, bound: &Self::Bound, tape: &mut Tape<T>, input: &Self::Input) -> Result<Var>;

    /// Brings a batch to a common shape; identity unless the input is ragged.
    fn pad_batch(&self, inputs: &[&Self::Input]) -> Vec<Self::Input> {
        inputs.iter().map(|i| (*i).clone()).collect()
    }

    fn predict_one(&self, input: &Self::Input) -> Result<Vec<T>> {
        let mut tape = Tape::new();
        let (bound, _) = self.bind(&mut tape)?;
        let out = self.apply(&bound, &mut tape, input)?;
        Ok(tape.value(out).data().to_vec())
    }

    fn parameter_count(&self) -> usize {
        self.named_parameters().iter().map(|(_, t)| t.len()).sum()
    }

    fn to_manifest(&self) -> ParameterManifest {
        ParameterManifest::from_named(self.named_parameters())
    }

    /// Overwrites every parameter from `manifest`, matching by name and shape.
    fn load_manifest(&mut self, manifest: &ParameterManifest) -> Result<()> {
        let loaded = self
            .named_parameters()
            .into_iter()
            .map(|(name, current)| {
                let t: Tensor<T> = manifest.get(&name)?;
                if t.shape() != current.shape() {
                    return Err(Error::Shape {
                        op: "load_manifest",
                        left: current.shape(),
                        right: t.shape(),
                    });
                }
                Ok(t)
            })
            .collect::<Result<Vec<_>>>()?;
        for (slot, t) in self.parameters_mut().into_iter().zip(loaded) {
            *slot = t;
        }
        Ok(())
    }
}

/// Score matrix (`examples × E`), one forward pass per example.
pub fn predict<T: Scalar, M: EventModel<T>>(model: &M, examples: &[GroupExample]) -> Result<Vec<Vec<T>>> {
    let mut out = Vec::with_capacity(examples.len());
    for chunk in examples.chunks(EVAL_CHUNK) {
        let mut tape = Tape::new();
        let (bound, _) = model.bind(&mut tape)?;
        for e in chunk {
            let input = model.prepare(e)?;
            let y = model.apply(&bound, &mut tape, &input)?;
            out.push(tape.value(y).data().to_vec());
        }
    }
    Ok(out)
}

/// As [`predict`], but each batch is padded to a common shape first.
pub fn predict_batched<T: Scalar, M: EventModel<T>>(
    model: &M,
    examples: &[GroupExample],
    batch_size: usize,
) -> Result<Vec<Vec<T>>> {
    let inputs = examples.iter().map(|e| model.prepare(e)).collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(examples.len());
    for chunk in inputs.chunks(batch_size.max(1)) {
        let refs: Vec<&M::Input> = chunk.iter().collect();
        let padded = model.pad_batch(&refs);
        let mut tape = Tape::new();
        let (bound, _) = model.bind(&mut tape)?;
        for input in &padded {
            let y = model.apply(&bound, &mut tape, input)?;
            out.push(tape.value(y).data().to_vec());
        }
    }
    Ok(out)
}

/// Serialized parameters plus what is needed to rebuild and validate a model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelCheckpoint {
    pub kind: ModelKind,
    pub features: FeatureConfig,
    pub hidden_dim: usize,
    pub heads: usize,
    pub parameters: ParameterManifest,
}

impl ModelCheckpoint {
    pub fn from_gnan<T: Scalar>(model: &GnanModel<T>, features: FeatureConfig) -> Self {
        Self {
            kind: ModelKind::Gnan,
            features,
            hidden_dim: model.config().hidden_dim,
            heads: model.config().heads,
            parameters: model.to_manifest(),
        }
    }

    pub fn from_baseline<T: Scalar>(model: &BaselineModel<T>, features: FeatureConfig) -> Self {
        Self {
            kind: model.kind(),
            features,
            hidden_dim: model.hidden_width().unwrap_or(0),
            heads: 0,
            parameters: model.to_manifest(),
        }
    }

    /// Refuses examples built under a different feature configuration.
    pub fn check_features(&self, features: &FeatureConfig) -> Result<()> {
        if &self.features != features {
            return Err(Error::FeatureMismatch(format!(
                "checkpoint was trained with {:?}, examples use {:?}",
                self.features, features
            )));
        }
        Ok(())
    }

    pub fn gnan<T: Scalar>(&self, features: &FeatureConfig) -> Result<GnanModel<T>> {
        self.check_features(features)?;
        if self.kind != ModelKind::Gnan {
            return Err(Error::InvalidParameter(format!(
                "checkpoint holds a {} model",
                self.kind
            )));
        }
        let mut model = GnanModel::new(GnanConfig::for_features(features, self.hidden_dim, self.heads), 0)?;
        model.load_manifest(&self.parameters)?;
        Ok(model)
    }

    pub fn baseline<T: Scalar>(&self, features: &FeatureConfig) -> Result<BaselineModel<T>> {
        self.check_features(features)?;
        let mut model = BaselineModel::new(self.kind, features.flat_width(), self.hidden_dim, 0)?;
        model.load_manifest(&self.parameters)?;
        Ok(model)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}
