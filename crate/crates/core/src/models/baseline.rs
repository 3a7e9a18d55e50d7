use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{EventModel, ModelKind};
use crate::evolution::EVENT_COUNT;
use crate::features::{flatten_for_baseline, GroupExample};
use crate::neural::{Activation, DenseLayer, DenseVars, Tape, Tensor, Var};
use crate::scalar::Scalar;
use crate::{Error, Result};

/// The flattened `[member mean ‖ neighbour mean ‖ g]` row; the only view of
/// an example a baseline receives.
#[derive(Clone, Debug, PartialEq)]
pub struct FlatInput<T>(Tensor<T>);

impl<T: Scalar> FlatInput<T> {
    pub fn from_example(example: &GroupExample) -> Self {
        Self(Tensor::row_vector(
            flatten_for_baseline(example).into_iter().map(T::of).collect(),
        ))
    }

    pub fn values(&self) -> &Tensor<T> {
        &self.0
    }
}

/// Logistic regression (one sigmoid layer) or a three-layer perceptron.
#[derive(Clone, Debug, PartialEq)]
pub struct BaselineModel<T> {
    kind: ModelKind,
    input_width: usize,
    layers: Vec<DenseLayer<T>>,
}

impl<T: Scalar> BaselineModel<T> {
    pub fn logistic_regression(input_width: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            kind: ModelKind::LogisticRegression,
            input_width,
            layers: vec![DenseLayer::new(input_width, EVENT_COUNT, Activation::Sigmoid, &mut rng)],
        }
    }

    pub fn mlp3(input_width: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            kind: ModelKind::Mlp3,
            input_width,
            layers: vec![
                DenseLayer::new(input_width, hidden, Activation::Relu, &mut rng),
                DenseLayer::new(hidden, hidden, Activation::Relu, &mut rng),
                DenseLayer::new(hidden, EVENT_COUNT, Activation::Sigmoid, &mut rng),
            ],
        }
    }

    pub fn new(kind: ModelKind, input_width: usize, hidden: usize, seed: u64) -> Result<Self> {
        match kind {
            ModelKind::LogisticRegression => Ok(Self::logistic_regression(input_width, seed)),
            ModelKind::Mlp3 => Ok(Self::mlp3(input_width, hidden, seed)),
            ModelKind::Gnan => Err(Error::InvalidParameter("gnan is not a baseline".into())),
        }
    }

    pub fn layers(&self) -> &[DenseLayer<T>] {
        &self.layers
    }

    pub fn input_width(&self) -> usize {
        self.input_width
    }

    pub fn hidden_width(&self) -> Option<usize> {
        (self.layers.len() > 1).then(|| self.layers[0].out_dim())
    }
}

impl<T: Scalar> EventModel<T> for BaselineModel<T> {
    type Input = FlatInput<T>;
    type Bound = Vec<DenseVars>;

    fn kind(&self) -> ModelKind {
        self.kind
    }

    fn prepare(&self, example: &GroupExample) -> Result<FlatInput<T>> {
        let input = FlatInput::from_example(example);
        if input.0.cols() != self.input_width {
            return Err(Error::Width {
                stage: "baseline input",
                expected: self.input_width,
                actual: input.0.cols(),
            });
        }
        Ok(input)
    }

    fn named_parameters(&self) -> Vec<(String, &Tensor<T>)> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| {
                let [w, b] = l.parameters();
                [(format!("layer{i}.weight"), w), (format!("layer{i}.bias"), b)]
            })
            .collect()
    }

    fn parameters_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.layers.iter_mut().flat_map(|l| l.parameters_mut()).collect()
    }

    fn bind(&self, tape: &mut Tape<T>) -> Result<(Vec<DenseVars>, Vec<Var>)> {
        let bound = self.layers.iter().map(|l| l.bind(tape)).collect::<Result<Vec<_>>>()?;
        let vars = bound.iter().flat_map(|b| [b.weight, b.bias]).collect();
        Ok((bound, vars))
    }

    fn apply(&self, bound: &Vec<DenseVars>, tape: &mut Tape<T>, input: &FlatInput<T>) -> Result<Var> {
        let mut h = tape.leaf(input.0.clone())?;
        for layer in bound {
            h = layer.apply(tape, h)?;
        }
        Ok(h)
    }
}
