use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tape::{sigmoid, Tape, Var};
use super::tensor::Tensor;
use crate::scalar::Scalar;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Sigmoid,
    Identity,
}

impl Activation {
    pub fn apply<T: Scalar>(self, x: &Tensor<T>) -> Tensor<T> {
        match self {
            Self::Relu => x.map(|v| if v > T::zero() { v } else { T::zero() }),
            Self::Sigmoid => x.map(sigmoid),
            Self::Identity => x.clone(),
        }
    }

    fn record<T: Scalar>(self, tape: &mut Tape<T>, x: Var) -> Result<Var> {
        match self {
            Self::Relu => tape.relu(x),
            Self::Sigmoid => tape.sigmoid(x),
            Self::Identity => Ok(x),
        }
    }
}

/// Uniform initialisation in `±sqrt(1 / fan_in)`.
pub fn uniform_init<T: Scalar, R: Rng + ?Sized>(rows: usize, cols: usize, fan_in: usize, rng: &mut R) -> Tensor<T> {
    let bound = (1.0 / fan_in.max(1) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| T::of(rng.random_range(-bound..=bound)))
        .collect();
    Tensor::from_vec(rows, cols, data).expect("length matches shape")
}

/// `activation(x · W + b)` applied row-wise.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer<T> {
    weight: Tensor<T>,
    bias: Tensor<T>,
    activation: Activation,
}

impl<T: Scalar> DenseLayer<T> {
    pub fn new<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut R) -> Self {
        Self {
            weight: uniform_init(in_dim, out_dim, in_dim, rng),
            bias: uniform_init(1, out_dim, in_dim, rng),
            activation,
        }
    }

    pub fn from_parts(weight: Tensor<T>, bias: Tensor<T>, activation: Activation) -> Result<Self> {
        if bias.rows() != 1 || bias.cols() != weight.cols() {
            return Err(Error::Shape {
                op: "dense_layer",
                left: weight.shape(),
                right: bias.shape(),
            });
        }
        Ok(Self {
            weight,
            bias,
            activation,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weight(&self) -> &Tensor<T> {
        &self.weight
    }

    pub fn bias(&self) -> &Tensor<T> {
        &self.bias
    }

    /// Weight then bias.
    pub fn parameters(&self) -> [&Tensor<T>; 2] {
        [&self.weight, &self.bias]
    }

    pub fn parameters_mut(&mut self) -> [&mut Tensor<T>; 2] {
        [&mut self.weight, &mut self.bias]
    }

    /// Records the parameters as tape leaves.
    pub fn bind(&self, tape: &mut Tape<T>) -> Result<DenseVars> {
        Ok(DenseVars {
            weight: tape.leaf(self.weight.clone())?,
            bias: tape.leaf(self.bias.clone())?,
            activation: self.activation,
        })
    }
}

/// Tape handles for a bound [`DenseLayer`].
#[derive(Clone, Copy, Debug)]
pub struct DenseVars {
    pub weight: Var,
    pub bias: Var,
    pub activation: Activation,
}

impl DenseVars {
    pub fn apply<T: Scalar>(&self, tape: &mut Tape<T>, x: Var) -> Result<Var> {
        let z = tape.matmul(x, self.weight)?;
        let z = tape.add_row(z, self.bias)?;
        self.activation.record(tape, z)
    }
}

/// Untaped forward pass.
pub fn dense_forward<T: Scalar>(layer: &DenseLayer<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
    let z = x.matmul(&layer.weight)?.add_row(&layer.bias)?;
    let out = layer.activation.apply(&z);
    if !out.is_finite() {
        return Err(Error::NonFinite("dense_forward".into()));
    }
    Ok(out)
}
