use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::scalar::Scalar;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamWConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            weight_decay: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// AdamW with bias correction and decoupled weight decay.
#[derive(Clone, Debug)]
pub struct AdamW<T> {
    config: AdamWConfig,
    first: Vec<Tensor<T>>,
    second: Vec<Tensor<T>>,
    step: u64,
}

impl<T: Scalar> AdamW<T> {
    /// Moments are zero-initialised in the shapes of `params`.
    pub fn new<'a>(config: AdamWConfig, params: impl IntoIterator<Item = &'a Tensor<T>>) -> Self {
        let first: Vec<Tensor<T>> = params.into_iter().map(|p| Tensor::zeros(p.rows(), p.cols())).collect();
        Self {
            config,
            second: first.clone(),
            first,
            step: 0,
        }
    }

    pub fn config(&self) -> &AdamWConfig {
        &self.config
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn first_moments(&self) -> &[Tensor<T>] {
        &self.first
    }

    pub fn second_moments(&self) -> &[Tensor<T>] {
        &self.second
    }

    /// One update; `params[i]` pairs with `grads[i]`.
    pub fn step(&mut self, params: &mut [&mut Tensor<T>], grads: &[Tensor<T>]) -> Result<()> {
        if params.len() != self.first.len() || grads.len() != self.first.len() {
            return Err(Error::InvalidParameter(format!(
                "optimizer tracks {} tensors, got {} parameters and {} gradients",
                self.first.len(),
                params.len(),
                grads.len()
            )));
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.first) {
            if p.shape() != g.shape() || p.shape() != m.shape() {
                return Err(Error::Shape {
                    op: "adamw_step",
                    left: p.shape(),
                    right: g.shape(),
                });
            }
        }
        self.step += 1;
        let c = &self.config;
        let (b1, b2) = (T::of(c.beta1), T::of(c.beta2));
        let (lr, wd, eps) = (T::of(c.learning_rate), T::of(c.weight_decay), T::of(c.epsilon));
        let step = i32::try_from(self.step).unwrap_or(i32::MAX);
        let correct1 = T::one() - b1.powi(step);
        let correct2 = T::one() - b2.powi(step);
        for (i, p) in params.iter_mut().enumerate() {
            let g = grads[i].data();
            let m = self.first[i].data_mut();
            let v = self.second[i].data_mut();
            for (j, theta) in p.data_mut().iter_mut().enumerate() {
                m[j] = b1 * m[j] + (T::one() - b1) * g[j];
                v[j] = b2 * v[j] + (T::one() - b2) * g[j] * g[j];
                let m_hat = m[j] / correct1;
                let v_hat = v[j] / correct2;
                *theta -= lr * (m_hat / (v_hat.sqrt() + eps) + wd * *theta);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_pure_decay() {
        let mut theta = Tensor::<f64>::scalar(1.0);
        let mut opt = AdamW::new(AdamWConfig::default(), [&theta]);
        opt.step(&mut [&mut theta], &[Tensor::scalar(0.0)]).unwrap();
        assert!((theta.item().unwrap() - 0.99999).abs() < 1e-15);
    }

    #[test]
    fn mismatched_lengths_are_rejected() {
        let mut theta = Tensor::<f64>::scalar(1.0);
        let mut opt = AdamW::new(AdamWConfig::default(), [&theta]);
        assert!(opt.step(&mut [&mut theta], &[]).is_err());
    }
}
