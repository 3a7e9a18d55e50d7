use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{EventModel, ModelKind};
use crate::evolution::EVENT_COUNT;
use crate::features::{FeatureConfig, GroupExample};
use crate::neural::{Activation, AttentionParams, AttentionVars, DenseLayer, DenseVars, Tape, Tensor, Var};
use crate::scalar::Scalar;
use crate::{Error, Result};

/// Layer widths of a [`GnanModel`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GnanConfig {
    /// Row width of `X` (`D_n · P`); the position bit is appended to it.
    pub node_width: usize,
    /// `D_g`.
    pub group_width: usize,
    /// `D_m`; also the query width `D_q`.
    pub hidden_dim: usize,
    pub heads: usize,
}

impl GnanConfig {
    pub fn for_features(features: &FeatureConfig, hidden_dim: usize, heads: usize) -> Self {
        Self {
            node_width: features.node_width(),
            group_width: features.group_attributes(),
            hidden_dim,
            heads,
        }
    }

    /// `D_k = D_v = D_m / H`.
    pub fn head_dim(&self) -> usize {
        self.hidden_dim / self.heads.max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.node_width == 0 || self.group_width == 0 || self.hidden_dim == 0 || self.heads == 0 {
            return Err(Error::InvalidParameter(format!(
                "GNAN widths must be positive: {self:?}"
            )));
        }
        if !self.hidden_dim.is_multiple_of(self.heads) {
            return Err(Error::InvalidParameter(format!(
                "hidden_dim {} is not divisible by {} attention heads",
                self.hidden_dim, self.heads
            )));
        }
        Ok(())
    }
}

/// Node matrix with the position column appended, group vector and an
/// optional padding mask.
#[derive(Clone, Debug, PartialEq)]
pub struct GnanInput<T> {
    pub x: Tensor<T>,
    pub g: Tensor<T>,
    pub mask: Option<Vec<bool>>,
}

impl<T: Scalar> GnanInput<T> {
    pub fn from_example(example: &GroupExample) -> Result<Self> {
        let width = example.x.first().map_or(0, Vec::len);
        if example.x.is_empty() {
            return Err(Error::EmptyAttention);
        }
        let mut data = Vec::with_capacity(example.x.len() * (width + 1));
        for (row, &bit) in example.x.iter().zip(&example.m) {
            if row.len() != width {
                return Err(Error::Width {
                    stage: "node rows",
                    expected: width,
                    actual: row.len(),
                });
            }
            data.extend(row.iter().map(|&v| T::of(v)));
            data.push(T::of(f64::from(bit)));
        }
        Ok(Self {
            x: Tensor::from_vec(example.x.len(), width + 1, data)?,
            g: Tensor::row_vector(example.g.iter().map(|&v| T::of(v)).collect()),
            mask: None,
        })
    }

    /// Appends zero rows up to `n` and masks them out.
    pub fn padded(&self, n: usize) -> Self {
        let rows = self.x.rows();
        if n <= rows {
            return self.clone();
        }
        let mut data = self.x.data().to_vec();
        data.resize(n * self.x.cols(), T::zero());
        let mut mask = self.mask.clone().unwrap_or_else(|| vec![true; rows]);
        mask.resize(n, false);
        Self {
            x: Tensor::from_vec(n, self.x.cols(), data).expect("padded length matches"),
            g: self.g.clone(),
            mask: Some(mask),
        }
    }
}

/// Group-node attention network:
/// `Z_X = relu(fcn_X(X ‖ m))`, `z_q = relu(fcn_q(g))`, `h_g = relu(fcn_g(g))`,
/// `h_X = attention(Z_X, z_q)`, `ỹ = sigmoid(fcn_out(h_X ‖ h_g))`.
#[derive(Clone, Debug, PartialEq)]
pub struct GnanModel<T> {
    config: GnanConfig,
    fcn_x: DenseLayer<T>,
    fcn_q: DenseLayer<T>,
    fcn_g: DenseLayer<T>,
    attention: AttentionParams<T>,
    fcn_out: DenseLayer<T>,
    ablate_attention: bool,
}

/// Tape handles for a bound [`GnanModel`].
#[derive(Clone, Debug)]
pub struct GnanVars {
    fcn_x: DenseVars,
    fcn_q: DenseVars,
    fcn_g: DenseVars,
    attention: AttentionVars,
    fcn_out: DenseVars,
}

impl<T: Scalar> GnanModel<T> {
    pub fn new(config: GnanConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d_m = config.hidden_dim;
        let fcn_x = DenseLayer::new(config.node_width + 1, d_m, Activation::Relu, &mut rng);
        let fcn_q = DenseLayer::new(config.group_width, d_m, Activation::Relu, &mut rng);
        let fcn_g = DenseLayer::new(config.group_width, d_m, Activation::Relu, &mut rng);
        let attention = AttentionParams::new(d_m, d_m, config.head_dim(), config.head_dim(), config.heads, &mut rng)?;
        let fcn_out = DenseLayer::new(2 * d_m, EVENT_COUNT, Activation::Sigmoid, &mut rng);
        Ok(Self {
            config,
            fcn_x,
            fcn_q,
            fcn_g,
            attention,
            fcn_out,
            ablate_attention: false,
        })
    }

    pub fn config(&self) -> &GnanConfig {
        &self.config
    }

    pub fn fcn_x(&self) -> &DenseLayer<T> {
        &self.fcn_x
    }

    pub fn fcn_q(&self) -> &DenseLayer<T> {
        &self.fcn_q
    }

    pub fn fcn_g(&self) -> &DenseLayer<T> {
        &self.fcn_g
    }

    pub fn attention(&self) -> &AttentionParams<T> {
        &self.attention
    }

    pub fn fcn_out(&self) -> &DenseLayer<T> {
        &self.fcn_out
    }

    /// Replaces `h_X` by zeros so predictions depend on `g` alone.
    pub fn with_attention_ablated(mut self) -> Self {
        self.ablate_attention = true;
        self
    }

    /// Untaped forward pass for one example.
    pub fn forward(&self, example: &GroupExample) -> Result<Vec<T>> {
        self.predict_one(&GnanInput::from_example(example)?)
    }
}

impl<T: Scalar> EventModel<T> for GnanModel<T> {
    type Input = GnanInput<T>;
    type Bound = GnanVars;

    fn kind(&self) -> ModelKind {
        ModelKind::Gnan
    }

    fn prepare(&self, example: &GroupExample) -> Result<GnanInput<T>> {
        let input = GnanInput::from_example(example)?;
        if input.x.cols() != self.config.node_width + 1 {
            return Err(Error::Width {
                stage: "fcn_X input",
                expected: self.config.node_width + 1,
                actual: input.x.cols(),
            });
        }
        if input.g.cols() != self.config.group_width {
            return Err(Error::Width {
                stage: "fcn_g input",
                expected: self.config.group_width,
                actual: input.g.cols(),
            });
        }
        Ok(input)
    }

    fn named_parameters(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = Vec::new();
        for (name, layer) in [("fcn_x", &self.fcn_x), ("fcn_q", &self.fcn_q), ("fcn_g", &self.fcn_g)] {
            let [w, b] = layer.parameters();
            out.push((format!("{name}.weight"), w));
            out.push((format!("{name}.bias"), b));
        }
        for (h, head) in self.attention.heads().iter().enumerate() {
            out.push((format!("attention.head{h}.w_q"), &head.w_q));
            out.push((format!("attention.head{h}.w_k"), &head.w_k));
            out.push((format!("attention.head{h}.w_v"), &head.w_v));
        }
        out.push(("attention.w_o".into(), self.attention.w_o()));
        let [w, b] = self.fcn_out.parameters();
        out.push(("fcn_out.weight".into(), w));
        out.push(("fcn_out.bias".into(), b));
        out
    }

    fn parameters_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out: Vec<&mut Tensor<T>> = Vec::new();
        out.extend(self.fcn_x.parameters_mut());
        out.extend(self.fcn_q.parameters_mut());
        out.extend(self.fcn_g.parameters_mut());
        out.extend(self.attention.parameters_mut());
        out.extend(self.fcn_out.parameters_mut());
        out
    }

    fn bind(&self, tape: &mut Tape<T>) -> Result<(GnanVars, Vec<Var>)> {
        let fcn_x = self.fcn_x.bind(tape)?;
        let fcn_q = self.fcn_q.bind(tape)?;
        let fcn_g = self.fcn_g.bind(tape)?;
        let attention = self.attention.bind(tape)?;
        let fcn_out = self.fcn_out.bind(tape)?;
        let mut vars = vec![
            fcn_x.weight,
            fcn_x.bias,
            fcn_q.weight,
            fcn_q.bias,
            fcn_g.weight,
            fcn_g.bias,
        ];
        vars.extend(attention.vars());
        vars.extend([fcn_out.weight, fcn_out.bias]);
        Ok((
            GnanVars {
                fcn_x,
                fcn_q,
                fcn_g,
                attention,
                fcn_out,
            },
            vars,
        ))
    }

    fn apply(&self, bound: &GnanVars, tape: &mut Tape<T>, input: &GnanInput<T>) -> Result<Var> {
        let x = tape.leaf(input.x.clone())?;
        let g = tape.leaf(input.g.clone())?;
        let z_x = bound.fcn_x.apply(tape, x)?;
        let z_q = bound.fcn_q.apply(tape, g)?;
        let h_g = bound.fcn_g.apply(tape, g)?;
        let h_x = bound.attention.apply(tape, z_x, z_q, input.mask.as_deref())?;
        let h_x = if self.ablate_attention {
            tape.scale(h_x, T::zero())?
        } else {
            h_x
        };
        let joined = tape.concat_cols(&[h_x, h_g])?;
        bound.fcn_out.apply(tape, joined)
    }

    fn pad_batch(&self, inputs: &[&GnanInput<T>]) -> Vec<GnanInput<T>> {
        let n = inputs.iter().map(|i| i.x.rows()).max().unwrap_or(0);
        inputs.iter().map(|i| i.padded(n)).collect()
    }
}
