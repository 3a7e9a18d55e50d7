//! Differentiable building blocks: tensors, a recording tape, dense layers,
//! group-node attention, binary cross-entropy and AdamW.

mod attention;
mod checkpoint;
mod layers;
mod loss;
mod optim;
mod tape;
mod tensor;

pub use attention::{attention_coefficients, gn_attention, AttentionHead, AttentionParams, AttentionVars};
pub use checkpoint::{ParameterManifest, TensorRecord};
pub use layers::{dense_forward, uniform_init, Activation, DenseLayer, DenseVars};
pub use loss::{bce_loss, BCE_EPSILON};
pub use optim::{AdamW, AdamWConfig};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
