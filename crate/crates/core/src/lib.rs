//! Community evolution prediction on temporal interaction networks.
//!
//! The crate turns a timestamped interaction log into fixed-window snapshot
//! networks, finds overlapping communities in each snapshot with clique
//! percolation, tracks them across snapshots with inclusion-based event
//! labelling, and trains a group-node attention network (GNAN) together with
//! flat-feature baselines to predict the next-step evolution events of every
//! community.
//!
//! The numerical core ([`neural`], [`models`]) is generic over the
//! [`Scalar`] type; the aliases at the crate root pin the `f64` instantiation
//! used by the pipeline and the experiment harness.

pub mod artifacts;
pub mod community;
pub mod config;
pub mod error;
pub mod evolution;
pub mod experiments;
pub mod features;
pub mod models;
pub mod neural;
pub mod pipeline;
pub mod scalar;
pub mod temporal;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Dense row-major matrix over `f64`.
pub type Tensor = neural::Tensor<f64>;
/// Recording tape over `f64`.
pub type Tape = neural::Tape<f64>;
/// Fully connected layer over `f64`.
pub type DenseLayer = neural::DenseLayer<f64>;
/// Group-node attention weights over `f64`.
pub type AttentionParams = neural::AttentionParams<f64>;
/// AdamW optimizer over `f64`.
pub type AdamW = neural::AdamW<f64>;
/// GNAN model over `f64`.
pub type GnanModel = models::GnanModel<f64>;
/// Flat-feature baseline over `f64`.
pub type BaselineModel = models::BaselineModel<f64>;

/// Single-precision instantiations of the numerical core.
pub mod f32 {
    pub type Tensor = crate::neural::Tensor<f32>;
    pub type Tape = crate::neural::Tape<f32>;
    pub type GnanModel = crate::models::GnanModel<f32>;
    pub type BaselineModel = crate::models::BaselineModel<f32>;
}
