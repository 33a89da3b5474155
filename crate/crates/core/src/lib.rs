//! Interaction- and obstacle-aware pedestrian motion prediction.
//!
//! The pipeline: simulate crowds with a social-forces model ([`simforces`]),
//! encode each agent's surroundings as a heading-aligned occupancy grid and
//! an angular pedestrian grid ([`encoders`]), pretrain a convolutional
//! autoencoder on the grids ([`autoencoder`]), train a three-channel LSTM
//! with truncated backpropagation through time ([`predictor`]), and compare
//! it against constant-velocity, constant-acceleration and social-forces
//! baselines ([`baselines`], [`eval`]).
//!
//! All numeric code is generic over [`Scalar`]; the aliases below fix the
//! scalar to `f64`, which is what the training pipeline uses.

// `!(x > 0)` checks also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autoencoder;
pub mod baselines;
pub mod encoders;
pub mod environments;
pub mod eval;
pub mod error;
pub mod geometry;
pub mod io;
pub mod predictor;
pub mod scalar;
pub mod simforces;
pub mod tensornn;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Vec2 = geometry::Vec2<f64>;
pub type AgentState = geometry::AgentState<f64>;
pub type WorldState = geometry::WorldState<f64>;
pub type WorldMap = geometry::WorldMap<f64>;
pub type Trajectory = geometry::Trajectory<f64>;
pub type Dataset = geometry::Dataset<f64>;
pub type Tensor = tensornn::Tensor<f64>;
pub type ParamSet = tensornn::ParamSet<f64>;
