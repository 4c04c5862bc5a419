//! One-dimensional Self-Organized Operational Neural Networks (Self-ONNs)
//! built from generative neurons, and a bearing fault severity pipeline
//! around them: vibration ingestion and framing, a physics-based synthetic
//! signal generator, SGD training with k-fold cross-validation, per-class
//! metrics and parameter/MAC accounting.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the precision used by the pipeline.

pub mod config;
pub mod gradcheck;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod scalar;
pub mod signal;
pub mod synthgen;
pub mod train;

pub use scalar::Scalar;

/// Double-precision network used for training.
pub type Model = model::SelfOnn<f64>;
/// Single-precision copy for inference only.
pub type Model32 = model::SelfOnn<f32>;
pub type GenerativeConv = nn::GenerativeConv1d<f64>;
pub type Dense = nn::DenseLayer<f64>;
pub type Maps = nn::FeatureMaps<f64>;
pub type Frame = signal::Frame<f64>;
pub type Frame32 = signal::Frame<f32>;
