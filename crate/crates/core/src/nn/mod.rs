//! Layer-level forward and backward passes.

mod activation;
mod conv;
mod dense;
mod maps;
mod pool;

use thiserror::Error;

pub use activation::{tanh_backward, tanh_forward, tanh_forward_in_place};
pub use conv::{taylor_window, ConvCache, ConvStrategy, GenerativeConv1d, SPECTRAL_MIN_KERNEL};
pub use dense::DenseLayer;
pub use maps::FeatureMaps;
pub use pool::{
    global_pool_backward, global_pool_forward, maxpool_backward, maxpool_forward, PoolIndices,
};

use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    Shape(String),
}

/// Parameter gradients of one layer, laid out like the layer's own buffers,
/// plus the gradient with respect to the layer input when it was requested.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle<T> {
    pub weights: Vec<T>,
    pub biases: Vec<T>,
    pub input: Option<FeatureMaps<T>>,
}

impl<T: Scalar> GradientBundle<T> {
    pub fn zeros_like(weights: usize, biases: usize) -> Self {
        Self {
            weights: vec![T::zero(); weights],
            biases: vec![T::zero(); biases],
            input: None,
        }
    }

    /// Adds another bundle's parameter gradients; the input gradient is dropped.
    pub fn accumulate(&mut self, other: &GradientBundle<T>) {
        for (a, &b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        for (a, &b) in self.biases.iter_mut().zip(&other.biases) {
            *a += b;
        }
        self.input = None;
    }

    pub fn scale(&mut self, s: T) {
        for v in self.weights.iter_mut().chain(self.biases.iter_mut()) {
            *v *= s;
        }
    }
}
