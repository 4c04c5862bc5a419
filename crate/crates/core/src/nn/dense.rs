use rand::Rng;

use super::{GradientBundle, NnError};
use crate::scalar::Scalar;

/// Fully connected layer `y = x W + b`, weights stored `[in][out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer<T> {
    n_in: usize,
    n_out: usize,
    weights: Vec<T>,
    biases: Vec<T>,
}

impl<T: Scalar> DenseLayer<T> {
    pub fn zeros(n_in: usize, n_out: usize) -> Result<Self, NnError> {
        if n_in == 0 || n_out == 0 {
            return Err(NnError::Shape(format!("dense layer {n_in}x{n_out} is empty")));
        }
        Ok(Self {
            n_in,
            n_out,
            weights: vec![T::zero(); n_in * n_out],
            biases: vec![T::zero(); n_out],
        })
    }

    /// Glorot-uniform weights drawn in `[in][out]` order, zero biases.
    pub fn random<R: Rng + ?Sized>(n_in: usize, n_out: usize, rng: &mut R) -> Result<Self, NnError> {
        let mut layer = Self::zeros(n_in, n_out)?;
        let bound = (6.0 / (n_in + n_out) as f64).sqrt();
        for w in layer.weights.iter_mut() {
            *w = T::lit(rng.random_range(-bound..bound));
        }
        Ok(layer)
    }

    pub fn identity(n: usize) -> Result<Self, NnError> {
        let mut layer = Self::zeros(n, n)?;
        for j in 0..n {
            layer.weights[j * n + j] = T::one();
        }
        Ok(layer)
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [T] {
        &mut self.weights
    }

    pub fn biases(&self) -> &[T] {
        &self.biases
    }

    pub fn biases_mut(&mut self) -> &mut [T] {
        &mut self.biases
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    pub fn cast<U: Scalar>(&self) -> DenseLayer<U> {
        DenseLayer {
            n_in: self.n_in,
            n_out: self.n_out,
            weights: self.weights.iter().map(|v| U::lit(v.to_f64_lossless())).collect(),
            biases: self.biases.iter().map(|v| U::lit(v.to_f64_lossless())).collect(),
        }
    }

    pub fn forward(&self, x: &[T]) -> Result<Vec<T>, NnError> {
        if x.len() != self.n_in {
            return Err(NnError::Shape(format!(
                "dense layer expects {} inputs, got {}",
                self.n_in,
                x.len()
            )));
        }
        let mut y = self.biases.clone();
        for (&xi, row) in x.iter().zip(self.weights.chunks_exact(self.n_out)) {
            for (o, &w) in y.iter_mut().zip(row) {
                *o += xi * w;
            }
        }
        Ok(y)
    }

    /// Gradients given the forward input `x` and `dL/dy`.
    pub fn backward(&self, x: &[T], out_grad: &[T]) -> Result<GradientBundle<T>, NnError> {
        if x.len() != self.n_in || out_grad.len() != self.n_out {
            return Err(NnError::Shape(format!(
                "dense backward expects ({}, {}), got ({}, {})",
                self.n_in,
                self.n_out,
                x.len(),
                out_grad.len()
            )));
        }
        let mut dw = Vec::with_capacity(self.weights.len());
        let mut dx = Vec::with_capacity(self.n_in);
        for (&xi, row) in x.iter().zip(self.weights.chunks_exact(self.n_out)) {
            dw.extend(out_grad.iter().map(|&g| xi * g));
            dx.push(row.iter().zip(out_grad).map(|(&w, &g)| w * g).sum());
        }
        Ok(GradientBundle {
            weights: dw,
            biases: out_grad.to_vec(),
            input: Some(super::FeatureMaps::from_vec(1, self.n_in, dx)),
        })
    }
}
