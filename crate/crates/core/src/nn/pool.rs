//! Max-pooling over the temporal axis, with argmax routing for backward.

use super::{FeatureMaps, NnError};
use crate::scalar::Scalar;

/// Winning positions recorded by a pooling forward pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolIndices {
    input_len: usize,
    out_len: usize,
    /// Absolute temporal index of each output's maximum, neuron-major.
    argmax: Vec<usize>,
}

impl PoolIndices {
    pub fn input_len(&self) -> usize {
        self.input_len
    }

    pub fn argmax(&self) -> &[usize] {
        &self.argmax
    }
}

fn window_max<T: Scalar>(window: &[T]) -> (usize, T) {
    // strict comparison: ties resolve to the lowest index
    let mut best = 0;
    let mut val = window[0];
    for (j, &v) in window.iter().enumerate().skip(1) {
        if v > val {
            val = v;
            best = j;
        }
    }
    (best, val)
}

/// Non-overlapping max-pool with window and stride `factor`; output length
/// is `floor(M / factor)`.
pub fn maxpool_forward<T: Scalar>(
    input: &FeatureMaps<T>,
    factor: usize,
) -> Result<(FeatureMaps<T>, PoolIndices), NnError> {
    if factor == 0 {
        return Err(NnError::Shape("pool factor must be at least 1".into()));
    }
    let m = input.len();
    let out_len = m / factor;
    if out_len == 0 {
        return Err(NnError::Shape(format!(
            "pool factor {factor} exceeds map length {m}"
        )));
    }
    let mut out = FeatureMaps::zeros(input.neurons(), out_len);
    let mut argmax = Vec::with_capacity(input.neurons() * out_len);
    for n in 0..input.neurons() {
        let row = input.row(n);
        let dst = out.row_mut(n);
        for (j, chunk) in row.chunks_exact(factor).enumerate() {
            let (best, val) = window_max(chunk);
            dst[j] = val;
            argmax.push(j * factor + best);
        }
    }
    Ok((
        out,
        PoolIndices {
            input_len: m,
            out_len,
            argmax,
        },
    ))
}

/// Routes each output gradient to the input position that won the max.
pub fn maxpool_backward<T: Scalar>(
    indices: &PoolIndices,
    out_grad: &FeatureMaps<T>,
) -> Result<FeatureMaps<T>, NnError> {
    if out_grad.len() != indices.out_len || out_grad.neurons() * indices.out_len != indices.argmax.len() {
        return Err(NnError::Shape(format!(
            "pool gradient shape {:?} does not match recorded indices",
            out_grad.shape()
        )));
    }
    let mut grad = FeatureMaps::zeros(out_grad.neurons(), indices.input_len);
    for n in 0..out_grad.neurons() {
        let src = out_grad.row(n);
        let idx = &indices.argmax[n * indices.out_len..(n + 1) * indices.out_len];
        let dst = grad.row_mut(n);
        for (&g, &t) in src.iter().zip(idx) {
            dst[t] += g;
        }
    }
    Ok(grad)
}

/// Max over the whole temporal axis, one scalar per neuron.
pub fn global_pool_forward<T: Scalar>(input: &FeatureMaps<T>) -> Result<(Vec<T>, PoolIndices), NnError> {
    if input.is_empty() {
        return Err(NnError::Shape("cannot pool an empty map".into()));
    }
    let (maps, idx) = maxpool_forward(input, input.len())?;
    Ok((maps.into_vec(), idx))
}

pub fn global_pool_backward<T: Scalar>(indices: &PoolIndices, grad: &[T]) -> Result<FeatureMaps<T>, NnError> {
    maxpool_backward(indices, &FeatureMaps::from_vec(grad.len(), 1, grad.to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn maps(rows: &[&[f64]]) -> FeatureMaps<f64> {
        FeatureMaps::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>())
    }

    #[test]
    fn pooling_examples() {
        let (out, idx) = maxpool_forward(&maps(&[&[1.0, 3.0, 2.0, 0.0]]), 2).unwrap();
        assert_eq!(out.row(0), &[3.0, 2.0]);
        assert_eq!(idx.argmax(), &[1, 2]);

        let x = maps(&[&[0.5, -1.0, 2.0]]);
        let (out, _) = maxpool_forward(&x, 1).unwrap();
        assert_eq!(out, x);

        let (out, _) = maxpool_forward(&FeatureMaps::<f64>::zeros(3, 1000), 8).unwrap();
        assert_eq!(out.shape(), (3, 125));
    }

    #[test]
    fn pooling_drops_remainder_and_rejects_short_maps() {
        let (out, _) = maxpool_forward(&maps(&[&[1.0, 2.0, 3.0, 4.0, 9.0]]), 2).unwrap();
        assert_eq!(out.row(0), &[2.0, 4.0]);
        assert!(maxpool_forward(&maps(&[&[1.0]]), 2).is_err());
        assert!(maxpool_forward(&maps(&[&[1.0]]), 0).is_err());
    }

    #[test]
    fn backward_routing() {
        let (_, idx) = maxpool_forward(&maps(&[&[1.0, 3.0, 2.0, 0.0]]), 2).unwrap();
        let g = maxpool_backward(&idx, &maps(&[&[1.0, 1.0]])).unwrap();
        assert_eq!(g.row(0), &[0.0, 1.0, 1.0, 0.0]);

        let zero = maxpool_backward(&idx, &maps(&[&[0.0, 0.0]])).unwrap();
        assert!(zero.as_slice().iter().all(|&v| v == 0.0));

        let x = maps(&[&[0.1, 0.2, 0.3]]);
        let (_, idx) = maxpool_forward(&x, 1).unwrap();
        let g = maxpool_backward(&idx, &maps(&[&[4.0, 5.0, 6.0]])).unwrap();
        assert_eq!(g.row(0), &[4.0, 5.0, 6.0]);

        assert!(maxpool_backward(&idx, &maps(&[&[1.0]])).is_err());
    }

    #[test]
    fn global_pool_examples() {
        let (v, _) = global_pool_forward(&maps(&[&[1.0, 5.0, 2.0]])).unwrap();
        assert_eq!(v, vec![5.0]);
        let (v, _) = global_pool_forward(&maps(&[&[0.7], &[-0.2]])).unwrap();
        assert_eq!(v, vec![0.7, -0.2]);
        let (v, idx) = global_pool_forward(&maps(&[&[2.0, 2.0, 2.0]])).unwrap();
        assert_eq!(v, vec![2.0]);
        assert_eq!(idx.argmax(), &[0]);
        let g = global_pool_backward(&idx, &[3.0]).unwrap();
        assert_eq!(g.row(0), &[3.0, 0.0, 0.0]);
    }

    #[test]
    fn ties_take_lowest_index() {
        let (_, idx) = maxpool_forward(&maps(&[&[1.0, 1.0, 0.0, 4.0, 4.0, 4.0]]), 3).unwrap();
        assert_eq!(idx.argmax(), &[0, 3]);
    }
}
