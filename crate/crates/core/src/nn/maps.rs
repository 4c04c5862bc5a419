use crate::scalar::Scalar;

/// Neuron-major 2D activations: `neurons` rows of `len` temporal samples.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMaps<T> {
    neurons: usize,
    len: usize,
    data: Vec<T>,
}

impl<T: Scalar> FeatureMaps<T> {
    pub fn zeros(neurons: usize, len: usize) -> Self {
        Self {
            neurons,
            len,
            data: vec![T::zero(); neurons * len],
        }
    }

    /// # Panics
    /// If `data.len() != neurons * len`.
    pub fn from_vec(neurons: usize, len: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), neurons * len, "feature map buffer size");
        Self { neurons, len, data }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let len = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == len), "ragged rows");
        Self {
            neurons: rows.len(),
            len,
            data: rows.concat(),
        }
    }

    pub fn neurons(&self) -> usize {
        self.neurons
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.neurons, self.len)
    }

    #[inline]
    pub fn row(&self, n: usize) -> &[T] {
        &self.data[n * self.len..(n + 1) * self.len]
    }

    #[inline]
    pub fn row_mut(&mut self, n: usize) -> &mut [T] {
        &mut self.data[n * self.len..(n + 1) * self.len]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn get(&self, n: usize, m: usize) -> T {
        self.data[n * self.len + m]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn cast<U: Scalar>(&self) -> FeatureMaps<U> {
        FeatureMaps {
            neurons: self.neurons,
            len: self.len,
            data: self.data.iter().map(|v| U::lit(v.to_f64_lossless())).collect(),
        }
    }
}
