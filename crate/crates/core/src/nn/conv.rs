//! Generative 1D convolution: every kernel element applies a learned
//! polynomial `sum_q w[r][q] * y^q` (q = 1..=Q) instead of a single product.

use std::fmt;
use std::sync::{Arc, OnceLock};

use rand::Rng;
use realfft::num_complex::Complex;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};

use super::{FeatureMaps, GradientBundle, NnError};
use crate::scalar::{count, Scalar};

/// Evaluates one kernel window: `sum_r sum_q kernel[r][q-1] * y[r]^q`.
///
/// `kernel` is row-major `K x Q` with `K = y_window.len()`.
pub fn taylor_window<T: Scalar>(y_window: &[T], kernel: &[T], order: usize) -> Result<T, NnError> {
    if order == 0 || kernel.len() != y_window.len() * order {
        return Err(NnError::Shape(format!(
            "kernel of {} values does not fit a window of {} with order {order}",
            kernel.len(),
            y_window.len()
        )));
    }
    let mut acc = T::zero();
    for (&y, coeffs) in y_window.iter().zip(kernel.chunks_exact(order)) {
        let mut p = y;
        for &w in coeffs {
            acc += w * p;
            p *= y;
        }
    }
    Ok(acc)
}

/// Cached forward state needed by [`GenerativeConv1d::backward`].
#[derive(Debug, Clone)]
pub struct ConvCache<T> {
    /// `y^1..y^Q` per input neuron, laid out `[i][q][m]`.
    powers: Vec<T>,
    len: usize,
}

/// How [`GenerativeConv1d::forward_with`] evaluates the convolution sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConvStrategy {
    /// Spectral for kernels of at least [`SPECTRAL_MIN_KERNEL`] taps, direct otherwise.
    #[default]
    Auto,
    Direct,
    /// FFT products against cached kernel spectra.
    Spectral,
}

pub const SPECTRAL_MIN_KERNEL: usize = 16;

/// Kernel spectra for one input length, rebuilt whenever weights change.
struct Spectra<T: Scalar> {
    len: usize,
    fft_len: usize,
    r2c: Arc<dyn RealToComplex<T>>,
    c2r: Arc<dyn ComplexToReal<T>>,
    /// Real and imaginary parts, each `[k][c][bin]` with `c = i * Q + q`;
    /// split so the accumulation loops vectorize.
    kernel_re: Vec<T>,
    kernel_im: Vec<T>,
}

/// Smallest even 5-smooth length that is at least `n`.
fn fft_len(n: usize) -> usize {
    let mut l = n.max(2);
    loop {
        if l.is_multiple_of(2) {
            let mut v = l;
            for f in [2, 3, 5] {
                while v.is_multiple_of(f) {
                    v /= f;
                }
            }
            if v == 1 {
                return l;
            }
        }
        l += 1;
    }
}

fn split<T: Scalar>(spec: &[Complex<T>], re: &mut [T], im: &mut [T]) {
    for ((z, r), i) in spec.iter().zip(re).zip(im) {
        *r = z.re;
        *i = z.im;
    }
}

/// `acc += x * k` over complex bins held as split real/imaginary slices.
fn mul_acc<T: Scalar>(acc_re: &mut [T], acc_im: &mut [T], xr: &[T], xi: &[T], kr: &[T], ki: &[T]) {
    let n = acc_re.len();
    let (acc_im, xr, xi, kr, ki) = (&mut acc_im[..n], &xr[..n], &xi[..n], &kr[..n], &ki[..n]);
    for j in 0..n {
        acc_re[j] += xr[j] * kr[j] - xi[j] * ki[j];
        acc_im[j] += xr[j] * ki[j] + xi[j] * kr[j];
    }
}

/// `dst += a * src`.
fn axpy<T: Scalar>(dst: &mut [T], a: T, src: &[T]) {
    let src = &src[..dst.len()];
    for j in 0..dst.len() {
        dst[j] += a * src[j];
    }
}

/// A layer of generative neurons with 'same' zero padding and unit stride.
///
/// Weights are kept as `[k][i][q][r]` so the inner loops run over contiguous
/// kernel taps; [`GenerativeConv1d::weight`] addresses them by `(i, k, r, q)`.
pub struct GenerativeConv1d<T: Scalar> {
    in_neurons: usize,
    out_neurons: usize,
    kernel: usize,
    order: usize,
    weights: Vec<T>,
    biases: Vec<T>,
    spectra: OnceLock<Arc<Spectra<T>>>,
}

impl<T: Scalar> Clone for GenerativeConv1d<T> {
    fn clone(&self) -> Self {
        Self {
            in_neurons: self.in_neurons,
            out_neurons: self.out_neurons,
            kernel: self.kernel,
            order: self.order,
            weights: self.weights.clone(),
            biases: self.biases.clone(),
            spectra: self.spectra.clone(),
        }
    }
}

impl<T: Scalar> PartialEq for GenerativeConv1d<T> {
    fn eq(&self, other: &Self) -> bool {
        self.in_neurons == other.in_neurons
            && self.out_neurons == other.out_neurons
            && self.kernel == other.kernel
            && self.order == other.order
            && self.weights == other.weights
            && self.biases == other.biases
    }
}

impl<T: Scalar> fmt::Debug for GenerativeConv1d<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GenerativeConv1d")
            .field("in_neurons", &self.in_neurons)
            .field("out_neurons", &self.out_neurons)
            .field("kernel", &self.kernel)
            .field("order", &self.order)
            .field("weights", &self.weights)
            .field("biases", &self.biases)
            .finish()
    }
}

impl<T: Scalar> GenerativeConv1d<T> {
    pub fn zeros(
        in_neurons: usize,
        out_neurons: usize,
        kernel: usize,
        order: usize,
    ) -> Result<Self, NnError> {
        if in_neurons == 0 || out_neurons == 0 || kernel == 0 || order == 0 {
            return Err(NnError::Shape(format!(
                "layer dimensions must be positive: in {in_neurons}, out {out_neurons}, K {kernel}, Q {order}"
            )));
        }
        Ok(Self {
            in_neurons,
            out_neurons,
            kernel,
            order,
            weights: vec![T::zero(); in_neurons * out_neurons * kernel * order],
            biases: vec![T::zero(); out_neurons],
            spectra: OnceLock::new(),
        })
    }

    /// Uniform Glorot-style initialization over all orders; biases start at zero.
    ///
    /// Values are drawn in `(i, k, r, q)` order.
    pub fn random<R: Rng + ?Sized>(
        in_neurons: usize,
        out_neurons: usize,
        kernel: usize,
        order: usize,
        rng: &mut R,
    ) -> Result<Self, NnError> {
        let mut layer = Self::zeros(in_neurons, out_neurons, kernel, order)?;
        let fan = ((in_neurons + out_neurons) * kernel * order) as f64;
        let bound = (6.0 / fan).sqrt();
        for i in 0..in_neurons {
            for k in 0..out_neurons {
                for r in 0..kernel {
                    for q in 0..order {
                        let idx = layer.weight_index(i, k, r, q);
                        layer.weights[idx] = T::lit(rng.random_range(-bound..bound));
                    }
                }
            }
        }
        Ok(layer)
    }

    pub fn in_neurons(&self) -> usize {
        self.in_neurons
    }

    pub fn out_neurons(&self) -> usize {
        self.out_neurons
    }

    pub fn kernel_size(&self) -> usize {
        self.kernel
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn padding(&self) -> usize {
        self.kernel / 2
    }

    /// Flat position of `w_ik[r][q]` (`q` zero-based, i.e. exponent `q + 1`).
    #[inline]
    pub fn weight_index(&self, i: usize, k: usize, r: usize, q: usize) -> usize {
        debug_assert!(i < self.in_neurons && k < self.out_neurons && r < self.kernel && q < self.order);
        ((k * self.in_neurons + i) * self.order + q) * self.kernel + r
    }

    pub fn weight(&self, i: usize, k: usize, r: usize, q: usize) -> T {
        self.weights[self.weight_index(i, k, r, q)]
    }

    pub fn set_weight(&mut self, i: usize, k: usize, r: usize, q: usize, v: T) {
        let idx = self.weight_index(i, k, r, q);
        self.weights[idx] = v;
        self.spectra = OnceLock::new();
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [T] {
        self.spectra = OnceLock::new();
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

    /// Kernel of one connection as a row-major `K x Q` matrix.
    pub fn connection_kernel(&self, i: usize, k: usize) -> Vec<T> {
        let mut out = Vec::with_capacity(self.kernel * self.order);
        for r in 0..self.kernel {
            for q in 0..self.order {
                out.push(self.weight(i, k, r, q));
            }
        }
        out
    }

    pub fn cast<U: Scalar>(&self) -> GenerativeConv1d<U> {
        GenerativeConv1d {
            in_neurons: self.in_neurons,
            out_neurons: self.out_neurons,
            kernel: self.kernel,
            order: self.order,
            weights: self.weights.iter().map(|v| U::lit(v.to_f64_lossless())).collect(),
            biases: self.biases.iter().map(|v| U::lit(v.to_f64_lossless())).collect(),
            spectra: OnceLock::new(),
        }
    }

    fn powers(&self, input: &FeatureMaps<T>) -> Vec<T> {
        let m = input.len();
        let mut powers = Vec::with_capacity(self.in_neurons * self.order * m);
        for i in 0..self.in_neurons {
            let y = input.row(i);
            powers.extend_from_slice(y);
            for _ in 1..self.order {
                let start = powers.len() - m;
                for t in 0..m {
                    let v = powers[start + t] * y[t];
                    powers.push(v);
                }
            }
        }
        powers
    }

    /// Forward pass; `output[k][m] = b_k + sum_i sum_r sum_q w_ik[r][q] * y_i(m + r - K/2)^(q+1)`.
    pub fn forward(&self, input: &FeatureMaps<T>) -> Result<(FeatureMaps<T>, ConvCache<T>), NnError> {
        self.forward_with(input, ConvStrategy::Auto)
    }

    pub fn forward_with(
        &self,
        input: &FeatureMaps<T>,
        strategy: ConvStrategy,
    ) -> Result<(FeatureMaps<T>, ConvCache<T>), NnError> {
        if input.neurons() != self.in_neurons || input.is_empty() {
            return Err(NnError::Shape(format!(
                "conv expects {} input maps, got {:?}",
                self.in_neurons,
                input.shape()
            )));
        }
        let m = input.len();
        let powers = self.powers(input);
        let spectral = match strategy {
            ConvStrategy::Auto => self.kernel >= SPECTRAL_MIN_KERNEL,
            ConvStrategy::Direct => false,
            ConvStrategy::Spectral => true,
        };
        let out = if spectral {
            self.spectral_sum(&powers, m)
        } else {
            self.direct_sum(&powers, m)
        };
        Ok((out, ConvCache { powers, len: m }))
    }

    fn direct_sum(&self, powers: &[T], m: usize) -> FeatureMaps<T> {
        let channels = self.in_neurons * self.order;
        let kernel = self.kernel;
        let pad = self.padding();
        let mut out = FeatureMaps::zeros(self.out_neurons, m);
        for k in 0..self.out_neurons {
            let row = out.row_mut(k);
            row.fill(self.biases[k]);
            for c in 0..channels {
                let p = &powers[c * m..(c + 1) * m];
                let w = &self.weights[(k * channels + c) * kernel..(k * channels + c + 1) * kernel];
                for (r, &wr) in w.iter().enumerate() {
                    // row[t] += wr * p[t + r - pad] for every t with a valid source index
                    let lo = pad.saturating_sub(r);
                    let hi = (m + pad).saturating_sub(r).min(m);
                    if lo >= hi {
                        continue;
                    }
                    let src = &p[lo + r - pad..hi + r - pad];
                    for (o, &s) in row[lo..hi].iter_mut().zip(src) {
                        *o += wr * s;
                    }
                }
            }
        }
        out
    }

    fn spectra(&self, m: usize) -> Arc<Spectra<T>> {
        if let Some(s) = self.spectra.get() {
            if s.len == m {
                return Arc::clone(s);
            }
        }
        let built = Arc::new(self.build_spectra(m));
        // a racing thread may have filled the slot first; either copy is identical
        let _ = self.spectra.set(Arc::clone(&built));
        built
    }

    fn build_spectra(&self, m: usize) -> Spectra<T> {
        let kernel = self.kernel;
        let channels = self.in_neurons * self.order;
        // outputs start K-1-pad into the linear convolution, so a circular one
        // of length M+pad already keeps the wrapped tail out of them
        let fft_len = fft_len((m + self.padding()).max(kernel));
        let mut planner = RealFftPlanner::<T>::new();
        let r2c = planner.plan_fft_forward(fft_len);
        let c2r = planner.plan_fft_inverse(fft_len);
        let bins = fft_len / 2 + 1;
        let mut kernel_re = vec![T::zero(); self.out_neurons * channels * bins];
        let mut kernel_im = kernel_re.clone();
        let mut buf = r2c.make_input_vec();
        let mut spec = r2c.make_output_vec();
        let mut scratch = r2c.make_scratch_vec();
        let parts = kernel_re.chunks_exact_mut(bins).zip(kernel_im.chunks_exact_mut(bins));
        for (kc, (re, im)) in parts.enumerate() {
            let w = &self.weights[kc * kernel..(kc + 1) * kernel];
            buf.fill(T::zero());
            // flipped taps turn the correlation into a linear convolution
            for (j, &v) in w.iter().rev().enumerate() {
                buf[j] = v;
            }
            r2c.process_with_scratch(&mut buf, &mut spec, &mut scratch)
                .expect("buffer lengths come from the plan");
            split(&spec, re, im);
        }
        Spectra {
            len: m,
            fft_len,
            r2c,
            c2r,
            kernel_re,
            kernel_im,
        }
    }

    fn spectral_sum(&self, powers: &[T], m: usize) -> FeatureMaps<T> {
        let sp = self.spectra(m);
        let channels = self.in_neurons * self.order;
        let bins = sp.fft_len / 2 + 1;
        let mut in_re = vec![T::zero(); channels * bins];
        let mut in_im = in_re.clone();
        let mut buf = sp.r2c.make_input_vec();
        let mut spec = sp.r2c.make_output_vec();
        let mut scratch = sp.r2c.make_scratch_vec();
        let parts = in_re.chunks_exact_mut(bins).zip(in_im.chunks_exact_mut(bins));
        for (c, (re, im)) in parts.enumerate() {
            buf[..m].copy_from_slice(&powers[c * m..(c + 1) * m]);
            buf[m..].fill(T::zero());
            sp.r2c
                .process_with_scratch(&mut buf, &mut spec, &mut scratch)
                .expect("buffer lengths come from the plan");
            split(&spec, re, im);
        }

        let mut acc_re = vec![T::zero(); bins];
        let mut acc_im = acc_re.clone();
        let mut time = sp.c2r.make_output_vec();
        let mut inv_scratch = sp.c2r.make_scratch_vec();
        let scale = T::one() / count::<T>(sp.fft_len);
        let shift = self.kernel - 1 - self.padding();
        let mut out = FeatureMaps::zeros(self.out_neurons, m);
        for k in 0..self.out_neurons {
            acc_re.fill(T::zero());
            acc_im.fill(T::zero());
            for c in 0..channels {
                let at = (k * channels + c) * bins;
                let (kr, ki) = (&sp.kernel_re[at..at + bins], &sp.kernel_im[at..at + bins]);
                let (xr, xi) = (&in_re[c * bins..(c + 1) * bins], &in_im[c * bins..(c + 1) * bins]);
                mul_acc(&mut acc_re, &mut acc_im, xr, xi, kr, ki);
            }
            acc_im[0] = T::zero();
            acc_im[bins - 1] = T::zero();
            for ((z, &re), &im) in spec.iter_mut().zip(&acc_re).zip(&acc_im) {
                *z = Complex::new(re, im);
            }
            sp.c2r
                .process_with_scratch(&mut spec, &mut time, &mut inv_scratch)
                .expect("buffer lengths come from the plan");
            let b = self.biases[k];
            for (o, &v) in out.row_mut(k).iter_mut().zip(&time[shift..shift + m]) {
                *o = b + v * scale;
            }
        }
        out
    }

    /// Exact gradients of the forward map given `dL/d output`.
    ///
    /// Zero entries of `out_grad` are skipped, so gradients arriving through a
    /// max-pool (one non-zero per window) cost proportionally less.
    /// The input gradient is only computed when `want_input` is set.
    pub fn backward(
        &self,
        cache: &ConvCache<T>,
        out_grad: &FeatureMaps<T>,
        want_input: bool,
    ) -> Result<GradientBundle<T>, NnError> {
        let mut g = GradientBundle::zeros_like(self.weights.len(), self.out_neurons);
        g.input = self.backward_into(cache, out_grad, &mut g.weights, &mut g.biases, want_input)?;
        Ok(g)
    }

    /// Like [`GenerativeConv1d::backward`], but adds the parameter gradients
    /// onto `dw` and `db` and returns only the input gradient.
    pub fn backward_into(
        &self,
        cache: &ConvCache<T>,
        out_grad: &FeatureMaps<T>,
        dw: &mut [T],
        db: &mut [T],
        want_input: bool,
    ) -> Result<Option<FeatureMaps<T>>, NnError> {
        let m = cache.len;
        if out_grad.shape() != (self.out_neurons, m) {
            return Err(NnError::Shape(format!(
                "conv output gradient must be {:?}, got {:?}",
                (self.out_neurons, m),
                out_grad.shape()
            )));
        }
        if dw.len() != self.weights.len() || db.len() != self.out_neurons {
            return Err(NnError::Shape("gradient buffers do not match the layer".into()));
        }
        let channels = self.in_neurons * self.order;
        let kernel = self.kernel;
        let pad = self.padding();
        let mut dp = if want_input {
            vec![T::zero(); channels * m]
        } else {
            Vec::new()
        };

        for k in 0..self.out_neurons {
            let g_row = out_grad.row(k);
            db[k] += g_row.iter().copied().sum::<T>();
            for (t_out, &g) in g_row.iter().enumerate() {
                if g == T::zero() {
                    continue;
                }
                let r_lo = pad.saturating_sub(t_out);
                let r_hi = (m + pad - t_out).min(kernel);
                if r_lo >= r_hi {
                    continue;
                }
                let src_lo = t_out + r_lo - pad;
                let span = r_hi - r_lo;
                for c in 0..channels {
                    let base = (k * channels + c) * kernel;
                    let p = &cache.powers[c * m + src_lo..c * m + src_lo + span];
                    axpy(&mut dw[base + r_lo..base + r_hi], g, p);
                    if want_input {
                        axpy(&mut dp[c * m + src_lo..c * m + src_lo + span], g, &self.weights[base + r_lo..base + r_hi]);
                    }
                }
            }
        }

        let input = if want_input {
            let mut dy = FeatureMaps::zeros(self.in_neurons, m);
            for i in 0..self.in_neurons {
                let row = dy.row_mut(i);
                // exponent 1: derivative is the raw accumulated gradient
                row.copy_from_slice(&dp[(i * self.order) * m..(i * self.order + 1) * m]);
                for q in 1..self.order {
                    let coeff: T = count(q + 1);
                    let d = &dp[(i * self.order + q) * m..(i * self.order + q + 1) * m];
                    let lower = &cache.powers[(i * self.order + q - 1) * m..(i * self.order + q) * m];
                    for ((o, &dv), &pv) in row.iter_mut().zip(d).zip(lower) {
                        *o += coeff * pv * dv;
                    }
                }
            }
            Some(dy)
        } else {
            None
        };
        Ok(input)
    }
}
