//! The full classifier: operational layers, global pooling, a two-layer MLP,
//! weight serialization and complexity accounting.

use std::fmt::{self, Write as _};
use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::config::{ConfigError, KvConfig};
use crate::nn::{
    global_pool_backward, global_pool_forward, maxpool_backward, maxpool_forward, tanh_backward,
    tanh_forward_in_place, ConvCache, DenseLayer, FeatureMaps, GenerativeConv1d, GradientBundle,
    NnError, PoolIndices,
};
use crate::scalar::Scalar;
use crate::signal::{Frame, Severity, DEFAULT_FRAME_LEN, NUM_CLASSES};

pub const MODEL_MAGIC: &str = "SONN1";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<ConfigError> for ModelError {
    fn from(e: ConfigError) -> Self {
        ModelError::Config(e.to_string())
    }
}

/// One operational layer: generative convolution, max-pool, tanh.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OpLayerSpec {
    pub neurons: usize,
    pub kernel: usize,
    pub pool: usize,
    pub order: usize,
}

impl fmt::Display for OpLayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}:{}", self.neurons, self.kernel, self.pool, self.order)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkConfig {
    pub input_channels: usize,
    pub frame_len: usize,
    pub op_layers: Vec<OpLayerSpec>,
    pub mlp_hidden: usize,
    pub n_classes: usize,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self::compact(1)
    }
}

impl NetworkConfig {
    fn with_widths(widths: [usize; 3], order: usize) -> Self {
        let shapes = [(41, 8), (41, 8), (9, 2)];
        Self {
            input_channels: 2,
            frame_len: DEFAULT_FRAME_LEN,
            op_layers: widths
                .iter()
                .zip(shapes)
                .map(|(&neurons, (kernel, pool))| OpLayerSpec {
                    neurons,
                    kernel,
                    pool,
                    order,
                })
                .collect(),
            mlp_hidden: 16,
            n_classes: NUM_CLASSES,
        }
    }

    /// (16-12-8)+(16-4) with every operational layer at order `q`.
    pub fn compact(q: usize) -> Self {
        Self::with_widths([16, 12, 8], q)
    }

    /// (32-24-16)+(16-4), the doubled-width variant.
    pub fn wide(q: usize) -> Self {
        Self::with_widths([32, 24, 16], q)
    }

    pub fn set_order(&mut self, q: usize) {
        for l in &mut self.op_layers {
            l.order = q;
        }
    }

    pub fn last_width(&self) -> usize {
        self.op_layers.last().map_or(self.input_channels, |l| l.neurons)
    }

    /// Temporal length after each operational layer (after its pooling).
    pub fn stage_lengths(&self) -> Vec<usize> {
        let mut m = self.frame_len;
        self.op_layers
            .iter()
            .map(|l| {
                m = m.checked_div(l.pool).unwrap_or(0);
                m
            })
            .collect()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = [self.input_channels, self.frame_len, self.mlp_hidden, self.n_classes];
        if positive.contains(&0) {
            return Err(ModelError::Config("all counts must be positive".into()));
        }
        if self.n_classes != NUM_CLASSES {
            return Err(ModelError::Config(format!(
                "this build classifies {NUM_CLASSES} severity classes, got n_classes = {}",
                self.n_classes
            )));
        }
        if self.op_layers.is_empty() {
            return Err(ModelError::Config("at least one operational layer is required".into()));
        }
        for (j, l) in self.op_layers.iter().enumerate() {
            if l.neurons == 0 || l.kernel == 0 || l.pool == 0 || l.order == 0 {
                return Err(ModelError::Config(format!("layer {} has a zero dimension: {l}", j + 1)));
            }
        }
        if let Some(j) = self.stage_lengths().iter().position(|&m| m == 0) {
            return Err(ModelError::Config(format!(
                "temporal length collapses to zero after layer {}",
                j + 1
            )));
        }
        Ok(())
    }

    /// Reads `input_channels`, `frame_len`, `layers`, `q`, `mlp_hidden` and
    /// `n_classes`, starting from the compact default.
    ///
    /// `layers` is a comma list of `neurons:kernel:pool[:q]`; a bare `q`
    /// applies to every layer without its own order.
    pub fn from_kv(kv: &KvConfig) -> Result<Self, ModelError> {
        let mut cfg = Self::default();
        kv.apply("input_channels", &mut cfg.input_channels)?;
        kv.apply("frame_len", &mut cfg.frame_len)?;
        kv.apply("mlp_hidden", &mut cfg.mlp_hidden)?;
        kv.apply("n_classes", &mut cfg.n_classes)?;
        let global_q: Option<usize> = kv.get_parsed("q")?;
        if let Some(spec) = kv.get("layers") {
            cfg.op_layers = parse_layers(spec, global_q.unwrap_or(1))?;
        } else if let Some(q) = global_q {
            cfg.set_order(q);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_kv(&self) -> KvConfig {
        let mut kv = KvConfig::default();
        kv.set("input_channels", self.input_channels);
        kv.set("frame_len", self.frame_len);
        kv.set("layers", self.layers_string());
        kv.set("mlp_hidden", self.mlp_hidden);
        kv.set("n_classes", self.n_classes);
        kv
    }

    pub fn layers_string(&self) -> String {
        self.op_layers
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join(",")
    }

    /// Paper-style label, e.g. `(16-12-8)+(16-4)`.
    pub fn label(&self) -> String {
        let widths: Vec<String> = self.op_layers.iter().map(|l| l.neurons.to_string()).collect();
        format!("({})+({}-{})", widths.join("-"), self.mlp_hidden, self.n_classes)
    }
}

fn parse_layers(spec: &str, default_q: usize) -> Result<Vec<OpLayerSpec>, ModelError> {
    spec.split(',')
        .map(|item| {
            let parts: Vec<&str> = item.trim().split(':').collect();
            let nums: Result<Vec<usize>, _> = parts.iter().map(|p| p.trim().parse::<usize>()).collect();
            match nums.as_deref() {
                Ok([n, k, p]) => Ok(OpLayerSpec {
                    neurons: *n,
                    kernel: *k,
                    pool: *p,
                    order: default_q,
                }),
                Ok([n, k, p, q]) => Ok(OpLayerSpec {
                    neurons: *n,
                    kernel: *k,
                    pool: *p,
                    order: *q,
                }),
                _ => Err(ModelError::Config(format!(
                    "layer `{item}` is not neurons:kernel:pool[:q]"
                ))),
            }
        })
        .collect()
}

/// Index of the largest score; ties go to the lowest index.
pub fn argmax<T: Scalar>(scores: &[T]) -> usize {
    let mut best = 0;
    for (j, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = j;
        }
    }
    best
}

struct OpLayerTrace<T> {
    conv: ConvCache<T>,
    pool: PoolIndices,
    /// tanh output of this layer
    activation: FeatureMaps<T>,
}

/// Intermediate state of one forward pass, consumed by [`SelfOnn::backward`].
pub struct ForwardTrace<T> {
    layers: Vec<OpLayerTrace<T>>,
    global: PoolIndices,
    pooled: Vec<T>,
    hidden: Vec<T>,
    scores: Vec<T>,
}

impl<T: Scalar> ForwardTrace<T> {
    pub fn scores(&self) -> &[T] {
        &self.scores
    }

    /// Post-tanh output of each operational layer.
    pub fn activations(&self) -> impl Iterator<Item = &FeatureMaps<T>> {
        self.layers.iter().map(|l| &l.activation)
    }

    /// Global max-pool output feeding the MLP.
    pub fn pooled(&self) -> &[T] {
        &self.pooled
    }

    pub fn hidden(&self) -> &[T] {
        &self.hidden
    }
}

/// Parameter gradients for every layer of a [`SelfOnn`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGradients<T> {
    pub conv: Vec<GradientBundle<T>>,
    pub hidden: GradientBundle<T>,
    pub output: GradientBundle<T>,
    /// Gradient with respect to the network input, when requested.
    pub input: Option<FeatureMaps<T>>,
}

impl<T: Scalar> ModelGradients<T> {
    pub fn zeros_for(model: &SelfOnn<T>) -> Self {
        Self {
            conv: model
                .conv
                .iter()
                .map(|c| GradientBundle::zeros_like(c.weights().len(), c.biases().len()))
                .collect(),
            hidden: GradientBundle::zeros_like(model.hidden.weights().len(), model.hidden.biases().len()),
            output: GradientBundle::zeros_like(model.output.weights().len(), model.output.biases().len()),
            input: None,
        }
    }

    pub fn accumulate(&mut self, other: &ModelGradients<T>) {
        for (a, b) in self.conv.iter_mut().zip(&other.conv) {
            a.accumulate(b);
        }
        self.hidden.accumulate(&other.hidden);
        self.output.accumulate(&other.output);
        self.input = None;
    }

    pub fn scale(&mut self, s: T) {
        for g in self.conv.iter_mut() {
            g.scale(s);
        }
        self.hidden.scale(s);
        self.output.scale(s);
    }
}

/// 1D Self-ONN classifier.
///
/// Pipeline per operational layer: generative conv ('same') -> max-pool -> tanh.
/// After the last one: global max-pool -> dense -> tanh -> dense -> tanh.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfOnn<T: Scalar> {
    config: NetworkConfig,
    conv: Vec<GenerativeConv1d<T>>,
    hidden: DenseLayer<T>,
    output: DenseLayer<T>,
}

impl<T: Scalar> SelfOnn<T> {
    /// Builds a randomly initialized model; identical seeds give identical weights.
    pub fn build(cfg: &NetworkConfig, seed: u64) -> Result<Self, ModelError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::build_with_rng(cfg, &mut rng)
    }

    pub fn build_with_rng<R: rand::Rng + ?Sized>(cfg: &NetworkConfig, rng: &mut R) -> Result<Self, ModelError> {
        cfg.validate()?;
        let mut conv = Vec::with_capacity(cfg.op_layers.len());
        let mut n_prev = cfg.input_channels;
        for l in &cfg.op_layers {
            conv.push(GenerativeConv1d::random(n_prev, l.neurons, l.kernel, l.order, rng)?);
            n_prev = l.neurons;
        }
        let hidden = DenseLayer::random(n_prev, cfg.mlp_hidden, rng)?;
        let output = DenseLayer::random(cfg.mlp_hidden, cfg.n_classes, rng)?;
        Ok(Self {
            config: cfg.clone(),
            conv,
            hidden,
            output,
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn conv_layers(&self) -> &[GenerativeConv1d<T>] {
        &self.conv
    }

    pub fn conv_layers_mut(&mut self) -> &mut [GenerativeConv1d<T>] {
        &mut self.conv
    }

    pub fn hidden_layer(&self) -> &DenseLayer<T> {
        &self.hidden
    }

    pub fn hidden_layer_mut(&mut self) -> &mut DenseLayer<T> {
        &mut self.hidden
    }

    pub fn output_layer(&self) -> &DenseLayer<T> {
        &self.output
    }

    pub fn output_layer_mut(&mut self) -> &mut DenseLayer<T> {
        &mut self.output
    }

    pub fn param_count(&self) -> usize {
        self.conv.iter().map(|c| c.param_count()).sum::<usize>()
            + self.hidden.param_count()
            + self.output.param_count()
    }

    pub fn cast<U: Scalar>(&self) -> SelfOnn<U> {
        SelfOnn {
            config: self.config.clone(),
            conv: self.conv.iter().map(|c| c.cast()).collect(),
            hidden: self.hidden.cast(),
            output: self.output.cast(),
        }
    }

    fn check_frame(&self, f: &Frame<T>) -> Result<(), ModelError> {
        if !f.normalized {
            return Err(ModelError::Input("frame is not normalized".into()));
        }
        let want = (self.config.input_channels, self.config.frame_len);
        if f.samples.shape() != want {
            return Err(ModelError::Input(format!(
                "frame shape {:?}, model expects {want:?}",
                f.samples.shape()
            )));
        }
        Ok(())
    }

    /// Class scores for a normalized frame, each in (-1, 1).
    pub fn forward(&self, f: &Frame<T>) -> Result<Vec<T>, ModelError> {
        self.check_frame(f)?;
        Ok(self.forward_maps(&f.samples)?.scores)
    }

    pub fn predict(&self, f: &Frame<T>) -> Result<Severity, ModelError> {
        let scores = self.forward(f)?;
        Ok(Severity::from_index(argmax(&scores)).expect("n_classes is validated"))
    }

    /// Forward pass over raw input maps, keeping what backward needs.
    pub fn forward_maps(&self, input: &FeatureMaps<T>) -> Result<ForwardTrace<T>, ModelError> {
        let mut layers = Vec::with_capacity(self.conv.len());
        let mut x: Option<FeatureMaps<T>> = None;
        for (conv, spec) in self.conv.iter().zip(&self.config.op_layers) {
            let src = x.as_ref().unwrap_or(input);
            let (out, cache) = conv.forward(src)?;
            let (mut pooled, idx) = maxpool_forward(&out, spec.pool)?;
            tanh_forward_in_place(pooled.as_mut_slice());
            x = Some(pooled.clone());
            layers.push(OpLayerTrace {
                conv: cache,
                pool: idx,
                activation: pooled,
            });
        }
        let last = x.as_ref().unwrap_or(input);
        let (pooled, global) = global_pool_forward(last)?;
        let mut hidden = self.hidden.forward(&pooled)?;
        tanh_forward_in_place(&mut hidden);
        let mut scores = self.output.forward(&hidden)?;
        tanh_forward_in_place(&mut scores);
        Ok(ForwardTrace {
            layers,
            global,
            pooled,
            hidden,
            scores,
        })
    }

    /// Backpropagates `dL/dscores` through a recorded forward pass.
    pub fn backward(
        &self,
        trace: &ForwardTrace<T>,
        score_grad: &[T],
        want_input: bool,
    ) -> Result<ModelGradients<T>, ModelError> {
        let mut grads = ModelGradients::zeros_for(self);
        grads.input = self.backprop(trace, score_grad, want_input, &mut grads)?;
        Ok(grads)
    }

    /// Adds the parameter gradients of one sample onto `acc`.
    pub fn accumulate_gradients(
        &self,
        trace: &ForwardTrace<T>,
        score_grad: &[T],
        acc: &mut ModelGradients<T>,
    ) -> Result<(), ModelError> {
        self.backprop(trace, score_grad, false, acc)?;
        Ok(())
    }

    fn backprop(
        &self,
        trace: &ForwardTrace<T>,
        score_grad: &[T],
        want_input: bool,
        acc: &mut ModelGradients<T>,
    ) -> Result<Option<FeatureMaps<T>>, ModelError> {
        if score_grad.len() != trace.scores.len() {
            return Err(ModelError::Input(format!(
                "expected {} score gradients, got {}",
                trace.scores.len(),
                score_grad.len()
            )));
        }
        if acc.conv.len() != self.conv.len() {
            return Err(ModelError::Input("gradient accumulator does not match the model".into()));
        }
        let g = tanh_backward(&trace.scores, score_grad);
        let mut output = self.output.backward(&trace.hidden, &g)?;
        let g_hidden = output.input.take().expect("dense backward yields input grad").into_vec();
        let g = tanh_backward(&trace.hidden, &g_hidden);
        let mut hidden = self.hidden.backward(&trace.pooled, &g)?;
        let g_pooled = hidden.input.take().expect("dense backward yields input grad").into_vec();
        acc.output.accumulate(&output);
        acc.hidden.accumulate(&hidden);
        let mut g_maps = global_pool_backward(&trace.global, &g_pooled)?;

        let mut input_grad = None;
        for (j, (conv, lt)) in self.conv.iter().zip(&trace.layers).enumerate().rev() {
            let g_act = tanh_backward(lt.activation.as_slice(), g_maps.as_slice());
            let g_act = FeatureMaps::from_vec(lt.activation.neurons(), lt.activation.len(), g_act);
            let g_conv = maxpool_backward(&lt.pool, &g_act)?;
            let need_input = j > 0 || want_input;
            let bundle = &mut acc.conv[j];
            let gi = conv.backward_into(&lt.conv, &g_conv, &mut bundle.weights, &mut bundle.biases, need_input)?;
            if let Some(gi) = gi {
                if j == 0 {
                    input_grad = Some(gi);
                } else {
                    g_maps = gi;
                }
            }
        }
        Ok(input_grad)
    }

    /// Every parameter in serialization order (see [`SelfOnn::save`]).
    pub fn flat_params(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.param_count());
        for c in &self.conv {
            for i in 0..c.in_neurons() {
                for k in 0..c.out_neurons() {
                    for r in 0..c.kernel_size() {
                        for q in 0..c.order() {
                            out.push(c.weight(i, k, r, q));
                        }
                    }
                }
            }
            out.extend_from_slice(c.biases());
        }
        for d in [&self.hidden, &self.output] {
            out.extend_from_slice(d.weights());
            out.extend_from_slice(d.biases());
        }
        out
    }

    fn set_flat_params(&mut self, values: &[T]) -> Result<(), ModelError> {
        if values.len() != self.param_count() {
            return Err(ModelError::Format(format!(
                "expected {} parameters, found {}",
                self.param_count(),
                values.len()
            )));
        }
        let mut it = values.iter().copied();
        for c in &mut self.conv {
            for i in 0..c.in_neurons() {
                for k in 0..c.out_neurons() {
                    for r in 0..c.kernel_size() {
                        for q in 0..c.order() {
                            c.set_weight(i, k, r, q, it.next().expect("length checked"));
                        }
                    }
                }
            }
            for b in c.biases_mut() {
                *b = it.next().expect("length checked");
            }
        }
        for d in [&mut self.hidden, &mut self.output] {
            for w in d.weights_mut() {
                *w = it.next().expect("length checked");
            }
            for b in d.biases_mut() {
                *b = it.next().expect("length checked");
            }
        }
        Ok(())
    }

    /// Writes the `SONN1` format: magic line, `key = value` header lines,
    /// `end`, then every parameter as a little-endian `f64`.
    ///
    /// Parameter order: each operational layer's weights `(i, k, r, q)` with
    /// `q` fastest, then its biases; then each dense layer's `[in][out]`
    /// weights and biases.
    pub fn save<W: Write>(&self, mut w: W) -> Result<(), ModelError> {
        let params = self.flat_params();
        let mut header = format!("{MODEL_MAGIC}\nversion = {MODEL_VERSION}\n");
        header.push_str(&self.config.to_kv().to_text());
        let _ = writeln!(header, "values = {}", params.len());
        header.push_str("end\n");
        w.write_all(header.as_bytes())?;
        let mut buf = Vec::with_capacity(params.len() * 8);
        for v in params {
            buf.extend_from_slice(&v.to_f64_lossless().to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.save(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn load<R: Read>(mut r: R) -> Result<Self, ModelError> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ModelError> {
        let mut pos = 0;
        let mut next_line = || -> Result<&str, ModelError> {
            let rest = &bytes[pos..];
            let end = rest
                .iter()
                .position(|&b| b == b'\n')
                .ok_or_else(|| ModelError::Format("truncated header".into()))?;
            pos += end + 1;
            std::str::from_utf8(&rest[..end]).map_err(|_| ModelError::Format("header is not UTF-8".into()))
        };
        if next_line()? != MODEL_MAGIC {
            return Err(ModelError::Format(format!("missing `{MODEL_MAGIC}` magic")));
        }
        let mut header = String::new();
        loop {
            let line = next_line()?;
            if line == "end" {
                break;
            }
            header.push_str(line);
            header.push('\n');
        }
        let kv = KvConfig::parse(&header).map_err(|e| ModelError::Format(e.to_string()))?;
        match kv.get_parsed::<u32>("version")? {
            Some(MODEL_VERSION) => {}
            other => return Err(ModelError::Format(format!("unsupported version {other:?}"))),
        }
        let values: usize = kv
            .get_parsed("values")?
            .ok_or_else(|| ModelError::Format("missing `values` count".into()))?;
        let cfg = NetworkConfig::from_kv(&kv)?;
        let body = &bytes[pos..];
        if body.len() != values * 8 {
            return Err(ModelError::Format(format!(
                "expected {} bytes of parameters, found {}",
                values * 8,
                body.len()
            )));
        }
        let params: Vec<T> = body
            .chunks_exact(8)
            .map(|c| T::lit(f64::from_le_bytes(c.try_into().expect("8-byte chunk"))))
            .collect();
        let mut model = Self::zeroed(&cfg)?;
        model.set_flat_params(&params)?;
        Ok(model)
    }

    fn zeroed(cfg: &NetworkConfig) -> Result<Self, ModelError> {
        cfg.validate()?;
        let mut conv = Vec::new();
        let mut n_prev = cfg.input_channels;
        for l in &cfg.op_layers {
            conv.push(GenerativeConv1d::zeros(n_prev, l.neurons, l.kernel, l.order)?);
            n_prev = l.neurons;
        }
        Ok(Self {
            config: cfg.clone(),
            conv,
            hidden: DenseLayer::zeros(n_prev, cfg.mlp_hidden)?,
            output: DenseLayer::zeros(cfg.mlp_hidden, cfg.n_classes)?,
        })
    }
}

/// Per-layer counts with their total.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerTally {
    pub per_layer: Vec<u64>,
    pub total: u64,
}

impl LayerTally {
    fn from_layers(per_layer: Vec<u64>) -> Self {
        let total = per_layer.iter().sum();
        Self { per_layer, total }
    }
}

/// Multiply-accumulates of one operational layer: `N_prev * M_out * K * Q * N`.
pub fn conv_layer_macs(n_prev: u64, m_out: u64, kernel: u64, order: u64, neurons: u64) -> u64 {
    n_prev * m_out * kernel * order * neurons
}

/// Trainable parameters per layer: `N_prev*K*Q` weights per neuron plus one
/// bias, then both dense layers.
pub fn count_params(cfg: &NetworkConfig) -> LayerTally {
    let mut per_layer = Vec::new();
    let mut n_prev = cfg.input_channels as u64;
    for l in &cfg.op_layers {
        let n = l.neurons as u64;
        per_layer.push(n_prev * l.kernel as u64 * l.order as u64 * n + n);
        n_prev = n;
    }
    let h = cfg.mlp_hidden as u64;
    let c = cfg.n_classes as u64;
    per_layer.push(n_prev * h + h);
    per_layer.push(h * c + c);
    LayerTally::from_layers(per_layer)
}

/// MAC count per layer, biases and exponentiation excluded.
///
/// Convolution outputs are counted at their valid length `M_in - K + 1`,
/// and each following layer sees the pooled valid length.
pub fn count_macs(cfg: &NetworkConfig) -> LayerTally {
    let mut per_layer = Vec::new();
    let mut n_prev = cfg.input_channels as u64;
    let mut m = cfg.frame_len as u64;
    for l in &cfg.op_layers {
        let k = l.kernel as u64;
        let m_out = (m + 1).saturating_sub(k);
        per_layer.push(conv_layer_macs(n_prev, m_out, k, l.order as u64, l.neurons as u64));
        m = m_out / l.pool as u64;
        n_prev = l.neurons as u64;
    }
    let h = cfg.mlp_hidden as u64;
    per_layer.push(n_prev * h);
    per_layer.push(h * cfg.n_classes as u64);
    LayerTally::from_layers(per_layer)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComplexityReport {
    pub label: String,
    pub layer_names: Vec<String>,
    pub params: LayerTally,
    pub macs: LayerTally,
}

pub fn complexity(cfg: &NetworkConfig) -> ComplexityReport {
    let mut layer_names: Vec<String> = (1..=cfg.op_layers.len()).map(|j| format!("op{j}")).collect();
    layer_names.push("dense1".into());
    layer_names.push("dense2".into());
    ComplexityReport {
        label: cfg.label(),
        layer_names,
        params: count_params(cfg),
        macs: count_macs(cfg),
    }
}

impl ComplexityReport {
    pub fn total_macs_millions(&self) -> f64 {
        self.macs.total as f64 / 1e6
    }

    pub fn to_table(&self) -> String {
        let mut out = format!("network {}\n", self.label);
        let _ = writeln!(out, "{:<8} {:>10} {:>12}", "layer", "PARs", "MACs");
        for (j, name) in self.layer_names.iter().enumerate() {
            let _ = writeln!(
                out,
                "{:<8} {:>10} {:>12}",
                name, self.params.per_layer[j], self.macs.per_layer[j]
            );
        }
        let _ = writeln!(out, "{:<8} {:>10} {:>12}", "total", self.params.total, self.macs.total);
        let _ = writeln!(out, "MACs (M) {:.3}", self.total_macs_millions());
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("layer,pars,macs\n");
        for (j, name) in self.layer_names.iter().enumerate() {
            let _ = writeln!(out, "{},{},{}", name, self.params.per_layer[j], self.macs.per_layer[j]);
        }
        let _ = writeln!(out, "total,{},{}", self.params.total, self.macs.total);
        out
    }
}
