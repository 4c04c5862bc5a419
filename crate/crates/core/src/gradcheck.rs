//! Central finite-difference checks of every layer's analytic gradients.
//!
//! Each check builds a random small instance, forms a scalar objective
//! (a random linear functional of the layer output, or the MSE loss for a
//! whole model) and compares every analytic partial derivative against
//! `(L(p + h) - L(p - h)) / 2h`.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{NetworkConfig, OpLayerSpec, SelfOnn};
use crate::nn::{
    global_pool_backward, global_pool_forward, maxpool_backward, maxpool_forward, tanh_backward,
    tanh_forward, DenseLayer, FeatureMaps, GenerativeConv1d,
};
use crate::train::{derive_seed, mse_loss};

pub const FD_STEP: f64 = 1e-5;
pub const REL_TOLERANCE: f64 = 1e-4;
/// Magnitudes below this are compared absolutely, since FD noise dominates there.
pub const REL_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// `(f(x + h) - f(x - h)) / 2h`; the caller restores whatever `f` mutated.
fn central_difference(x: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    (f(x + FD_STEP) - f(x - FD_STEP)) / (2.0 * FD_STEP)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerCheck {
    pub layer: &'static str,
    pub instances: usize,
    pub partials: usize,
    pub max_rel_err: f64,
}

impl LayerCheck {
    pub fn passed(&self) -> bool {
        self.max_rel_err < REL_TOLERANCE
    }
}

struct Tally {
    partials: usize,
    worst: f64,
}

impl Tally {
    fn new() -> Self {
        Self { partials: 0, worst: 0.0 }
    }

    fn add(&mut self, analytic: f64, numeric: f64) {
        self.partials += 1;
        self.worst = self.worst.max(relative_error(analytic, numeric));
    }
}

fn uniform_vec(rng: &mut ChaCha8Rng, n: usize, bound: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-bound..bound)).collect()
}

/// Values in [-1, 1) with pairwise gaps of at least `0.5 / n`, so a
/// finite-difference step never changes which element is the maximum.
fn separated_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut slots: Vec<usize> = (0..n).collect();
    slots.shuffle(rng);
    let width = 2.0 / n as f64;
    slots
        .into_iter()
        .map(|s| -1.0 + width * (s as f64 + rng.random_range(0.25..0.75)))
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn conv_instance(rng: &mut ChaCha8Rng, tally: &mut Tally) {
    let n_prev = rng.random_range(1..=3);
    let n = rng.random_range(1..=3);
    let k = rng.random_range(1..=5);
    let q = rng.random_range(1..=4);
    let m = rng.random_range(1..=16);
    let mut layer = GenerativeConv1d::<f64>::random(n_prev, n, k, q, rng).expect("positive dims");
    for b in layer.biases_mut() {
        *b = rng.random_range(-0.5..0.5);
    }
    let mut input = FeatureMaps::from_vec(n_prev, m, uniform_vec(rng, n_prev * m, 1.0));
    let coeffs = uniform_vec(rng, n * m, 1.0);
    let (_, cache) = layer.forward(&input).expect("shapes");
    let g = layer
        .backward(&cache, &FeatureMaps::from_vec(n, m, coeffs.clone()), true)
        .expect("shapes");
    let objective = |l: &GenerativeConv1d<f64>, x: &FeatureMaps<f64>| dot(l.forward(x).expect("shapes").0.as_slice(), &coeffs);

    for j in 0..layer.weights().len() {
        let mut probe = layer.clone();
        let num = central_difference(layer.weights()[j], |v| {
            probe.weights_mut()[j] = v;
            objective(&probe, &input)
        });
        tally.add(g.weights[j], num);
    }
    for j in 0..n {
        let mut probe = layer.clone();
        let num = central_difference(layer.biases()[j], |v| {
            probe.biases_mut()[j] = v;
            objective(&probe, &input)
        });
        tally.add(g.biases[j], num);
    }
    let gi = g.input.expect("requested");
    for j in 0..n_prev * m {
        let orig = input.as_slice()[j];
        let num = central_difference(orig, |v| {
            input.as_mut_slice()[j] = v;
            objective(&layer, &input)
        });
        input.as_mut_slice()[j] = orig;
        tally.add(gi.as_slice()[j], num);
    }
}

fn dense_instance(rng: &mut ChaCha8Rng, tally: &mut Tally) {
    let n_in = rng.random_range(1..=8);
    let n_out = rng.random_range(1..=6);
    let mut layer = DenseLayer::<f64>::random(n_in, n_out, rng).expect("positive dims");
    for b in layer.biases_mut() {
        *b = rng.random_range(-0.5..0.5);
    }
    let mut x = uniform_vec(rng, n_in, 1.0);
    let coeffs = uniform_vec(rng, n_out, 1.0);
    let g = layer.backward(&x, &coeffs).expect("shapes");
    let objective = |l: &DenseLayer<f64>, x: &[f64]| dot(&l.forward(x).expect("shapes"), &coeffs);
    for j in 0..layer.weights().len() {
        let mut probe = layer.clone();
        let num = central_difference(layer.weights()[j], |v| {
            probe.weights_mut()[j] = v;
            objective(&probe, &x)
        });
        tally.add(g.weights[j], num);
    }
    for j in 0..n_out {
        let mut probe = layer.clone();
        let num = central_difference(layer.biases()[j], |v| {
            probe.biases_mut()[j] = v;
            objective(&probe, &x)
        });
        tally.add(g.biases[j], num);
    }
    let gi = g.input.expect("dense returns input grad");
    for j in 0..n_in {
        let orig = x[j];
        let num = central_difference(orig, |v| {
            x[j] = v;
            objective(&layer, &x)
        });
        x[j] = orig;
        tally.add(gi.as_slice()[j], num);
    }
}

fn tanh_instance(rng: &mut ChaCha8Rng, tally: &mut Tally) {
    let n = rng.random_range(1..=16);
    let mut x = uniform_vec(rng, n, 3.0);
    let coeffs = uniform_vec(rng, n, 1.0);
    let y = tanh_forward(&x);
    let g = tanh_backward(&y, &coeffs);
    for j in 0..n {
        let orig = x[j];
        let num = central_difference(orig, |v| {
            x[j] = v;
            dot(&tanh_forward(&x), &coeffs)
        });
        x[j] = orig;
        tally.add(g[j], num);
    }
}

fn maxpool_instance(rng: &mut ChaCha8Rng, tally: &mut Tally) {
    let neurons = rng.random_range(1..=3);
    let factor = rng.random_range(1..=5);
    let m = rng.random_range(factor..=factor * 6);
    let mut input = FeatureMaps::from_vec(neurons, m, separated_vec(rng, neurons * m));
    let (out, idx) = maxpool_forward(&input, factor).expect("m >= factor");
    let coeffs = uniform_vec(rng, out.as_slice().len(), 1.0);
    let g = maxpool_backward(&idx, &FeatureMaps::from_vec(neurons, out.len(), coeffs.clone())).expect("shapes");
    for j in 0..neurons * m {
        let orig = input.as_slice()[j];
        let num = central_difference(orig, |v| {
            input.as_mut_slice()[j] = v;
            dot(maxpool_forward(&input, factor).expect("shapes").0.as_slice(), &coeffs)
        });
        input.as_mut_slice()[j] = orig;
        tally.add(g.as_slice()[j], num);
    }
}

fn global_pool_instance(rng: &mut ChaCha8Rng, tally: &mut Tally) {
    let neurons = rng.random_range(1..=4);
    let m = rng.random_range(1..=12);
    let mut input = FeatureMaps::from_vec(neurons, m, separated_vec(rng, neurons * m));
    let (_, idx) = global_pool_forward(&input).expect("non-empty");
    let coeffs = uniform_vec(rng, neurons, 1.0);
    let g = global_pool_backward(&idx, &coeffs).expect("shapes");
    for j in 0..neurons * m {
        let orig = input.as_slice()[j];
        let num = central_difference(orig, |v| {
            input.as_mut_slice()[j] = v;
            dot(&global_pool_forward(&input).expect("shapes").0, &coeffs)
        });
        input.as_mut_slice()[j] = orig;
        tally.add(g.as_slice()[j], num);
    }
}

/// Small end-to-end network under MSE loss: every parameter and input sample.
fn model_instance(rng: &mut ChaCha8Rng, tally: &mut Tally) {
    let q = rng.random_range(1..=4);
    let cfg = NetworkConfig {
        input_channels: 2,
        frame_len: 24,
        op_layers: vec![
            OpLayerSpec {
                neurons: 3,
                kernel: 5,
                pool: 2,
                order: q,
            },
            OpLayerSpec {
                neurons: 2,
                kernel: 3,
                pool: 3,
                order: q,
            },
        ],
        mlp_hidden: 4,
        n_classes: 4,
    };
    let mut model = SelfOnn::<f64>::build(&cfg, rng.random()).expect("valid config");
    for c in model.conv_layers_mut() {
        for b in c.biases_mut() {
            *b = rng.random_range(-0.3..0.3);
        }
    }
    let mut input = FeatureMaps::from_vec(2, 24, uniform_vec(rng, 48, 1.0));
    let class = rng.random_range(0..4);
    let loss = |m: &SelfOnn<f64>, x: &FeatureMaps<f64>| {
        let t = m.forward_maps(x).expect("shapes");
        mse_loss(t.scores(), class).0
    };
    let trace = model.forward_maps(&input).expect("shapes");
    let (_, sg) = mse_loss(trace.scores(), class);
    let grads = model.backward(&trace, &sg, true).expect("shapes");

    let mut analytic = Vec::new();
    for g in &grads.conv {
        analytic.push(g.weights.clone());
        analytic.push(g.biases.clone());
    }
    analytic.push(grads.hidden.weights.clone());
    analytic.push(grads.hidden.biases.clone());
    analytic.push(grads.output.weights.clone());
    analytic.push(grads.output.biases.clone());

    let n_conv = model.conv_layers().len();
    for (slot, a) in analytic.iter().enumerate() {
        for j in 0..a.len() {
            let mut probe = model.clone();
            let orig = param_slot(&mut probe, n_conv, slot)[j];
            let num = central_difference(orig, |v| {
                param_slot(&mut probe, n_conv, slot)[j] = v;
                loss(&probe, &input)
            });
            tally.add(a[j], num);
        }
    }
    let gi = grads.input.expect("requested");
    for j in 0..48 {
        let orig = input.as_slice()[j];
        let num = central_difference(orig, |v| {
            input.as_mut_slice()[j] = v;
            loss(&model, &input)
        });
        input.as_mut_slice()[j] = orig;
        tally.add(gi.as_slice()[j], num);
    }
}

fn param_slot(model: &mut SelfOnn<f64>, n_conv: usize, slot: usize) -> &mut [f64] {
    if slot < 2 * n_conv {
        let layer = &mut model.conv_layers_mut()[slot / 2];
        if slot.is_multiple_of(2) {
            layer.weights_mut()
        } else {
            layer.biases_mut()
        }
    } else {
        match slot - 2 * n_conv {
            0 => model.hidden_layer_mut().weights_mut(),
            1 => model.hidden_layer_mut().biases_mut(),
            2 => model.output_layer_mut().weights_mut(),
            _ => model.output_layer_mut().biases_mut(),
        }
    }
}

type Instance = fn(&mut ChaCha8Rng, &mut Tally);

const CHECKS: [(&str, Instance); 6] = [
    ("generative_conv", conv_instance),
    ("dense", dense_instance),
    ("tanh", tanh_instance),
    ("maxpool", maxpool_instance),
    ("global_pool", global_pool_instance),
    ("model", model_instance),
];

/// Runs `instances` random instances of every layer type.
pub fn check_all(seed: u64, instances: usize) -> Vec<LayerCheck> {
    CHECKS
        .iter()
        .enumerate()
        .map(|(j, (name, f))| {
            let mut tally = Tally::new();
            for inst in 0..instances {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[j as u64, inst as u64]));
                f(&mut rng, &mut tally);
            }
            LayerCheck {
                layer: name,
                instances,
                partials: tally.partials,
                max_rel_err: tally.worst,
            }
        })
        .collect()
}

pub fn render(checks: &[LayerCheck]) -> String {
    let mut out = String::new();
    for c in checks {
        let _ = writeln!(
            out,
            "{:<16} instances {:>4}  partials {:>7}  max rel err {:.3e}  {}",
            c.layer,
            c.instances,
            c.partials,
            c.max_rel_err,
            if c.passed() { "ok" } else { "FAIL" }
        );
    }
    out
}
