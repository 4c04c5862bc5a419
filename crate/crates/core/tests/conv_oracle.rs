//! A first-order generative layer is a plain convolution layer.

mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sonn_core::nn::{ConvStrategy, FeatureMaps, GenerativeConv1d};

use common::{first_order_deviation, PlainConv};

const TOL: f64 = 1e-12;
const INSTANCES: usize = 100;

#[test]
fn first_order_matches_plain_convolution_direct() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE);
    for n in 0..INSTANCES {
        let d = first_order_deviation(&mut rng, ConvStrategy::Direct);
        assert!(d <= TOL, "instance {n}: deviation {d:e}");
    }
}

#[test]
fn first_order_matches_plain_convolution_spectral() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xBEEF);
    for n in 0..INSTANCES {
        let d = first_order_deviation(&mut rng, ConvStrategy::Spectral);
        assert!(d <= TOL, "instance {n}: deviation {d:e}");
    }
}

#[test]
fn oracle_hand_example() {
    // two taps [0.5, 0.5] with K/2 = 1 read y[m-1] and y[m]
    let oracle = PlainConv {
        n_in: 1,
        n_out: 1,
        k: 2,
        w: vec![vec![vec![0.5, 0.5]]],
        b: vec![0.1],
    };
    let x = oracle.forward(&[vec![1.0, 2.0, 3.0]]);
    assert_eq!(x, vec![vec![0.6, 1.6, 2.6]]);

    let mut layer = GenerativeConv1d::<f64>::zeros(1, 1, 2, 1).unwrap();
    layer.set_weight(0, 0, 0, 0, 0.5);
    layer.set_weight(0, 0, 1, 0, 0.5);
    layer.biases_mut()[0] = 0.1;
    let (out, _) = layer.forward(&FeatureMaps::from_vec(1, 3, vec![1.0, 2.0, 3.0])).unwrap();
    for (a, b) in out.row(0).iter().zip(&x[0]) {
        assert!((a - b).abs() < 1e-15);
    }
}
