//! Independent reference implementations shared by integration tests.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use sonn_core::nn::{ConvStrategy, FeatureMaps, GenerativeConv1d};

/// Textbook 'same' cross-correlation: `x[k][m] = b[k] + sum_i sum_r w[i][k][r] * y[i][m + r - K/2]`.
pub struct PlainConv {
    pub n_in: usize,
    pub n_out: usize,
    pub k: usize,
    /// `w[i][k][r]`
    pub w: Vec<Vec<Vec<f64>>>,
    pub b: Vec<f64>,
}

impl PlainConv {
    fn tap(&self, y: &[Vec<f64>], i: usize, m: usize, r: usize) -> Option<usize> {
        let t = m as isize + r as isize - (self.k / 2) as isize;
        (t >= 0 && (t as usize) < y[i].len()).then_some(t as usize)
    }

    pub fn forward(&self, y: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let len = y[0].len();
        let mut x = vec![vec![0.0; len]; self.n_out];
        for k in 0..self.n_out {
            for m in 0..len {
                let mut s = self.b[k];
                for i in 0..self.n_in {
                    for r in 0..self.k {
                        if let Some(t) = self.tap(y, i, m, r) {
                            s += self.w[i][k][r] * y[i][t];
                        }
                    }
                }
                x[k][m] = s;
            }
        }
        x
    }

    /// Returns `(dw[i][k][r], db[k], dy[i][t])`.
    #[allow(clippy::type_complexity)]
    pub fn backward(&self, y: &[Vec<f64>], g: &[Vec<f64>]) -> (Vec<Vec<Vec<f64>>>, Vec<f64>, Vec<Vec<f64>>) {
        let len = y[0].len();
        let mut dw = vec![vec![vec![0.0; self.k]; self.n_out]; self.n_in];
        let mut db = vec![0.0; self.n_out];
        let mut dy = vec![vec![0.0; len]; self.n_in];
        for k in 0..self.n_out {
            for m in 0..len {
                db[k] += g[k][m];
                for i in 0..self.n_in {
                    for r in 0..self.k {
                        if let Some(t) = self.tap(y, i, m, r) {
                            dw[i][k][r] += g[k][m] * y[i][t];
                            dy[i][t] += g[k][m] * self.w[i][k][r];
                        }
                    }
                }
            }
        }
        (dw, db, dy)
    }
}

fn random_maps(rng: &mut ChaCha8Rng, n: usize, len: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
}

fn flatten(rows: &[Vec<f64>]) -> FeatureMaps<f64> {
    FeatureMaps::from_rows(rows)
}

/// Builds a random first-order layer and compares it with [`PlainConv`];
/// returns the largest absolute deviation over outputs and gradients.
pub fn first_order_deviation(rng: &mut ChaCha8Rng, strategy: ConvStrategy) -> f64 {
    let mut worst = 0.0f64;
    let mut see = |a: f64, b: f64| worst = worst.max((a - b).abs());
    let n_in = rng.random_range(1..=4);
    let n_out = rng.random_range(1..=4);
    let k = rng.random_range(1..=21);
    let len = rng.random_range(1..=40);

    let mut layer = GenerativeConv1d::<f64>::random(n_in, n_out, k, 1, rng).unwrap();
    for b in layer.biases_mut() {
        *b = rng.random_range(-0.5..0.5);
    }
    let oracle = PlainConv {
        n_in,
        n_out,
        k,
        w: (0..n_in)
            .map(|i| (0..n_out).map(|o| (0..k).map(|r| layer.weight(i, o, r, 0)).collect()).collect())
            .collect(),
        b: layer.biases().to_vec(),
    };

    let y = random_maps(rng, n_in, len);
    let g = random_maps(rng, n_out, len);
    let (out, cache) = layer.forward_with(&flatten(&y), strategy).unwrap();
    let expect = oracle.forward(&y);
    for o in 0..n_out {
        for m in 0..len {
            see(out.get(o, m), expect[o][m]);
        }
    }

    let grads = layer.backward(&cache, &flatten(&g), true).unwrap();
    let (dw, db, dy) = oracle.backward(&y, &g);
    for i in 0..n_in {
        for o in 0..n_out {
            for r in 0..k {
                let got = grads.weights[layer.weight_index(i, o, r, 0)];
                see(got, dw[i][o][r]);
            }
        }
    }
    for o in 0..n_out {
        see(grads.biases[o], db[o]);
    }
    let dy_got = grads.input.unwrap();
    for i in 0..n_in {
        for t in 0..len {
            see(dy_got.get(i, t), dy[i][t]);
        }
    }
    worst
}
