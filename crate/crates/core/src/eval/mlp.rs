//! Three-layer perceptron regressor (input, one ReLU hidden layer, linear
//! 2-D output) trained with mini-batch SGD plus momentum on squared error.
//!
//! Inputs and targets are standardized with training-set statistics before
//! training; predictions are mapped back to meters.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::seeded_rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MlpSpec {
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for MlpSpec {
    fn default() -> Self {
        Self {
            hidden: 128,
            epochs: 200,
            learning_rate: 1e-3,
            momentum: 0.9,
            batch_size: 64,
            seed: 0,
        }
    }
}

impl MlpSpec {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::invalid("hidden width, epochs and batch size must be positive"));
        }
        if !(self.learning_rate > 0.0) || !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid("learning rate must be > 0 and momentum in [0, 1)"));
        }
        Ok(())
    }
}

/// Network weights. `w1` is `hidden × n_in`, `w2` is `2 × hidden`, both row
/// major.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    n_in: usize,
    hidden: usize,
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: [f64; 2],
}

impl Mlp {
    /// He-uniform hidden weights, Glorot-uniform output weights, zero biases.
    pub fn new(n_in: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = seeded_rng(seed);
        let l1 = (6.0 / n_in as f64).sqrt();
        let l2 = (6.0 / (hidden + 2) as f64).sqrt();
        let w1 = (0..hidden * n_in).map(|_| rng.random_range(-l1..l1)).collect();
        let w2 = (0..2 * hidden).map(|_| rng.random_range(-l2..l2)).collect();
        Self {
            n_in,
            hidden,
            w1,
            b1: vec![0.0; hidden],
            w2,
            b2: [0.0; 2],
        }
    }

    pub fn n_params(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + 2
    }

    /// All parameters in the order w1, b1, w2, b2.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.n_params());
        p.extend(&self.w1);
        p.extend(&self.b1);
        p.extend(&self.w2);
        p.extend(self.b2);
        p
    }

    pub fn set_params(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.n_params());
        let (a, rest) = p.split_at(self.w1.len());
        let (b, rest) = rest.split_at(self.b1.len());
        let (c, d) = rest.split_at(self.w2.len());
        self.w1.copy_from_slice(a);
        self.b1.copy_from_slice(b);
        self.w2.copy_from_slice(c);
        self.b2.copy_from_slice(d);
    }

    fn hidden_act(&self, x: &[f64], out: &mut [f64]) {
        for (h, o) in out.iter_mut().enumerate() {
            let row = &self.w1[h * self.n_in..(h + 1) * self.n_in];
            let z: f64 = self.b1[h] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
            *o = z.max(0.0);
        }
    }

    pub fn predict(&self, x: &[f64]) -> [f64; 2] {
        let mut a = vec![0.0; self.hidden];
        self.hidden_act(x, &mut a);
        self.output(&a)
    }

    fn output(&self, a: &[f64]) -> [f64; 2] {
        let mut y = self.b2;
        for (o, yo) in y.iter_mut().enumerate() {
            *yo += self.w2[o * self.hidden..(o + 1) * self.hidden]
                .iter()
                .zip(a)
                .map(|(w, v)| w * v)
                .sum::<f64>();
        }
        y
    }

    /// Mean over the batch of `½‖f(x) − t‖²` and its gradient (same layout
    /// as [`Mlp::params`]).
    pub fn loss_and_grad(&self, xs: &[&[f64]], ts: &[[f64; 2]]) -> (f64, Vec<f64>) {
        let mut g = vec![0.0; self.n_params()];
        let (gw1, rest) = g.split_at_mut(self.w1.len());
        let (gb1, rest) = rest.split_at_mut(self.b1.len());
        let (gw2, gb2) = rest.split_at_mut(self.w2.len());
        let scale = 1.0 / xs.len() as f64;
        let mut a = vec![0.0; self.hidden];
        let mut loss = 0.0;
        for (x, t) in xs.iter().zip(ts) {
            self.hidden_act(x, &mut a);
            let y = self.output(&a);
            let e = [(y[0] - t[0]) * scale, (y[1] - t[1]) * scale];
            loss += 0.5 * ((y[0] - t[0]).powi(2) + (y[1] - t[1]).powi(2)) * scale;
            for o in 0..2 {
                gb2[o] += e[o];
                for h in 0..self.hidden {
                    gw2[o * self.hidden + h] += e[o] * a[h];
                }
            }
            for h in 0..self.hidden {
                if a[h] <= 0.0 {
                    continue;
                }
                let d = e[0] * self.w2[h] + e[1] * self.w2[self.hidden + h];
                gb1[h] += d;
                for (gw, v) in gw1[h * self.n_in..(h + 1) * self.n_in].iter_mut().zip(x.iter()) {
                    *gw += d * v;
                }
            }
        }
        (loss, g)
    }
}

/// Per-column mean and standard deviation; constant columns get scale 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let d = rows.first().map_or(0, Vec::len);
        let n = rows.len() as f64;
        let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
        let scale = (0..d)
            .map(|j| {
                let v = rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n;
                if v > 1e-24 {
                    v.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter().zip(&self.mean).zip(&self.scale).map(|((v, m), s)| (v - m) / s).collect()
    }

    pub fn invert(&self, row: &[f64]) -> Vec<f64> {
        row.iter().zip(&self.mean).zip(&self.scale).map(|((v, m), s)| v * s + m).collect()
    }
}

/// Trained network together with its input/output normalization.
#[derive(Debug, Clone)]
pub struct Positioner {
    pub net: Mlp,
    inputs: Standardizer,
    targets: Standardizer,
}

impl Positioner {
    pub fn train(features: &[Vec<f64>], positions: &[[f64; 2]], spec: &MlpSpec) -> Result<Self> {
        spec.validate()?;
        if features.is_empty() || features.len() != positions.len() {
            return Err(Error::invalid("training set is empty or misaligned"));
        }
        let n_in = features[0].len();
        if n_in == 0 || features.iter().any(|f| f.len() != n_in) {
            return Err(Error::invalid("feature vectors have inconsistent length"));
        }
        let inputs = Standardizer::fit(features);
        let pos_rows: Vec<Vec<f64>> = positions.iter().map(|p| p.to_vec()).collect();
        let targets = Standardizer::fit(&pos_rows);
        let xs: Vec<Vec<f64>> = features.iter().map(|f| inputs.apply(f)).collect();
        let ts: Vec<[f64; 2]> = pos_rows
            .iter()
            .map(|p| {
                let t = targets.apply(p);
                [t[0], t[1]]
            })
            .collect();

        let mut net = Mlp::new(n_in, spec.hidden, spec.seed);
        let mut params = net.params();
        let mut velocity = vec![0.0; params.len()];
        let mut rng = seeded_rng(spec.seed ^ 0x05EE_D0FB_A7C4);
        let mut order: Vec<usize> = (0..xs.len()).collect();
        for _ in 0..spec.epochs {
            order.shuffle(&mut rng);
            for chunk in order.chunks(spec.batch_size) {
                let bx: Vec<&[f64]> = chunk.iter().map(|&i| xs[i].as_slice()).collect();
                let bt: Vec<[f64; 2]> = chunk.iter().map(|&i| ts[i]).collect();
                let (_, g) = net.loss_and_grad(&bx, &bt);
                for ((p, v), gi) in params.iter_mut().zip(velocity.iter_mut()).zip(&g) {
                    *v = spec.momentum * *v - spec.learning_rate * gi;
                    *p += *v;
                }
                net.set_params(&params);
            }
        }
        Ok(Self { net, inputs, targets })
    }

    pub fn predict(&self, features: &[f64]) -> [f64; 2] {
        let y = self.net.predict(&self.inputs.apply(features));
        let p = self.targets.invert(&y);
        [p[0], p[1]]
    }
}
