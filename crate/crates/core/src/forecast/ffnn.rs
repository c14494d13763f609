//! One-hidden-layer sigmoid network over the window.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::net::{Network, Normalizer};
use crate::numerics::substream;
use crate::{Error, Result};

const INIT_DOMAIN: u64 = 0x4646_4e4e;

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Parameters are stored flat: hidden weights (`hidden × window`, row per
/// unit), hidden biases, output weights, output bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ffnn {
    pub window: usize,
    pub hidden: usize,
    pub params: Vec<f64>,
    pub normalizer: Normalizer,
}

impl Ffnn {
    pub fn param_count(window: usize, hidden: usize) -> usize {
        hidden * window + 2 * hidden + 1
    }

    /// Glorot-uniform weights, zero biases.
    pub fn random(window: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = substream(seed, INIT_DOMAIN, 0);
        let mut params = vec![0.0; Self::param_count(window, hidden)];
        let a1 = (6.0 / (window + hidden) as f64).sqrt();
        for p in &mut params[..hidden * window] {
            *p = rng.random_range(-a1..a1);
        }
        let a2 = (6.0 / (hidden + 1) as f64).sqrt();
        let out = hidden * window + hidden;
        for p in &mut params[out..out + hidden] {
            *p = rng.random_range(-a2..a2);
        }
        Self { window, hidden, params, normalizer: Normalizer { mean: 0.0, std: 1.0 } }
    }

    pub fn from_params(
        window: usize,
        hidden: usize,
        params: Vec<f64>,
        normalizer: Normalizer,
    ) -> Result<Self> {
        let expected = Self::param_count(window, hidden);
        if params.len() != expected {
            return Err(Error::DimensionMismatch { expected, actual: params.len() });
        }
        Ok(Self { window, hidden, params, normalizer })
    }

    /// Forecast in data units from a raw window.
    pub fn predict(&self, window: &[f64]) -> f64 {
        let z: Vec<f64> = window.iter().map(|&v| self.normalizer.apply(v)).collect();
        self.normalizer.invert(self.forward(&z))
    }

    fn split(&self) -> (&[f64], &[f64], &[f64], f64) {
        let (w, h) = (self.window, self.hidden);
        let (w1, rest) = self.params.split_at(h * w);
        let (b1, rest) = rest.split_at(h);
        let (w2, b2) = rest.split_at(h);
        (w1, b1, w2, b2[0])
    }
}

impl Network for Ffnn {
    fn window(&self) -> usize {
        self.window
    }

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn forward(&self, x: &[f64]) -> f64 {
        let (w1, b1, w2, b2) = self.split();
        let w = self.window;
        b2 + (0..self.hidden)
            .map(|k| {
                let z = b1[k] + w1[k * w..(k + 1) * w].iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                w2[k] * sigmoid(z)
            })
            .sum::<f64>()
    }

    fn accumulate_gradient(&self, inputs: &[f64], labels: &[f64], grad: &mut [f64]) -> f64 {
        let (w, h) = (self.window, self.hidden);
        let (w1, b1, w2, b2) = self.split();
        let n = labels.len() as f64;
        let mut act = vec![0.0; h];
        let mut loss = 0.0;
        for (i, &y) in labels.iter().enumerate() {
            let x = &inputs[i * w..(i + 1) * w];
            let mut out = b2;
            for k in 0..h {
                let z = b1[k] + w1[k * w..(k + 1) * w].iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                act[k] = sigmoid(z);
                out += w2[k] * act[k];
            }
            let err = out - y;
            loss += err * err;
            let dy = 2.0 * err / n;
            let (g1, rest) = grad.split_at_mut(h * w);
            let (gb1, rest) = rest.split_at_mut(h);
            let (gw2, gb2) = rest.split_at_mut(h);
            gb2[0] += dy;
            for k in 0..h {
                gw2[k] += dy * act[k];
                let dz = dy * w2[k] * act[k] * (1.0 - act[k]);
                gb1[k] += dz;
                for (g, xv) in g1[k * w..(k + 1) * w].iter_mut().zip(x) {
                    *g += dz * xv;
                }
            }
        }
        loss / n
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forecast::net::{numerical_gradient, relative_error};

    #[test]
    fn zero_network_outputs_denormalized_bias() {
        let norm = Normalizer { mean: 40.0, std: 2.0 };
        let mut params = vec![0.0; Ffnn::param_count(5, 8)];
        *params.last_mut().unwrap() = 0.75;
        let net = Ffnn::from_params(5, 8, params, norm).unwrap();
        // Hidden units all output sigmoid(0) = 0.5 but carry zero weight.
        assert_eq!(net.predict(&[1.0, -3.0, 7.0, 0.0, 2.0]), 0.75 * 2.0 + 40.0);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for seed in 0..5 {
            let net = Ffnn::random(4, 3, seed);
            let mut rng = substream(seed, 9, 9);
            let x: Vec<f64> = (0..20).map(|_| rng.random_range(-2.0..2.0)).collect();
            let y: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (_, g) = net.loss_and_gradient(&x, &y);
            let fd = numerical_gradient(&net, &x, &y, 1e-5);
            assert!(relative_error(&g, &fd) < 1e-7, "{}", relative_error(&g, &fd));
        }
    }
}
