//! Shared pieces of the two neural predictors: configuration, z-score
//! normalization and the momentum SGD loop with early stopping.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::numerics::substream;
use crate::{Error, Result};

const SHUFFLE_DOMAIN: u64 = 0x5348_5546;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetConfig {
    pub hidden: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Chronological tail of the training pairs held out for early stopping.
    pub validation_fraction: f64,
    /// Epochs without a validation improvement before training stops.
    pub patience: usize,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            hidden: 8,
            learning_rate: 0.01,
            momentum: 0.9,
            epochs: 500,
            batch_size: 32,
            validation_fraction: 0.2,
            patience: 20,
        }
    }
}

impl NetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::config("hidden, epochs and batch_size must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::config("momentum must lie in [0, 1)"));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::config("validation_fraction must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Z-score constants taken from the training series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: f64,
    pub std: f64,
}

impl Normalizer {
    pub fn fit(series: &[f64]) -> Result<Self> {
        if series.is_empty() {
            return Err(Error::insufficient("normalizer needs data"));
        }
        let n = series.len() as f64;
        let mean = series.iter().sum::<f64>() / n;
        let std = (series.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        if std == 0.0 || !std.is_finite() {
            return Err(Error::ZeroVariance);
        }
        Ok(Self { mean, std })
    }

    pub fn apply(&self, v: f64) -> f64 {
        (v - self.mean) / self.std
    }

    pub fn invert(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }
}

/// A differentiable one-output regressor over fixed-length windows with a
/// flat parameter vector.
pub trait Network {
    fn window(&self) -> usize;
    fn params(&self) -> &[f64];
    fn params_mut(&mut self) -> &mut [f64];
    fn forward(&self, input: &[f64]) -> f64;
    /// Mean squared error over the rows of `inputs`; adds its gradient to
    /// `grad`.
    fn accumulate_gradient(&self, inputs: &[f64], labels: &[f64], grad: &mut [f64]) -> f64;

    /// Mean squared error and its gradient.
    fn loss_and_gradient(&self, inputs: &[f64], labels: &[f64]) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.params().len()];
        let loss = self.accumulate_gradient(inputs, labels, &mut grad);
        (loss, grad)
    }

    fn loss(&self, inputs: &[f64], labels: &[f64]) -> f64 {
        let w = self.window();
        labels
            .iter()
            .enumerate()
            .map(|(i, y)| (self.forward(&inputs[i * w..(i + 1) * w]) - y).powi(2))
            .sum::<f64>()
            / labels.len() as f64
    }
}

/// Outcome of [`train`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub train_loss: f64,
    pub validation_loss: f64,
}

/// Mini-batch SGD with momentum on normalized pairs. The chronological tail
/// of the pairs is held out; the parameters with the lowest validation loss
/// are kept.
pub fn train<N: Network>(
    net: &mut N,
    inputs: &[f64],
    labels: &[f64],
    config: &NetConfig,
    seed: u64,
) -> Result<TrainReport> {
    config.validate()?;
    let w = net.window();
    let n = labels.len();
    let n_val = ((n as f64) * config.validation_fraction).round() as usize;
    let n_fit = n - n_val;
    if n_fit < 2 {
        return Err(Error::insufficient("too few training pairs for gradient descent"));
    }
    let (fit_x, val_x) = inputs.split_at(n_fit * w);
    let (fit_y, val_y) = labels.split_at(n_fit);
    let mut rng = substream(seed, SHUFFLE_DOMAIN, 0);
    let mut order: Vec<usize> = (0..n_fit).collect();
    let n_params = net.params().len();
    let mut velocity = vec![0.0; n_params];
    let mut grad = vec![0.0; n_params];
    let mut batch_x = Vec::with_capacity(config.batch_size * w);
    let mut batch_y = Vec::with_capacity(config.batch_size);
    let score = |net: &N| if n_val > 0 { net.loss(val_x, val_y) } else { net.loss(fit_x, fit_y) };
    let mut best = (net.params().to_vec(), score(net), 0usize);
    let mut epochs_run = 0;
    for epoch in 1..=config.epochs {
        epochs_run = epoch;
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            batch_x.clear();
            batch_y.clear();
            for &i in chunk {
                batch_x.extend_from_slice(&fit_x[i * w..(i + 1) * w]);
                batch_y.push(fit_y[i]);
            }
            grad.iter_mut().for_each(|g| *g = 0.0);
            let loss = net.accumulate_gradient(&batch_x, &batch_y, &mut grad);
            if !loss.is_finite() {
                return Err(Error::Diverged(alloc::format!(
                    "non-finite training loss in epoch {epoch}"
                )));
            }
            for ((p, v), g) in net.params_mut().iter_mut().zip(&mut velocity).zip(&grad) {
                *v = config.momentum * *v - config.learning_rate * g;
                *p += *v;
            }
        }
        let val = score(net);
        if !val.is_finite() {
            return Err(Error::Diverged(alloc::format!(
                "non-finite validation loss in epoch {epoch}"
            )));
        }
        if val < best.1 {
            best = (net.params().to_vec(), val, epoch);
        } else if epoch - best.2 >= config.patience {
            break;
        }
    }
    net.params_mut().copy_from_slice(&best.0);
    Ok(TrainReport {
        epochs_run,
        best_epoch: best.2,
        train_loss: net.loss(fit_x, fit_y),
        validation_loss: best.1,
    })
}

/// Central-difference gradient, for checking [`Network::accumulate_gradient`].
pub fn numerical_gradient<N: Network + Clone>(
    net: &N,
    inputs: &[f64],
    labels: &[f64],
    step: f64,
) -> Vec<f64> {
    let mut probe = net.clone();
    (0..net.params().len())
        .map(|k| {
            let orig = net.params()[k];
            probe.params_mut()[k] = orig + step;
            let up = probe.loss(inputs, labels);
            probe.params_mut()[k] = orig - step;
            let down = probe.loss(inputs, labels);
            probe.params_mut()[k] = orig;
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// `‖a − b‖ / max(‖a‖ + ‖b‖, tiny)`.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt() + b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / scale.max(1e-300)
}
