//! Least-squares boosting of regression stumps over window coordinates.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoostConfig {
    #[serde(default = "default_k_total")]
    pub k_total: usize,
    #[serde(default = "default_shrinkage")]
    pub shrinkage: f64,
}

fn default_k_total() -> usize {
    100
}

fn default_shrinkage() -> f64 {
    0.1
}

impl Default for BoostConfig {
    fn default() -> Self {
        Self { k_total: default_k_total(), shrinkage: default_shrinkage() }
    }
}

impl BoostConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_total == 0 {
            return Err(Error::config("k_total must be positive"));
        }
        if !(self.shrinkage > 0.0 && self.shrinkage <= 1.0) {
            return Err(Error::config("shrinkage must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Depth-one regression tree: `left` when `x[feature] <= threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stump {
    pub feature: usize,
    pub threshold: f64,
    pub left: f64,
    pub right: f64,
}

impl Stump {
    pub fn eval(&self, x: &[f64]) -> f64 {
        if x[self.feature] <= self.threshold {
            self.left
        } else {
            self.right
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostModel {
    pub window: usize,
    pub shrinkage: f64,
    pub initial: f64,
    pub stages: Vec<Stump>,
}

/// Least-squares stump for `target` given per-feature sort orders. Returns
/// the stump and its reduction of the sum of squares, or `None` when no
/// feature has two distinct values.
fn best_stump(
    inputs: &[f64],
    w: usize,
    order: &[Vec<u32>],
    target: &[f64],
) -> Option<(Stump, f64)> {
    let n = target.len();
    let total: f64 = target.iter().sum();
    let mut best: Option<(Stump, f64)> = None;
    for (feature, idx) in order.iter().enumerate() {
        let mut left_sum = 0.0;
        for k in 0..n - 1 {
            let i = idx[k] as usize;
            left_sum += target[i];
            let here = inputs[i * w + feature];
            let next = inputs[idx[k + 1] as usize * w + feature];
            if next <= here {
                continue;
            }
            let nl = (k + 1) as f64;
            let nr = (n - k - 1) as f64;
            let right_sum = total - left_sum;
            // Reduction of the sum of squares relative to the global mean.
            let gain = left_sum * left_sum / nl + right_sum * right_sum / nr - total * total / n as f64;
            if best.as_ref().is_none_or(|(_, g)| gain > *g) {
                best = Some((
                    Stump {
                        feature,
                        threshold: 0.5 * (here + next),
                        left: left_sum / nl,
                        right: right_sum / nr,
                    },
                    gain,
                ));
            }
        }
    }
    best
}

impl BoostModel {
    /// Fits on row-major `inputs` (`labels.len()` rows of `w` values).
    pub fn fit(inputs: &[f64], labels: &[f64], w: usize, config: &BoostConfig) -> Result<Self> {
        Self::fit_traced(inputs, labels, w, config).map(|(m, _)| m)
    }

    /// As [`BoostModel::fit`], also returning the training MSE before the
    /// first stage and after each one.
    pub fn fit_traced(
        inputs: &[f64],
        labels: &[f64],
        w: usize,
        config: &BoostConfig,
    ) -> Result<(Self, Vec<f64>)> {
        config.validate()?;
        let n = labels.len();
        if w == 0 || inputs.len() != n * w {
            return Err(Error::DimensionMismatch { expected: n * w, actual: inputs.len() });
        }
        if n < 2 {
            return Err(Error::insufficient("boosting needs at least two training pairs"));
        }
        let order: Vec<Vec<u32>> = (0..w)
            .map(|f| {
                let mut idx: Vec<u32> = (0..n as u32).collect();
                idx.sort_by(|&a, &b| inputs[a as usize * w + f].total_cmp(&inputs[b as usize * w + f]));
                idx
            })
            .collect();
        let initial = labels.iter().sum::<f64>() / n as f64;
        let mut residual: Vec<f64> = labels.iter().map(|y| y - initial).collect();
        let mse = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>() / n as f64;
        let mut trace = vec![mse(&residual)];
        let mut stages = Vec::with_capacity(config.k_total);
        for _ in 0..config.k_total {
            let Some((stump, _)) = best_stump(inputs, w, &order, &residual) else {
                break;
            };
            for (i, r) in residual.iter_mut().enumerate() {
                *r -= config.shrinkage * stump.eval(&inputs[i * w..(i + 1) * w]);
            }
            stages.push(stump);
            trace.push(mse(&residual));
        }
        Ok((Self { window: w, shrinkage: config.shrinkage, initial, stages }, trace))
    }

    pub fn predict(&self, window: &[f64]) -> f64 {
        self.initial + self.shrinkage * self.stages.iter().map(|s| s.eval(window)).sum::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::substream;
    use proptest::prelude::*;
    use rand::Rng;

    /// Exhaustive oracle: every feature, every midpoint, direct SSE.
    fn brute_force_stump(inputs: &[f64], labels: &[f64], w: usize) -> (usize, f64, f64) {
        let n = labels.len();
        let mut best = (0, 0.0, f64::INFINITY);
        for f in 0..w {
            let mut vals: Vec<f64> = (0..n).map(|i| inputs[i * w + f]).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            for pair in vals.windows(2) {
                let t = 0.5 * (pair[0] + pair[1]);
                let (l, r): (Vec<f64>, Vec<f64>) = (0..n).fold((vec![], vec![]), |(mut l, mut r), i| {
                    if inputs[i * w + f] <= t { l.push(labels[i]) } else { r.push(labels[i]) }
                    (l, r)
                });
                let sse = |v: &[f64]| {
                    let m = v.iter().sum::<f64>() / v.len() as f64;
                    v.iter().map(|x| (x - m).powi(2)).sum::<f64>()
                };
                let total = sse(&l) + sse(&r);
                if total < best.2 - 1e-12 {
                    best = (f, t, total);
                }
            }
        }
        best
    }

    #[test]
    fn single_stump_matches_exhaustive_search() {
        let mut rng = substream(4, 1, 0);
        let w = 3;
        let n = 60;
        let inputs: Vec<f64> = (0..n * w).map(|_| rng.random_range(-1.0..1.0)).collect();
        // Labels split perfectly on feature 1 at 0.2, plus a little noise.
        let labels: Vec<f64> = (0..n)
            .map(|i| if inputs[i * w + 1] <= 0.2 { -2.0 } else { 3.0 } + 0.01 * rng.random_range(-1.0..1.0))
            .collect();
        let cfg = BoostConfig { k_total: 1, shrinkage: 1.0 };
        let (m, trace) = BoostModel::fit_traced(&inputs, &labels, w, &cfg).unwrap();
        let (f, t, sse) = brute_force_stump(&inputs, &labels, w);
        assert_eq!(m.stages[0].feature, f);
        assert!((m.stages[0].threshold - t).abs() < 1e-12);
        assert!((trace[1] * n as f64 - sse).abs() < 1e-9);
        let total_var = trace[0] * n as f64;
        assert!(sse < 0.01 * total_var);
    }

    #[test]
    fn constant_inputs_stop_early() {
        let cfg = BoostConfig { k_total: 50, shrinkage: 0.1 };
        let m = BoostModel::fit(&[1.0; 10], &[1.0, 2.0, 3.0, 4.0, 5.0], 2, &cfg).unwrap();
        assert!(m.stages.is_empty());
        assert_eq!(m.predict(&[1.0, 1.0]), 3.0);
    }

    #[test]
    fn rejects_bad_config() {
        assert!(BoostConfig { k_total: 0, shrinkage: 0.1 }.validate().is_err());
        assert!(BoostConfig { k_total: 5, shrinkage: 1.5 }.validate().is_err());
    }

    proptest! {
        #[test]
        fn training_mse_never_increases(
            seed in 0u64..1000,
            shrinkage in 0.05f64..=1.0,
        ) {
            let mut rng = substream(seed, 2, 0);
            let w = 4;
            let n = 40;
            let inputs: Vec<f64> = (0..n * w).map(|_| rng.random_range(-1.0..1.0)).collect();
            let labels: Vec<f64> = (0..n).map(|i| inputs[i * w].sin() + rng.random_range(-0.3..0.3)).collect();
            let cfg = BoostConfig { k_total: 30, shrinkage };
            let (_, trace) = BoostModel::fit_traced(&inputs, &labels, w, &cfg).unwrap();
            for pair in trace.windows(2) {
                prop_assert!(pair[1] <= pair[0] + 1e-12);
            }
        }
    }
}
