//! ARIMA(p,d,q) fitted by conditional sum of squares.
//!
//! The differenced series `u` follows
//! `u_n = c + Σ φ_j u_{n-j} + a_n − Σ θ_j a_{n-j}`. Shocks before the first
//! fully observed lag are taken as zero.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::numerics::{least_squares, nelder_mead, NelderMeadOptions};
use crate::timeseries::normalized_rmse;
use crate::{Error, Result};

/// Largest order searched in each of p, d and q.
pub const MAX_ORDER: usize = 2;

/// Margin kept from the unit circle by the stationarity and invertibility
/// constraints.
const ROOT_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArimaOrder {
    pub p: usize,
    pub d: usize,
    pub q: usize,
}

impl ArimaOrder {
    pub const fn new(p: usize, d: usize, q: usize) -> Self {
        Self { p, d, q }
    }

    /// Orders above two are rejected. `(0, d, 0)` is accepted here (it is the
    /// random-walk family) even though the grid never proposes it.
    pub fn validate(&self) -> Result<()> {
        if self.p > MAX_ORDER || self.d > MAX_ORDER || self.q > MAX_ORDER {
            return Err(Error::config(alloc::format!(
                "ARIMA({},{},{}): every order must be at most {MAX_ORDER}",
                self.p,
                self.d,
                self.q
            )));
        }
        Ok(())
    }

    pub fn complexity(&self) -> usize {
        self.p + self.d + self.q
    }

    /// The 24 candidates with every order in `0..=2` except `p = q = 0`.
    pub fn grid() -> Vec<ArimaOrder> {
        let mut out = Vec::with_capacity(24);
        for p in 0..=MAX_ORDER {
            for d in 0..=MAX_ORDER {
                for q in 0..=MAX_ORDER {
                    if p + q > 0 {
                        out.push(ArimaOrder { p, d, q });
                    }
                }
            }
        }
        out
    }
}

impl core::fmt::Display for ArimaOrder {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "({},{},{})", self.p, self.d, self.q)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArimaModel {
    pub order: ArimaOrder,
    pub phi: Vec<f64>,
    pub theta: Vec<f64>,
    pub intercept: f64,
    pub noise_variance: f64,
}

/// `d`-fold differencing.
pub fn difference(series: &[f64], d: usize) -> Vec<f64> {
    let mut u = series.to_vec();
    for _ in 0..d {
        u = u.windows(2).map(|w| w[1] - w[0]).collect();
    }
    u
}

/// Stationarity (or invertibility) of `1 − c₁z − c₂z²` for up to two
/// coefficients.
fn inside_triangle(c: &[f64]) -> bool {
    let lim = 1.0 - ROOT_MARGIN;
    match c {
        [] => true,
        [a] => a.abs() < lim,
        [a, b] => b.abs() < lim && a + b < lim && b - a < lim,
        _ => false,
    }
}

/// One-step predictions of the differenced series. `pred[t]` is the forecast
/// of `u[t]` from `u[..t]`, for `t in p..=u.len()`; shocks of the first `p`
/// values are zero.
fn arma_predictions(u: &[f64], phi: &[f64], theta: &[f64], c: f64) -> Vec<f64> {
    let p = phi.len();
    let mut shocks = vec![0.0; u.len()];
    let mut pred = vec![0.0; u.len() + 1];
    for t in p..=u.len() {
        let mut v = c;
        for (i, f) in phi.iter().enumerate() {
            v += f * u[t - 1 - i];
        }
        for (k, th) in theta.iter().enumerate() {
            if t > k {
                v -= th * shocks[t - 1 - k];
            }
        }
        pred[t] = v;
        if t < u.len() {
            shocks[t] = u[t] - v;
        }
    }
    pred
}

fn css(u: &[f64], phi: &[f64], theta: &[f64], c: f64) -> f64 {
    let p = phi.len();
    let mut shocks = vec![0.0; u.len()];
    let mut sum = 0.0;
    for t in p..u.len() {
        let mut v = c;
        for (i, f) in phi.iter().enumerate() {
            v += f * u[t - 1 - i];
        }
        for (k, th) in theta.iter().enumerate() {
            if t > k {
                v -= th * shocks[t - 1 - k];
            }
        }
        let a = u[t] - v;
        shocks[t] = a;
        sum += a * a;
    }
    sum / (u.len() - p) as f64
}

/// Hannan–Rissanen start: a long autoregression supplies shock estimates,
/// then one regression on lagged values and lagged shocks.
fn initial_guess(u: &[f64], p: usize, q: usize) -> Vec<f64> {
    let mean = u.iter().sum::<f64>() / u.len() as f64;
    let fallback = || {
        let mut x = vec![0.0; p + q + 1];
        x[p + q] = mean;
        x
    };
    let m = if q > 0 { (u.len() / 20).clamp(p.max(q) + 1, 12) } else { 0 };
    let shocks: Vec<f64> = if q > 0 {
        let rows = u.len() - m;
        let mut a = Vec::with_capacity(rows * (m + 1));
        for t in m..u.len() {
            a.extend((1..=m).map(|i| u[t - i]));
            a.push(1.0);
        }
        match least_squares(&a, rows, m + 1, &u[m..]) {
            Ok(beta) => {
                let mut e = vec![0.0; u.len()];
                for t in m..u.len() {
                    let fit: f64 = (1..=m).map(|i| beta[i - 1] * u[t - i]).sum::<f64>() + beta[m];
                    e[t] = u[t] - fit;
                }
                e
            }
            Err(_) => return fallback(),
        }
    } else {
        Vec::new()
    };
    let start = p.max(if q > 0 { m + q } else { 0 });
    if u.len() <= start + p + q + 2 {
        return fallback();
    }
    let rows = u.len() - start;
    let cols = p + q + 1;
    let mut a = Vec::with_capacity(rows * cols);
    for t in start..u.len() {
        a.extend((1..=p).map(|i| u[t - i]));
        a.extend((1..=q).map(|k| -shocks[t - k]));
        a.push(1.0);
    }
    let Ok(mut x) = least_squares(&a, rows, cols, &u[start..]) else {
        return fallback();
    };
    // Pull the start strictly inside the admissible region.
    for range in [0..p, p..p + q] {
        let mut shrink = 1.0;
        while !inside_triangle(&x[range.clone()].iter().map(|v| v * shrink).collect::<Vec<_>>()) {
            shrink *= 0.8;
        }
        for v in &mut x[range] {
            *v *= shrink;
        }
    }
    x
}

impl ArimaModel {
    /// Builds a model from known coefficients.
    pub fn new(order: ArimaOrder, phi: Vec<f64>, theta: Vec<f64>, intercept: f64) -> Result<Self> {
        order.validate()?;
        if phi.len() != order.p {
            return Err(Error::DimensionMismatch { expected: order.p, actual: phi.len() });
        }
        if theta.len() != order.q {
            return Err(Error::DimensionMismatch { expected: order.q, actual: theta.len() });
        }
        Ok(Self { order, phi, theta, intercept, noise_variance: 1.0 })
    }

    /// Conditional-sum-of-squares fit over φ, θ and the intercept.
    pub fn fit(series: &[f64], order: ArimaOrder) -> Result<Self> {
        order.validate()?;
        let (p, d, q) = (order.p, order.d, order.q);
        if series.len() <= (p + d + q + 1).max(2 * (p + q) + d + 2) {
            return Err(Error::insufficient(alloc::format!(
                "ARIMA{order} needs more than {} samples, got {}",
                2 * (p + q) + d + 2,
                series.len()
            )));
        }
        let u = difference(series, d);
        let x0 = initial_guess(&u, p, q);
        let objective = |x: &[f64]| {
            let (phi, rest) = x.split_at(p);
            let (theta, c) = rest.split_at(q);
            if !inside_triangle(phi) || !inside_triangle(theta) {
                return f64::INFINITY;
            }
            let v = css(&u, phi, theta, c[0]);
            if v.is_finite() { v } else { f64::INFINITY }
        };
        let (x, value) = if p + q == 0 {
            // Only the intercept: the CSS minimizer is the mean.
            let c = u.iter().sum::<f64>() / u.len() as f64;
            (vec![c], css(&u, &[], &[], c))
        } else {
            nelder_mead(
                objective,
                &x0,
                0.1,
                NelderMeadOptions { max_evals: 3000, f_tol: 1e-12, restarts: 2 },
            )
        };
        if !value.is_finite() {
            return Err(Error::Diverged(alloc::format!("ARIMA{order} CSS is not finite")));
        }
        Ok(Self {
            order,
            phi: x[..p].to_vec(),
            theta: x[p..p + q].to_vec(),
            intercept: x[p + q],
            noise_variance: value.max(f64::MIN_POSITIVE),
        })
    }

    /// Shortest history from which a forecast is defined.
    pub fn min_history(&self) -> usize {
        (self.order.p + self.order.d).max(1)
    }

    /// Forecasts of `series[from..=series.len()]`; the last entry is the
    /// forecast one step past the end.
    fn forecasts_through(&self, series: &[f64], from: usize) -> Vec<f64> {
        let d = self.order.d;
        let u = difference(series, d);
        let pred_u = arma_predictions(&u, &self.phi, &self.theta, self.intercept);
        (from..=series.len())
            .map(|n| {
                let du = pred_u[n - d];
                match d {
                    0 => du,
                    1 => series[n - 1] + du,
                    _ => 2.0 * series[n - 1] - series[n - 2] + du,
                }
            })
            .collect()
    }

    /// Forecast of the value following `history`.
    pub fn predict_next(&self, history: &[f64]) -> Result<f64> {
        if history.len() < self.min_history() {
            return Err(Error::insufficient(alloc::format!(
                "ARIMA{} forecast needs {} past values, got {}",
                self.order,
                self.min_history(),
                history.len()
            )));
        }
        Ok(self.forecasts_through(history, history.len())[0])
    }

    /// Rolling one-step forecasts of `series[from..]` from true past values.
    pub fn predict_series(&self, series: &[f64], from: usize) -> Result<Vec<f64>> {
        if from < self.min_history() || from > series.len() {
            return Err(Error::insufficient(alloc::format!(
                "ARIMA{} forecasts start at index {} at the earliest, got {from}",
                self.order,
                self.min_history()
            )));
        }
        let mut out = self.forecasts_through(series, from);
        out.pop();
        Ok(out)
    }
}

/// Score of one grid candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCandidate {
    pub order: ArimaOrder,
    /// Held-out normalized RMSE, `None` when the fit failed.
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSearchResult {
    pub best: ArimaModel,
    pub best_score: f64,
    pub candidates: Vec<GridCandidate>,
}

/// Scores within this relative distance of the best one count as a tie.
pub const GRID_TIE_TOLERANCE: f64 = 5e-3;

/// Fits the 24 candidates on the head of `train`, scores each by normalized
/// RMSE on the last `validation_fraction` of it and returns the winner
/// refitted on all of `train`. Near-ties go to the smaller `p + d + q`.
pub fn arima_grid_search(train: &[f64], validation_fraction: f64) -> Result<GridSearchResult> {
    if !(validation_fraction > 0.0 && validation_fraction < 1.0) {
        return Err(Error::config("validation fraction must lie in (0, 1)"));
    }
    let n_val = ((train.len() as f64) * validation_fraction).round() as usize;
    let head = train.len().saturating_sub(n_val);
    if n_val < 2 || head < 16 {
        return Err(Error::insufficient(alloc::format!(
            "grid search needs a longer training series than {}",
            train.len()
        )));
    }
    let mut candidates = Vec::new();
    for order in ArimaOrder::grid() {
        let score = ArimaModel::fit(&train[..head], order)
            .and_then(|m| m.predict_series(train, head))
            .and_then(|pred| normalized_rmse(&train[head..], &pred))
            .ok()
            .filter(|s| s.is_finite());
        candidates.push(GridCandidate { order, score });
    }
    let best_score = candidates
        .iter()
        .filter_map(|c| c.score)
        .min_by(f64::total_cmp)
        .ok_or_else(|| Error::insufficient("every ARIMA candidate failed to fit"))?;
    let limit = best_score * (1.0 + GRID_TIE_TOLERANCE) + 1e-12;
    let chosen = candidates
        .iter()
        .filter_map(|c| c.score.filter(|&s| s <= limit).map(|s| (c.order, s)))
        .min_by(|a, b| {
            a.0.complexity()
                .cmp(&b.0.complexity())
                .then(a.1.total_cmp(&b.1))
        })
        .expect("best candidate is within its own tolerance");
    let best = ArimaModel::fit(train, chosen.0)?;
    Ok(GridSearchResult { best, best_score: chosen.1, candidates })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::substream;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn ar_series(phi: &[f64], n: usize, seed: u64) -> Vec<f64> {
        let mut rng = substream(seed, 77, 0);
        let mut x = vec![0.0; n + 200];
        for t in 2..x.len() {
            let a: f64 = rng.sample(StandardNormal);
            x[t] = phi.iter().enumerate().map(|(i, f)| f * x[t - 1 - i]).sum::<f64>() + a;
        }
        x.split_off(200)
    }

    #[test]
    fn grid_has_24_candidates() {
        let g = ArimaOrder::grid();
        assert_eq!(g.len(), 24);
        assert!(g.iter().all(|o| o.p + o.q > 0));
    }

    #[test]
    fn hand_recursion_example() {
        let m = ArimaModel::new(ArimaOrder::new(1, 0, 0), vec![0.5], vec![], 0.0).unwrap();
        assert_eq!(m.predict_next(&[3.0, 7.0, 10.0]).unwrap(), 5.0);
    }

    #[test]
    fn recovers_ar1_coefficient() {
        let x = ar_series(&[0.7], 10_000, 1);
        let m = ArimaModel::fit(&x, ArimaOrder::new(1, 0, 0)).unwrap();
        assert!((m.phi[0] - 0.7).abs() < 0.03, "{:?}", m.phi);
        assert!((m.noise_variance - 1.0).abs() < 0.05);
    }

    #[test]
    fn recovers_arma11() {
        // Oracle: simulate u_t = 0.5 u_{t-1} + a_t - 0.4 a_{t-1}.
        let mut rng = substream(3, 77, 1);
        let mut u = vec![0.0; 20_000];
        let mut prev_a = 0.0;
        for t in 1..u.len() {
            let a: f64 = rng.sample(StandardNormal);
            u[t] = 0.5 * u[t - 1] + a - 0.4 * prev_a;
            prev_a = a;
        }
        let m = ArimaModel::fit(&u, ArimaOrder::new(1, 0, 1)).unwrap();
        assert!((m.phi[0] - 0.5).abs() < 0.05, "{:?}", m);
        assert!((m.theta[0] - 0.4).abs() < 0.05, "{:?}", m);
    }

    #[test]
    fn ramp_with_zero_ma_adds_the_slope() {
        let ramp: Vec<f64> = (0..20).map(|j| 3.0 + 0.5 * j as f64).collect();
        let m = ArimaModel::new(ArimaOrder::new(0, 1, 1), vec![], vec![0.0], 0.5).unwrap();
        let pred = m.predict_series(&ramp, 2).unwrap();
        assert_eq!(pred.len(), ramp.len() - 2);
        for (k, v) in pred.iter().enumerate() {
            let n = k + 2;
            // Manual difference recursion: previous value plus the slope.
            assert!((v - (ramp[n - 1] + 0.5)).abs() < 1e-12);
            assert!((v - ramp[n]).abs() < 1e-12);
        }
    }

    #[test]
    fn random_walk_equals_previous_value() {
        let x = ar_series(&[0.3], 300, 5);
        let m = ArimaModel::new(ArimaOrder::new(0, 1, 0), vec![], vec![], 0.0).unwrap();
        let pred = m.predict_series(&x, 1).unwrap();
        assert_eq!(pred, x[..x.len() - 1].to_vec());
    }

    #[test]
    fn differencing_identity() {
        let x: Vec<f64> = ar_series(&[0.5, 0.2], 2_000, 9)
            .iter()
            .scan(0.0, |acc, v| {
                *acc += v;
                Some(*acc)
            })
            .collect();
        let d1 = ArimaModel::fit(&x, ArimaOrder::new(2, 1, 1)).unwrap();
        let u = difference(&x, 1);
        let d0 = ArimaModel::fit(&u, ArimaOrder::new(2, 0, 1)).unwrap();
        assert_eq!(d1.phi, d0.phi);
        assert_eq!(d1.theta, d0.theta);
        assert_eq!(d1.intercept, d0.intercept);
        let pred_x = d1.predict_series(&x, 10).unwrap();
        let pred_u = d0.predict_series(&u, 9).unwrap();
        for (k, (px, pu)) in pred_x.iter().zip(&pred_u).enumerate() {
            assert_eq!(*px, x[9 + k] + pu);
        }
    }

    #[test]
    fn predict_next_matches_series_tail() {
        let x = ar_series(&[0.6, 0.3], 500, 2);
        let m = ArimaModel::fit(&x, ArimaOrder::new(2, 1, 2)).unwrap();
        let series = m.predict_series(&x, 100).unwrap();
        assert_eq!(m.predict_next(&x[..250]).unwrap(), series[150]);
    }

    #[test]
    fn ramp_selects_differenced_model() {
        let ramp: Vec<f64> = (0..400).map(|j| 0.25 * j as f64 - 7.0).collect();
        let r = arima_grid_search(&ramp, 0.2).unwrap();
        assert!(r.best.order.d >= 1, "{:?}", r.best.order);
        assert!(r.best_score < 1e-6);
    }

    #[test]
    fn white_noise_is_unpredictable() {
        let mut scores: Vec<f64> = (0..20)
            .map(|s| arima_grid_search(&ar_series(&[], 1_000, 100 + s), 0.2).unwrap().best_score)
            .collect();
        scores.sort_by(f64::total_cmp);
        assert!(scores[10] >= 0.95, "{scores:?}");
    }

    #[test]
    fn ar2_data_selects_ar2() {
        let hits = (0..20)
            .filter(|&s| {
                let r = arima_grid_search(&ar_series(&[0.6, 0.3], 10_000, 200 + s), 0.2).unwrap();
                r.best.order == ArimaOrder::new(2, 0, 0)
            })
            .count();
        assert!(hits >= 16, "{hits}/20");
    }

    #[test]
    fn short_series_is_rejected() {
        assert!(matches!(
            ArimaModel::fit(&[1.0, 2.0, 3.0], ArimaOrder::new(2, 1, 1)),
            Err(Error::InsufficientData(_))
        ));
        assert!(ArimaOrder::new(3, 0, 0).validate().is_err());
    }
}
