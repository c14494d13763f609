//! One-step-ahead predictors for batch series.
//!
//! Every predictor is fitted on one training series and then forecasts the
//! next value from the `w` most recent ones. [`Predictor::predict_series`]
//! produces rolling forecasts from true past values.

pub mod arima;
pub mod boost;
pub mod ffnn;
pub mod lstm;
pub mod net;

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::timeseries::make_windows;
use crate::{Error, Result};

pub use arima::{arima_grid_search, ArimaModel, ArimaOrder, GridSearchResult};
pub use boost::{BoostConfig, BoostModel};
pub use ffnn::Ffnn;
pub use lstm::Lstm;
pub use net::{NetConfig, Network, Normalizer, TrainReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArimaSpec {
    /// Fixed order; `None` runs the 24-candidate grid search.
    #[serde(default)]
    pub order: Option<ArimaOrder>,
    #[serde(default = "default_validation_fraction")]
    pub validation_fraction: f64,
}

fn default_validation_fraction() -> f64 {
    0.2
}

impl ArimaSpec {
    pub fn fixed(p: usize, d: usize, q: usize) -> Self {
        Self { order: Some(ArimaOrder::new(p, d, q)), validation_fraction: default_validation_fraction() }
    }

    pub fn grid() -> Self {
        Self { order: None, validation_fraction: default_validation_fraction() }
    }
}

/// Predictor kind with its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", from = "StrictSpec")]
pub enum PredictorSpec {
    Baseline,
    Avg,
    Arima(ArimaSpec),
    #[serde(rename = "l2boost")]
    L2Boost(BoostConfig),
    Ffnn(NetConfig),
    Lstm(NetConfig),
}

/// Deserialization mirror of [`PredictorSpec`]. Internally tagged unit
/// variants silently accept extra keys; empty struct variants reject them.
#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum StrictSpec {
    Baseline {},
    Avg {},
    Arima(ArimaSpec),
    #[serde(rename = "l2boost")]
    L2Boost(BoostConfig),
    Ffnn(NetConfig),
    Lstm(NetConfig),
}

impl From<StrictSpec> for PredictorSpec {
    fn from(s: StrictSpec) -> Self {
        match s {
            StrictSpec::Baseline {} => PredictorSpec::Baseline,
            StrictSpec::Avg {} => PredictorSpec::Avg,
            StrictSpec::Arima(a) => PredictorSpec::Arima(a),
            StrictSpec::L2Boost(b) => PredictorSpec::L2Boost(b),
            StrictSpec::Ffnn(n) => PredictorSpec::Ffnn(n),
            StrictSpec::Lstm(n) => PredictorSpec::Lstm(n),
        }
    }
}

impl PredictorSpec {
    pub fn name(&self) -> &'static str {
        match self {
            PredictorSpec::Baseline => "baseline",
            PredictorSpec::Avg => "avg",
            PredictorSpec::Arima(_) => "arima",
            PredictorSpec::L2Boost(_) => "l2boost",
            PredictorSpec::Ffnn(_) => "ffnn",
            PredictorSpec::Lstm(_) => "lstm",
        }
    }

    /// Name including a fixed ARIMA order, e.g. `arima211`.
    pub fn label(&self) -> alloc::string::String {
        match self {
            PredictorSpec::Arima(ArimaSpec { order: Some(o), .. }) => {
                alloc::format!("arima{}{}{}", o.p, o.d, o.q)
            }
            other => other.name().into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PredictorSpec::Baseline | PredictorSpec::Avg => Ok(()),
            PredictorSpec::Arima(a) => {
                if let Some(o) = a.order {
                    o.validate()?;
                }
                if !(a.validation_fraction > 0.0 && a.validation_fraction < 1.0) {
                    return Err(Error::config("validation_fraction must lie in (0, 1)"));
                }
                Ok(())
            }
            PredictorSpec::L2Boost(b) => b.validate(),
            PredictorSpec::Ffnn(n) | PredictorSpec::Lstm(n) => n.validate(),
        }
    }
}

/// Kind-specific fitted parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FittedState {
    Baseline,
    Avg { mean: f64 },
    Arima(ArimaModel),
    #[serde(rename = "l2boost")]
    L2Boost(BoostModel),
    Ffnn(Ffnn),
    Lstm(Lstm),
}

/// A fitted predictor. Immutable after [`Predictor::fit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predictor {
    pub spec: PredictorSpec,
    pub window: usize,
    pub state: FittedState,
    /// Training summary of the neural predictors.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<TrainReport>,
}

impl Predictor {
    /// Fits `spec` on `train` with input window `window`. `seed` drives
    /// weight initialization and mini-batch order of the neural predictors.
    pub fn fit(spec: &PredictorSpec, train: &[f64], window: usize, seed: u64) -> Result<Self> {
        spec.validate()?;
        if window == 0 {
            return Err(Error::config("window must be positive"));
        }
        if train.len() <= window {
            return Err(Error::insufficient(alloc::format!(
                "training series of {} samples is not longer than the window {window}",
                train.len()
            )));
        }
        if let Some(v) = train.iter().find(|v| !v.is_finite()) {
            return Err(Error::domain(alloc::format!("non-finite training value {v}")));
        }
        let mut report = None;
        let state = match spec {
            PredictorSpec::Baseline => FittedState::Baseline,
            PredictorSpec::Avg => FittedState::Avg {
                mean: train.iter().sum::<f64>() / train.len() as f64,
            },
            PredictorSpec::Arima(a) => {
                let model = match a.order {
                    Some(order) => ArimaModel::fit(train, order)?,
                    None => arima_grid_search(train, a.validation_fraction)?.best,
                };
                if model.min_history() > window {
                    return Err(Error::config(alloc::format!(
                        "ARIMA{} needs a window of at least {}",
                        model.order,
                        model.min_history()
                    )));
                }
                FittedState::Arima(model)
            }
            PredictorSpec::L2Boost(cfg) => {
                let set = make_windows(train, window, train.len())?;
                FittedState::L2Boost(BoostModel::fit(set.train_inputs(), set.train_labels(), window, cfg)?)
            }
            PredictorSpec::Ffnn(cfg) => {
                let (x, y, norm) = normalized_pairs(train, window)?;
                let mut net = Ffnn::random(window, cfg.hidden, seed);
                net.normalizer = norm;
                report = Some(net::train(&mut net, &x, &y, cfg, seed)?);
                FittedState::Ffnn(net)
            }
            PredictorSpec::Lstm(cfg) => {
                let (x, y, norm) = normalized_pairs(train, window)?;
                let mut net = Lstm::random(window, cfg.hidden, seed);
                net.normalizer = norm;
                report = Some(net::train(&mut net, &x, &y, cfg, seed)?);
                FittedState::Lstm(net)
            }
        };
        Ok(Self { spec: spec.clone(), window, state, report })
    }

    /// Forecast of the value following `window` (exactly `w` values).
    ///
    /// ARIMA treats the window as its whole history, so shocks before the
    /// window are zero; [`Predictor::predict_series`] uses the full past.
    pub fn predict_one(&self, window: &[f64]) -> Result<f64> {
        if window.len() != self.window {
            return Err(Error::DimensionMismatch { expected: self.window, actual: window.len() });
        }
        Ok(match &self.state {
            FittedState::Baseline => window[window.len() - 1],
            FittedState::Avg { mean } => *mean,
            FittedState::Arima(m) => m.predict_next(window)?,
            FittedState::L2Boost(m) => m.predict(window),
            FittedState::Ffnn(m) => m.predict(window),
            FittedState::Lstm(m) => m.predict(window),
        })
    }

    /// Rolling one-step forecasts of `series[from..]`.
    pub fn predict_series(&self, series: &[f64], from: usize) -> Result<Vec<f64>> {
        if from < self.window || from > series.len() {
            return Err(Error::insufficient(alloc::format!(
                "forecasts start at index {} at the earliest, got {from}",
                self.window
            )));
        }
        let w = self.window;
        Ok(match &self.state {
            FittedState::Baseline => series[from - 1..series.len() - 1].to_vec(),
            FittedState::Avg { mean } => alloc::vec![*mean; series.len() - from],
            FittedState::Arima(m) => m.predict_series(series, from)?,
            FittedState::L2Boost(m) => (from..series.len()).map(|n| m.predict(&series[n - w..n])).collect(),
            FittedState::Ffnn(m) => (from..series.len()).map(|n| m.predict(&series[n - w..n])).collect(),
            FittedState::Lstm(m) => (from..series.len()).map(|n| m.predict(&series[n - w..n])).collect(),
        })
    }
}

/// Windows of the z-scored training series, the normalizer taken from it.
fn normalized_pairs(train: &[f64], window: usize) -> Result<(Vec<f64>, Vec<f64>, Normalizer)> {
    let norm = Normalizer::fit(train)?;
    let z: Vec<f64> = train.iter().map(|&v| norm.apply(v)).collect();
    let set = make_windows(&z, window, z.len())?;
    Ok((set.train_inputs().to_vec(), set.train_labels().to_vec(), norm))
}
