//! Experiment harness: predictor benchmark, ROC over repeated fault trials,
//! train/test transfer and incipient-fault trend.
//!
//! Every detection study uses a [`Monitor`]: one predictor per stabilizer
//! batch plus the Gaussian model of their joint training errors.
//!
//! ROC scoring. A trial's detection statistic is the largest SMD in the
//! `detection_window` samples starting at the fault onset. The healthy test
//! span between the end of training and the onset is cut into blocks of the
//! same length, each scored the same way, so a fault-free "onset" is
//! indistinguishable from a healthy block and its AUC is about 0.5.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::detector::{
    fit_error_stats, prediction_errors, smd, threshold_empirical, threshold_theoretical, DetectionReport,
    ErrorStats, ThresholdMode,
};
use crate::emulator::{generate_batches, generate_batches_from, FaultSpec, Scenario};
use crate::forecast::{Predictor, PredictorSpec};
use crate::numerics::substream;
use crate::timeseries::{normalized_rmse, BatchSeries};
use crate::{Error, Result, SAMPLES_PER_DAY};

const PERMUTATION_DOMAIN: u64 = 0x5045_524d;

/// Fitted per-batch predictors and the error model of their training
/// residuals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monitor {
    pub predictors: Vec<Predictor>,
    pub stats: ErrorStats,
    pub window: usize,
    /// Number of training samples `n_tr`.
    pub n_train: usize,
    /// SMD of the training errors, samples `window..n_train`.
    pub train_smd: Vec<f64>,
}

impl Monitor {
    /// Fits on every sample of `train`. Batch `i` uses seed `seed + i`.
    pub fn fit(
        train: &BatchSeries,
        spec: &PredictorSpec,
        window: usize,
        seed: u64,
        ridge: Option<f64>,
    ) -> Result<Self> {
        let predictors = train
            .all_series()
            .iter()
            .enumerate()
            .map(|(i, s)| Predictor::fit(spec, s, window, seed.wrapping_add(i as u64)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_predictors(predictors, train, ridge)
    }

    /// Error model for already fitted predictors.
    pub fn from_predictors(predictors: Vec<Predictor>, train: &BatchSeries, ridge: Option<f64>) -> Result<Self> {
        let window = predictors.first().map_or(0, |p| p.window);
        if predictors.iter().any(|p| p.window != window) {
            return Err(Error::config("all batch predictors must share one window"));
        }
        let errors = prediction_errors(&predictors, train, window)?;
        let stats = fit_error_stats(&errors, ridge)?;
        let train_smd = errors.iter().map(|e| smd(&stats, e)).collect::<Result<_>>()?;
        Ok(Self { predictors, stats, window, n_train: train.len(), train_smd })
    }

    pub fn threshold(&self, p_fa: f64, mode: ThresholdMode) -> Result<f64> {
        match mode {
            ThresholdMode::Theoretical => threshold_theoretical(p_fa, self.stats.kappa()),
            ThresholdMode::Empirical => threshold_empirical(&self.train_smd, p_fa, self.n_train, self.window),
        }
    }

    /// SMD of samples `from..` of `batches`; earlier samples serve as history.
    pub fn smd_series(&self, batches: &BatchSeries, from: usize) -> Result<Vec<f64>> {
        prediction_errors(&self.predictors, batches, from)?
            .iter()
            .map(|e| smd(&self.stats, e))
            .collect()
    }

    pub fn detect(
        &self,
        batches: &BatchSeries,
        from: usize,
        p_fa: f64,
        mode: ThresholdMode,
    ) -> Result<DetectionReport> {
        let threshold = self.threshold(p_fa, mode)?;
        let smd = self.smd_series(batches, from)?;
        let alarms = smd.iter().map(|&d| d > threshold).collect();
        Ok(DetectionReport { start_index: from, smd, threshold, alarms, p_fa_target: p_fa, threshold_mode: mode })
    }
}

/// Study parameters shared by the benchmark, ROC and incipient runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    /// Base scenario; trial `t` replaces its seed by `seed_base + t`.
    pub scenario: Scenario,
    pub predictors: Vec<PredictorSpec>,
    /// Faults compared in the ROC study, each with an explicit onset. Empty
    /// means the scenario's own fault.
    #[serde(default)]
    pub faults: Vec<FaultSpec>,
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default = "default_batches")]
    pub n_batches: usize,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    #[serde(default = "default_p_fa_grid")]
    pub p_fa_grid: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed_base: u64,
    #[serde(default = "default_detection_window")]
    pub detection_window: usize,
    #[serde(default)]
    pub ridge: Option<f64>,
    #[serde(default = "default_mode")]
    pub threshold_mode: ThresholdMode,
}

fn default_window() -> usize {
    SAMPLES_PER_DAY
}
fn default_batches() -> usize {
    9
}
fn default_train_fraction() -> f64 {
    0.8
}
fn default_p_fa_grid() -> Vec<f64> {
    vec![0.001, 0.005, 0.01, 0.05, 0.1]
}
fn default_trials() -> usize {
    100
}
fn default_detection_window() -> usize {
    1
}
fn default_mode() -> ThresholdMode {
    ThresholdMode::Theoretical
}

impl ExperimentSpec {
    pub fn new(name: &str, scenario: Scenario, predictors: Vec<PredictorSpec>) -> Self {
        Self {
            name: name.into(),
            scenario,
            predictors,
            faults: Vec::new(),
            window: default_window(),
            n_batches: default_batches(),
            train_fraction: default_train_fraction(),
            p_fa_grid: default_p_fa_grid(),
            trials: default_trials(),
            seed_base: 0,
            detection_window: default_detection_window(),
            ridge: None,
            threshold_mode: default_mode(),
        }
    }

    pub fn n_train(&self) -> usize {
        (self.train_fraction * self.scenario.n_samples as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if self.predictors.is_empty() {
            return Err(Error::config("experiment lists no predictors"));
        }
        for p in &self.predictors {
            p.validate()?;
        }
        if self.trials == 0 || self.detection_window == 0 || self.window == 0 {
            return Err(Error::config("trials, window and detection_window must be positive"));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::config("train_fraction must lie in (0, 1)"));
        }
        if let Some(p) = self.p_fa_grid.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
            return Err(Error::config(alloc::format!("p_fa {p} outside (0, 1)")));
        }
        if self.n_train() <= self.window + self.n_batches {
            return Err(Error::config("training span too short for the window and batch count"));
        }
        for f in self.faults.iter().chain([&self.scenario.fault]) {
            f.validate(self.scenario.topology.line_length_m())?;
        }
        Ok(())
    }

    fn trial_scenario(&self, trial: usize) -> Scenario {
        let mut s = self.scenario.clone();
        s.seed = self.seed_base.wrapping_add(trial as u64);
        s.fault = FaultSpec::None;
        s
    }
}

/// One benchmark cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkCell {
    pub dataset: String,
    pub predictor: String,
    pub batch: usize,
    pub nrmse: Option<f64>,
    pub error: Option<String>,
}

/// Normalized RMSE of every predictor on every dataset and listed batch,
/// fitting on the first `train_fraction` of each series. Failures are
/// recorded per cell.
pub fn run_predictor_benchmark(
    datasets: &[(String, BatchSeries)],
    predictors: &[PredictorSpec],
    window: usize,
    train_fraction: f64,
    batches: &[usize],
    seed: u64,
) -> Vec<BenchmarkCell> {
    let mut out = Vec::new();
    for (name, data) in datasets {
        let n_tr = (train_fraction * data.len() as f64).round() as usize;
        for spec in predictors {
            for &b in batches {
                let result = (|| {
                    if b >= data.n_batches() {
                        return Err(Error::config(alloc::format!("no batch {b}")));
                    }
                    let series = data.series(b);
                    if n_tr >= series.len() {
                        return Err(Error::insufficient("no test samples"));
                    }
                    let p = Predictor::fit(spec, &series[..n_tr], window, seed.wrapping_add(b as u64))?;
                    let pred = p.predict_series(series, n_tr)?;
                    normalized_rmse(&series[n_tr..], &pred)
                })();
                out.push(BenchmarkCell {
                    dataset: name.clone(),
                    predictor: spec.label(),
                    batch: b,
                    nrmse: result.as_ref().ok().copied(),
                    error: result.err().map(|e| e.to_string()),
                });
            }
        }
    }
    out
}

/// Scores of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialScores {
    pub onset_score: f64,
    pub healthy_scores: Vec<f64>,
    /// Detection threshold of this trial's monitor at each grid `p_fa`.
    pub thresholds: Vec<f64>,
}

impl TrialScores {
    /// Probability that the onset outscores a healthy block, ties counted
    /// half.
    pub fn auc(&self) -> f64 {
        rank_auc(&[self.onset_score], &self.healthy_scores)
    }
}

fn rank_auc(pos: &[f64], neg: &[f64]) -> f64 {
    let mut neg = neg.to_vec();
    neg.sort_by(f64::total_cmp);
    let mut total = 0.0;
    for &p in pos {
        let below = neg.partition_point(|&n| n < p);
        let not_above = neg.partition_point(|&n| n <= p);
        total += below as f64 + 0.5 * (not_above - below) as f64;
    }
    total / (pos.len() * neg.len()) as f64
}

/// Max of `smd[k..k + len]` for the onset block and for every full healthy
/// block of the span before it. `smd[0]` belongs to series index `start`.
fn block_scores(smd: &[f64], start: usize, onset: usize, len: usize) -> Result<(f64, Vec<f64>)> {
    if onset < start || onset + len > start + smd.len() {
        return Err(Error::config("detection window does not fit the test span"));
    }
    let block_max = |from: usize| smd[from - start..from - start + len].iter().copied().fold(0.0, f64::max);
    let healthy: Vec<f64> = (0..(onset - start) / len).map(|k| block_max(start + k * len)).collect();
    if healthy.is_empty() {
        return Err(Error::config("no healthy test block before the onset"));
    }
    Ok((block_max(onset), healthy))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub p_fa: f64,
    pub p_dt: f64,
}

/// Pooled ROC over trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
    pub trial_count: usize,
}

impl RocCurve {
    /// Sweeps the threshold over every distinct score. Point `T` alarms on
    /// scores `>= T`; the first point (`T = ∞`) is `(0, 0)`.
    pub fn from_scores(onset: &[f64], healthy: &[f64]) -> Result<Self> {
        if onset.is_empty() || healthy.is_empty() {
            return Err(Error::insufficient("ROC needs onset and healthy scores"));
        }
        let mut all: Vec<f64> = onset.iter().chain(healthy).copied().collect();
        all.sort_by(|a, b| b.total_cmp(a));
        all.dedup();
        let mut pos = onset.to_vec();
        pos.sort_by(|a, b| b.total_cmp(a));
        let mut neg = healthy.to_vec();
        neg.sort_by(|a, b| b.total_cmp(a));
        let mut points = vec![RocPoint { threshold: f64::INFINITY, p_fa: 0.0, p_dt: 0.0 }];
        let (mut ip, mut ineg) = (0, 0);
        for t in all {
            while ip < pos.len() && pos[ip] >= t {
                ip += 1;
            }
            while ineg < neg.len() && neg[ineg] >= t {
                ineg += 1;
            }
            points.push(RocPoint {
                threshold: t,
                p_fa: ineg as f64 / neg.len() as f64,
                p_dt: ip as f64 / pos.len() as f64,
            });
        }
        let auc = points
            .windows(2)
            .map(|w| (w[1].p_fa - w[0].p_fa) * 0.5 * (w[1].p_dt + w[0].p_dt))
            .sum();
        Ok(Self { points, auc, trial_count: onset.len() })
    }

    /// `(p_fa, p_dt)` when alarming strictly above `threshold`.
    pub fn rates_above(onset: &[f64], healthy: &[f64], threshold: f64) -> (f64, f64) {
        let frac = |v: &[f64]| v.iter().filter(|&&s| s > threshold).count() as f64 / v.len().max(1) as f64;
        (frac(healthy), frac(onset))
    }
}

/// Detection rate at one false-alarm target, each trial using its own
/// monitor threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub p_fa_target: f64,
    pub p_fa: f64,
    pub p_dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocResult {
    pub predictor: String,
    pub fault: FaultSpec,
    pub curve: RocCurve,
    pub trial_auc: Vec<f64>,
    pub operating_points: Vec<OperatingPoint>,
    pub trials: Vec<TrialScores>,
}

impl RocResult {
    pub fn median_trial_auc(&self) -> f64 {
        median(&self.trial_auc)
    }

    fn from_trials(predictor: String, fault: FaultSpec, p_fa_grid: &[f64], trials: Vec<TrialScores>) -> Result<Self> {
        let onset: Vec<f64> = trials.iter().map(|t| t.onset_score).collect();
        let healthy: Vec<f64> = trials.iter().flat_map(|t| t.healthy_scores.iter().copied()).collect();
        let curve = RocCurve::from_scores(&onset, &healthy)?;
        let operating_points = p_fa_grid
            .iter()
            .enumerate()
            .map(|(k, &target)| {
                let (mut fa, mut n_neg, mut dt) = (0usize, 0usize, 0usize);
                for t in &trials {
                    let thr = t.thresholds[k];
                    fa += t.healthy_scores.iter().filter(|&&s| s > thr).count();
                    n_neg += t.healthy_scores.len();
                    dt += usize::from(t.onset_score > thr);
                }
                OperatingPoint {
                    p_fa_target: target,
                    p_fa: fa as f64 / n_neg as f64,
                    p_dt: dt as f64 / trials.len() as f64,
                }
            })
            .collect();
        Ok(Self {
            predictor,
            fault,
            trial_auc: trials.iter().map(TrialScores::auc).collect(),
            curve,
            operating_points,
            trials,
        })
    }
}

pub fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.len() % 2 == 1 { s[m] } else { 0.5 * (s[m - 1] + s[m]) }
}

/// ROC study for every predictor and fault of `spec`.
///
/// Trials use common random numbers: trial `t` of every fault and predictor
/// shares the load and noise realization of seed `seed_base + t`, and each
/// predictor is fitted once per trial on the healthy training span.
/// `progress` is called after each trial.
pub fn run_roc(spec: &ExperimentSpec, mut progress: impl FnMut(usize)) -> Result<Vec<RocResult>> {
    spec.validate()?;
    let faults: Vec<FaultSpec> = if spec.faults.is_empty() {
        vec![spec.scenario.fault.clone()]
    } else {
        spec.faults.clone()
    };
    let n = spec.scenario.n_samples;
    let n_train = spec.n_train();
    let onsets: Vec<usize> = faults
        .iter()
        .map(|f| f.onset_index().unwrap_or((n_train + n) / 2))
        .collect();
    for &o in &onsets {
        if o < n_train + spec.detection_window || o + spec.detection_window > n {
            return Err(Error::config(alloc::format!(
                "onset {o} leaves no healthy test block or no detection window (training ends at {n_train}, {n} samples)"
            )));
        }
    }
    let mut scores: Vec<Vec<Vec<TrialScores>>> =
        vec![vec![Vec::with_capacity(spec.trials); faults.len()]; spec.predictors.len()];
    for t in 0..spec.trials {
        let scenario = spec.trial_scenario(t);
        let (healthy, _) = generate_batches(&scenario, spec.n_batches)?;
        let variants: Vec<BatchSeries> = faults
            .iter()
            .zip(&onsets)
            .map(|(f, &onset)| {
                if matches!(f, FaultSpec::None) {
                    return Ok(healthy.clone());
                }
                let faulty = scenario.clone().with_fault(f.clone());
                let mut b = healthy.slice(0..onset);
                b.append(&generate_batches_from(&faulty, spec.n_batches, onset)?.0)?;
                Ok(b)
            })
            .collect::<Result<_>>()?;
        let train = healthy.slice(0..n_train);
        for (pi, pspec) in spec.predictors.iter().enumerate() {
            let monitor = Monitor::fit(&train, pspec, spec.window, scenario.seed, spec.ridge)?;
            let thresholds = spec
                .p_fa_grid
                .iter()
                .map(|&p| monitor.threshold(p, spec.threshold_mode).unwrap_or(f64::NAN))
                .collect::<Vec<_>>();
            for (fi, (batches, &onset)) in variants.iter().zip(&onsets).enumerate() {
                let smd = monitor.smd_series(batches, n_train)?;
                let (onset_score, healthy_scores) = block_scores(&smd, n_train, onset, spec.detection_window)?;
                scores[pi][fi].push(TrialScores { onset_score, healthy_scores, thresholds: thresholds.clone() });
            }
        }
        progress(t);
    }
    let mut out = Vec::new();
    for (pi, per_fault) in scores.into_iter().enumerate() {
        for (fi, trials) in per_fault.into_iter().enumerate() {
            out.push(RocResult::from_trials(
                spec.predictors[pi].label(),
                faults[fi].clone(),
                &spec.p_fa_grid,
                trials,
            )?);
        }
    }
    Ok(out)
}

/// Fits on all of `source` and monitors `target` from sample `window` on.
pub fn run_transfer(
    source: &BatchSeries,
    target: &BatchSeries,
    spec: &PredictorSpec,
    window: usize,
    seed: u64,
    ridge: Option<f64>,
    p_fa: f64,
    mode: ThresholdMode,
) -> Result<DetectionReport> {
    if source.bounds() != target.bounds() {
        return Err(Error::config("source and target use different batch layouts"));
    }
    let monitor = Monitor::fit(source, spec, window, seed, ridge)?;
    monitor.detect(target, window, p_fa, mode)
}

/// Median of pairwise slopes of `y` against its index.
pub fn theil_sen_slope(y: &[f64]) -> f64 {
    let mut slopes = Vec::with_capacity(y.len() * y.len().saturating_sub(1) / 2);
    for i in 0..y.len() {
        for j in i + 1..y.len() {
            slopes.push((y[j] - y[i]) / (j - i) as f64);
        }
    }
    median(&slopes)
}

/// Theil–Sen slope and its one-sided permutation p-value for a positive
/// trend, `(1 + #{permuted slope ≥ observed}) / (1 + permutations)`.
pub fn trend_test(y: &[f64], permutations: usize, seed: u64) -> (f64, f64) {
    let slope = theil_sen_slope(y);
    let mut rng = substream(seed, PERMUTATION_DOMAIN, 0);
    let mut shuffled = y.to_vec();
    let mut hits = 0usize;
    for _ in 0..permutations {
        shuffled.shuffle(&mut rng);
        if theil_sen_slope(&shuffled) >= slope {
            hits += 1;
        }
    }
    (slope, (1 + hits) as f64 / (1 + permutations) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstAlarm {
    pub p_fa: f64,
    pub threshold: f64,
    pub index: Option<usize>,
    /// Days from onset to the first alarm.
    pub delay_days: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncipientSummary {
    pub onset_index: usize,
    pub report: DetectionReport,
    /// Mean SMD of each post-onset day.
    pub daily_mean_smd: Vec<f64>,
    pub theil_sen_slope: f64,
    pub trend_p_value: f64,
    pub first_alarms: Vec<FirstAlarm>,
}

/// Trains on the healthy samples before the fault onset of
/// `spec.scenario`, monitors the rest and tests the daily mean SMD for an
/// increasing trend. Uses the first predictor of `spec`.
pub fn run_incipient(spec: &ExperimentSpec, permutations: usize) -> Result<IncipientSummary> {
    spec.scenario.validate()?;
    let onset = spec
        .scenario
        .fault
        .onset_index()
        .ok_or_else(|| Error::config("incipient study needs a fault with an onset"))?;
    let pspec = spec.predictors.first().ok_or_else(|| Error::config("experiment lists no predictors"))?;
    let mut scenario = spec.scenario.clone();
    scenario.seed = spec.seed_base;
    let (batches, _) = generate_batches(&scenario, spec.n_batches)?;
    let monitor = Monitor::fit(&batches.slice(0..onset), pspec, spec.window, scenario.seed, spec.ridge)?;
    let p_fa_main = spec.p_fa_grid.iter().copied().find(|&p| p == 0.01).or(spec.p_fa_grid.first().copied()).unwrap_or(0.01);
    let report = monitor.detect(&batches, onset, p_fa_main, spec.threshold_mode)?;
    let daily_mean_smd: Vec<f64> = report
        .smd
        .chunks(SAMPLES_PER_DAY)
        .filter(|c| c.len() == SAMPLES_PER_DAY)
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect();
    let (theil_sen_slope, trend_p_value) = trend_test(&daily_mean_smd, permutations, scenario.seed);
    let first_alarms = spec
        .p_fa_grid
        .iter()
        .map(|&p| {
            let threshold = monitor.threshold(p, spec.threshold_mode)?;
            let index = report.smd.iter().position(|&d| d > threshold).map(|k| k + onset);
            Ok(FirstAlarm {
                p_fa: p,
                threshold,
                index,
                delay_days: index.map(|i| (i - onset) as f64 / SAMPLES_PER_DAY as f64),
            })
        })
        .collect::<Result<_>>()?;
    Ok(IncipientSummary { onset_index: onset, report, daily_mean_smd, theil_sen_slope, trend_p_value, first_alarms })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forecast::ArimaSpec;
    use crate::load::LoadModelKind;

    #[test]
    fn roc_extremes_and_auc() {
        let c = RocCurve::from_scores(&[3.0, 5.0], &[1.0, 2.0, 4.0]).unwrap();
        assert_eq!((c.points[0].p_fa, c.points[0].p_dt), (0.0, 0.0));
        let last = c.points.last().unwrap();
        assert_eq!((last.p_fa, last.p_dt), (1.0, 1.0));
        // Pairs won: 5 beats all three, 3 beats two → 5/6.
        assert!((c.auc - 5.0 / 6.0).abs() < 1e-12);
        assert!((rank_auc(&[3.0, 5.0], &[1.0, 2.0, 4.0]) - 5.0 / 6.0).abs() < 1e-12);
        assert_eq!(RocCurve::rates_above(&[3.0, 5.0], &[1.0, 2.0, 4.0], 0.0), (1.0, 1.0));
        assert_eq!(RocCurve::rates_above(&[3.0, 5.0], &[1.0, 2.0, 4.0], f64::INFINITY), (0.0, 0.0));
    }

    #[test]
    fn ties_count_half() {
        let c = RocCurve::from_scores(&[1.0], &[1.0, 1.0]).unwrap();
        assert!((c.auc - 0.5).abs() < 1e-12);
        for w in c.points.windows(2) {
            assert!(w[1].p_fa >= w[0].p_fa && w[1].p_dt >= w[0].p_dt);
        }
    }

    #[test]
    fn blocks_cover_the_healthy_span() {
        let smd: Vec<f64> = (0..10).map(f64::from).collect();
        let (on, healthy) = block_scores(&smd, 100, 106, 2).unwrap();
        assert_eq!(on, 7.0);
        assert_eq!(healthy, vec![1.0, 3.0, 5.0]);
        assert!(block_scores(&smd, 100, 109, 2).is_err());
    }

    #[test]
    fn theil_sen_of_a_line() {
        let y: Vec<f64> = (0..30).map(|j| 2.0 + 0.5 * j as f64).collect();
        assert_eq!(theil_sen_slope(&y), 0.5);
        let (s, p) = trend_test(&y, 199, 1);
        assert_eq!(s, 0.5);
        assert!(p <= 0.01);
        let flat: Vec<f64> = (0..30).map(|j| ((j * 7919) % 13) as f64).collect();
        let (_, p) = trend_test(&flat, 199, 1);
        assert!(p > 0.05);
    }

    #[test]
    fn benchmark_records_failures_per_cell() {
        let series: Vec<f64> = (0..200).map(|j| (j as f64 * 0.3).sin()).collect();
        let data = BatchSeries::from_series(vec![0..1], vec![series]).unwrap();
        let cells = run_predictor_benchmark(
            &[("sine".into(), data)],
            &[PredictorSpec::Avg, PredictorSpec::Baseline],
            4,
            0.8,
            &[0, 3],
            0,
        );
        assert_eq!(cells.len(), 4);
        let avg = cells[0].nrmse.unwrap();
        assert!((avg - 1.0).abs() < 0.05, "{avg}");
        assert!(cells[1].error.is_some());
    }

    #[test]
    fn healthy_transfer_alarm_rate_is_near_target() {
        let scenario = Scenario::healthy(LoadModelKind::L1, 3_000, 4);
        let (b, _) = generate_batches(&scenario, 9).unwrap();
        let r = run_transfer(
            &b,
            &b,
            &PredictorSpec::Arima(ArimaSpec::fixed(1, 0, 0)),
            8,
            0,
            None,
            0.05,
            ThresholdMode::Empirical,
        )
        .unwrap();
        assert!((r.alarm_rate() - 0.05).abs() < 0.01, "{}", r.alarm_rate());
    }
}
