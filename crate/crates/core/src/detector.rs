//! Squared Mahalanobis distance of stabilizer-batch prediction errors and
//! the chi-squared alarm rule.
//!
//! Under healthy conditions the error vector `δ_j` (predicted minus measured
//! batch SNR, one entry per batch) is modelled as `N(μ, Σ)`, so the SMD
//! `(δ − μ)ᵀ Σ⁻¹ (δ − μ)` is chi-squared with `n_SB` degrees of freedom.
//! The inverse covariance is essential here; a form with `Σ` in place of
//! `Σ⁻¹` would not be chi-squared. The degrees of freedom are not reduced for
//! the estimated `μ` and `Σ`.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::forecast::Predictor;
use crate::numerics::{chi2_quantile, sym_inverse, ChiSquaredDof, SymMatrix};
use crate::timeseries::BatchSeries;
use crate::{Error, Result};

/// Relative ridge used when none is given: `1e-6 · trace(Σ) / dim`.
pub const DEFAULT_RELATIVE_RIDGE: f64 = 1e-6;

/// Gaussian model of healthy prediction errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub mu: Vec<f64>,
    pub sigma: SymMatrix,
    pub sigma_inv: SymMatrix,
    pub ridge: f64,
}

impl ErrorStats {
    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// Stats from known moments, inverting `sigma + ridge·I`.
    pub fn from_moments(mu: Vec<f64>, sigma: SymMatrix, ridge: f64) -> Result<Self> {
        if mu.len() != sigma.dim() {
            return Err(Error::DimensionMismatch { expected: sigma.dim(), actual: mu.len() });
        }
        let sigma_inv = sym_inverse(&sigma, ridge)?;
        Ok(Self { mu, sigma, sigma_inv, ridge })
    }

    pub fn kappa(&self) -> ChiSquaredDof {
        ChiSquaredDof::new(self.dim() as u32).expect("stats have at least one dimension")
    }
}

/// Sample mean and unbiased covariance of `errors`, with the inverse of
/// `Σ + ridge·I`. `ridge = None` selects `1e-6 · trace(Σ) / dim`.
pub fn fit_error_stats<V: AsRef<[f64]>>(errors: &[V], ridge: Option<f64>) -> Result<ErrorStats> {
    let dim = errors.first().map_or(0, |e| e.as_ref().len());
    if dim == 0 {
        return Err(Error::insufficient("no error vectors"));
    }
    if errors.len() < 2 || errors.len() < dim + 1 {
        return Err(Error::insufficient(alloc::format!(
            "{} error vectors cannot estimate a {dim}-dimensional covariance",
            errors.len()
        )));
    }
    let n = errors.len() as f64;
    let mut mu = vec![0.0; dim];
    for e in errors {
        let e = e.as_ref();
        if e.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, actual: e.len() });
        }
        for (m, v) in mu.iter_mut().zip(e) {
            *m += v;
        }
    }
    mu.iter_mut().for_each(|m| *m /= n);
    let mut cov = vec![0.0; dim * dim];
    let mut centered = vec![0.0; dim];
    for e in errors {
        for ((c, v), m) in centered.iter_mut().zip(e.as_ref()).zip(&mu) {
            *c = v - m;
        }
        for i in 0..dim {
            for j in 0..=i {
                cov[i * dim + j] += centered[i] * centered[j];
            }
        }
    }
    let sigma = SymMatrix::from_fn(dim, |i, j| cov[i * dim + j] / (n - 1.0));
    let ridge = match ridge {
        Some(r) => r,
        None => {
            let r = DEFAULT_RELATIVE_RIDGE * sigma.trace() / dim as f64;
            if r == 0.0 {
                return Err(Error::ZeroVariance);
            }
            r
        }
    };
    ErrorStats::from_moments(mu, sigma, ridge)
}

/// Squared Mahalanobis distance of `delta` under `stats`.
pub fn smd(stats: &ErrorStats, delta: &[f64]) -> Result<f64> {
    if delta.len() != stats.dim() {
        return Err(Error::DimensionMismatch { expected: stats.dim(), actual: delta.len() });
    }
    let centered: Vec<f64> = delta.iter().zip(&stats.mu).map(|(d, m)| d - m).collect();
    // The regularized inverse is positive definite; clamp rounding only.
    Ok(stats.sigma_inv.quadratic_form(&centered).max(0.0))
}

/// `χ²_κ(1 − p_fa)`.
pub fn threshold_theoretical(p_fa: f64, kappa: ChiSquaredDof) -> Result<f64> {
    if !(p_fa > 0.0 && p_fa < 1.0) {
        return Err(Error::domain(alloc::format!("false-alarm probability {p_fa} outside (0, 1)")));
    }
    chi2_quantile(kappa, 1.0 - p_fa)
}

/// The `k`-th largest training SMD, `k = ⌊p_fa · (n_tr − w)⌋` (1-based).
pub fn threshold_empirical(train_smds: &[f64], p_fa: f64, n_tr: usize, w: usize) -> Result<f64> {
    if !(p_fa > 0.0 && p_fa < 1.0) {
        return Err(Error::domain(alloc::format!("false-alarm probability {p_fa} outside (0, 1)")));
    }
    let k = (p_fa * n_tr.saturating_sub(w) as f64).floor() as usize;
    if k == 0 || k > train_smds.len() {
        return Err(Error::insufficient(alloc::format!(
            "empirical threshold index {k} outside 1..={} (p_fa {p_fa}, n_tr {n_tr}, w {w})",
            train_smds.len()
        )));
    }
    let mut sorted = train_smds.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    Ok(sorted[k - 1])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    Theoretical,
    Empirical,
}

/// SMD trace and verdicts over a test span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    /// Series index of the first scored sample.
    pub start_index: usize,
    pub smd: Vec<f64>,
    pub threshold: f64,
    pub alarms: Vec<bool>,
    pub p_fa_target: f64,
    pub threshold_mode: ThresholdMode,
}

impl DetectionReport {
    pub fn alarm_count(&self) -> usize {
        self.alarms.iter().filter(|&&a| a).count()
    }

    /// Series index of the first alarm.
    pub fn first_alarm(&self) -> Option<usize> {
        self.alarms.iter().position(|&a| a).map(|i| i + self.start_index)
    }

    /// Series index of the first alarm at or after series index `from`.
    pub fn first_alarm_from(&self, from: usize) -> Option<usize> {
        let skip = from.saturating_sub(self.start_index);
        self.alarms
            .iter()
            .skip(skip)
            .position(|&a| a)
            .map(|i| i + skip + self.start_index)
    }

    pub fn alarm_rate(&self) -> f64 {
        if self.alarms.is_empty() {
            0.0
        } else {
            self.alarm_count() as f64 / self.alarms.len() as f64
        }
    }
}

/// Scores every vector of `test_errors` and flags those above `threshold`.
pub fn detect<V: AsRef<[f64]>>(
    stats: &ErrorStats,
    test_errors: &[V],
    threshold: f64,
    p_fa: f64,
    mode: ThresholdMode,
) -> Result<DetectionReport> {
    if !(threshold >= 0.0) {
        return Err(Error::domain("threshold must be non-negative"));
    }
    let smd: Vec<f64> = test_errors
        .iter()
        .map(|e| smd(stats, e.as_ref()))
        .collect::<Result<_>>()?;
    let alarms = smd.iter().map(|&d| d > threshold).collect();
    Ok(DetectionReport { start_index: 0, smd, threshold, alarms, p_fa_target: p_fa, threshold_mode: mode })
}

/// Error vectors `δ_j = F_i(window) − z_i[j]` for `j in from..len`, one
/// predictor per batch.
pub fn prediction_errors(predictors: &[Predictor], batches: &BatchSeries, from: usize) -> Result<Vec<Vec<f64>>> {
    if predictors.len() != batches.n_batches() {
        return Err(Error::DimensionMismatch { expected: batches.n_batches(), actual: predictors.len() });
    }
    let len = batches.len();
    let mut out = vec![vec![0.0; predictors.len()]; len.saturating_sub(from)];
    for (i, p) in predictors.iter().enumerate() {
        let series = batches.series(i);
        let pred = p.predict_series(series, from)?;
        for (k, v) in pred.iter().enumerate() {
            out[k][i] = v - series[from + k];
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{chi2_cdf, substream, GaussianSampler};
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn random_spd(dim: usize, seed: u64) -> SymMatrix {
        let mut rng = substream(seed, 10, 0);
        let a: Vec<f64> = (0..dim * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        SymMatrix::from_fn(dim, |i, j| {
            (0..dim).map(|k| a[i * dim + k] * a[j * dim + k]).sum::<f64>() + if i == j { 0.5 } else { 0.0 }
        })
    }

    /// Gaussian elimination with partial pivoting, then a dot product.
    fn solve_then_dot(m: &SymMatrix, v: &[f64]) -> f64 {
        let n = v.len();
        let mut a: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut row: Vec<f64> = (0..n).map(|j| m.get(i, j)).collect();
                row.push(v[i]);
                row
            })
            .collect();
        for c in 0..n {
            let piv = (c..n).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs())).unwrap();
            a.swap(c, piv);
            for r in c + 1..n {
                let f = a[r][c] / a[c][c];
                for k in c..=n {
                    a[r][k] -= f * a[c][k];
                }
            }
        }
        let mut x = vec![0.0; n];
        for r in (0..n).rev() {
            x[r] = (a[r][n] - (r + 1..n).map(|k| a[r][k] * x[k]).sum::<f64>()) / a[r][r];
        }
        x.iter().zip(v).map(|(a, b)| a * b).sum()
    }

    fn kappa(k: u32) -> ChiSquaredDof {
        ChiSquaredDof::new(k).unwrap()
    }

    #[test]
    fn identical_errors_fall_back_to_the_ridge() {
        let errors = vec![vec![1.0, -2.0, 0.5]; 10];
        let s = fit_error_stats(&errors, Some(0.25)).unwrap();
        assert_eq!(s.mu, vec![1.0, -2.0, 0.5]);
        assert_eq!(s.sigma, SymMatrix::zeros(3));
        assert!(s.sigma_inv.max_abs_diff(&SymMatrix::from_diagonal(&[4.0; 3])) < 1e-12);
        assert_eq!(fit_error_stats(&errors, None), Err(Error::ZeroVariance));
    }

    #[test]
    fn two_samples_in_one_dimension() {
        let s = fit_error_stats(&[[0.0], [2.0]], Some(0.0)).unwrap();
        assert_eq!(s.mu, vec![1.0]);
        assert_eq!(s.sigma.get(0, 0), 2.0);
    }

    #[test]
    fn too_few_vectors() {
        assert!(matches!(fit_error_stats(&[[0.0, 1.0, 2.0], [1.0, 1.0, 1.0]], None), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn recovers_known_moments() {
        let cov = random_spd(4, 1);
        let mean = [1.0, -0.5, 2.0, 0.0];
        let sampler = GaussianSampler::new(&mean, &cov).unwrap();
        let mut rng = substream(2, 11, 0);
        let draws: Vec<Vec<f64>> = (0..100_000).map(|_| sampler.sample(&mut rng)).collect();
        let s = fit_error_stats(&draws, None).unwrap();
        let diff = SymMatrix::from_fn(4, |i, j| s.sigma.get(i, j) - cov.get(i, j));
        assert!(diff.frobenius_norm() / cov.frobenius_norm() < 0.02);
        let mean_err: f64 = s.mu.iter().zip(&mean).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(mean_err < 0.02 * cov.frobenius_norm().sqrt());
        // Inverse of the regularized covariance.
        let prod = s.sigma.add_ridge(s.ridge).matmul(&s.sigma_inv);
        for i in 0..4 {
            for j in 0..4 {
                assert!((prod[i * 4 + j] - f64::from(u8::from(i == j))).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn smd_hand_values() {
        let s = ErrorStats::from_moments(vec![0.0; 9], SymMatrix::identity(9), 0.0).unwrap();
        assert_eq!(smd(&s, &[0.0; 9]).unwrap(), 0.0);
        let mut e = [0.0; 9];
        e[4] = 1.0;
        assert_eq!(smd(&s, &e).unwrap(), 1.0);
        assert!(smd(&s, &[0.0; 8]).is_err());
    }

    #[test]
    fn smd_matches_elimination_oracle() {
        for seed in 0..10 {
            let cov = random_spd(5, seed);
            let mut rng = substream(seed, 12, 0);
            let mu: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
            let delta: Vec<f64> = (0..5).map(|_| rng.random_range(-3.0..3.0)).collect();
            let s = ErrorStats::from_moments(mu.clone(), cov.clone(), 0.0).unwrap();
            let centered: Vec<f64> = delta.iter().zip(&mu).map(|(a, b)| a - b).collect();
            let oracle = solve_then_dot(&cov, &centered);
            assert!((smd(&s, &delta).unwrap() - oracle).abs() < 1e-8 * oracle.max(1.0));
        }
    }

    #[test]
    fn theoretical_threshold_values() {
        assert!((threshold_theoretical(0.01, kappa(9)).unwrap() - 21.67).abs() < 0.01);
        // Oracle: Simpson quadrature of the χ²₁ density, t = √x substitution,
        // P(X ≤ m) = ∫₀^√m 2 φ(t) dt = 0.5 at the median.
        let median = threshold_theoretical(0.5, kappa(1)).unwrap();
        let upper = median.sqrt();
        let steps = 2000;
        let h = upper / steps as f64;
        let f = |t: f64| 2.0 * (-0.5 * t * t).exp() / (2.0 * core::f64::consts::PI).sqrt();
        let simpson: f64 = (0..=steps)
            .map(|i| {
                let wgt = if i == 0 || i == steps { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                wgt * f(i as f64 * h)
            })
            .sum::<f64>()
            * h
            / 3.0;
        assert!((simpson - 0.5).abs() < 1e-9);
        assert!((median - 0.4549).abs() < 1e-3);
        assert!(threshold_theoretical(0.999, kappa(9)).unwrap() < threshold_theoretical(0.9, kappa(9)).unwrap());
        assert!(threshold_theoretical(0.0, kappa(9)).is_err());
        assert!(threshold_theoretical(1.0, kappa(9)).is_err());
    }

    #[test]
    fn empirical_threshold_ordering() {
        let d = [5.0, 1.0, 9.0, 3.0];
        // k = ⌊0.25 · (8 − 4)⌋ = 1
        assert_eq!(threshold_empirical(&d, 0.25, 8, 4).unwrap(), 9.0);
        // k = ⌊0.5 · (12 − 4)⌋ = 4
        assert_eq!(threshold_empirical(&d, 0.5, 12, 4).unwrap(), 1.0);
        assert!(threshold_empirical(&d, 0.1, 8, 4).is_err());
        assert!(threshold_empirical(&d, 0.9, 12, 4).is_err());
    }

    #[test]
    fn empirical_threshold_of_chi2_draws() {
        let theory = threshold_theoretical(0.01, kappa(9)).unwrap();
        let hits = (0..50)
            .filter(|&seed| {
                let mut rng = substream(seed, 13, 0);
                let d: Vec<f64> = (0..10_000)
                    .map(|_| (0..9).map(|_| rng.sample::<f64, _>(StandardNormal).powi(2)).sum())
                    .collect();
                let t = threshold_empirical(&d, 0.01, 10_000 + 96, 96).unwrap();
                (20.5..=23.0).contains(&t) && (t - theory).abs() <= 0.1 * theory
            })
            .count();
        assert!(hits >= 48, "{hits}/50");
    }

    #[test]
    fn detect_flags_exceedances_only() {
        let s = ErrorStats::from_moments(vec![0.0; 3], SymMatrix::identity(3), 0.0).unwrap();
        let mut errors = vec![vec![0.0; 3]; 20];
        let r = detect(&s, &errors, 21.0, 0.01, ThresholdMode::Theoretical).unwrap();
        assert_eq!(r.alarm_count(), 0);
        errors[7] = vec![1000.0, 0.0, 0.0];
        let r = detect(&s, &errors, 21.0, 0.01, ThresholdMode::Theoretical).unwrap();
        assert_eq!(r.alarm_count(), 1);
        assert_eq!(r.first_alarm(), Some(7));
        assert_eq!(r.first_alarm_from(8), None);
    }

    #[test]
    fn calibrated_alarm_rate_and_ks_distance() {
        let cov = random_spd(9, 5);
        let mean = vec![0.3; 9];
        let sampler = GaussianSampler::new(&mean, &cov).unwrap();
        let s = ErrorStats::from_moments(mean, cov, 0.0).unwrap();
        let mut rng = substream(6, 14, 0);
        let errors: Vec<Vec<f64>> = (0..100_000).map(|_| sampler.sample(&mut rng)).collect();
        let t = threshold_theoretical(0.01, s.kappa()).unwrap();
        let r = detect(&s, &errors, t, 0.01, ThresholdMode::Theoretical).unwrap();
        assert!((r.alarm_rate() - 0.01).abs() < 0.004, "{}", r.alarm_rate());
        let mut d = r.smd.clone();
        d.sort_by(f64::total_cmp);
        let n = d.len() as f64;
        let ks = d
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let c = chi2_cdf(kappa(9), x);
                (c - i as f64 / n).abs().max((c - (i + 1) as f64 / n).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 0.01, "{ks}");
    }

    proptest! {
        #[test]
        fn lowering_threshold_keeps_alarms(seed in 0u64..500, t1 in 0.0f64..30.0, drop in 0.0f64..30.0) {
            let s = ErrorStats::from_moments(vec![0.0; 4], random_spd(4, seed), 0.0).unwrap();
            let mut rng = substream(seed, 15, 0);
            let errors: Vec<Vec<f64>> = (0..50).map(|_| (0..4).map(|_| rng.random_range(-3.0..3.0)).collect()).collect();
            let hi = detect(&s, &errors, t1, 0.01, ThresholdMode::Theoretical).unwrap();
            let lo = detect(&s, &errors, (t1 - drop).max(0.0), 0.01, ThresholdMode::Theoretical).unwrap();
            for (a, b) in hi.alarms.iter().zip(&lo.alarms) {
                prop_assert!(!a || *b);
            }
        }

        #[test]
        fn smd_is_affine_equivariant(seed in 0u64..500) {
            let dim = 4;
            let sigma = random_spd(dim, seed);
            let mut rng = substream(seed, 16, 0);
            let mu: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let delta: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
            // Well-conditioned map: identity plus a small perturbation.
            let a: Vec<f64> = (0..dim * dim)
                .map(|k| f64::from(u8::from(k % (dim + 1) == 0)) + rng.random_range(-0.3..0.3))
                .collect();
            let apply = |v: &[f64]| -> Vec<f64> {
                (0..dim).map(|i| (0..dim).map(|k| a[i * dim + k] * v[k]).sum()).collect()
            };
            let sigma_a = SymMatrix::from_fn(dim, |i, j| {
                (0..dim).map(|k| (0..dim).map(|l| a[i * dim + k] * sigma.get(k, l) * a[j * dim + l]).sum::<f64>()).sum()
            });
            let s1 = ErrorStats::from_moments(mu.clone(), sigma, 0.0).unwrap();
            let s2 = ErrorStats::from_moments(apply(&mu), sigma_a, 0.0).unwrap();
            let d1 = smd(&s1, &delta).unwrap();
            let d2 = smd(&s2, &apply(&delta)).unwrap();
            prop_assert!((d1 - d2).abs() < 1e-8 * d1.max(1.0));
        }

        #[test]
        fn smd_is_non_negative(seed in 0u64..500) {
            let s = ErrorStats::from_moments(vec![0.0; 3], random_spd(3, seed), 1e-9).unwrap();
            let mut rng = substream(seed, 17, 0);
            let d: Vec<f64> = (0..3).map(|_| rng.random_range(-5.0..5.0)).collect();
            prop_assert!(smd(&s, &d).unwrap() >= 0.0);
        }
    }
}
