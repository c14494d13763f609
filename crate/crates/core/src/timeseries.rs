//! SNR panels, stabilizer batches, supervised windows and the normalized
//! RMSE metric.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, SAMPLE_PERIOD_S};

/// Time-indexed matrix of per-subcarrier SNR values in dB, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SnrPanel {
    n_subcarriers: usize,
    values: Vec<f64>,
}

impl SnrPanel {
    pub const PERIOD_S: u32 = SAMPLE_PERIOD_S;

    pub fn new(n_subcarriers: usize, values: Vec<f64>) -> Result<Self> {
        if n_subcarriers == 0 || values.is_empty() || values.len() % n_subcarriers != 0 {
            return Err(Error::DimensionMismatch {
                expected: n_subcarriers.max(1),
                actual: values.len(),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(alloc::format!(
                "non-finite SNR at sample {}, subcarrier {}",
                pos / n_subcarriers,
                pos % n_subcarriers
            )));
        }
        Ok(Self {
            n_subcarriers,
            values,
        })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n_sc = rows.first().map_or(0, |r| r.as_ref().len());
        let mut values = Vec::with_capacity(rows.len() * n_sc);
        for r in rows {
            let r = r.as_ref();
            if r.len() != n_sc {
                return Err(Error::DimensionMismatch {
                    expected: n_sc,
                    actual: r.len(),
                });
            }
            values.extend_from_slice(r);
        }
        Self::new(n_sc, values)
    }

    pub fn n_samples(&self) -> usize {
        self.values.len() / self.n_subcarriers
    }

    pub fn n_subcarriers(&self) -> usize {
        self.n_subcarriers
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.values[j * self.n_subcarriers..(j + 1) * self.n_subcarriers]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n_subcarriers)
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.values[j * self.n_subcarriers + k]
    }
}

/// Contiguous subcarrier ranges for `n_batches` stabilizer batches.
///
/// Each batch gets `n_sc / n_batches` subcarriers and the remainder goes one
/// each to the leading batches.
pub fn batch_bounds(n_subcarriers: usize, n_batches: usize) -> Result<Vec<Range<usize>>> {
    if n_batches == 0 || n_batches > n_subcarriers {
        return Err(Error::config(alloc::format!(
            "cannot split {n_subcarriers} subcarriers into {n_batches} batches"
        )));
    }
    let base = n_subcarriers / n_batches;
    let extra = n_subcarriers % n_batches;
    let mut start = 0;
    Ok((0..n_batches)
        .map(|i| {
            let len = base + usize::from(i < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect())
}

/// Batch-mean SNR series `z_i` for every stabilizer batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSeries {
    bounds: Vec<Range<usize>>,
    series: Vec<Vec<f64>>,
}

impl BatchSeries {
    pub fn empty(n_subcarriers: usize, n_batches: usize) -> Result<Self> {
        let bounds = batch_bounds(n_subcarriers, n_batches)?;
        Ok(Self {
            series: vec![Vec::new(); bounds.len()],
            bounds,
        })
    }

    /// Builds from explicit per-batch series (all of one length).
    pub fn from_series(bounds: Vec<Range<usize>>, series: Vec<Vec<f64>>) -> Result<Self> {
        if bounds.len() != series.len() || series.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: bounds.len(),
                actual: series.len(),
            });
        }
        let len = series[0].len();
        if series.iter().any(|s| s.len() != len) {
            return Err(Error::domain("batch series lengths differ"));
        }
        Ok(Self { bounds, series })
    }

    /// Appends one panel row, averaging it per batch.
    pub fn push_row(&mut self, row: &[f64]) {
        for (range, s) in self.bounds.iter().zip(self.series.iter_mut()) {
            let members = &row[range.clone()];
            s.push(members.iter().sum::<f64>() / members.len() as f64);
        }
    }

    pub fn n_batches(&self) -> usize {
        self.series.len()
    }

    pub fn len(&self) -> usize {
        self.series[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn bounds(&self) -> &[Range<usize>] {
        &self.bounds
    }

    pub fn series(&self, i: usize) -> &[f64] {
        &self.series[i]
    }

    pub fn all_series(&self) -> &[Vec<f64>] {
        &self.series
    }

    /// Copy restricted to samples `range`.
    pub fn slice(&self, range: Range<usize>) -> BatchSeries {
        BatchSeries {
            bounds: self.bounds.clone(),
            series: self.series.iter().map(|s| s[range.clone()].to_vec()).collect(),
        }
    }

    /// Appends the samples of `other`, which must share the batch layout.
    pub fn append(&mut self, other: &BatchSeries) -> Result<()> {
        if other.bounds != self.bounds {
            return Err(Error::domain("batch layouts differ"));
        }
        for (s, o) in self.series.iter_mut().zip(&other.series) {
            s.extend_from_slice(o);
        }
        Ok(())
    }
}

/// Averages each contiguous stabilizer batch of `panel`.
pub fn batch_average(panel: &SnrPanel, n_batches: usize) -> Result<BatchSeries> {
    let mut out = BatchSeries::empty(panel.n_subcarriers(), n_batches)?;
    for row in panel.rows() {
        out.push_row(row);
    }
    Ok(out)
}

/// Supervised windows of one series: input `[x_j, …, x_{j+w-1}]`, label
/// `x_{j+w}`.
///
/// Pairs are ordered by `j`; the first `n_train` of them have their label
/// inside the training prefix (`j + w < n_tr` with 0-based indices).
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedSet {
    pub window: usize,
    pub split_index: usize,
    inputs: Vec<f64>,
    labels: Vec<f64>,
    n_train: usize,
}

impl WindowedSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.window..(i + 1) * self.window]
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    /// 0-based series index of the label of pair `i`.
    pub fn label_index(&self, i: usize) -> usize {
        i + self.window
    }

    pub fn n_train(&self) -> usize {
        self.n_train
    }

    pub fn train(&self) -> Range<usize> {
        0..self.n_train
    }

    pub fn test(&self) -> Range<usize> {
        self.n_train..self.len()
    }

    pub fn train_inputs(&self) -> &[f64] {
        &self.inputs[..self.n_train * self.window]
    }

    pub fn train_labels(&self) -> &[f64] {
        &self.labels[..self.n_train]
    }
}

pub fn make_windows(series: &[f64], w: usize, n_tr: usize) -> Result<WindowedSet> {
    if w == 0 || w >= series.len() {
        return Err(Error::insufficient(alloc::format!(
            "window {w} needs a series longer than {w}, got {}",
            series.len()
        )));
    }
    let n_pairs = series.len() - w;
    let mut inputs = Vec::with_capacity(n_pairs * w);
    for j in 0..n_pairs {
        inputs.extend_from_slice(&series[j..j + w]);
    }
    Ok(WindowedSet {
        window: w,
        split_index: n_tr,
        inputs,
        labels: series[w..].to_vec(),
        n_train: n_tr.saturating_sub(w).min(n_pairs),
    })
}

/// Root squared prediction error over the root squared deviation of
/// `actual` from its own mean.
pub fn normalized_rmse(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    if actual.len() != predicted.len() {
        return Err(Error::DimensionMismatch {
            expected: actual.len(),
            actual: predicted.len(),
        });
    }
    if actual.is_empty() {
        return Err(Error::insufficient("normalized RMSE of an empty series"));
    }
    let mean = actual.iter().sum::<f64>() / actual.len() as f64;
    let num: f64 = actual.iter().zip(predicted).map(|(a, p)| (a - p).powi(2)).sum();
    let den: f64 = actual.iter().map(|a| (a - mean).powi(2)).sum();
    if den == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok((num / den).sqrt())
}

/// A run of evenly spaced rows recovered from irregular timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularSegment {
    pub start_time: i64,
    pub panel: SnrPanel,
    /// Rows synthesized by forward fill, as indices into `panel`.
    pub filled: Vec<usize>,
}

/// Puts timestamped rows onto a uniform grid of `period` seconds.
///
/// Up to `max_fill` consecutive missing slots are forward-filled from the
/// previous row; a longer gap ends the current segment. Timestamps must be
/// strictly increasing; off-grid timestamps snap to the nearest slot.
pub fn regularize(
    times: &[i64],
    rows: &[Vec<f64>],
    period: i64,
    max_fill: usize,
) -> Result<Vec<RegularSegment>> {
    if times.len() != rows.len() {
        return Err(Error::DimensionMismatch {
            expected: times.len(),
            actual: rows.len(),
        });
    }
    if period <= 0 {
        return Err(Error::config("period must be positive"));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("timestamps must be strictly increasing"));
    }
    let mut segments = Vec::new();
    let mut current: Vec<Vec<f64>> = Vec::new();
    let mut filled = Vec::new();
    let mut start = 0;
    let mut last_slot = 0_i64;
    let flush = |current: &mut Vec<Vec<f64>>, filled: &mut Vec<usize>, start: i64, out: &mut Vec<RegularSegment>| -> Result<()> {
        if !current.is_empty() {
            out.push(RegularSegment {
                start_time: start,
                panel: SnrPanel::from_rows(current)?,
                filled: core::mem::take(filled),
            });
            current.clear();
        }
        Ok(())
    };
    for (&t, row) in times.iter().zip(rows) {
        let slot = (t - times[0] + period / 2).div_euclid(period);
        if !current.is_empty() {
            let missing = (slot - last_slot - 1).max(0) as usize;
            if slot == last_slot {
                // Two readings in one slot: keep the later one.
                *current.last_mut().unwrap() = row.clone();
                continue;
            }
            if missing > max_fill {
                flush(&mut current, &mut filled, start, &mut segments)?;
            } else {
                let prev = current.last().unwrap().clone();
                for _ in 0..missing {
                    filled.push(current.len());
                    current.push(prev.clone());
                }
            }
        }
        if current.is_empty() {
            start = times[0] + slot * period;
        }
        current.push(row.clone());
        last_slot = slot;
    }
    flush(&mut current, &mut filled, start, &mut segments)?;
    Ok(segments)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_band_batch_sizes() {
        let sizes: Vec<usize> = batch_bounds(917, 9).unwrap().iter().map(|r| r.len()).collect();
        // 917 = 9·101 + 8: the eight leading batches take one extra each.
        assert_eq!(sizes, [102, 102, 102, 102, 102, 102, 102, 102, 101]);
        assert_eq!(sizes.iter().sum::<usize>(), 917);
        assert!(batch_bounds(5, 6).is_err());
        assert!(batch_bounds(5, 0).is_err());
    }

    #[test]
    fn constant_panel_gives_constant_batches() {
        let panel = SnrPanel::new(917, vec![30.0; 917 * 4]).unwrap();
        let b = batch_average(&panel, 9).unwrap();
        for i in 0..9 {
            assert!(b.series(i).iter().all(|v| (v - 30.0).abs() < 1e-12));
        }
    }

    #[test]
    fn panel_rejects_non_finite_and_ragged() {
        assert!(SnrPanel::new(2, vec![1.0, f64::NAN]).is_err());
        assert!(SnrPanel::new(2, vec![1.0, 2.0, 3.0]).is_err());
        assert!(SnrPanel::from_rows(&[vec![1.0, 2.0], vec![3.0]]).is_err());
    }

    #[test]
    fn windows_small_example() {
        let set = make_windows(&[1.0, 2.0, 3.0, 4.0], 2, 3).unwrap();
        assert_eq!(set.train(), 0..1);
        assert_eq!(set.input(0), [1.0, 2.0]);
        assert_eq!(set.label(0), 3.0);
        assert_eq!(set.test(), 1..2);
        assert_eq!(set.input(1), [2.0, 3.0]);
        assert_eq!(set.label(1), 4.0);
        assert_eq!(make_windows(&[1.0, 2.0, 3.0], 2, 3).unwrap().len(), 1);
        assert!(make_windows(&[1.0, 2.0], 2, 2).is_err());
    }

    #[test]
    fn nrmse_examples() {
        let a = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(normalized_rmse(&a, &a).unwrap(), 0.0);
        assert!((normalized_rmse(&a, &[2.5; 4]).unwrap() - 1.0).abs() < 1e-15);
        let v = normalized_rmse(&a, &[1.0, 2.0, 3.0, 5.0]).unwrap();
        assert!((v - 1.0 / 5.0_f64.sqrt()).abs() < 1e-12);
        assert_eq!(normalized_rmse(&[3.0; 3], &[1.0; 3]), Err(Error::ZeroVariance));
        assert!(normalized_rmse(&[], &[]).is_err());
    }

    #[test]
    fn regularize_fills_short_gaps_and_splits_long_ones() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64]).collect();
        // slots: 0, 1, 4 (gap of 2 filled), 10 (gap of 5 splits), 11, 12
        let times = [0, 900, 3600, 9000, 9900, 10_810];
        let segs = regularize(&times, &rows, 900, 4).unwrap();
        assert_eq!(segs.len(), 2);
        assert_eq!(segs[0].panel.n_samples(), 5);
        assert_eq!(segs[0].filled, vec![2, 3]);
        assert_eq!(segs[0].panel.row(3), [1.0]);
        assert_eq!(segs[1].start_time, 9000);
        assert_eq!(segs[1].panel.n_samples(), 3);
    }
}
