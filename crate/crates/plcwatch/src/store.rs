//! Versioned JSON model files: `batch_<i>.json` per stabilizer batch plus
//! `stats.json` with the error model.

use std::ops::Range;
use std::path::{Path, PathBuf};

use plcwatch_core::detector::ErrorStats;
use plcwatch_core::eval::Monitor;
use plcwatch_core::forecast::Predictor;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{AppError, Result};
use crate::formats::write_json;

pub const MODEL_FORMAT: &str = "plcwatch-model";
pub const STATS_FORMAT: &str = "plcwatch-stats";
pub const STORE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub batch: usize,
    /// Subcarrier range `[start, end)` averaged into this batch.
    pub subcarriers: (usize, usize),
    pub predictor: Predictor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatsFile {
    pub format: String,
    pub version: u32,
    pub n_batches: usize,
    pub batch_bounds: Vec<(usize, usize)>,
    pub window: usize,
    pub n_train: usize,
    pub stats: ErrorStats,
    pub train_smd: Vec<f64>,
}

pub fn model_path(dir: &Path, batch: usize) -> PathBuf {
    dir.join(format!("batch_{batch}.json"))
}

pub fn stats_path(dir: &Path) -> PathBuf {
    dir.join("stats.json")
}

/// Writes every model and the stats file; returns the written paths.
pub fn save_monitor(dir: &Path, monitor: &Monitor, bounds: &[Range<usize>]) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for (i, (p, r)) in monitor.predictors.iter().zip(bounds).enumerate() {
        let path = model_path(dir, i);
        write_json(
            &path,
            &ModelFile {
                format: MODEL_FORMAT.into(),
                version: STORE_VERSION,
                batch: i,
                subcarriers: (r.start, r.end),
                predictor: p.clone(),
            },
        )?;
        written.push(path);
    }
    let path = stats_path(dir);
    write_json(
        &path,
        &StatsFile {
            format: STATS_FORMAT.into(),
            version: STORE_VERSION,
            n_batches: monitor.predictors.len(),
            batch_bounds: bounds.iter().map(|r| (r.start, r.end)).collect(),
            window: monitor.window,
            n_train: monitor.n_train,
            stats: monitor.stats.clone(),
            train_smd: monitor.train_smd.clone(),
        },
    )?;
    written.push(path);
    Ok(written)
}

/// Parses a versioned file, rejecting a foreign format or version before
/// looking at the payload.
fn read_versioned<T: DeserializeOwned>(path: &Path, format: &str) -> Result<T> {
    if !path.is_file() {
        return Err(AppError::data(format!("missing artifact {}", path.display())));
    }
    let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| AppError::data(format!("{}: corrupt model file: {e}", path.display())))?;
    let found_format = value.get("format").and_then(|v| v.as_str());
    if found_format != Some(format) {
        return Err(AppError::data(format!(
            "{}: expected format `{format}`, found {found_format:?}",
            path.display()
        )));
    }
    let version = value.get("version").and_then(|v| v.as_u64());
    if version != Some(STORE_VERSION as u64) {
        return Err(AppError::data(format!(
            "{}: unsupported version {version:?} (this build reads version {STORE_VERSION})",
            path.display()
        )));
    }
    serde_json::from_value(value).map_err(|e| AppError::data(format!("{}: corrupt model file: {e}", path.display())))
}

/// Loads a monitor and its batch layout from `dir`.
pub fn load_monitor(dir: &Path) -> Result<(Monitor, Vec<Range<usize>>)> {
    let stats: StatsFile = read_versioned(&stats_path(dir), STATS_FORMAT)?;
    if stats.batch_bounds.len() != stats.n_batches || stats.stats.dim() != stats.n_batches {
        return Err(AppError::data(format!("{}: inconsistent batch count", stats_path(dir).display())));
    }
    let mut predictors = Vec::with_capacity(stats.n_batches);
    for i in 0..stats.n_batches {
        let path = model_path(dir, i);
        let m: ModelFile = read_versioned(&path, MODEL_FORMAT)?;
        if m.batch != i || m.subcarriers != stats.batch_bounds[i] || m.predictor.window != stats.window {
            return Err(AppError::data(format!("{}: does not match {}", path.display(), stats_path(dir).display())));
        }
        predictors.push(m.predictor);
    }
    if model_path(dir, stats.n_batches).exists() {
        return Err(AppError::data(format!(
            "{}: more model files than the {} batches in stats.json",
            dir.display(),
            stats.n_batches
        )));
    }
    let bounds = stats.batch_bounds.iter().map(|&(a, b)| a..b).collect();
    Ok((
        Monitor {
            predictors,
            stats: stats.stats,
            window: stats.window,
            n_train: stats.n_train,
            train_smd: stats.train_smd,
        },
        bounds,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use plcwatch_core::forecast::PredictorSpec;
    use plcwatch_core::timeseries::BatchSeries;

    fn monitor() -> (Monitor, Vec<Range<usize>>) {
        let series: Vec<Vec<f64>> = (0..2)
            .map(|b| (0..200).map(|j| ((j * (b + 3)) as f64 * 0.37).sin()).collect())
            .collect();
        let data = BatchSeries::from_series(vec![0..3, 3..5], series).unwrap();
        let m = Monitor::fit(&data, &PredictorSpec::Avg, 4, 0, None).unwrap();
        (m, data.bounds().to_vec())
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let (m, bounds) = monitor();
        let written = save_monitor(dir.path(), &m, &bounds).unwrap();
        assert_eq!(written.len(), 3);
        let (back, b2) = load_monitor(dir.path()).unwrap();
        assert_eq!(back, m);
        assert_eq!(b2, bounds);
    }

    #[test]
    fn version_and_corruption_are_explicit() {
        let dir = tempfile::tempdir().unwrap();
        let (m, bounds) = monitor();
        save_monitor(dir.path(), &m, &bounds).unwrap();
        let p = model_path(dir.path(), 1);
        let text = std::fs::read_to_string(&p).unwrap();
        std::fs::write(&p, text.replace("\"version\": 1", "\"version\": 2")).unwrap();
        let err = load_monitor(dir.path()).unwrap_err().to_string();
        assert!(err.contains("unsupported version"), "{err}");

        std::fs::write(&p, &text[..text.len() / 2]).unwrap();
        let err = load_monitor(dir.path()).unwrap_err().to_string();
        assert!(err.contains("corrupt"), "{err}");

        std::fs::remove_file(&p).unwrap();
        let err = load_monitor(dir.path()).unwrap_err().to_string();
        assert!(err.contains("missing artifact"), "{err}");
    }
}
