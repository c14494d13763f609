//! CSV and JSON file formats: datasets, manifests, load sequences and
//! detection reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use plcwatch_core::detector::{DetectionReport, ThresholdMode};
use plcwatch_core::emulator::{for_each_row, Scenario};
use plcwatch_core::load::LoadSample;
use plcwatch_core::timeseries::{BatchSeries, SnrPanel};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{AppError, Result};

pub const MANIFEST_FORMAT: &str = "plcwatch-dataset-manifest";
pub const MANIFEST_VERSION: u32 = 1;

/// Decimal places of SNR values in dataset files (0.1 mdB resolution, far
/// below the per-sample perturbation).
pub const SNR_DECIMALS: usize = 4;

/// Sidecar of a generated dataset. Its `config` regenerates the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub config: RunConfig,
    pub n_samples: usize,
    pub n_subcarriers: usize,
    pub onset_index: Option<usize>,
    /// Half-open sample ranges where the ground-truth mask is true.
    pub anomalous: Vec<(usize, usize)>,
}

impl Manifest {
    pub fn mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.n_samples];
        for &(a, b) in &self.anomalous {
            m[a..b].iter_mut().for_each(|v| *v = true);
        }
        m
    }
}

/// Run-length encoding of the true entries of `mask`.
pub fn mask_ranges(mask: &[bool]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (j, &m) in mask.iter().chain([&false]).enumerate() {
        match (m, start) {
            (true, None) => start = Some(j),
            (false, Some(s)) => {
                out.push((s, j));
                start = None;
            }
            _ => {}
        }
    }
    out
}

/// `foo.csv` → `foo.manifest.json`.
pub fn manifest_path(dataset: &Path) -> PathBuf {
    dataset.with_extension("manifest.json")
}

/// The manifest next to `dataset`, if there is one.
pub fn sidecar_manifest(dataset: &Path) -> Result<Option<Manifest>> {
    let path = manifest_path(dataset);
    if !path.is_file() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(&path).map_err(|e| AppError::io(&path, e))?;
    let m: Manifest =
        serde_json::from_str(&text).map_err(|e| AppError::data(format!("{}: {e}", path.display())))?;
    if m.format != MANIFEST_FORMAT || m.version != MANIFEST_VERSION {
        return Err(AppError::data(format!(
            "{}: expected {MANIFEST_FORMAT} version {MANIFEST_VERSION}, found {} version {}",
            path.display(),
            m.format,
            m.version
        )));
    }
    Ok(Some(m))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| AppError::io(path, e))
}

pub fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(create(path)?))
}

fn csv_reader(path: &Path) -> Result<csv::Reader<BufReader<File>>> {
    let f = File::open(path).map_err(|e| AppError::io(path, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(BufReader::new(f)))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| AppError::data(e.to_string()))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| AppError::io(path, e))
}

fn dataset_header(n_subcarriers: usize) -> Vec<String> {
    std::iter::once("t_index".to_string())
        .chain((0..n_subcarriers).map(|k| format!("snr_db_{k}")))
        .collect()
}

/// Streams the SNR rows of `scenario` to `path` and returns the mask.
pub fn write_dataset(path: &Path, scenario: &Scenario) -> Result<Vec<bool>> {
    let mut w = csv_writer(path)?;
    w.write_record(dataset_header(scenario.band.n_subcarriers))?;
    let mut mask = Vec::with_capacity(scenario.n_samples);
    let mut buf = String::new();
    let mut io_err = None;
    for_each_row(scenario, |j, row, anomalous| {
        mask.push(anomalous);
        if let Err(e) = write_row(&mut w, &mut buf, j as i64, row) {
            io_err = Some(e);
            return Err(plcwatch_core::Error::InsufficientData("write failed".into()));
        }
        Ok(())
    })
    .map_err(|e| io_err.take().unwrap_or_else(|| e.into()))?;
    w.flush().map_err(|e| AppError::io(path, e))?;
    Ok(mask)
}

fn write_row<W: Write>(w: &mut csv::Writer<W>, buf: &mut String, t: i64, row: &[f64]) -> Result<()> {
    buf.clear();
    write!(buf, "{t}").expect("write to String");
    w.write_field(buf.as_bytes())?;
    for v in row {
        buf.clear();
        write!(buf, "{v:.SNR_DECIMALS$}").expect("write to String");
        w.write_field(buf.as_bytes())?;
    }
    w.write_record(None::<&[u8]>)?;
    Ok(())
}

/// Writes `panel` in the dataset schema with `t_index` counting from
/// `first_index`.
pub fn write_panel(path: &Path, panel: &SnrPanel, first_index: i64) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(dataset_header(panel.n_subcarriers()))?;
    let mut buf = String::new();
    for (j, row) in panel.rows().enumerate() {
        write_row(&mut w, &mut buf, first_index + j as i64, row)?;
    }
    w.flush().map_err(|e| AppError::io(path, e))
}

/// Load sequence as `index,real_ohms,imag_ohms`.
pub fn write_loads(path: &Path, loads: &[LoadSample]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["index", "real_ohms", "imag_ohms"])?;
    for (j, l) in loads.iter().enumerate() {
        let z = l.ohms();
        w.write_record([j.to_string(), z.re.to_string(), z.im.to_string()])?;
    }
    w.flush().map_err(|e| AppError::io(path, e))
}

fn check_header(path: &Path, header: &csv::StringRecord) -> Result<usize> {
    let n = header.len().saturating_sub(1);
    if n == 0 || header.iter().ne(dataset_header(n).iter().map(String::as_str)) {
        return Err(AppError::data(format!(
            "{}: header must be t_index,snr_db_0,…,snr_db_N",
            path.display()
        )));
    }
    Ok(n)
}

fn parse_row(path: &Path, rec: &csv::StringRecord, line: usize, row: &mut [f64]) -> Result<i64> {
    let bad = |what: &str| AppError::data(format!("{}: line {line}: {what}", path.display()));
    if rec.len() != row.len() + 1 {
        return Err(bad(&format!("expected {} fields, got {}", row.len() + 1, rec.len())));
    }
    let t = rec[0].parse::<i64>().map_err(|_| bad("t_index is not an integer"))?;
    for (o, field) in row.iter_mut().zip(rec.iter().skip(1)) {
        *o = field.parse::<f64>().map_err(|_| bad(&format!("`{field}` is not a number")))?;
        if !o.is_finite() {
            return Err(bad("non-finite SNR value"));
        }
    }
    Ok(t)
}

/// Reads a dataset CSV straight into stabilizer-batch means. `t_index`
/// must count up by one from its first value.
pub fn read_dataset_batches(path: &Path, n_batches: usize) -> Result<BatchSeries> {
    let mut r = csv_reader(path)?;
    let n = check_header(path, r.headers()?)?;
    if n < n_batches {
        return Err(AppError::data(format!(
            "{}: {n} subcarriers cannot fill {n_batches} batches",
            path.display()
        )));
    }
    let mut batches = BatchSeries::empty(n, n_batches)?;
    let mut row = vec![0.0; n];
    let mut rec = csv::StringRecord::new();
    let mut expected = None;
    let mut line = 1;
    while r.read_record(&mut rec)? {
        line += 1;
        let t = parse_row(path, &rec, line, &mut row)?;
        if expected.is_some_and(|e| e != t) {
            return Err(AppError::data(format!(
                "{}: line {line}: t_index {t} breaks the regular grid; run `ingest` first",
                path.display()
            )));
        }
        expected = Some(t + 1);
        batches.push_row(&row);
    }
    if expected.is_none() {
        return Err(AppError::data(format!("{}: no data rows", path.display())));
    }
    Ok(batches)
}

/// Timestamped rows of a recording, ready for regularization.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub times: Vec<i64>,
    pub rows: Vec<Vec<f64>>,
}

/// Wide recording; `t_index` is converted to seconds with `period_s`.
pub fn read_wide(path: &Path, period_s: i64) -> Result<Recording> {
    let mut r = csv_reader(path)?;
    let n = check_header(path, r.headers()?)?;
    let mut out = Recording { times: Vec::new(), rows: Vec::new() };
    let mut rec = csv::StringRecord::new();
    let mut line = 1;
    while r.read_record(&mut rec)? {
        line += 1;
        let mut row = vec![0.0; n];
        let t = parse_row(path, &rec, line, &mut row)?;
        out.times.push(t * period_s);
        out.rows.push(row);
    }
    Ok(out)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LongRecord {
    timestamp: i64,
    subcarrier: usize,
    snr_db: f64,
}

/// Long recording `timestamp,subcarrier,snr_db`. Every timestamp must
/// report every subcarrier exactly once.
pub fn read_long(path: &Path) -> Result<Recording> {
    let mut r = csv_reader(path)?;
    let mut by_time: BTreeMap<i64, BTreeMap<usize, f64>> = BTreeMap::new();
    let mut n_sub = 0;
    for (i, rec) in r.deserialize::<LongRecord>().enumerate() {
        let rec = rec?;
        let line = i + 2;
        if !rec.snr_db.is_finite() {
            return Err(AppError::data(format!("{}: line {line}: non-finite snr_db", path.display())));
        }
        n_sub = n_sub.max(rec.subcarrier + 1);
        if by_time.entry(rec.timestamp).or_default().insert(rec.subcarrier, rec.snr_db).is_some() {
            return Err(AppError::data(format!(
                "{}: line {line}: duplicate subcarrier {} at timestamp {}",
                path.display(),
                rec.subcarrier,
                rec.timestamp
            )));
        }
    }
    let mut out = Recording { times: Vec::new(), rows: Vec::new() };
    for (t, cells) in by_time {
        if cells.len() != n_sub {
            return Err(AppError::data(format!(
                "{}: timestamp {t} has {} of {n_sub} subcarriers",
                path.display(),
                cells.len()
            )));
        }
        out.times.push(t);
        out.rows.push(cells.into_values().collect());
    }
    if out.rows.is_empty() {
        return Err(AppError::data(format!("{}: no data rows", path.display())));
    }
    Ok(out)
}

/// `index,smd,alarm` rows of a detection report.
pub fn write_detection_csv(path: &Path, report: &DetectionReport) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["index", "smd", "alarm"])?;
    for (k, (d, a)) in report.smd.iter().zip(&report.alarms).enumerate() {
        w.write_record([(report.start_index + k).to_string(), d.to_string(), u8::from(*a).to_string()])?;
    }
    w.flush().map_err(|e| AppError::io(path, e))
}

/// JSON summary of a detection run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionSummary {
    pub threshold: f64,
    pub threshold_mode: ThresholdMode,
    pub p_fa_target: f64,
    pub start_index: usize,
    pub scored_samples: usize,
    pub alarm_count: usize,
    pub alarm_rate: f64,
    pub first_alarm_index: Option<usize>,
    /// Ground truth, when the dataset has a manifest.
    pub onset_index: Option<usize>,
    pub first_alarm_after_onset: Option<usize>,
    /// Samples from onset to the first alarm at or after it.
    pub detection_delay: Option<usize>,
    /// Alarm rate over scored samples whose mask is false.
    pub false_alarm_rate: Option<f64>,
}

impl DetectionSummary {
    pub fn new(report: &DetectionReport, mask: Option<&[bool]>) -> Self {
        let onset = mask.and_then(|m| m.iter().position(|&a| a));
        let first_after = onset.and_then(|o| report.first_alarm_from(o));
        let false_alarm_rate = mask.map(|m| {
            let (mut n, mut hits) = (0usize, 0usize);
            for (k, &a) in report.alarms.iter().enumerate() {
                if !m.get(report.start_index + k).copied().unwrap_or(false) {
                    n += 1;
                    hits += usize::from(a);
                }
            }
            if n == 0 { 0.0 } else { hits as f64 / n as f64 }
        });
        Self {
            threshold: report.threshold,
            threshold_mode: report.threshold_mode,
            p_fa_target: report.p_fa_target,
            start_index: report.start_index,
            scored_samples: report.smd.len(),
            alarm_count: report.alarm_count(),
            alarm_rate: report.alarm_rate(),
            first_alarm_index: report.first_alarm(),
            onset_index: onset,
            first_alarm_after_onset: first_after,
            detection_delay: onset.zip(first_after).map(|(o, f)| f - o),
            false_alarm_rate,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_ranges_round_trip() {
        let mask = [false, true, true, false, false, true];
        assert_eq!(mask_ranges(&mask), vec![(1, 3), (5, 6)]);
        assert!(mask_ranges(&[false; 4]).is_empty());
    }

    #[test]
    fn manifest_path_replaces_extension() {
        assert_eq!(manifest_path(Path::new("out/syn1.csv")), PathBuf::from("out/syn1.manifest.json"));
    }

    #[test]
    fn summary_reports_delay_and_false_alarms() {
        let report = DetectionReport {
            start_index: 10,
            smd: vec![1.0, 30.0, 2.0, 1.0, 40.0, 50.0],
            threshold: 21.67,
            alarms: vec![false, true, false, false, true, true],
            p_fa_target: 0.01,
            threshold_mode: ThresholdMode::Theoretical,
        };
        let mut mask = vec![false; 16];
        mask[13..].iter_mut().for_each(|m| *m = true);
        let s = DetectionSummary::new(&report, Some(&mask));
        assert_eq!(s.first_alarm_index, Some(11));
        assert_eq!(s.onset_index, Some(13));
        assert_eq!(s.first_alarm_after_onset, Some(14));
        assert_eq!(s.detection_delay, Some(1));
        assert!((s.false_alarm_rate.unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(s.alarm_count, 3);
    }
}
