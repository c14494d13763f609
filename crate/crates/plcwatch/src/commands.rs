//! One function per subcommand. Each returns the paths it wrote.

use std::path::{Path, PathBuf};

use log::info;
use plcwatch_core::emulator::{generate_batches, FaultSpec};
use plcwatch_core::eval::{median, run_incipient, run_predictor_benchmark, run_roc, Monitor, OperatingPoint};
use plcwatch_core::forecast::{Predictor, TrainReport};
use plcwatch_core::timeseries::{normalized_rmse, regularize, BatchSeries};
use serde::Serialize;

use crate::config::{Command, IngestFormat, RunConfig};
use crate::error::{AppError, Result};
use crate::formats::{
    csv_writer, manifest_path, mask_ranges, read_dataset_batches, read_long, read_wide, sidecar_manifest,
    write_dataset, write_detection_csv, write_json, write_loads, write_panel, DetectionSummary, Manifest,
    MANIFEST_FORMAT, MANIFEST_VERSION,
};
use crate::store::{load_monitor, save_monitor};

/// Runs `command` with an already validated config, writing under `out`.
pub fn run(command: Command, cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    cfg.validate_for(command)?;
    std::fs::create_dir_all(out).map_err(|e| AppError::io(out, e))?;
    let written = match command {
        Command::Generate => generate(cfg, out),
        Command::Ingest => ingest(cfg, out),
        Command::Train => train(cfg, out),
        Command::Detect => detect(cfg, out),
        Command::Roc => roc(cfg, out),
        Command::Benchmark => benchmark(cfg, out),
        Command::Transfer => transfer(cfg, out),
        Command::Incipient => incipient(cfg, out),
    }?;
    for p in &written {
        info!("wrote {}", p.display());
    }
    Ok(written)
}

fn name<'a>(cfg: &'a RunConfig, default: &'a str) -> &'a str {
    cfg.name.as_deref().unwrap_or(default)
}

fn generate(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let scenario = cfg.scenario()?;
    let stem = name(cfg, "dataset");
    let csv = out.join(format!("{stem}.csv"));
    info!("generating {} samples × {} subcarriers", scenario.n_samples, scenario.band.n_subcarriers);
    let mask = write_dataset(&csv, scenario)?;
    let loads = out.join(format!("{stem}_loads.csv"));
    write_loads(&loads, &scenario.branch_loads()?)?;
    let mut resolved = cfg.clone();
    resolved.command = Some(Command::Generate);
    resolved.seed = Some(scenario.seed);
    let manifest = Manifest {
        format: MANIFEST_FORMAT.into(),
        version: MANIFEST_VERSION,
        config: resolved,
        n_samples: scenario.n_samples,
        n_subcarriers: scenario.band.n_subcarriers,
        onset_index: scenario.fault.onset_index(),
        anomalous: mask_ranges(&mask),
    };
    let mpath = manifest_path(&csv);
    write_json(&mpath, &manifest)?;
    Ok(vec![csv, mpath, loads])
}

#[derive(Serialize)]
struct IngestSegment {
    file: String,
    start_time: i64,
    n_samples: usize,
    filled_samples: usize,
}

fn ingest(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let ic = cfg.ingest.clone().unwrap_or_default();
    let input = cfg.paths.input.as_deref().expect("validated");
    let rec = match ic.format {
        IngestFormat::Wide => read_wide(input, ic.period_s)?,
        IngestFormat::Long => read_long(input)?,
    };
    let segments = regularize(&rec.times, &rec.rows, ic.period_s, ic.max_fill)?;
    let stem = name(cfg, "ingested");
    let mut written = Vec::new();
    let mut summary = Vec::new();
    for (k, seg) in segments.iter().enumerate() {
        let file = format!("{stem}_seg{k}.csv");
        let path = out.join(&file);
        write_panel(&path, &seg.panel, seg.start_time.div_euclid(ic.period_s))?;
        summary.push(IngestSegment {
            file,
            start_time: seg.start_time,
            n_samples: seg.panel.n_samples(),
            filled_samples: seg.filled.len(),
        });
        written.push(path);
    }
    let path = out.join(format!("{stem}.ingest.json"));
    write_json(&path, &summary)?;
    written.push(path);
    Ok(written)
}

#[derive(Serialize)]
struct BatchFit {
    batch: usize,
    subcarriers: (usize, usize),
    /// Normalized RMSE on the samples after `n_train`.
    test_nrmse: Option<f64>,
    training: Option<TrainReport>,
    error: Option<String>,
}

#[derive(Serialize)]
struct TrainSummary {
    dataset: String,
    predictor: String,
    seed: u64,
    n_samples: usize,
    n_train: usize,
    window: usize,
    batches: Vec<BatchFit>,
    threshold_theoretical: Option<f64>,
    threshold_empirical: Option<f64>,
    p_fa: f64,
}

fn split(cfg: &RunConfig, len: usize) -> Result<usize> {
    let n_tr = (cfg.data.train_fraction * len as f64).round() as usize;
    if n_tr <= cfg.data.window + cfg.data.n_batches {
        return Err(AppError::data(format!(
            "{len} samples leave {n_tr} for training, too few for window {} and {} batches",
            cfg.data.window, cfg.data.n_batches
        )));
    }
    Ok(n_tr)
}

fn train(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let dataset = cfg.paths.dataset.as_deref().expect("validated");
    let spec = cfg.predictor()?;
    let batches = read_dataset_batches(dataset, cfg.data.n_batches)?;
    let n_tr = split(cfg, batches.len())?;
    let seed = cfg.effective_seed();
    let window = cfg.data.window;
    let mut fits = Vec::new();
    let mut predictors = Vec::new();
    let mut first_error = None;
    for (i, series) in batches.all_series().iter().enumerate() {
        info!("fitting {} on batch {i}", spec.label());
        let range = &batches.bounds()[i];
        let fitted = Predictor::fit(spec, &series[..n_tr], window, seed.wrapping_add(i as u64));
        let (test_nrmse, training, error) = match &fitted {
            Ok(p) => {
                let nrmse = if n_tr < series.len() {
                    p.predict_series(series, n_tr)
                        .and_then(|pred| normalized_rmse(&series[n_tr..], &pred))
                        .ok()
                } else {
                    None
                };
                (nrmse, p.report, None)
            }
            Err(e) => (None, None, Some(e.to_string())),
        };
        fits.push(BatchFit { batch: i, subcarriers: (range.start, range.end), test_nrmse, training, error });
        match fitted {
            Ok(p) => predictors.push(p),
            Err(e) => {
                first_error.get_or_insert(AppError::from(e).context(format!("batch {i}")));
            }
        }
    }
    let monitor = match first_error {
        None => Some(Monitor::from_predictors(predictors, &batches.slice(0..n_tr), cfg.detector.ridge)),
        Some(_) => None,
    };
    let threshold = |mode| {
        monitor
            .as_ref()
            .and_then(|m| m.as_ref().ok())
            .and_then(|m| m.threshold(cfg.detector.p_fa, mode).ok())
    };
    let summary = TrainSummary {
        dataset: dataset.display().to_string(),
        predictor: spec.label(),
        seed,
        n_samples: batches.len(),
        n_train: n_tr,
        window,
        batches: fits,
        threshold_theoretical: threshold(plcwatch_core::detector::ThresholdMode::Theoretical),
        threshold_empirical: threshold(plcwatch_core::detector::ThresholdMode::Empirical),
        p_fa: cfg.detector.p_fa,
    };
    let report_path = out.join(format!("{}_report.json", name(cfg, "train")));
    write_json(&report_path, &summary)?;
    if let Some(e) = first_error {
        return Err(e);
    }
    let monitor = monitor.expect("fits succeeded")?;
    let models = cfg.paths.models.clone().unwrap_or_else(|| out.join("models"));
    let mut written = save_monitor(&models, &monitor, batches.bounds())?;
    written.push(report_path);
    Ok(written)
}

fn mask_of(dataset: &Path, len: usize) -> Result<Option<Vec<bool>>> {
    let Some(m) = sidecar_manifest(dataset)? else {
        return Ok(None);
    };
    if m.n_samples != len {
        return Err(AppError::data(format!(
            "{} describes {} samples but the dataset has {len}",
            manifest_path(dataset).display(),
            m.n_samples
        )));
    }
    Ok(Some(m.mask()))
}

fn write_detection(
    stem: &str,
    out: &Path,
    monitor: &Monitor,
    batches: &BatchSeries,
    cfg: &RunConfig,
    mask: Option<&[bool]>,
) -> Result<Vec<PathBuf>> {
    let from = cfg.detector.start_index.unwrap_or(monitor.window);
    if from < monitor.window || from >= batches.len() {
        return Err(AppError::config(format!(
            "detector.start_index {from} must lie in [{}, {})",
            monitor.window,
            batches.len()
        )));
    }
    let report = monitor.detect(batches, from, cfg.detector.p_fa, cfg.detector.threshold_mode)?;
    let csv = out.join(format!("{stem}.csv"));
    write_detection_csv(&csv, &report)?;
    let json = out.join(format!("{stem}.json"));
    write_json(&json, &DetectionSummary::new(&report, mask))?;
    Ok(vec![csv, json])
}

fn detect(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let dataset = cfg.paths.dataset.as_deref().expect("validated");
    let models = cfg.paths.models.clone().unwrap_or_else(|| out.join("models"));
    let (monitor, bounds) = load_monitor(&models)?;
    let batches = read_dataset_batches(dataset, bounds.len())?;
    if batches.bounds() != bounds.as_slice() {
        return Err(AppError::data(format!(
            "models in {} use a different batch layout than {}",
            models.display(),
            dataset.display()
        )));
    }
    let mask = mask_of(dataset, batches.len())?;
    write_detection(name(cfg, "detection"), out, &monitor, &batches, cfg, mask.as_deref())
}

fn transfer(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let spec = cfg.predictor()?;
    let source_path = cfg.paths.source.as_deref().expect("validated");
    let target_path = cfg.paths.target.as_deref().expect("validated");
    let source = read_dataset_batches(source_path, cfg.data.n_batches)?;
    let target = read_dataset_batches(target_path, cfg.data.n_batches)?;
    if source.bounds() != target.bounds() {
        return Err(AppError::data("source and target have different subcarrier counts"));
    }
    let seed = cfg.effective_seed();
    info!("fitting {} on {}", spec.label(), source_path.display());
    let monitor = Monitor::fit(&source, spec, cfg.data.window, seed, cfg.detector.ridge)?;
    let mask = mask_of(target_path, target.len())?;
    let stem = format!("{}_{}_{seed}", name(cfg, "transfer"), spec.label());
    write_detection(&stem, out, &monitor, &target, cfg, mask.as_deref())
}

/// File-name tags of `faults`; repeated tags get their position appended.
fn fault_tags(faults: &[FaultSpec]) -> Vec<String> {
    let base: Vec<String> = faults.iter().map(fault_tag).collect();
    base.iter()
        .enumerate()
        .map(|(i, t)| if base.iter().filter(|u| *u == t).count() > 1 { format!("{t}-{i}") } else { t.clone() })
        .collect()
}

/// Short file-name tag of a fault.
fn fault_tag(f: &FaultSpec) -> String {
    match f {
        FaultSpec::None => "healthy".into(),
        FaultSpec::Concentrated { resistance_ohm, .. } => format!("conc{resistance_ohm}ohm"),
        FaultSpec::Distributed { severity, .. } => format!("df{}", (severity * 100.0).round()),
        FaultSpec::TerminationChange { switch_to, .. } => format!("term-{switch_to:?}").to_lowercase(),
        FaultSpec::Incipient { peak_scale, .. } => format!("incipient{peak_scale}"),
    }
}

#[derive(Serialize)]
struct RocSummary<'a> {
    predictor: &'a str,
    fault: &'a FaultSpec,
    file: String,
    auc: f64,
    median_trial_auc: f64,
    trial_auc: &'a [f64],
    operating_points: &'a [OperatingPoint],
    trials: usize,
}

fn roc(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let spec = cfg.experiment()?;
    let seed = spec.seed_base;
    let results = run_roc(spec, |t| info!("trial {} of {}", t + 1, spec.trials))?;
    let mut written = Vec::new();
    let mut summaries = Vec::new();
    let n_faults = spec.faults.len().max(1);
    let tags = fault_tags(&results[..n_faults.min(results.len())].iter().map(|r| r.fault.clone()).collect::<Vec<_>>());
    for (k, r) in results.iter().enumerate() {
        let tag = &tags[k % n_faults];
        let file = format!("{}-{tag}_{}_{seed}.csv", spec.name, r.predictor);
        let path = out.join(&file);
        let mut w = csv_writer(&path)?;
        w.write_record(["threshold", "p_fa", "p_dt"])?;
        for p in &r.curve.points {
            w.write_record([p.threshold.to_string(), p.p_fa.to_string(), p.p_dt.to_string()])?;
        }
        w.flush().map_err(|e| AppError::io(&path, e))?;
        written.push(path);
        summaries.push(RocSummary {
            predictor: &r.predictor,
            fault: &r.fault,
            file,
            auc: r.curve.auc,
            median_trial_auc: r.median_trial_auc(),
            trial_auc: &r.trial_auc,
            operating_points: &r.operating_points,
            trials: r.curve.trial_count,
        });
    }
    let path = out.join(format!("{}_roc_{seed}.json", spec.name));
    write_json(&path, &summaries)?;
    written.push(path);
    Ok(written)
}

#[derive(Serialize)]
struct BenchmarkSummary {
    dataset: String,
    predictor: String,
    median_nrmse: Option<f64>,
    cells: usize,
    failures: usize,
}

fn benchmark(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let spec = cfg.experiment()?;
    let bench = cfg.benchmark.as_ref().expect("validated");
    let seed = spec.seed_base;
    let batches: Vec<usize> = bench.batches.clone().unwrap_or_else(|| (0..spec.n_batches).collect());
    let mut cells = Vec::new();
    for r in 0..bench.repeats {
        let mut datasets = Vec::new();
        for ds in &bench.datasets {
            let data = match (&ds.load_model, &ds.path) {
                (Some(kind), _) => {
                    let mut s = spec.scenario.clone();
                    s.load_model = *kind;
                    s.fault = FaultSpec::None;
                    s.seed = seed.wrapping_add(r as u64);
                    generate_batches(&s, spec.n_batches)?.0
                }
                (None, Some(path)) if r == 0 => read_dataset_batches(path, spec.n_batches)?,
                _ => continue,
            };
            datasets.push((ds.name.clone(), data));
        }
        info!("benchmark repeat {} of {}", r + 1, bench.repeats);
        let run = run_predictor_benchmark(
            &datasets,
            &spec.predictors,
            spec.window,
            spec.train_fraction,
            &batches,
            seed.wrapping_add(r as u64),
        );
        cells.extend(run.into_iter().map(|c| (r, c)));
    }
    let mut written = Vec::new();
    let mut summary = Vec::new();
    for p in &spec.predictors {
        let label = p.label();
        let path = out.join(format!("{}_{label}_{seed}.csv", spec.name));
        let mut w = csv_writer(&path)?;
        w.write_record(["dataset", "repeat", "batch", "nrmse", "error"])?;
        for (r, c) in cells.iter().filter(|(_, c)| c.predictor == label) {
            w.write_record([
                c.dataset.clone(),
                r.to_string(),
                c.batch.to_string(),
                c.nrmse.map(|v| v.to_string()).unwrap_or_default(),
                c.error.clone().unwrap_or_default(),
            ])?;
        }
        w.flush().map_err(|e| AppError::io(&path, e))?;
        written.push(path);
        for ds in &bench.datasets {
            let mine: Vec<_> = cells.iter().filter(|(_, c)| c.predictor == label && c.dataset == ds.name).collect();
            let values: Vec<f64> = mine.iter().filter_map(|(_, c)| c.nrmse).collect();
            summary.push(BenchmarkSummary {
                dataset: ds.name.clone(),
                predictor: label.clone(),
                median_nrmse: (!values.is_empty()).then(|| median(&values)),
                cells: mine.len(),
                failures: mine.len() - values.len(),
            });
        }
    }
    let path = out.join(format!("{}_benchmark_{seed}.json", spec.name));
    write_json(&path, &summary)?;
    written.push(path);
    Ok(written)
}

#[derive(Serialize)]
struct IncipientReport<'a> {
    predictor: String,
    onset_index: usize,
    theil_sen_slope: f64,
    trend_p_value: f64,
    permutations: usize,
    first_alarms: &'a [plcwatch_core::eval::FirstAlarm],
    detection: DetectionSummary,
}

fn incipient(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let spec = cfg.experiment()?;
    let permutations = cfg.incipient.clone().unwrap_or_default().permutations;
    let summary = run_incipient(spec, permutations)?;
    let label = spec.predictors[0].label();
    let stem = format!("{}_{label}_{}", spec.name, spec.seed_base);
    let onset_day = summary.onset_index / plcwatch_core::SAMPLES_PER_DAY;

    let daily = out.join(format!("{stem}.csv"));
    let mut w = csv_writer(&daily)?;
    w.write_record(["day", "mean_smd"])?;
    for (k, v) in summary.daily_mean_smd.iter().enumerate() {
        w.write_record([(onset_day + k).to_string(), v.to_string()])?;
    }
    w.flush().map_err(|e| AppError::io(&daily, e))?;

    let smd = out.join(format!("{stem}_smd.csv"));
    write_detection_csv(&smd, &summary.report)?;

    let json = out.join(format!("{stem}.json"));
    write_json(
        &json,
        &IncipientReport {
            predictor: label.clone(),
            onset_index: summary.onset_index,
            theil_sen_slope: summary.theil_sen_slope,
            trend_p_value: summary.trend_p_value,
            permutations,
            first_alarms: &summary.first_alarms,
            detection: DetectionSummary::new(&summary.report, None),
        },
    )?;
    Ok(vec![daily, smd, json])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fault_tags_are_file_safe() {
        let df = FaultSpec::Distributed { onset_index: 1, location_m: 100.0, extent_m: 300.0, severity: 0.2 };
        assert_eq!(fault_tag(&df), "df20");
        let c = FaultSpec::Concentrated { onset_index: 1, location_m: 100.0, resistance_ohm: 100.0 };
        assert_eq!(fault_tag(&c), "conc100ohm");
        assert_eq!(fault_tag(&FaultSpec::None), "healthy");
        assert_eq!(fault_tags(&[df.clone(), c, df]), vec!["df20-0", "conc100ohm", "df20-2"]);
    }
}
