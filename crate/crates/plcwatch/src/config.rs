//! Run configuration: one TOML (or manifest JSON) file per invocation.
//!
//! Parsing is strict. Unknown keys anywhere in the tree are rejected with
//! the line and column of the offending key, before any file is written.

use std::path::{Path, PathBuf};

use plcwatch_core::detector::ThresholdMode;
use plcwatch_core::emulator::Scenario;
use plcwatch_core::eval::ExperimentSpec;
use plcwatch_core::forecast::PredictorSpec;
use plcwatch_core::load::LoadModelKind;
use serde::{Deserialize, Serialize};

use crate::error::{AppError, Result};
use crate::formats::MANIFEST_FORMAT;

/// Pipeline step selected on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::Subcommand)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Synthesize a dataset CSV and its manifest from `[scenario]`.
    Generate,
    /// Regularize a field recording (wide or long CSV) onto the 15-minute grid.
    Ingest,
    /// Fit one predictor per stabilizer batch plus the error statistics.
    Train,
    /// Score a dataset with trained models.
    Detect,
    /// ROC study over repeated fault trials.
    Roc,
    /// Normalized-RMSE table of predictors over datasets.
    Benchmark,
    /// Train on one dataset and monitor another.
    Transfer,
    /// Incipient-fault trend and first-alarm study.
    Incipient,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Generate => "generate",
            Command::Ingest => "ingest",
            Command::Train => "train",
            Command::Detect => "detect",
            Command::Roc => "roc",
            Command::Benchmark => "benchmark",
            Command::Transfer => "transfer",
            Command::Incipient => "incipient",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    /// Raw recording for `ingest`.
    pub input: Option<PathBuf>,
    /// Dataset CSV for `train` and `detect`.
    pub dataset: Option<PathBuf>,
    /// Model directory; defaults to `<out>/models`.
    pub models: Option<PathBuf>,
    pub source: Option<PathBuf>,
    pub target: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub n_batches: usize,
    pub window: usize,
    pub train_fraction: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self { n_batches: 9, window: plcwatch_core::SAMPLES_PER_DAY, train_fraction: 0.8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorConfig {
    pub p_fa: f64,
    pub threshold_mode: ThresholdMode,
    /// Diagonal loading of the error covariance; `None` picks a small
    /// default relative to its trace.
    pub ridge: Option<f64>,
    /// First scored sample; defaults to the model window.
    pub start_index: Option<usize>,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self { p_fa: 0.01, threshold_mode: ThresholdMode::Theoretical, ridge: None, start_index: None }
    }
}

/// A benchmark dataset: synthesized from the experiment scenario with
/// another load model, or read from a CSV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkDataset {
    pub name: String,
    pub load_model: Option<LoadModelKind>,
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub datasets: Vec<BenchmarkDataset>,
    /// Batches to score; all when absent.
    #[serde(default)]
    pub batches: Option<Vec<usize>>,
    /// Synthetic datasets are drawn with seeds `seed_base..seed_base+repeats`.
    #[serde(default = "one")]
    pub repeats: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IncipientConfig {
    pub permutations: usize,
}

impl Default for IncipientConfig {
    fn default() -> Self {
        Self { permutations: 999 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IngestFormat {
    /// `t_index,snr_db_0,…` as written by `generate`.
    Wide,
    /// `timestamp,subcarrier,snr_db` with Unix-second timestamps.
    Long,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IngestConfig {
    pub format: IngestFormat,
    pub period_s: i64,
    /// Longest run of missing slots that is forward-filled.
    pub max_fill: usize,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self { format: IngestFormat::Wide, period_s: plcwatch_core::SAMPLE_PERIOD_S as i64, max_fill: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Optional; must agree with the subcommand when present.
    #[serde(default)]
    pub command: Option<Command>,
    /// Stem of the output files; defaults per command.
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub paths: PathsConfig,
    #[serde(default)]
    pub scenario: Option<Scenario>,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub predictor: Option<PredictorSpec>,
    #[serde(default)]
    pub detector: DetectorConfig,
    #[serde(default)]
    pub experiment: Option<ExperimentSpec>,
    #[serde(default)]
    pub benchmark: Option<BenchmarkConfig>,
    #[serde(default)]
    pub incipient: Option<IncipientConfig>,
    #[serde(default)]
    pub ingest: Option<IngestConfig>,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| AppError::config(e.to_string()))
    }

    /// Reads a TOML config, or a JSON config or dataset manifest (its
    /// embedded config is used). Relative paths are resolved against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
        let is_json = path.extension().is_some_and(|e| e == "json");
        let mut cfg = if is_json {
            let value: serde_json::Value = serde_json::from_str(&text)
                .map_err(|e| AppError::config(format!("{}: {e}", path.display())))?;
            let inner = match value.get("format").and_then(|f| f.as_str()) {
                Some(MANIFEST_FORMAT) => value
                    .get("config")
                    .cloned()
                    .ok_or_else(|| AppError::config(format!("{}: manifest has no config", path.display())))?,
                _ => value,
            };
            serde_json::from_value(inner).map_err(|e| AppError::config(format!("{}: {e}", path.display())))?
        } else {
            Self::from_toml_str(&text).map_err(|e| e.context(path.display()))?
        };
        if let Some(dir) = path.parent() {
            cfg.resolve_paths(dir);
        }
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(path) = p {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        };
        fix(&mut self.paths.input);
        fix(&mut self.paths.dataset);
        fix(&mut self.paths.models);
        fix(&mut self.paths.source);
        fix(&mut self.paths.target);
        if let Some(b) = &mut self.benchmark {
            for d in &mut b.datasets {
                fix(&mut d.path);
            }
        }
    }

    /// Checks the sections `command` needs and that its input files exist.
    pub fn validate_for(&self, command: Command) -> Result<()> {
        if let Some(c) = self.command {
            if c != command {
                return Err(AppError::config(format!(
                    "config is for `{}` but `{}` was requested",
                    c.name(),
                    command.name()
                )));
            }
        }
        let d = &self.data;
        if d.n_batches == 0 || d.window == 0 || !(d.train_fraction > 0.0 && d.train_fraction < 1.0) {
            return Err(AppError::config("[data] needs n_batches, window >= 1 and train_fraction in (0, 1)"));
        }
        if !(self.detector.p_fa > 0.0 && self.detector.p_fa < 1.0) {
            return Err(AppError::config("[detector] p_fa must lie in (0, 1)"));
        }
        let need_file = |p: &Option<PathBuf>, key: &str| -> Result<()> {
            let p = p.as_ref().ok_or_else(|| AppError::config(format!("paths.{key} is required")))?;
            if !p.is_file() {
                return Err(AppError::data(format!("paths.{key}: {} does not exist", p.display())));
            }
            Ok(())
        };
        match command {
            Command::Generate => {
                self.scenario()?.validate()?;
            }
            Command::Ingest => need_file(&self.paths.input, "input")?,
            Command::Train => {
                need_file(&self.paths.dataset, "dataset")?;
                self.predictor()?.validate()?;
            }
            Command::Detect => need_file(&self.paths.dataset, "dataset")?,
            Command::Transfer => {
                need_file(&self.paths.source, "source")?;
                need_file(&self.paths.target, "target")?;
                self.predictor()?.validate()?;
            }
            Command::Roc | Command::Incipient => {
                self.experiment()?.validate()?;
            }
            Command::Benchmark => {
                let e = self.experiment()?;
                for p in &e.predictors {
                    p.validate()?;
                }
                let b = self
                    .benchmark
                    .as_ref()
                    .ok_or_else(|| AppError::config("missing [benchmark] section"))?;
                if b.datasets.is_empty() || b.repeats == 0 {
                    return Err(AppError::config("[benchmark] needs datasets and repeats >= 1"));
                }
                for ds in &b.datasets {
                    match (&ds.load_model, &ds.path) {
                        (Some(_), None) => {}
                        (None, Some(_)) => need_file(&ds.path, "benchmark.datasets.path")?,
                        _ => {
                            return Err(AppError::config(format!(
                                "benchmark dataset `{}` needs exactly one of load_model and path",
                                ds.name
                            )))
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn scenario(&self) -> Result<&Scenario> {
        self.scenario.as_ref().ok_or_else(|| AppError::config("missing [scenario] section"))
    }

    pub fn predictor(&self) -> Result<&PredictorSpec> {
        self.predictor.as_ref().ok_or_else(|| AppError::config("missing [predictor] section"))
    }

    pub fn experiment(&self) -> Result<&ExperimentSpec> {
        self.experiment.as_ref().ok_or_else(|| AppError::config("missing [experiment] section"))
    }

    /// Replaces every seed in the config by `seed` when given, so the
    /// resolved config alone reproduces the run.
    pub fn apply_seed(&mut self, seed: Option<u64>) {
        let Some(seed) = seed.or(self.seed) else {
            return;
        };
        self.seed = Some(seed);
        if let Some(s) = &mut self.scenario {
            s.seed = seed;
        }
        if let Some(e) = &mut self.experiment {
            e.seed_base = seed;
        }
    }

    /// Seed for predictor initialization and experiment trials.
    pub fn effective_seed(&self) -> u64 {
        self.seed
            .or(self.experiment.as_ref().map(|e| e.seed_base))
            .or(self.scenario.as_ref().map(|s| s.seed))
            .unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
seed = 3

[scenario]
load_model = "l3"
n_samples = 960

[predictor]
kind = "arima"
order = { p = 2, d = 1, q = 1 }
"#;

    #[test]
    fn parses_minimal_config() {
        let c = RunConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(c.seed, Some(3));
        assert_eq!(c.scenario.as_ref().unwrap().n_samples, 960);
        assert_eq!(c.predictor.as_ref().unwrap().label(), "arima211");
        assert_eq!(c.data, DataConfig::default());
        c.validate_for(Command::Generate).unwrap();
    }

    #[test]
    fn unknown_keys_report_their_line() {
        for (text, line) in [
            (format!("{MINIMAL}\n[data]\nwindw = 4\n"), 13),
            (MINIMAL.replace("n_samples = 960", "n_samples = 960\nbogus = 1"), 7),
            // Tagged tables are buffered, so the error points at the table.
            (MINIMAL.replace("q = 1 }", "q = 1, r = 2 }"), 8),
            (format!("typo_top = 1\n{MINIMAL}"), 1),
        ] {
            let err = RunConfig::from_toml_str(&text).unwrap_err();
            assert_eq!(err.exit_code(), crate::error::exit_code::CONFIG);
            let msg = err.to_string();
            assert!(msg.contains(&format!("line {line}")), "{msg}");
        }
    }

    #[test]
    fn unknown_predictor_fields_are_rejected() {
        let text = MINIMAL.replace("kind = \"arima\"", "kind = \"arima\"\nlearning_rate = 0.1");
        assert!(RunConfig::from_toml_str(&text).is_err());
        let text = "[predictor]\nkind = \"baseline\"\nwindow = 3\n";
        assert!(RunConfig::from_toml_str(text).is_err());
    }

    #[test]
    fn missing_sections_and_files_are_reported() {
        let c = RunConfig::from_toml_str("").unwrap();
        assert!(matches!(c.validate_for(Command::Generate), Err(AppError::Config(_))));
        let mut c = RunConfig::from_toml_str(MINIMAL).unwrap();
        c.paths.dataset = Some("/nonexistent/x.csv".into());
        assert!(matches!(c.validate_for(Command::Train), Err(AppError::Data(_))));
        c.command = Some(Command::Detect);
        assert!(matches!(c.validate_for(Command::Train), Err(AppError::Config(_))));
    }

    #[test]
    fn seed_override_reaches_every_consumer() {
        let mut c = RunConfig::from_toml_str(MINIMAL).unwrap();
        c.apply_seed(Some(11));
        assert_eq!(c.scenario.as_ref().unwrap().seed, 11);
        assert_eq!(c.effective_seed(), 11);
        let mut c = RunConfig::from_toml_str(MINIMAL).unwrap();
        c.apply_seed(None);
        assert_eq!(c.scenario.as_ref().unwrap().seed, 3);
    }
}
