//! Bottom-up channel emulator for a tee network and SNR synthesis.
//!
//! Every line section is a two-port ABCD matrix. The branch is folded into
//! the trunk as a shunt admittance at the tee, faults appear either as a
//! shunt conductance (concentrated) or as scaled PUL resistance and
//! conductance over a section (distributed, incipient). The channel
//! response is the transducer voltage gain
//! `H = 2·sqrt(Re Zs · Re ZL) / (A·ZL + B + Zs·(C·ZL + D))`, so `|H|² ≤ 1`
//! for any passive network.

mod fault;
mod line;
mod network;

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub use fault::{FaultSpec, FaultState};
pub use line::{abcd_segment, abcd_segment_scaled, Abcd, CableSpec, PulParams};
pub use network::{cfr, BandSpec, ChannelPlan, Termination, TopologySpec};

use crate::load::{LoadModelKind, LoadModelParams, LoadSample};
use crate::numerics::substream;
use crate::timeseries::{BatchSeries, SnrPanel};
use crate::{Error, Result, SAMPLES_PER_DAY};

const NOISE_DOMAIN: u64 = 0x4e4f_4953;

/// Full description of a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub topology: TopologySpec,
    #[serde(default)]
    pub cable: CableSpec,
    #[serde(default)]
    pub band: BandSpec,
    pub load_model: LoadModelKind,
    #[serde(default)]
    pub load: LoadModelParams,
    #[serde(default = "no_fault")]
    pub fault: FaultSpec,
    pub n_samples: usize,
    #[serde(default)]
    pub seed: u64,
}

fn no_fault() -> FaultSpec {
    FaultSpec::None
}

impl Scenario {
    /// Healthy scenario with default network, band and load parameters.
    pub fn healthy(load_model: LoadModelKind, n_samples: usize, seed: u64) -> Self {
        Self {
            topology: TopologySpec::default(),
            cable: CableSpec::default(),
            band: BandSpec::default(),
            load_model,
            load: LoadModelParams::default(),
            fault: FaultSpec::None,
            n_samples,
            seed,
        }
    }

    pub fn with_days(load_model: LoadModelKind, days: usize, seed: u64) -> Self {
        Self::healthy(load_model, days * SAMPLES_PER_DAY, seed)
    }

    pub fn with_fault(mut self, fault: FaultSpec) -> Self {
        self.fault = fault;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.topology.validate()?;
        self.cable.validate()?;
        self.band.validate()?;
        self.load.shocks.validate()?;
        self.load.profile.validate()?;
        self.fault.validate(self.topology.line_length_m())?;
        if self.n_samples == 0 {
            return Err(Error::config("scenario needs at least one sample"));
        }
        Ok(())
    }

    /// Branch termination for every sample, including any scheduled switch
    /// to another load model.
    pub fn branch_loads(&self) -> Result<Vec<LoadSample>> {
        let primary = self.load.generate(self.load_model, self.n_samples, self.seed)?;
        let Some((alt_kind, _)) = self.fault.switch_weight(0) else {
            return Ok(primary);
        };
        let alt = self.load.generate(alt_kind, self.n_samples, self.seed)?;
        Ok(primary
            .iter()
            .zip(&alt)
            .enumerate()
            .map(|(j, (a, b))| {
                let w = self.fault.switch_weight(j).map_or(0.0, |(_, w)| w);
                LoadSample::passive(a.ohms() * (1.0 - w) + b.ohms() * w)
            })
            .collect())
    }
}

/// Per-subcarrier `tx_psd − noise_psd` in dB.
fn snr_offsets(band: &BandSpec) -> Vec<f64> {
    band.frequencies()
        .map(|f| band.tx_psd_dbm_per_hz - band.noise_psd_dbm_per_hz(f))
        .collect()
}

fn fill_snr_row<R: Rng>(offsets: &[f64], power_gain: &[f64], sigma: f64, rng: &mut R, out: &mut [f64]) {
    for ((o, &base), &g) in out.iter_mut().zip(offsets).zip(power_gain) {
        let perturbation = if sigma > 0.0 {
            sigma * rng.sample::<f64, _>(StandardNormal)
        } else {
            0.0
        };
        *o = base + 10.0 * g.log10() - perturbation;
    }
}

/// SNR panel from precomputed channel responses. Row `j` draws its
/// perturbation from substream `j` of `rng_seed`.
pub fn snr_panel(cfr_series: &[Vec<Complex64>], band: &BandSpec, rng_seed: u64) -> Result<SnrPanel> {
    band.validate()?;
    let offsets = snr_offsets(band);
    let sigma = band.perturbation_variance_db2.sqrt();
    let mut values = Vec::with_capacity(cfr_series.len() * band.n_subcarriers);
    let mut row = vec![0.0; band.n_subcarriers];
    for (j, h) in cfr_series.iter().enumerate() {
        if h.len() != band.n_subcarriers {
            return Err(Error::DimensionMismatch {
                expected: band.n_subcarriers,
                actual: h.len(),
            });
        }
        let gain: Vec<f64> = h.iter().map(|v| v.norm_sqr()).collect();
        let mut rng = substream(rng_seed, NOISE_DOMAIN, j as u64);
        fill_snr_row(&offsets, &gain, sigma, &mut rng, &mut row);
        values.extend_from_slice(&row);
    }
    SnrPanel::new(band.n_subcarriers, values)
}

/// Streams the SNR rows of `scenario` in time order as
/// `(index, snr_row, anomalous)`.
pub fn for_each_row(
    scenario: &Scenario,
    sink: impl FnMut(usize, &[f64], bool) -> Result<()>,
) -> Result<()> {
    for_each_row_from(scenario, 0, sink)
}

/// [`for_each_row`] starting at sample `start`. Rows are identical to those
/// of a full run.
pub fn for_each_row_from(
    scenario: &Scenario,
    start: usize,
    mut sink: impl FnMut(usize, &[f64], bool) -> Result<()>,
) -> Result<()> {
    scenario.validate()?;
    let loads = scenario.branch_loads()?;
    let band = &scenario.band;
    let offsets = snr_offsets(band);
    let sigma = band.perturbation_variance_db2.sqrt();
    let mut plan =
        ChannelPlan::new(&scenario.topology, &scenario.cable, band, scenario.fault.state_at(start))?;
    let mut gain = vec![0.0; band.n_subcarriers];
    let mut row = vec![0.0; band.n_subcarriers];
    for (j, load) in loads.iter().enumerate().skip(start) {
        let state = scenario.fault.state_at(j);
        if state != plan.state() {
            plan = ChannelPlan::new(&scenario.topology, &scenario.cable, band, state)?;
        }
        plan.power_gain_into(*load, &mut gain);
        let mut rng = substream(scenario.seed, NOISE_DOMAIN, j as u64);
        fill_snr_row(&offsets, &gain, sigma, &mut rng, &mut row);
        sink(j, &row, scenario.fault.is_anomalous(j))?;
    }
    Ok(())
}

/// Synthesized panel plus the ground-truth anomaly mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub panel: SnrPanel,
    pub mask: Vec<bool>,
}

pub fn generate_dataset(scenario: &Scenario) -> Result<Dataset> {
    let mut values = Vec::with_capacity(scenario.n_samples * scenario.band.n_subcarriers);
    let mut mask = Vec::with_capacity(scenario.n_samples);
    for_each_row(scenario, |_, row, anomalous| {
        values.extend_from_slice(row);
        mask.push(anomalous);
        Ok(())
    })?;
    Ok(Dataset {
        panel: SnrPanel::new(scenario.band.n_subcarriers, values)?,
        mask,
    })
}

/// Like [`generate_dataset`] but keeps only the stabilizer-batch means,
/// which avoids holding the full panel in memory.
pub fn generate_batches(scenario: &Scenario, n_batches: usize) -> Result<(BatchSeries, Vec<bool>)> {
    generate_batches_from(scenario, n_batches, 0)
}

/// Batch means and mask of samples `start..n_samples`.
pub fn generate_batches_from(
    scenario: &Scenario,
    n_batches: usize,
    start: usize,
) -> Result<(BatchSeries, Vec<bool>)> {
    let mut batches = BatchSeries::empty(scenario.band.n_subcarriers, n_batches)?;
    let mut mask = Vec::with_capacity(scenario.n_samples.saturating_sub(start));
    for_each_row_from(scenario, start, |_, row, anomalous| {
        batches.push_row(row);
        mask.push(anomalous);
        Ok(())
    })?;
    Ok((batches, mask))
}
