use alloc::vec::Vec;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::fault::FaultState;
use super::line::{abcd_segment_scaled, Abcd, CableSpec};
use crate::load::LoadSample;
use crate::{Error, Result};

/// Source or receiver impedance of a modem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// The cable's characteristic impedance at each frequency.
    Matched,
    /// Fixed complex impedance `[re, im]` in ohms.
    Impedance(Complex64),
}

impl Termination {
    pub fn at(&self, cable: &CableSpec, freq_hz: f64) -> Complex64 {
        match *self {
            Termination::Matched => cable.characteristic_impedance(freq_hz),
            Termination::Impedance(z) => z,
        }
    }
}

/// Tee network: transmitter — trunk — tee — trunk — receiver, with a
/// terminated branch hanging off the tee.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TopologySpec {
    pub trunk_tx_to_tee_m: f64,
    pub tee_to_rx_m: f64,
    pub branch_m: f64,
    pub tx_impedance: Termination,
    pub rx_impedance: Termination,
}

impl Default for TopologySpec {
    fn default() -> Self {
        Self {
            trunk_tx_to_tee_m: 400.0,
            tee_to_rx_m: 600.0,
            branch_m: 5.0,
            tx_impedance: Termination::Impedance(Complex64::new(50.0, 0.0)),
            rx_impedance: Termination::Impedance(Complex64::new(50.0, 0.0)),
        }
    }
}

impl TopologySpec {
    pub fn line_length_m(&self) -> f64 {
        self.trunk_tx_to_tee_m + self.tee_to_rx_m
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.trunk_tx_to_tee_m > 0.0 && self.tee_to_rx_m > 0.0 && self.branch_m >= 0.0) {
            return Err(Error::config("trunk lengths must be > 0 and branch length >= 0"));
        }
        for t in [self.tx_impedance, self.rx_impedance] {
            if let Termination::Impedance(z) = t {
                if !(z.re > 0.0) {
                    return Err(Error::config("modem impedances need a positive real part"));
                }
            }
        }
        Ok(())
    }
}

/// OFDM band and the SNR synthesis parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BandSpec {
    pub n_subcarriers: usize,
    pub spacing_hz: f64,
    pub start_hz: f64,
    pub tx_psd_dbm_per_hz: f64,
    pub noise_psd_dbm_per_hz: f64,
    /// Linear tilt of the noise floor in dB per MHz above `start_hz`.
    pub noise_slope_db_per_mhz: f64,
    /// Variance (dB²) of the white per-sample SNR perturbation.
    pub perturbation_variance_db2: f64,
}

impl Default for BandSpec {
    fn default() -> Self {
        Self {
            n_subcarriers: 917,
            spacing_hz: 24_414.0,
            start_hz: 2e6,
            tx_psd_dbm_per_hz: -55.0,
            noise_psd_dbm_per_hz: -110.0,
            noise_slope_db_per_mhz: 0.0,
            perturbation_variance_db2: 1.0,
        }
    }
}

impl BandSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_subcarriers == 0 || !(self.spacing_hz > 0.0) || !(self.start_hz > 0.0) {
            return Err(Error::config("band needs >= 1 subcarrier, positive spacing and start"));
        }
        if !(self.perturbation_variance_db2 >= 0.0) {
            return Err(Error::config("perturbation variance must be >= 0"));
        }
        Ok(())
    }

    pub fn frequency(&self, k: usize) -> f64 {
        self.start_hz + k as f64 * self.spacing_hz
    }

    pub fn frequencies(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_subcarriers).map(|k| self.frequency(k))
    }

    pub fn noise_psd_dbm_per_hz(&self, freq_hz: f64) -> f64 {
        self.noise_psd_dbm_per_hz + self.noise_slope_db_per_mhz * (freq_hz - self.start_hz) / 1e6
    }
}

/// Chain of trunk sections over `[start, end]`, with an optional shunt
/// `(location, admittance)` assumed to lie inside the interval.
fn trunk_chain(
    cable: &CableSpec,
    freq_hz: f64,
    start: f64,
    end: f64,
    shunt: Option<(f64, f64)>,
    lossy: Option<(f64, f64, f64)>,
) -> Abcd {
    let mut points: Vec<f64> = alloc::vec![start, end];
    if let Some((lo, hi, _)) = lossy {
        points.extend([lo, hi].into_iter().filter(|p| *p > start && *p < end));
    }
    if let Some((loc, _)) = shunt {
        points.push(loc);
    }
    points.sort_by(|a, b| a.total_cmp(b));
    points.dedup();

    let mut chain = Abcd::IDENTITY;
    for (i, &p) in points.iter().enumerate() {
        if let Some((loc, g)) = shunt {
            if loc == p {
                chain = chain * Abcd::shunt(Complex64::new(g, 0.0));
            }
        }
        if let Some(&next) = points.get(i + 1) {
            let mid = 0.5 * (p + next);
            let scale = match lossy {
                Some((lo, hi, s)) if mid > lo && mid < hi => s,
                _ => 1.0,
            };
            chain = chain * abcd_segment_scaled(cable, next - p, freq_hz, scale);
        }
    }
    chain
}

#[derive(Debug, Clone, Copy)]
struct FreqPlan {
    branch: Abcd,
    den0: Complex64,
    den1: Complex64,
    num: f64,
}

/// Per-frequency factorization of the transducer gain for one line state.
///
/// The whole network is affine in the branch admittance `Y`, so the
/// response reduces to `H = num / (den0 + Y · den1)`.
#[derive(Debug, Clone)]
pub struct ChannelPlan {
    state: FaultState,
    freqs: Vec<FreqPlan>,
}

impl ChannelPlan {
    pub fn new(
        topology: &TopologySpec,
        cable: &CableSpec,
        band: &BandSpec,
        state: FaultState,
    ) -> Result<Self> {
        topology.validate()?;
        band.validate()?;
        let tee = topology.trunk_tx_to_tee_m;
        let end = topology.line_length_m();
        if let Some((loc, _)) = state.shunt {
            if !(0.0..=end).contains(&loc) {
                return Err(Error::config("fault located outside cable span"));
            }
        }
        if let Some((lo, hi, _)) = state.lossy_section {
            if !(lo >= 0.0 && hi <= end && lo <= hi) {
                return Err(Error::config("fault section outside cable span"));
            }
        }
        let pre_shunt = state.shunt.filter(|(loc, _)| *loc <= tee);
        let post_shunt = state.shunt.filter(|(loc, _)| *loc > tee);

        let freqs = band
            .frequencies()
            .map(|f| {
                let p = trunk_chain(cable, f, 0.0, tee, pre_shunt, state.lossy_section);
                let q = trunk_chain(cable, f, tee, end, post_shunt, state.lossy_section);
                let zs = topology.tx_impedance.at(cable, f);
                let zl = topology.rx_impedance.at(cable, f);
                let pq = p * q;
                let den0 = pq.a * zl + pq.b + zs * (pq.c * zl + pq.d);
                let den1 = p.b * q.a * zl + p.b * q.b + zs * (p.d * q.a * zl + p.d * q.b);
                FreqPlan {
                    branch: abcd_segment_scaled(cable, topology.branch_m, f, 1.0),
                    den0,
                    den1,
                    num: 2.0 * (zs.re * zl.re).sqrt(),
                }
            })
            .collect();
        Ok(Self { state, freqs })
    }

    pub fn state(&self) -> FaultState {
        self.state
    }

    pub fn n_subcarriers(&self) -> usize {
        self.freqs.len()
    }

    fn response_at(fp: &FreqPlan, zb: Complex64) -> Complex64 {
        let y = (fp.branch.c * zb + fp.branch.d) / (fp.branch.a * zb + fp.branch.b);
        Complex64::new(fp.num, 0.0) / (fp.den0 + y * fp.den1)
    }

    /// Complex transfer function for the given branch load.
    pub fn response(&self, branch_load: LoadSample) -> Vec<Complex64> {
        let zb = branch_load.termination();
        self.freqs.iter().map(|fp| Self::response_at(fp, zb)).collect()
    }

    /// `|H(f)|²` for every subcarrier, written into `out`.
    pub fn power_gain_into(&self, branch_load: LoadSample, out: &mut [f64]) {
        let zb = branch_load.termination();
        for (o, fp) in out.iter_mut().zip(&self.freqs) {
            *o = Self::response_at(fp, zb).norm_sqr();
        }
    }
}

/// End-to-end channel frequency response (transducer voltage gain).
pub fn cfr(
    topology: &TopologySpec,
    cable: &CableSpec,
    band: &BandSpec,
    branch_load: LoadSample,
    fault_state: FaultState,
) -> Result<Vec<Complex64>> {
    Ok(ChannelPlan::new(topology, cable, band, fault_state)?.response(branch_load))
}
