use serde::{Deserialize, Serialize};

use crate::load::LoadModelKind;
use crate::{Error, Result};

/// Declarative description of an injected anomaly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FaultSpec {
    None,
    /// Shunt resistance `resistance_ohm` across the conductors at `location_m`.
    Concentrated {
        onset_index: usize,
        location_m: f64,
        resistance_ohm: f64,
    },
    /// PUL resistance and conductance multiplied by `1 + severity` over
    /// `[location_m, location_m + extent_m]`.
    Distributed {
        onset_index: usize,
        location_m: f64,
        extent_m: f64,
        severity: f64,
    },
    /// Branch load blends linearly into another load model over
    /// `duration_samples` and stays there.
    TerminationChange {
        onset_index: usize,
        switch_to: LoadModelKind,
        duration_samples: usize,
    },
    /// Distributed fault whose severity ramps linearly from 0 at
    /// `onset_index` to `peak_scale` at `ramp_end_index`, then holds.
    Incipient {
        onset_index: usize,
        location_m: f64,
        extent_m: f64,
        ramp_end_index: usize,
        peak_scale: f64,
    },
}

/// Resolved physical state of the line at one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaultState {
    /// `(location_m, conductance_s)` of a shunt fault element.
    pub shunt: Option<(f64, f64)>,
    /// `(start_m, end_m, loss_scale)` of a degraded section.
    pub lossy_section: Option<(f64, f64, f64)>,
}

impl FaultState {
    pub const HEALTHY: FaultState = FaultState {
        shunt: None,
        lossy_section: None,
    };
}

impl FaultSpec {
    pub fn onset_index(&self) -> Option<usize> {
        match *self {
            FaultSpec::None => None,
            FaultSpec::Concentrated { onset_index, .. }
            | FaultSpec::Distributed { onset_index, .. }
            | FaultSpec::TerminationChange { onset_index, .. }
            | FaultSpec::Incipient { onset_index, .. } => Some(onset_index),
        }
    }

    /// Ground-truth anomaly flag for sample `j`.
    pub fn is_anomalous(&self, j: usize) -> bool {
        self.onset_index().is_some_and(|o| j >= o)
    }

    pub fn validate(&self, line_length_m: f64) -> Result<()> {
        let within = |loc: f64, extent: f64| -> Result<()> {
            if !(loc >= 0.0 && extent >= 0.0 && loc + extent <= line_length_m) {
                return Err(Error::config(alloc::format!(
                    "fault section [{loc}, {}] m lies outside the {line_length_m} m cable",
                    loc + extent
                )));
            }
            Ok(())
        };
        match *self {
            FaultSpec::None => Ok(()),
            FaultSpec::Concentrated {
                location_m,
                resistance_ohm,
                ..
            } => {
                if !(resistance_ohm > 0.0) {
                    return Err(Error::config("fault resistance must be > 0"));
                }
                within(location_m, 0.0)
            }
            FaultSpec::Distributed {
                location_m,
                extent_m,
                severity,
                ..
            } => {
                if !(severity >= 0.0 && severity.is_finite()) {
                    return Err(Error::config("severity must be >= 0"));
                }
                within(location_m, extent_m)
            }
            FaultSpec::TerminationChange {
                duration_samples, ..
            } => {
                if duration_samples == 0 {
                    return Err(Error::config("termination change needs duration >= 1"));
                }
                Ok(())
            }
            FaultSpec::Incipient {
                onset_index,
                location_m,
                extent_m,
                ramp_end_index,
                peak_scale,
            } => {
                if ramp_end_index <= onset_index {
                    return Err(Error::config("incipient ramp must end after onset"));
                }
                if !(peak_scale >= 0.0 && peak_scale.is_finite()) {
                    return Err(Error::config("incipient peak scale must be >= 0"));
                }
                within(location_m, extent_m)
            }
        }
    }

    /// Incipient severity γ at sample `j` (zero for other kinds).
    pub fn severity_at(&self, j: usize) -> f64 {
        match *self {
            FaultSpec::Distributed {
                onset_index,
                severity,
                ..
            } if j >= onset_index => severity,
            FaultSpec::Incipient {
                onset_index,
                ramp_end_index,
                peak_scale,
                ..
            } if j >= onset_index => {
                let t = (j - onset_index) as f64 / (ramp_end_index - onset_index) as f64;
                peak_scale * t.min(1.0)
            }
            _ => 0.0,
        }
    }

    /// Line state at sample `j`. Termination changes act on the load, not
    /// the line, so they resolve to the healthy state.
    pub fn state_at(&self, j: usize) -> FaultState {
        if !self.is_anomalous(j) {
            return FaultState::HEALTHY;
        }
        match *self {
            FaultSpec::None | FaultSpec::TerminationChange { .. } => FaultState::HEALTHY,
            FaultSpec::Concentrated {
                location_m,
                resistance_ohm,
                ..
            } => FaultState {
                shunt: Some((location_m, 1.0 / resistance_ohm)),
                lossy_section: None,
            },
            FaultSpec::Distributed {
                location_m,
                extent_m,
                ..
            }
            | FaultSpec::Incipient {
                location_m,
                extent_m,
                ..
            } => FaultState {
                shunt: None,
                lossy_section: Some((location_m, location_m + extent_m, 1.0 + self.severity_at(j))),
            },
        }
    }

    /// Weight of the alternate load model at sample `j` for termination
    /// changes.
    pub fn switch_weight(&self, j: usize) -> Option<(LoadModelKind, f64)> {
        match *self {
            FaultSpec::TerminationChange {
                onset_index,
                switch_to,
                duration_samples,
            } => {
                let w = if j < onset_index {
                    0.0
                } else {
                    ((j - onset_index + 1) as f64 / duration_samples as f64).min(1.0)
                };
                Some((switch_to, w))
            }
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn incipient_ramp_is_continuous_and_capped() {
        let f = FaultSpec::Incipient {
            onset_index: 66 * 96,
            location_m: 100.0,
            extent_m: 300.0,
            ramp_end_index: 132 * 96,
            peak_scale: 2.0,
        };
        assert_eq!(f.severity_at(66 * 96 - 1), 0.0);
        assert_eq!(f.severity_at(66 * 96), 0.0);
        assert!((f.severity_at(99 * 96) - 1.0).abs() < 1e-12);
        assert_eq!(f.severity_at(132 * 96), 2.0);
        assert_eq!(f.severity_at(200 * 96), 2.0);
        let mut prev = 0.0;
        for j in 66 * 96..132 * 96 {
            let s = f.severity_at(j);
            assert!(s >= prev && s - prev < 1e-3);
            prev = s;
        }
    }

    #[test]
    fn termination_switch_takes_duration_samples() {
        let f = FaultSpec::TerminationChange {
            onset_index: 10,
            switch_to: LoadModelKind::L2,
            duration_samples: 4,
        };
        let w: alloc::vec::Vec<f64> = (8..16).map(|j| f.switch_weight(j).unwrap().1).collect();
        assert_eq!(w, [0.0, 0.0, 0.25, 0.5, 0.75, 1.0, 1.0, 1.0]);
        assert!(!f.is_anomalous(9) && f.is_anomalous(10));
    }

    #[test]
    fn validation_catches_out_of_span_faults() {
        let f = FaultSpec::Distributed {
            onset_index: 0,
            location_m: 900.0,
            extent_m: 300.0,
            severity: 0.1,
        };
        assert!(f.validate(1000.0).is_err());
        assert!(f.validate(1200.0).is_ok());
        let c = FaultSpec::Concentrated {
            onset_index: 0,
            location_m: 10.0,
            resistance_ohm: 0.0,
        };
        assert!(c.validate(1000.0).is_err());
    }
}
