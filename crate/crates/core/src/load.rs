//! Time-series termination-impedance models.
//!
//! * `L1`: second-order auto-regression driven by uniform complex shocks,
//! * `L2`: a daily cycle built from sine/cosine harmonics plus shocks,
//! * `L3`: the elementwise mean of an `L1` and an `L2` sequence.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::numerics::substream;
use crate::{Error, Result, SAMPLES_PER_DAY};

const SHOCK_DOMAIN: u64 = 0x4c4f_4144;

/// Smallest real part handed to the channel model as a termination.
pub const MIN_REAL_OHMS: f64 = 0.1;

/// A passive complex load impedance in ohms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadSample(Complex64);

impl LoadSample {
    /// Wraps `z`, clamping a negative real part to zero.
    pub fn passive(z: Complex64) -> Self {
        Self(Complex64::new(z.re.max(0.0), z.im))
    }

    pub fn ohms(self) -> Complex64 {
        self.0
    }

    /// Impedance used as a line termination, real part at least
    /// [`MIN_REAL_OHMS`].
    pub fn termination(self) -> Complex64 {
        Complex64::new(self.0.re.max(MIN_REAL_OHMS), self.0.im)
    }
}

/// Support of the uniform random shocks `U[re_lo, re_hi] + j U[im_lo, im_hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShockParams {
    pub real_low: f64,
    pub real_high: f64,
    pub imag_low: f64,
    pub imag_high: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for ShockParams {
    fn default() -> Self {
        Self {
            real_low: 0.0,
            real_high: 50.0,
            imag_low: -50.0,
            imag_high: 50.0,
            seed: 0,
        }
    }
}

impl ShockParams {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.real_low < self.real_high && self.imag_low < self.imag_high) {
            return Err(Error::config("shock bounds need low < high on both axes"));
        }
        Ok(())
    }

    /// The first `n` shocks of this parameter set's stream.
    pub fn draw(&self, n: usize) -> Result<Vec<Complex64>> {
        self.validate()?;
        let mut rng = substream(self.seed, SHOCK_DOMAIN, 0);
        Ok((0..n)
            .map(|_| {
                Complex64::new(
                    rng.random_range(self.real_low..self.real_high),
                    rng.random_range(self.imag_low..self.imag_high),
                )
            })
            .collect())
    }

    /// Largest shock magnitude the support allows.
    pub fn sup_abs(&self) -> f64 {
        let re = self.real_low.abs().max(self.real_high.abs());
        let im = self.imag_low.abs().max(self.imag_high.abs());
        re.hypot(im)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Harmonic {
    pub order: u32,
    pub sine_amp: f64,
    pub cosine_amp: f64,
}

/// Deterministic part of the cyclic load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CyclicProfile {
    pub fundamental_period: usize,
    pub harmonics: Vec<Harmonic>,
    /// Real offset in ohms added outside the 0.9 weighting.
    pub offset_ohms: f64,
}

impl Default for CyclicProfile {
    fn default() -> Self {
        Self {
            fundamental_period: SAMPLES_PER_DAY,
            harmonics: alloc::vec![
                Harmonic { order: 1, sine_amp: 30.0, cosine_amp: 20.0 },
                Harmonic { order: 2, sine_amp: 10.0, cosine_amp: 8.0 },
                Harmonic { order: 3, sine_amp: 5.0, cosine_amp: 4.0 },
            ],
            offset_ohms: 50.0,
        }
    }
}

impl CyclicProfile {
    pub fn validate(&self) -> Result<()> {
        if self.harmonics.is_empty() {
            return Err(Error::config("cyclic profile needs at least one harmonic"));
        }
        if self.fundamental_period < 2 {
            return Err(Error::config("fundamental period must be >= 2 samples"));
        }
        if self.harmonics.iter().any(|h| h.order == 0) {
            return Err(Error::config("harmonic orders must be positive"));
        }
        Ok(())
    }

    /// Harmonic sum `L′₂` at sample `j`.
    pub fn harmonic_sum(&self, j: usize) -> f64 {
        // Reduce the index first so long sequences stay exactly periodic.
        let phase = 2.0 * PI * (j % self.fundamental_period) as f64 / self.fundamental_period as f64;
        self.harmonics
            .iter()
            .map(|h| {
                let arg = phase * h.order as f64;
                h.sine_amp * arg.sin() + h.cosine_amp * arg.cos()
            })
            .sum()
    }
}

/// The printed auto-regression applied to an explicit shock sequence.
pub fn ar2_recursion(shocks: &[Complex64]) -> Vec<LoadSample> {
    let mut raw: Vec<Complex64> = Vec::with_capacity(shocks.len());
    for (j, &r) in shocks.iter().enumerate() {
        let v = match j {
            0 => r,
            1 => raw[0] * 0.8 + r,
            _ => raw[j - 1] * 0.6 + raw[j - 2] * 0.3 + r * 0.1,
        };
        raw.push(v);
    }
    raw.into_iter().map(LoadSample::passive).collect()
}

/// Cyclic load applied to an explicit shock sequence.
pub fn cyclic_with_shocks(profile: &CyclicProfile, shocks: &[Complex64]) -> Vec<LoadSample> {
    shocks
        .iter()
        .enumerate()
        .map(|(j, &r)| {
            let base = Complex64::new(profile.offset_ohms + 0.9 * profile.harmonic_sum(j), 0.0);
            LoadSample::passive(base + r * 0.1)
        })
        .collect()
}

/// Auto-regressive load `L1`.
pub fn gen_l1(n: usize, shocks: &ShockParams) -> Result<Vec<LoadSample>> {
    Ok(ar2_recursion(&shocks.draw(n)?))
}

/// Cyclic load `L2`.
pub fn gen_l2(n: usize, profile: &CyclicProfile, shocks: &ShockParams) -> Result<Vec<LoadSample>> {
    profile.validate()?;
    Ok(cyclic_with_shocks(profile, &shocks.draw(n)?))
}

/// Hybrid load `L3 = (L1 + L2) / 2`.
pub fn gen_l3(l1: &[LoadSample], l2: &[LoadSample]) -> Result<Vec<LoadSample>> {
    if l1.len() != l2.len() {
        return Err(Error::DimensionMismatch {
            expected: l1.len(),
            actual: l2.len(),
        });
    }
    Ok(l1
        .iter()
        .zip(l2)
        .map(|(a, b)| LoadSample::passive((a.0 + b.0) * 0.5))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LoadModelKind {
    L1,
    L2,
    L3,
}

/// Shock support and cyclic profile shared by all three models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LoadModelParams {
    pub shocks: ShockParams,
    pub profile: CyclicProfile,
}

impl Default for LoadModelParams {
    fn default() -> Self {
        Self {
            shocks: ShockParams::default(),
            profile: CyclicProfile::default(),
        }
    }
}

impl LoadModelParams {
    /// Generates `n` samples of `kind`. The `L1` and `L2` shock streams are
    /// derived from `seed` (and `L3` combines exactly those two), so the
    /// `seed` field of `self.shocks` is not consulted.
    pub fn generate(&self, kind: LoadModelKind, n: usize, seed: u64) -> Result<Vec<LoadSample>> {
        let l1 = ShockParams {
            seed: seed.wrapping_mul(2).wrapping_add(1),
            ..self.shocks
        };
        let l2 = ShockParams {
            seed: seed.wrapping_mul(2).wrapping_add(2),
            ..self.shocks
        };
        match kind {
            LoadModelKind::L1 => gen_l1(n, &l1),
            LoadModelKind::L2 => gen_l2(n, &self.profile, &l2),
            LoadModelKind::L3 => gen_l3(&gen_l1(n, &l1)?, &gen_l2(n, &self.profile, &l2)?),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn l1_base_cases() {
        let shocks = ShockParams::with_seed(9);
        let first = shocks.draw(1).unwrap()[0];
        assert_eq!(gen_l1(1, &shocks).unwrap(), vec![LoadSample::passive(first)]);

        let seq = ar2_recursion(&[c(10.0, 0.0); 3]);
        assert_eq!(seq[1].ohms(), c(18.0, 0.0));
        assert!((seq[2].ohms() - c(0.6 * 18.0 + 3.0 + 1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn l1_stays_within_geometric_bound() {
        let shocks = ShockParams::with_seed(3);
        let bound = shocks.sup_abs() / (1.0 - 0.9);
        for s in gen_l1(5000, &shocks).unwrap() {
            assert!(s.ohms().norm() <= bound);
        }
    }

    #[test]
    fn l2_constant_when_harmonics_vanish() {
        let profile = CyclicProfile {
            harmonics: vec![Harmonic { order: 1, sine_amp: 0.0, cosine_amp: 0.0 }],
            ..CyclicProfile::default()
        };
        let seq = cyclic_with_shocks(&profile, &[c(20.0, 0.0); 10]);
        for s in seq {
            assert!((s.ohms() - c(profile.offset_ohms + 2.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn l2_without_shocks_is_periodic() {
        let profile = CyclicProfile::default();
        let seq = cyclic_with_shocks(&profile, &vec![c(0.0, 0.0); 5 * 96]);
        for j in 0..4 * 96 {
            assert_eq!(seq[j], seq[j + 96]);
        }
        assert!(seq.iter().all(|s| s.ohms().re >= 0.0));
    }

    #[test]
    fn l3_is_the_mean() {
        let a = vec![LoadSample::passive(c(0.0, 0.0))];
        let b = vec![LoadSample::passive(c(10.0, 4.0))];
        let l3 = gen_l3(&a, &b).unwrap();
        assert_eq!(l3[0].ohms(), c(5.0, 2.0));
        let l1 = gen_l1(50, &ShockParams::with_seed(4)).unwrap();
        assert_eq!(gen_l3(&l1, &l1).unwrap(), l1);
        assert!(gen_l3(&l1, &l1[..10]).is_err());
    }

    #[test]
    fn invalid_parameters_rejected() {
        let bad = ShockParams { real_low: 5.0, real_high: 5.0, ..ShockParams::default() };
        assert!(bad.draw(3).is_err());
        let empty = CyclicProfile { harmonics: vec![], ..CyclicProfile::default() };
        assert!(gen_l2(3, &empty, &ShockParams::default()).is_err());
    }
}
