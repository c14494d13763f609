use core::f64::consts::PI;
use core::ops::Mul;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Per-unit-length parameters of the two-conductor equivalent cable.
///
/// `R(f) = r_ref · sqrt(f / f_ref)` (skin effect) and
/// `G(f) = 2πf · C · tanδ` (dielectric loss); `L` and `C` are constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CableSpec {
    pub resistance_ohm_per_m: f64,
    pub resistance_ref_hz: f64,
    pub inductance_h_per_m: f64,
    pub capacitance_f_per_m: f64,
    pub loss_tangent: f64,
}

impl Default for CableSpec {
    fn default() -> Self {
        Self {
            resistance_ohm_per_m: 0.05,
            resistance_ref_hz: 1e6,
            inductance_h_per_m: 0.4e-6,
            capacitance_f_per_m: 0.3e-9,
            loss_tangent: 4e-4,
        }
    }
}

/// PUL values at one frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulParams {
    pub r: f64,
    pub l: f64,
    pub g: f64,
    pub c: f64,
}

impl CableSpec {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.resistance_ohm_per_m,
            self.resistance_ref_hz,
            self.inductance_h_per_m,
            self.capacitance_f_per_m,
            self.loss_tangent,
        ];
        if all.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::config("cable parameters must be finite and > 0"));
        }
        Ok(())
    }

    pub fn pul(&self, freq_hz: f64) -> PulParams {
        PulParams {
            r: self.resistance_ohm_per_m * (freq_hz / self.resistance_ref_hz).sqrt(),
            l: self.inductance_h_per_m,
            g: 2.0 * PI * freq_hz * self.capacitance_f_per_m * self.loss_tangent,
            c: self.capacitance_f_per_m,
        }
    }

    /// Propagation constant and characteristic impedance with R and G
    /// multiplied by `loss_scale`.
    pub fn propagation(&self, freq_hz: f64, loss_scale: f64) -> (Complex64, Complex64) {
        let p = self.pul(freq_hz);
        let w = 2.0 * PI * freq_hz;
        let series = Complex64::new(p.r * loss_scale, w * p.l);
        let shunt = Complex64::new(p.g * loss_scale, w * p.c);
        ((series * shunt).sqrt(), (series / shunt).sqrt())
    }

    pub fn characteristic_impedance(&self, freq_hz: f64) -> Complex64 {
        self.propagation(freq_hz, 1.0).1
    }
}

/// Two-port transmission (ABCD) matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Abcd {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub d: Complex64,
}

impl Abcd {
    pub const IDENTITY: Abcd = Abcd {
        a: Complex64::new(1.0, 0.0),
        b: Complex64::new(0.0, 0.0),
        c: Complex64::new(0.0, 0.0),
        d: Complex64::new(1.0, 0.0),
    };

    pub fn shunt(admittance: Complex64) -> Self {
        Abcd {
            c: admittance,
            ..Self::IDENTITY
        }
    }

    pub fn series(impedance: Complex64) -> Self {
        Abcd {
            b: impedance,
            ..Self::IDENTITY
        }
    }

    pub fn det(&self) -> Complex64 {
        self.a * self.d - self.b * self.c
    }

    /// Impedance seen at port 1 with `load` across port 2.
    pub fn input_impedance(&self, load: Complex64) -> Complex64 {
        (self.a * load + self.b) / (self.c * load + self.d)
    }

    pub fn max_rel_diff(&self, other: &Abcd) -> f64 {
        let pairs = [
            (self.a, other.a),
            (self.b, other.b),
            (self.c, other.c),
            (self.d, other.d),
        ];
        pairs
            .iter()
            .map(|(x, y)| (x - y).norm() / x.norm().max(y.norm()).max(1e-300))
            .fold(0.0, f64::max)
    }
}

impl Mul for Abcd {
    type Output = Abcd;

    fn mul(self, o: Abcd) -> Abcd {
        Abcd {
            a: self.a * o.a + self.b * o.c,
            b: self.a * o.b + self.b * o.d,
            c: self.c * o.a + self.d * o.c,
            d: self.c * o.b + self.d * o.d,
        }
    }
}

/// Uniform line section of `length_m`, R and G scaled by `loss_scale`.
pub fn abcd_segment_scaled(cable: &CableSpec, length_m: f64, freq_hz: f64, loss_scale: f64) -> Abcd {
    if length_m == 0.0 {
        return Abcd::IDENTITY;
    }
    let (gamma, zc) = cable.propagation(freq_hz, loss_scale);
    let gl = gamma * length_m;
    let (ch, sh) = (gl.cosh(), gl.sinh());
    Abcd {
        a: ch,
        b: zc * sh,
        c: sh / zc,
        d: ch,
    }
}

/// Uniform healthy line section.
pub fn abcd_segment(cable: &CableSpec, length_m: f64, freq_hz: f64) -> Abcd {
    abcd_segment_scaled(cable, length_m, freq_hz, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_length_is_identity() {
        assert_eq!(abcd_segment(&CableSpec::default(), 0.0, 5e6), Abcd::IDENTITY);
    }

    #[test]
    fn segments_are_reciprocal() {
        let cable = CableSpec::default();
        for &len in &[1.0, 100.0, 600.0, 1000.0] {
            for &f in &[2e6, 10e6, 24.4e6] {
                for &scale in &[1.0, 1.6, 3.0] {
                    let m = abcd_segment_scaled(&cable, len, f, scale);
                    // cosh² − sinh² cancels, so rounding grows with |A·D|.
                    let tol = 1e-9 * (m.a * m.d).norm().max(1.0);
                    assert!((m.det() - Complex64::new(1.0, 0.0)).norm() < tol);
                }
            }
        }
    }

    #[test]
    fn chaining_two_halves_equals_whole() {
        let cable = CableSpec::default();
        for &f in &[2e6, 7.3e6, 15e6, 24.3e6] {
            let half = abcd_segment(&cable, 50.0, f);
            let whole = abcd_segment(&cable, 100.0, f);
            assert!((half * half).max_rel_diff(&whole) < 1e-9);
        }
    }

    #[test]
    fn matched_line_input_impedance() {
        let cable = CableSpec::default();
        let zc = cable.characteristic_impedance(3e6);
        let zin = abcd_segment(&cable, 250.0, 3e6).input_impedance(zc);
        assert!((zin - zc).norm() < 1e-9 * zc.norm());
    }
}
