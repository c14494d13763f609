//! Single-cell LSTM reading the window as a scalar sequence; the final
//! hidden state maps linearly to the forecast.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::net::{Network, Normalizer};
use crate::numerics::substream;
use crate::{Error, Result};

const INIT_DOMAIN: u64 = 0x4c53_544d;

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// `tanh` through one exponential; about twice as fast as `f64::tanh`.
fn fast_tanh(z: f64) -> f64 {
    2.0 / (1.0 + (-2.0 * z).exp()) - 1.0
}

/// Flat parameter layout, gate order input, forget, candidate, output:
/// input weights `4H`, recurrent weights `4H × H` (row per gate unit),
/// biases `4H`, output weights `H`, output bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lstm {
    pub window: usize,
    pub hidden: usize,
    pub params: Vec<f64>,
    pub normalizer: Normalizer,
}

struct Layout {
    h: usize,
    wx: usize,
    wh: usize,
    b: usize,
    wy: usize,
    by: usize,
}

impl Layout {
    fn new(h: usize) -> Self {
        let g = 4 * h;
        Self { h, wx: 0, wh: g, b: g + g * h, wy: 2 * g + g * h, by: 2 * g + g * h + h }
    }
}

/// Per-step activations kept for the backward pass.
struct Tape {
    gates: Vec<f64>,
    c: Vec<f64>,
    tanh_c: Vec<f64>,
    h: Vec<f64>,
    z: Vec<f64>,
}

impl Tape {
    fn new(steps: usize, h: usize) -> Self {
        Self {
            gates: vec![0.0; steps * 4 * h],
            c: vec![0.0; (steps + 1) * h],
            tanh_c: vec![0.0; steps * h],
            h: vec![0.0; (steps + 1) * h],
            z: vec![0.0; 4 * h],
        }
    }
}

impl Lstm {
    pub fn param_count(hidden: usize) -> usize {
        let g = 4 * hidden;
        2 * g + g * hidden + hidden + 1
    }

    /// Uniform `±1/√H` weights, zero biases except a unit forget bias.
    pub fn random(window: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = substream(seed, INIT_DOMAIN, 0);
        let lay = Layout::new(hidden);
        let a = 1.0 / (hidden as f64).sqrt();
        let mut params: Vec<f64> = (0..Self::param_count(hidden)).map(|_| rng.random_range(-a..a)).collect();
        for (k, p) in params[lay.b..lay.wy].iter_mut().enumerate() {
            *p = if (hidden..2 * hidden).contains(&k) { 1.0 } else { 0.0 };
        }
        params[lay.by] = 0.0;
        Self { window, hidden, params, normalizer: Normalizer { mean: 0.0, std: 1.0 } }
    }

    pub fn from_params(
        window: usize,
        hidden: usize,
        params: Vec<f64>,
        normalizer: Normalizer,
    ) -> Result<Self> {
        let expected = Self::param_count(hidden);
        if params.len() != expected {
            return Err(Error::DimensionMismatch { expected, actual: params.len() });
        }
        Ok(Self { window, hidden, params, normalizer })
    }

    pub fn predict(&self, window: &[f64]) -> f64 {
        let z: Vec<f64> = window.iter().map(|&v| self.normalizer.apply(v)).collect();
        self.normalizer.invert(self.forward(&z))
    }

    /// Recurrent weights transposed to `H × 4H`, so the forward pass
    /// accumulates whole gate columns.
    fn recurrent_transposed(&self) -> Vec<f64> {
        let lay = Layout::new(self.hidden);
        let (h, g4) = (lay.h, 4 * lay.h);
        let wh = &self.params[lay.wh..lay.b];
        let mut out = vec![0.0; h * g4];
        for g in 0..g4 {
            for k in 0..h {
                out[k * g4 + g] = wh[g * h + k];
            }
        }
        out
    }

    /// Runs the cell over `x`, recording activations; returns the output.
    fn run(&self, x: &[f64], wh_t: &[f64], tape: &mut Tape) -> f64 {
        let lay = Layout::new(self.hidden);
        let h = lay.h;
        let g4 = 4 * h;
        let wx = &self.params[lay.wx..lay.wh];
        let bias = &self.params[lay.b..lay.wy];
        for (t, &xt) in x.iter().enumerate() {
            for ((z, wxg), bg) in tape.z.iter_mut().zip(wx).zip(bias) {
                *z = wxg * xt + bg;
            }
            for (col, &hk) in wh_t.chunks_exact(g4).zip(&tape.h[t * h..(t + 1) * h]) {
                for (z, wv) in tape.z.iter_mut().zip(col) {
                    *z += wv * hk;
                }
            }
            let gates = &mut tape.gates[t * g4..(t + 1) * g4];
            let (c_prev, c_next) = tape.c[t * h..(t + 2) * h].split_at_mut(h);
            let h_next = &mut tape.h[(t + 1) * h..(t + 2) * h];
            let tanh_c = &mut tape.tanh_c[t * h..(t + 1) * h];
            for k in 0..h {
                let ig = sigmoid(tape.z[k]);
                let fg = sigmoid(tape.z[h + k]);
                let cg = fast_tanh(tape.z[2 * h + k]);
                let og = sigmoid(tape.z[3 * h + k]);
                gates[k] = ig;
                gates[h + k] = fg;
                gates[2 * h + k] = cg;
                gates[3 * h + k] = og;
                let c = fg * c_prev[k] + ig * cg;
                c_next[k] = c;
                tanh_c[k] = fast_tanh(c);
                h_next[k] = og * tanh_c[k];
            }
        }
        let last = &tape.h[x.len() * h..(x.len() + 1) * h];
        self.params[lay.by] + self.params[lay.wy..lay.by].iter().zip(last).map(|(a, b)| a * b).sum::<f64>()
    }
}

impl Network for Lstm {
    fn window(&self) -> usize {
        self.window
    }

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn forward(&self, x: &[f64]) -> f64 {
        let mut tape = Tape::new(x.len(), self.hidden);
        self.run(x, &self.recurrent_transposed(), &mut tape)
    }

    fn accumulate_gradient(&self, inputs: &[f64], labels: &[f64], grad: &mut [f64]) -> f64 {
        let w = self.window;
        let lay = Layout::new(self.hidden);
        let h = lay.h;
        let g4 = 4 * h;
        let wh = &self.params[lay.wh..lay.b];
        let wy = &self.params[lay.wy..lay.by];
        let (g_wx, rest) = grad.split_at_mut(lay.wh);
        let (g_wh, rest) = rest.split_at_mut(lay.b - lay.wh);
        let (g_b, rest) = rest.split_at_mut(lay.wy - lay.b);
        let (g_wy, g_by) = rest.split_at_mut(h);
        let n = labels.len() as f64;
        let mut tape = Tape::new(w, h);
        let wh_t = self.recurrent_transposed();
        let mut dh = vec![0.0; h];
        let mut dc = vec![0.0; h];
        let mut dz = vec![0.0; g4];
        let mut loss = 0.0;
        for (i, &y) in labels.iter().enumerate() {
            let x = &inputs[i * w..(i + 1) * w];
            let out = self.run(x, &wh_t, &mut tape);
            let err = out - y;
            loss += err * err;
            let dy = 2.0 * err / n;
            g_by[0] += dy;
            let last = &tape.h[w * h..(w + 1) * h];
            for k in 0..h {
                g_wy[k] += dy * last[k];
                dh[k] = dy * wy[k];
                dc[k] = 0.0;
            }
            for t in (0..w).rev() {
                let gates = &tape.gates[t * g4..(t + 1) * g4];
                let c_prev = &tape.c[t * h..(t + 1) * h];
                let tanh_c = &tape.tanh_c[t * h..(t + 1) * h];
                for k in 0..h {
                    let (ig, fg, cg, og) = (gates[k], gates[h + k], gates[2 * h + k], gates[3 * h + k]);
                    let tc = tanh_c[k];
                    dc[k] += dh[k] * og * (1.0 - tc * tc);
                    dz[k] = dc[k] * cg * ig * (1.0 - ig);
                    dz[h + k] = dc[k] * c_prev[k] * fg * (1.0 - fg);
                    dz[2 * h + k] = dc[k] * ig * (1.0 - cg * cg);
                    dz[3 * h + k] = dh[k] * tc * og * (1.0 - og);
                    dc[k] *= fg;
                }
                let hp = &tape.h[t * h..(t + 1) * h];
                let xt = x[t];
                dh.iter_mut().for_each(|v| *v = 0.0);
                for ((((&d, gx), gb), grow), prow) in dz
                    .iter()
                    .zip(g_wx.iter_mut())
                    .zip(g_b.iter_mut())
                    .zip(g_wh.chunks_exact_mut(h))
                    .zip(wh.chunks_exact(h))
                {
                    *gx += d * xt;
                    *gb += d;
                    for (((gv, pv), hv), dv) in grow.iter_mut().zip(prow).zip(hp).zip(dh.iter_mut()) {
                        *gv += d * hv;
                        *dv += d * pv;
                    }
                }
            }
        }
        loss / n
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forecast::net::{numerical_gradient, relative_error};

    #[test]
    fn gradient_matches_finite_differences() {
        for seed in 0..5 {
            let mut net = Lstm::random(5, 3, seed);
            // Spread the biases so every gate is away from its default.
            let mut rng = substream(seed, 8, 8);
            for v in net.params.iter_mut() {
                *v += rng.random_range(-0.3..0.3);
            }
            let x: Vec<f64> = (0..15).map(|_| rng.random_range(-2.0..2.0)).collect();
            let y: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (_, g) = net.loss_and_gradient(&x, &y);
            let fd = numerical_gradient(&net, &x, &y, 1e-5);
            assert!(relative_error(&g, &fd) < 1e-7, "{}", relative_error(&g, &fd));
        }
    }

    #[test]
    fn output_is_bias_when_readout_is_zero() {
        let mut net = Lstm::random(4, 8, 1);
        let lay = Layout::new(8);
        net.params[lay.wy..lay.by].iter_mut().for_each(|v| *v = 0.0);
        net.params[lay.by] = -0.5;
        assert_eq!(net.forward(&[0.3, 1.0, -2.0, 0.1]), -0.5);
    }

    #[test]
    fn param_count_for_eight_units() {
        assert_eq!(Lstm::param_count(8), 32 + 256 + 32 + 8 + 1);
    }
}
