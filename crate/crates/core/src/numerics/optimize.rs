use alloc::vec;
use alloc::vec::Vec;

/// Stopping rules for [`nelder_mead`].
#[derive(Debug, Clone, Copy)]
pub struct NelderMeadOptions {
    pub max_evals: usize,
    /// Stop once the spread of simplex values falls below
    /// `f_tol · (1 + |f_best|)`.
    pub f_tol: f64,
    pub restarts: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_evals: 4000,
            f_tol: 1e-12,
            restarts: 2,
        }
    }
}

/// Downhill simplex minimization. `f` may return `f64::INFINITY` to mark
/// infeasible points. Each restart rebuilds the simplex around the current
/// best point with half the previous step.
pub fn nelder_mead(
    mut f: impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    step: f64,
    opts: NelderMeadOptions,
) -> (Vec<f64>, f64) {
    let n = x0.len();
    let mut best = x0.to_vec();
    let mut best_f = f(&best);
    if n == 0 {
        return (best, best_f);
    }
    let mut evals = 1;
    let mut step = step;
    for _ in 0..=opts.restarts {
        let mut simplex: Vec<Vec<f64>> = vec![best.clone()];
        for i in 0..n {
            let mut p = best.clone();
            p[i] += if p[i].abs() > 1e-3 { step * p[i].abs().max(0.1) } else { step };
            simplex.push(p);
        }
        let mut values: Vec<f64> = simplex
            .iter()
            .map(|p| {
                evals += 1;
                f(p)
            })
            .collect();
        loop {
            let mut order: Vec<usize> = (0..=n).collect();
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            simplex = order.iter().map(|&i| simplex[i].clone()).collect();
            values = order.iter().map(|&i| values[i]).collect();
            let (lo, hi) = (values[0], values[n]);
            if evals >= opts.max_evals || (hi.is_finite() && hi - lo <= opts.f_tol * (1.0 + lo.abs())) {
                break;
            }
            let centroid: Vec<f64> = (0..n)
                .map(|k| simplex[..n].iter().map(|p| p[k]).sum::<f64>() / n as f64)
                .collect();
            let along = |t: f64| -> Vec<f64> {
                (0..n)
                    .map(|k| centroid[k] + t * (simplex[n][k] - centroid[k]))
                    .collect()
            };
            let xr = along(-1.0);
            let fr = f(&xr);
            evals += 1;
            if fr < values[0] {
                let xe = along(-2.0);
                let fe = f(&xe);
                evals += 1;
                if fe < fr {
                    simplex[n] = xe;
                    values[n] = fe;
                } else {
                    simplex[n] = xr;
                    values[n] = fr;
                }
            } else if fr < values[n - 1] {
                simplex[n] = xr;
                values[n] = fr;
            } else {
                let (xc, fc) = if fr < values[n] {
                    let xc = along(-0.5);
                    let fc = f(&xc);
                    (xc, fc)
                } else {
                    let xc = along(0.5);
                    let fc = f(&xc);
                    (xc, fc)
                };
                evals += 1;
                if fc < values[n].min(fr) {
                    simplex[n] = xc;
                    values[n] = fc;
                } else {
                    for i in 1..=n {
                        for k in 0..n {
                            simplex[i][k] = simplex[0][k] + 0.5 * (simplex[i][k] - simplex[0][k]);
                        }
                        values[i] = f(&simplex[i]);
                        evals += 1;
                    }
                }
            }
        }
        if values[0] <= best_f {
            best = simplex[0].clone();
            best_f = values[0];
        }
        if evals >= opts.max_evals {
            break;
        }
        step *= 0.5;
    }
    (best, best_f)
}
