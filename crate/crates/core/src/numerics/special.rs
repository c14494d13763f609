
use crate::{Error, Result};

/// Degrees of freedom of a chi-squared distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ChiSquaredDof(u32);

impl ChiSquaredDof {
    pub fn new(kappa: u32) -> Result<Self> {
        if kappa == 0 {
            return Err(Error::domain("chi-squared degrees of freedom must be >= 1"));
        }
        Ok(Self(kappa))
    }

    pub fn get(self) -> u32 {
        self.0
    }
}

const EPS: f64 = 1e-16;
const MAX_ITER: usize = 10_000;

/// Regularized lower incomplete gamma function P(a, x).
///
/// Uses the power series below `x < a + 1` and the Lentz continued fraction
/// for Q(a, x) above it.
pub fn regularized_gamma_p(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0);
    if x <= 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    let log_prefactor = a * x.ln() - x - libm::lgamma(a);
    if x < a + 1.0 {
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..MAX_ITER {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * EPS {
                break;
            }
        }
        (sum.ln() + log_prefactor).exp().min(1.0)
    } else {
        // Modified Lentz evaluation of the continued fraction for Q(a, x).
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < EPS {
                break;
            }
        }
        let q = (h.ln() + log_prefactor).exp();
        (1.0 - q).max(0.0)
    }
}

/// Chi-squared cumulative distribution function.
pub fn chi2_cdf(kappa: ChiSquaredDof, x: f64) -> f64 {
    regularized_gamma_p(0.5 * kappa.get() as f64, 0.5 * x)
}

/// Chi-squared quantile: the `x` with `chi2_cdf(kappa, x) == prob`.
///
/// Bracket by doubling, then bisect the CDF down to a relative interval
/// width of about 1e-15.
pub fn chi2_quantile(kappa: ChiSquaredDof, prob: f64) -> Result<f64> {
    if !(prob > 0.0 && prob < 1.0) {
        return Err(Error::domain(alloc::format!(
            "quantile probability must lie in (0, 1), got {prob}"
        )));
    }
    let mut lo = 0.0_f64;
    let mut hi = (kappa.get() as f64).max(1.0);
    while chi2_cdf(kappa, hi) < prob {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if chi2_cdf(kappa, mid) < prob {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi.max(1e-300) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dof(k: u32) -> ChiSquaredDof {
        ChiSquaredDof::new(k).unwrap()
    }

    #[test]
    fn two_dof_is_exponential() {
        let p = 1.0 - (-1.0_f64).exp();
        assert!((chi2_quantile(dof(2), p).unwrap() - 2.0).abs() < 1e-9);
        for x in [0.1, 1.0, 3.5, 20.0] {
            assert!((chi2_cdf(dof(2), x) - (1.0 - (-x / 2.0).exp())).abs() < 1e-14);
        }
    }

    #[test]
    fn ninety_nine_percent_nine_dof() {
        let t = chi2_quantile(dof(9), 0.99).unwrap();
        assert!((t - 21.67).abs() < 0.01, "{t}");
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(ChiSquaredDof::new(0).is_err());
        for p in [0.0, 1.0, -0.2, 1.5, f64::NAN] {
            assert!(chi2_quantile(dof(3), p).is_err());
        }
    }

    #[test]
    fn cdf_inverts_quantile() {
        for k in 1..=12 {
            for p in [0.01, 0.5, 0.9, 0.99, 0.999] {
                let x = chi2_quantile(dof(k), p).unwrap();
                assert!((chi2_cdf(dof(k), x) - p).abs() < 1e-7, "k={k} p={p}");
            }
        }
    }

    #[test]
    fn monotone_in_prob_and_dof() {
        for k in 1..=12 {
            let mut prev = 0.0;
            for i in 1..100 {
                let x = chi2_quantile(dof(k), i as f64 / 100.0).unwrap();
                assert!(x > prev);
                prev = x;
            }
        }
        for p in [0.05, 0.5, 0.99] {
            let mut prev = 0.0;
            for k in 1..=30 {
                let x = chi2_quantile(dof(k), p).unwrap();
                assert!(x > prev);
                prev = x;
            }
        }
    }
}
