use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::linalg::{Cholesky, SymMatrix};
use crate::{Error, Result};

/// Deterministic RNG substream for `(seed, domain, index)`.
///
/// `domain` separates unrelated consumers of one seed (loads, noise, weight
/// init); `index` selects the ChaCha stream so each sample or trial can be
/// generated independently of evaluation order.
pub fn substream(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&domain.to_le_bytes());
    key[16..24].copy_from_slice(&0x706c_6377_6174_6368_u64.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

/// Sampler for `N(mean, cov)` with a PSD covariance.
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    mean: Vec<f64>,
    factor: Cholesky,
}

impl GaussianSampler {
    pub fn new(mean: &[f64], cov: &SymMatrix) -> Result<Self> {
        if mean.len() != cov.dim() {
            return Err(Error::DimensionMismatch {
                expected: cov.dim(),
                actual: mean.len(),
            });
        }
        Ok(Self {
            mean: mean.to_vec(),
            factor: Cholesky::factor_semidefinite(cov)?,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z: Vec<f64> = (0..self.dim()).map(|_| rng.sample(StandardNormal)).collect();
        self.factor
            .mul_lower(&z)
            .into_iter()
            .zip(&self.mean)
            .map(|(v, m)| v + m)
            .collect()
    }
}

/// One draw from `N(mean, cov)`, fully determined by `rng_seed`.
pub fn gaussian_vector(mean: &[f64], cov: &SymMatrix, rng_seed: u64) -> Result<Vec<f64>> {
    let sampler = GaussianSampler::new(mean, cov)?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    Ok(sampler.sample(&mut rng))
}
