//! Special functions and small dense linear algebra.

mod linalg;
mod optimize;
mod random;
mod special;

pub use linalg::{least_squares, sym_inverse, Cholesky, SymMatrix};
pub use optimize::{nelder_mead, NelderMeadOptions};
pub use random::{gaussian_vector, substream, GaussianSampler};
pub use special::{chi2_cdf, chi2_quantile, regularized_gamma_p, ChiSquaredDof};
