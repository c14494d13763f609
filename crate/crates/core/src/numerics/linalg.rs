use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Dense symmetric matrix stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSym", into = "RawSym")]
pub struct SymMatrix {
    dim: usize,
    entries: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawSym {
    dim: usize,
    entries: Vec<f64>,
}

impl TryFrom<RawSym> for SymMatrix {
    type Error = Error;

    fn try_from(raw: RawSym) -> Result<Self> {
        SymMatrix::from_row_major(raw.dim, raw.entries)
    }
}

impl From<SymMatrix> for RawSym {
    fn from(m: SymMatrix) -> Self {
        RawSym {
            dim: m.dim,
            entries: m.entries,
        }
    }
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "matrix dimension must be >= 1");
        Self {
            dim,
            entries: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_diagonal(&vec![1.0; dim])
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.entries[i * m.dim + i] = d;
        }
        m
    }

    /// Builds a matrix from row-major entries, checking symmetry to 1e-10
    /// relative to the largest entry.
    pub fn from_row_major(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::domain("matrix dimension must be >= 1"));
        }
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                actual: entries.len(),
            });
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("matrix entries must be finite"));
        }
        let scale = entries.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        for i in 0..dim {
            for j in (i + 1)..dim {
                let (a, b) = (entries[i * dim + j], entries[j * dim + i]);
                if (a - b).abs() > 1e-10 * scale {
                    return Err(Error::domain(alloc::format!(
                        "matrix is not symmetric at ({i}, {j}): {a} vs {b}"
                    )));
                }
            }
        }
        let mut m = Self { dim, entries };
        m.symmetrize();
        Ok(m)
    }

    /// Builds a matrix from the lower triangle produced by `f(i, j)`, `j <= i`.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..=i {
                let v = f(i, j);
                m.entries[i * dim + j] = v;
                m.entries[j * dim + i] = v;
            }
        }
        m
    }

    fn symmetrize(&mut self) {
        let n = self.dim;
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (self.entries[i * n + j] + self.entries[j * n + i]);
                self.entries[i * n + j] = v;
                self.entries[j * n + i] = v;
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn add_ridge(&self, ridge: f64) -> Self {
        let mut m = self.clone();
        for i in 0..self.dim {
            m.entries[i * self.dim + i] += ridge;
        }
        m
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        self.entries
            .chunks_exact(self.dim)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `xᵀ M x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        let mut acc = 0.0;
        for (i, row) in self.entries.chunks_exact(self.dim).enumerate() {
            let r: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum();
            acc += x[i] * r;
        }
        acc
    }

    /// Plain matrix product, returned row-major (not necessarily symmetric).
    pub fn matmul(&self, other: &SymMatrix) -> Vec<f64> {
        let n = self.dim;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                for j in 0..n {
                    out[i * n + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &SymMatrix) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Lower-triangular Cholesky factor `L` with `M = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    dim: usize,
    lower: Vec<f64>,
}

impl Cholesky {
    pub fn factor(m: &SymMatrix) -> Result<Self> {
        let n = m.dim();
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut d = m.get(j, j);
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { index: j, pivot: d });
            }
            let djj = d.sqrt();
            l[j * n + j] = djj;
            for i in (j + 1)..n {
                let mut s = m.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / djj;
            }
        }
        Ok(Self { dim: n, lower: l })
    }

    /// Factor of a positive semi-definite matrix. Pivots within `tol` of zero
    /// (relative to the largest diagonal) zero their column instead of
    /// failing; clearly negative pivots are still rejected.
    pub fn factor_semidefinite(m: &SymMatrix) -> Result<Self> {
        let n = m.dim();
        let scale = (0..n).fold(0.0_f64, |a, i| a.max(m.get(i, i).abs()));
        let tol = 1e-12 * scale.max(f64::MIN_POSITIVE);
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut d = m.get(j, j);
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if !d.is_finite() || d < -tol.max(1e-10 * scale) {
                return Err(Error::NotPositiveDefinite { index: j, pivot: d });
            }
            if d <= tol {
                for i in (j + 1)..n {
                    let mut s = m.get(i, j);
                    for k in 0..j {
                        s -= l[i * n + k] * l[j * n + k];
                    }
                    if s.abs() > 1e-8 * scale {
                        return Err(Error::NotPositiveDefinite { index: j, pivot: d });
                    }
                }
                continue;
            }
            let djj = d.sqrt();
            l[j * n + j] = djj;
            for i in (j + 1)..n {
                let mut s = m.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / djj;
            }
        }
        Ok(Self { dim: n, lower: l })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `L z`.
    pub fn mul_lower(&self, z: &[f64]) -> Vec<f64> {
        let n = self.dim;
        (0..n)
            .map(|i| (0..=i).map(|k| self.lower[i * n + k] * z[k]).sum())
            .collect()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.lower[i * n + k] * y[k];
            }
            y[i] = s / self.lower[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= self.lower[k * n + i] * y[k];
            }
            y[i] = s / self.lower[i * n + i];
        }
        y
    }

    pub fn inverse(&self) -> SymMatrix {
        let n = self.dim;
        let mut inv = SymMatrix::zeros(n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            for (i, v) in col.into_iter().enumerate() {
                inv.entries[i * n + j] = v;
            }
        }
        inv.symmetrize();
        inv
    }
}

/// `(m + ridge·I)⁻¹` through a Cholesky factorization.
pub fn sym_inverse(m: &SymMatrix, ridge: f64) -> Result<SymMatrix> {
    if !(ridge >= 0.0) {
        return Err(Error::domain("ridge must be non-negative"));
    }
    let shifted = if ridge > 0.0 { m.add_ridge(ridge) } else { m.clone() };
    Ok(Cholesky::factor(&shifted)?.inverse())
}

/// Minimizes `|A x − b|₂` for a row-major `rows × cols` matrix `A` by
/// Householder QR. Requires `rows >= cols` and full column rank.
pub fn least_squares(a: &[f64], rows: usize, cols: usize, b: &[f64]) -> Result<Vec<f64>> {
    if a.len() != rows * cols {
        return Err(Error::DimensionMismatch {
            expected: rows * cols,
            actual: a.len(),
        });
    }
    if b.len() != rows {
        return Err(Error::DimensionMismatch {
            expected: rows,
            actual: b.len(),
        });
    }
    if rows < cols || cols == 0 {
        return Err(Error::insufficient("least squares needs rows >= cols >= 1"));
    }
    let mut r = a.to_vec();
    let mut rhs = b.to_vec();
    let mut v = vec![0.0; rows];
    for k in 0..cols {
        let norm = (k..rows).map(|i| r[i * cols + k].powi(2)).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::domain("least squares design matrix is rank deficient"));
        }
        let alpha = if r[k * cols + k] > 0.0 { -norm } else { norm };
        for i in k..rows {
            v[i] = r[i * cols + k];
        }
        v[k] -= alpha;
        let vnorm2: f64 = (k..rows).map(|i| v[i] * v[i]).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        for j in k..cols {
            let dot: f64 = (k..rows).map(|i| v[i] * r[i * cols + j]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in k..rows {
                r[i * cols + j] -= f * v[i];
            }
        }
        let dot: f64 = (k..rows).map(|i| v[i] * rhs[i]).sum();
        let f = 2.0 * dot / vnorm2;
        for i in k..rows {
            rhs[i] -= f * v[i];
        }
    }
    let scale = (0..cols).fold(0.0_f64, |m, k| m.max(r[k * cols + k].abs()));
    let mut x = vec![0.0; cols];
    for k in (0..cols).rev() {
        let d = r[k * cols + k];
        if d.abs() <= 1e-12 * scale {
            return Err(Error::domain("least squares design matrix is rank deficient"));
        }
        let mut s = rhs[k];
        for j in (k + 1)..cols {
            s -= r[k * cols + j] * x[j];
        }
        x[k] = s / d;
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, seed: u64) -> SymMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        SymMatrix::from_fn(n, |i, j| {
            let dot: f64 = (0..n).map(|k| a[i * n + k] * a[j * n + k]).sum();
            dot + if i == j { 0.5 } else { 0.0 }
        })
    }

    fn max_dev_from_identity(prod: &[f64], n: usize) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((prod[i * n + j] - target).abs());
            }
        }
        worst
    }

    #[test]
    fn identity_and_diagonal_inverses() {
        assert_eq!(sym_inverse(&SymMatrix::identity(3), 0.0).unwrap(), SymMatrix::identity(3));
        let inv = sym_inverse(&SymMatrix::from_diagonal(&[2.0, 4.0]), 0.0).unwrap();
        assert!(inv.max_abs_diff(&SymMatrix::from_diagonal(&[0.5, 0.25])) < 1e-15);
    }

    #[test]
    fn random_spd_multiplies_back_to_identity() {
        for seed in 0..10 {
            let m = random_spd(5, seed);
            let inv = sym_inverse(&m, 0.0).unwrap();
            assert!(max_dev_from_identity(&m.matmul(&inv), 5) < 1e-8);
            let back = sym_inverse(&inv, 0.0).unwrap();
            assert!(back.max_abs_diff(&m) < 1e-6);
        }
    }

    #[test]
    fn ridge_rescues_singular_matrix() {
        let zero = SymMatrix::zeros(3);
        assert!(matches!(
            sym_inverse(&zero, 0.0),
            Err(Error::NotPositiveDefinite { .. })
        ));
        let inv = sym_inverse(&zero, 0.5).unwrap();
        assert!(inv.max_abs_diff(&SymMatrix::from_diagonal(&[2.0; 3])) < 1e-15);
    }

    #[test]
    fn rejects_asymmetric_entries() {
        assert!(SymMatrix::from_row_major(2, vec![1.0, 0.5, 0.4, 1.0]).is_err());
        assert!(SymMatrix::from_row_major(2, vec![1.0, 0.5, 0.5]).is_err());
    }

    #[test]
    fn semidefinite_factor_handles_rank_deficiency() {
        let m = SymMatrix::from_row_major(2, vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        let c = Cholesky::factor_semidefinite(&m).unwrap();
        assert_eq!(c.mul_lower(&[1.0, 5.0]), vec![1.0, 1.0]);
        let indefinite = SymMatrix::from_row_major(2, vec![1.0, 2.0, 2.0, 1.0]).unwrap();
        assert!(Cholesky::factor_semidefinite(&indefinite).is_err());
    }

    #[test]
    fn least_squares_recovers_exact_line() {
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0];
        let a: Vec<f64> = xs.iter().flat_map(|&x| [1.0, x]).collect();
        let b: Vec<f64> = xs.iter().map(|x| 2.0 - 0.5 * x).collect();
        let coef = least_squares(&a, 5, 2, &b).unwrap();
        assert!((coef[0] - 2.0).abs() < 1e-12 && (coef[1] + 0.5).abs() < 1e-12);
    }
}
