//! Cholesky factorization and the small amount of dense linear algebra the
//! samplers need on top of nalgebra.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

use super::normal::LN_SQRT_2PI;

/// Asymmetry at or below this (relative to the largest entry) is averaged
/// away before factorizing; anything larger is rejected.
pub const SYMMETRY_TOLERANCE: f64 = 1e-9;

/// Lower-triangular `L` with positive diagonal such that `L·Lᵀ = A`.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerTriangularFactor {
    l: DMatrix<f64>,
}

impl LowerTriangularFactor {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.l
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    /// `L·v`
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut out = vec![0.0; n];
        for (i, o) in out.iter_mut().enumerate() {
            let mut s = 0.0;
            for (j, vj) in v.iter().enumerate().take(i + 1) {
                s += self.l[(i, j)] * vj;
            }
            *o = s;
        }
        out
    }

    /// `Lᵀ·v`
    pub fn transpose_mul_vec(&self, v: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut out = vec![0.0; n];
        for (j, o) in out.iter_mut().enumerate() {
            let mut s = 0.0;
            for (i, vi) in v.iter().enumerate().skip(j) {
                s += self.l[(i, j)] * vi;
            }
            *o = s;
        }
        out
    }

    /// Solves `L·x = b` by forward substitution.
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut x = vec![0.0; n];
        for i in 0..n {
            let mut s = b[i];
            for (j, xj) in x.iter().enumerate().take(i) {
                s -= self.l[(i, j)] * xj;
            }
            x[i] = s / self.l[(i, i)];
        }
        x
    }

    /// Solves `Lᵀ·x = b` by back substitution.
    pub fn solve_upper(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = b[i];
            for (j, xj) in x.iter().enumerate().skip(i + 1) {
                s -= self.l[(j, i)] * xj;
            }
            x[i] = s / self.l[(i, i)];
        }
        x
    }

    /// `ln det(L·Lᵀ)`
    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.dim()).map(|i| self.l[(i, i)].ln()).sum::<f64>()
    }

    /// Inverse of the factored matrix, `(L·Lᵀ)⁻¹`, symmetrized.
    pub fn inverse(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut inv = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for k in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[k] = 1.0;
            let col = self.solve_upper(&self.solve_lower(&e));
            for (i, v) in col.into_iter().enumerate() {
                inv[(i, k)] = v;
            }
        }
        symmetrize(&inv)
    }
}

/// Cholesky factorization of a symmetric positive-definite matrix.
pub fn cholesky_lower(m: &DMatrix<f64>) -> Result<LowerTriangularFactor> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, found: m.ncols() });
    }
    if n == 0 {
        return Err(Error::InvalidArgument("cannot factor an empty matrix".into()));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
    }
    let dev = max_asymmetry(m);
    let scale = m.amax().max(1.0);
    if dev > SYMMETRY_TOLERANCE * scale {
        return Err(Error::Asymmetric { max_deviation: dev });
    }
    let a = if dev > 0.0 { symmetrize(m) } else { m.clone() };

    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) {
            return Err(Error::NotPositiveDefinite { pivot: j });
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(LowerTriangularFactor { l })
}

pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            dev = dev.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    dev
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Inverse of a symmetric positive-definite matrix.
pub fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(cholesky_lower(m)?.inverse())
}

/// Symmetric part of `m` with eigenvalues raised to at least `floor`.
pub fn clip_eigenvalues(m: &DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    let eig = symmetrize(m).symmetric_eigen();
    let vals = eig.eigenvalues.map(|v| v.max(floor));
    let v = &eig.eigenvectors;
    symmetrize(&(v * DMatrix::from_diagonal(&vals) * v.transpose()))
}

/// Log density of `N(mean, cov)` at `x`.
pub fn mvn_logpdf(x: &[f64], mean: &[f64], cov: &DMatrix<f64>) -> Result<f64> {
    let n = x.len();
    if mean.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: mean.len() });
    }
    if cov.nrows() != n {
        return Err(Error::DimensionMismatch { expected: n, found: cov.nrows() });
    }
    let factor = cholesky_lower(cov)?;
    Ok(mvn_logpdf_factored(x, mean, &factor))
}

pub(crate) fn mvn_logpdf_factored(x: &[f64], mean: &[f64], factor: &LowerTriangularFactor) -> f64 {
    let diff: Vec<f64> = x.iter().zip(mean).map(|(a, b)| a - b).collect();
    let w = factor.solve_lower(&diff);
    let quad: f64 = w.iter().map(|v| v * v).sum();
    -(x.len() as f64) * LN_SQRT_2PI - 0.5 * factor.log_det() - 0.5 * quad
}

/// Validated correlation matrix: symmetric, unit diagonal, entries in
/// [-1, 1], positive definite. The Cholesky factor is computed once.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    entries: DMatrix<f64>,
    factor: LowerTriangularFactor,
}

impl CorrelationMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        let n = entries.nrows();
        if n == 0 || entries.ncols() != n {
            return Err(Error::InvalidArgument(format!(
                "correlation matrix must be square and non-empty, got {}x{}",
                n,
                entries.ncols()
            )));
        }
        for i in 0..n {
            if entries[(i, i)] != 1.0 {
                return Err(Error::InvalidArgument(format!(
                    "correlation diagonal entry ({i},{i}) must be exactly 1, got {}",
                    entries[(i, i)]
                )));
            }
            for j in 0..n {
                let v = entries[(i, j)];
                if !(-1.0..=1.0).contains(&v) {
                    return Err(Error::InvalidArgument(format!(
                        "correlation entry ({i},{j}) = {v} is outside [-1, 1]"
                    )));
                }
            }
        }
        let dev = max_asymmetry(&entries);
        if dev > 1e-12 {
            return Err(Error::Asymmetric { max_deviation: dev });
        }
        let factor = cholesky_lower(&entries)?;
        Ok(Self { entries, factor })
    }

    pub fn identity(n: usize) -> Self {
        Self::new(DMatrix::identity(n, n)).expect("identity is a valid correlation matrix")
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidArgument("correlation rows must form a square matrix".into()));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn factor(&self) -> &LowerTriangularFactor {
        &self.factor
    }
}
