use nalgebra::{DMatrix, DVector};
use rand_distr::{ChiSquared, Distribution, Gamma};

use crate::error::{Error, Result};
use crate::prob::linalg::{spd_inverse, symmetrize};
use crate::prob::{cholesky_lower, CorrelationMatrix, RandomStream};

/// One draw from `N(mean, cov)`.
pub fn sample_mvn(mean: &DVector<f64>, cov: &DMatrix<f64>, stream: &mut RandomStream) -> Result<DVector<f64>> {
    if cov.shape() != (mean.len(), mean.len()) {
        return Err(Error::DimensionMismatch { expected: mean.len(), found: cov.nrows() });
    }
    let l = cholesky_lower(cov)?;
    let mut z = vec![0.0; mean.len()];
    stream.fill_standard_normal(&mut z);
    Ok(mean + DVector::from_vec(l.mul_vec(&z)))
}

/// Draw from the inverse Wishart `IW(psi, nu)`, whose mean is
/// `psi / (nu - n - 1)` for `nu > n + 1`.
///
/// Bartlett decomposition of `W ~ Wishart(psi⁻¹, nu)`: with `psi⁻¹ = L·Lᵀ`
/// and `A` lower triangular, `A_ii = sqrt(χ²(nu - i))` and `A_ij ~ N(0, 1)`
/// below the diagonal, `W = L·A·Aᵀ·Lᵀ`. The result is `W⁻¹`, symmetrized.
pub fn sample_inverse_wishart(psi: &DMatrix<f64>, nu: f64, stream: &mut RandomStream) -> Result<DMatrix<f64>> {
    let n = psi.nrows();
    if psi.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, found: psi.ncols() });
    }
    if !(nu > n as f64 - 1.0) {
        return Err(Error::Domain(format!("inverse Wishart needs nu > n - 1 = {}, got {nu}", n as f64 - 1.0)));
    }
    let psi_inv = spd_inverse(psi)?;
    let l = cholesky_lower(&psi_inv)?.into_matrix();
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        let chi = ChiSquared::new(nu - i as f64).map_err(|e| Error::Domain(e.to_string()))?;
        a[(i, i)] = chi.sample(stream.rng_mut()).sqrt();
        for j in 0..i {
            a[(i, j)] = stream.standard_normal();
        }
    }
    let la = l * a;
    let w = &la * la.transpose();
    Ok(symmetrize(&spd_inverse(&symmetrize(&w))?))
}

/// Random correlation matrix from the C-vine construction with uniform
/// density over valid matrices (LKJ, η = 1).
///
/// Partial correlations on the vine are `2·Beta(b, b) - 1` with `b` starting
/// at `(dim - 1)/2 + 1/2` and decreasing by 1/2 per tree level.
pub fn random_correlation(dim: usize, stream: &mut RandomStream) -> Result<CorrelationMatrix> {
    if dim < 2 {
        return Err(Error::InvalidArgument(format!("dim must be at least 2, got {dim}")));
    }
    let mut partial = DMatrix::<f64>::zeros(dim, dim);
    let mut s = DMatrix::<f64>::identity(dim, dim);
    let mut b = 1.0 + (dim as f64 - 1.0) / 2.0;
    for k in 0..dim - 1 {
        b -= 0.5;
        let gamma = Gamma::new(b, 1.0).map_err(|e| Error::Domain(e.to_string()))?;
        for i in k + 1..dim {
            let x = gamma.sample(stream.rng_mut());
            let y = gamma.sample(stream.rng_mut());
            let p = 2.0 * x / (x + y) - 1.0;
            partial[(k, i)] = p;
            let mut r = p;
            for l in (0..k).rev() {
                r = r * ((1.0 - partial[(l, i)].powi(2)) * (1.0 - partial[(l, k)].powi(2))).sqrt()
                    + partial[(l, i)] * partial[(l, k)];
            }
            s[(k, i)] = r;
            s[(i, k)] = r;
        }
    }
    CorrelationMatrix::new(s)
}

/// `m` rows from `N(mean, cov)` with `missing_per_column` cells hidden in
/// every column, chosen uniformly and never hiding a whole row. Returns the
/// masked data and the complete matrix.
pub fn simulate_dataset(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    m: usize,
    missing_per_column: usize,
    stream: &mut RandomStream,
) -> Result<(super::DataMatrix, DMatrix<f64>)> {
    let n = mean.len();
    if missing_per_column + 2 > m {
        return Err(Error::InvalidArgument(format!(
            "{missing_per_column} missing cells per column leave fewer than 2 observed in {m} rows"
        )));
    }
    let l = cholesky_lower(cov)?;
    let mut full = DMatrix::zeros(m, n);
    let mut z = vec![0.0; n];
    for i in 0..m {
        stream.fill_standard_normal(&mut z);
        let lz = l.mul_vec(&z);
        for j in 0..n {
            full[(i, j)] = mean[j] + lz[j];
        }
    }
    let mut missing = DMatrix::from_element(m, n, false);
    for j in 0..n {
        let mut hidden = 0;
        while hidden < missing_per_column {
            let i = ((stream.uniform() * m as f64) as usize).min(m - 1);
            let others_missing = (0..n).filter(|&k| k != j && missing[(i, k)]).count();
            if missing[(i, j)] || others_missing == n - 1 {
                continue;
            }
            missing[(i, j)] = true;
            hidden += 1;
        }
    }
    let data = super::DataMatrix::new(full.clone(), missing)?;
    Ok((data, full))
}
