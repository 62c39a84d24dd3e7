//! Bayesian updating of a multivariate normal model with missing data.
//!
//! The Gibbs sampler alternates three conjugate conditionals: the mean given
//! the covariance and the completed data, the covariance (inverse Wishart)
//! given the mean, and each incomplete row's missing entries given the
//! observed ones.

mod sampling;
mod summary;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::prob::linalg::{clip_eigenvalues, spd_inverse, symmetrize};
use crate::prob::{cholesky_lower, RandomStream};

pub use sampling::{random_correlation, sample_inverse_wishart, sample_mvn, simulate_dataset};
pub use summary::{
    missing_value_intervals, pairwise_contour_coverage, posterior_predictive, MissingInterval, PairCoverage,
    PredictiveDraws,
};

/// Condition number above which an observed covariance block counts as singular.
pub const MAX_CONDITION: f64 = 1e12;
const INIT_EIGEN_FLOOR: f64 = 1e-8;

/// Observations (rows) of `n` variables (columns) with a missing-cell mask.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: DMatrix<f64>,
    missing: DMatrix<bool>,
}

impl DataMatrix {
    /// Missing cells' entries in `values` are ignored (stored as 0).
    pub fn new(mut values: DMatrix<f64>, missing: DMatrix<bool>) -> Result<Self> {
        if values.shape() != missing.shape() {
            return Err(Error::DimensionMismatch { expected: values.len(), found: missing.len() });
        }
        let (m, n) = values.shape();
        if m == 0 || n == 0 {
            return Err(Error::InsufficientData("data matrix is empty".into()));
        }
        for i in 0..m {
            for j in 0..n {
                if missing[(i, j)] {
                    values[(i, j)] = 0.0;
                } else if !values[(i, j)].is_finite() {
                    return Err(Error::InvalidArgument(format!("non-finite value at row {}, column {}", i + 1, j + 1)));
                }
            }
        }
        for j in 0..n {
            let obs = (0..m).filter(|&i| !missing[(i, j)]).count();
            if obs < 2 {
                return Err(Error::InsufficientData(format!("column {} has {obs} observed entries, need 2", j + 1)));
            }
        }
        if let Some(i) = (0..m).find(|&i| (0..n).all(|j| missing[(i, j)])) {
            return Err(Error::InsufficientData(format!("row {} has no observed entries", i + 1)));
        }
        Ok(Self { values, missing })
    }

    pub fn complete(values: DMatrix<f64>) -> Result<Self> {
        let missing = DMatrix::from_element(values.nrows(), values.ncols(), false);
        Self::new(values, missing)
    }

    /// Rows of optional cells; `None` is missing.
    pub fn from_rows(rows: &[Vec<Option<f64>>]) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, found: rows[i].len() });
        }
        let values = DMatrix::from_fn(m, n, |i, j| rows[i][j].unwrap_or(0.0));
        let missing = DMatrix::from_fn(m, n, |i, j| rows[i][j].is_none());
        Self::new(values, missing)
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn missing(&self) -> &DMatrix<bool> {
        &self.missing
    }

    pub fn is_missing(&self, row: usize, col: usize) -> bool {
        self.missing[(row, col)]
    }

    pub fn missing_count(&self) -> usize {
        self.missing.iter().filter(|&&b| b).count()
    }

    pub fn observed_means(&self) -> DVector<f64> {
        DVector::from_fn(self.ncols(), |j, _| {
            let obs: Vec<f64> =
                (0..self.nrows()).filter(|&i| !self.missing[(i, j)]).map(|i| self.values[(i, j)]).collect();
            obs.iter().sum::<f64>() / obs.len() as f64
        })
    }

    /// Pairwise-deletion covariance: each entry from the rows where both
    /// variables are observed (`k - 1` denominator, 0 when fewer than two).
    pub fn pairwise_covariance(&self) -> DMatrix<f64> {
        let (m, n) = self.values.shape();
        let mut c = DMatrix::zeros(n, n);
        for a in 0..n {
            for b in a..n {
                let rows: Vec<usize> = (0..m).filter(|&i| !self.missing[(i, a)] && !self.missing[(i, b)]).collect();
                if rows.len() < 2 {
                    continue;
                }
                let k = rows.len() as f64;
                let ma = rows.iter().map(|&i| self.values[(i, a)]).sum::<f64>() / k;
                let mb = rows.iter().map(|&i| self.values[(i, b)]).sum::<f64>() / k;
                let s: f64 = rows.iter().map(|&i| (self.values[(i, a)] - ma) * (self.values[(i, b)] - mb)).sum();
                c[(a, b)] = s / (k - 1.0);
                c[(b, a)] = c[(a, b)];
            }
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriorSpec {
    pub mu0: DVector<f64>,
    pub sigma0: DMatrix<f64>,
    pub nu0: f64,
    pub psi0: DMatrix<f64>,
}

impl PriorSpec {
    /// `μ0 = 0`, `Σ0 = 100·I`, `ν0 = n + 2`, `Ψ0 = I`.
    pub fn default_for(n: usize) -> Self {
        Self {
            mu0: DVector::zeros(n),
            sigma0: DMatrix::identity(n, n) * 100.0,
            nu0: n as f64 + 2.0,
            psi0: DMatrix::identity(n, n),
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.mu0.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: self.mu0.len() });
        }
        for m in [&self.sigma0, &self.psi0] {
            if m.shape() != (n, n) {
                return Err(Error::DimensionMismatch { expected: n, found: m.nrows() });
            }
        }
        if !(self.nu0 > n as f64 - 1.0) {
            return Err(Error::Domain(format!("nu0 must exceed n - 1 = {}, got {}", n - 1, self.nu0)));
        }
        cholesky_lower(&self.sigma0)?;
        cholesky_lower(&self.psi0)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GibbsConfig {
    pub num_iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
}

impl GibbsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_iterations <= self.burn_in {
            return Err(Error::InvalidArgument(format!(
                "num_iterations ({}) must exceed burn_in ({})",
                self.num_iterations, self.burn_in
            )));
        }
        Ok(())
    }
}

/// Retained draws, one entry per iteration after burn-in.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSamples {
    /// `retained × n`
    pub mu_samples: DMatrix<f64>,
    pub sigma_samples: Vec<DMatrix<f64>>,
    pub imputed_data_samples: Vec<DMatrix<f64>>,
    /// 1-based iteration number of each retained draw.
    pub iterations: Vec<usize>,
    pub missing: DMatrix<bool>,
}

impl PosteriorSamples {
    pub fn len(&self) -> usize {
        self.iterations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterations.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.mu_samples.ncols()
    }

    pub fn posterior_mean(&self) -> DVector<f64> {
        self.mu_samples.row_mean().transpose()
    }

    /// Sample standard deviation of each mean component across draws.
    pub fn posterior_sd(&self) -> DVector<f64> {
        self.mu_samples.row_variance().transpose().map(|v| (v * self.len() as f64 / (self.len() as f64 - 1.0)).sqrt())
    }
}

pub fn run_gibbs(data: &DataMatrix, prior: &PriorSpec, config: &GibbsConfig) -> Result<PosteriorSamples> {
    config.validate()?;
    let (m, n) = (data.nrows(), data.ncols());
    prior.validate(n)?;
    let mf = m as f64;

    let sigma0_inv = spd_inverse(&prior.sigma0)?;
    let sigma0_inv_mu0 = &sigma0_inv * &prior.mu0;

    let mut init_stream = RandomStream::derive(config.seed, &[0]);
    let mut sigma = symmetrize(&data.pairwise_covariance());
    if cholesky_lower(&sigma).is_err() {
        sigma = clip_eigenvalues(&sigma, INIT_EIGEN_FLOOR);
    }
    let mut imputed = data.values.clone();
    for j in 0..n {
        for i in 0..m {
            if data.missing[(i, j)] {
                imputed[(i, j)] = init_stream.standard_normal();
            }
        }
    }
    let incomplete: Vec<RowPattern> = (0..m).filter_map(|i| RowPattern::of(data, i)).collect();

    let retained = config.num_iterations - config.burn_in;
    let mut mu_samples = DMatrix::zeros(retained, n);
    let mut sigma_samples = Vec::with_capacity(retained);
    let mut imputed_samples = Vec::with_capacity(retained);
    let mut iterations = Vec::with_capacity(retained);

    for it in 0..config.num_iterations {
        let mut stream = RandomStream::derive(config.seed, &[1, it as u64]);

        // Mean given covariance and completed data.
        let sigma_inv = spd_inverse(&sigma)?;
        let precision = &sigma0_inv + &sigma_inv * mf;
        let sigma_n = symmetrize(&spd_inverse(&precision)?);
        let ybar = imputed.row_mean().transpose();
        let mu_n = &sigma_n * (&sigma0_inv_mu0 + &sigma_inv * ybar * mf);
        let mu = sample_mvn(&mu_n, &sigma_n, &mut stream)?;

        // Covariance given mean.
        let mut s = imputed.clone();
        for mut row in s.row_iter_mut() {
            row -= mu.transpose();
        }
        let psi_n = &prior.psi0 + s.transpose() * &s;
        sigma = sample_inverse_wishart(&psi_n, prior.nu0 + mf, &mut stream)?;

        // Missing entries given everything else.
        for pat in &incomplete {
            let mut row_stream = RandomStream::derive(config.seed, &[2, it as u64, pat.row as u64]);
            let draw = pat.conditional_draw(&imputed, &mu, &sigma, &mut row_stream)?;
            for (k, &j) in pat.mis.iter().enumerate() {
                imputed[(pat.row, j)] = draw[k];
            }
        }

        if it >= config.burn_in {
            mu_samples.set_row(it - config.burn_in, &mu.transpose());
            sigma_samples.push(sigma.clone());
            imputed_samples.push(imputed.clone());
            iterations.push(it + 1);
        }
    }

    Ok(PosteriorSamples {
        mu_samples,
        sigma_samples,
        imputed_data_samples: imputed_samples,
        iterations,
        missing: data.missing.clone(),
    })
}

struct RowPattern {
    row: usize,
    obs: Vec<usize>,
    mis: Vec<usize>,
}

impl RowPattern {
    fn of(data: &DataMatrix, row: usize) -> Option<Self> {
        let (mis, obs): (Vec<usize>, Vec<usize>) = (0..data.ncols()).partition(|&j| data.missing[(row, j)]);
        (!mis.is_empty()).then_some(Self { row, obs, mis })
    }

    fn conditional_draw(
        &self,
        imputed: &DMatrix<f64>,
        mu: &DVector<f64>,
        sigma: &DMatrix<f64>,
        stream: &mut RandomStream,
    ) -> Result<Vec<f64>> {
        let (no, nm) = (self.obs.len(), self.mis.len());
        let s_oo = DMatrix::from_fn(no, no, |a, b| sigma[(self.obs[a], self.obs[b])]);
        let s_om = DMatrix::from_fn(no, nm, |a, b| sigma[(self.obs[a], self.mis[b])]);
        let s_mm = DMatrix::from_fn(nm, nm, |a, b| sigma[(self.mis[a], self.mis[b])]);

        let eig = s_oo.clone().symmetric_eigen();
        let (lo, hi) =
            eig.eigenvalues.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v.abs())));
        let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if !(condition <= MAX_CONDITION) {
            return Err(Error::NumericalDegeneracy { row: self.row + 1, condition });
        }
        // Σ_oo⁻¹ via the eigendecomposition already at hand.
        let inv_vals = eig.eigenvalues.map(|v| 1.0 / v);
        let s_oo_inv = &eig.eigenvectors * DMatrix::from_diagonal(&inv_vals) * eig.eigenvectors.transpose();

        let resid = DVector::from_fn(no, |a, _| imputed[(self.row, self.obs[a])] - mu[self.obs[a]]);
        let gain = s_om.transpose() * &s_oo_inv;
        let mean = DVector::from_fn(nm, |b, _| mu[self.mis[b]]) + &gain * resid;
        let cov = symmetrize(&(s_mm - &gain * s_om));

        let ce = cov.symmetric_eigen();
        let scales = ce.eigenvalues.map(|v| v.max(0.0).sqrt());
        let mut z = vec![0.0; nm];
        stream.fill_standard_normal(&mut z);
        let scaled = DVector::from_fn(nm, |k, _| scales[k] * z[k]);
        Ok((mean + &ce.eigenvectors * scaled).iter().copied().collect())
    }
}
