//! Two-dimensional Gaussian random fields with separable exponential
//! correlation `ρ(τx, τy) = exp(-|τx|/lx) · exp(-|τy|/ly)`.
//!
//! [`CholeskyField`] factors the two axis covariances once and produces
//! `L_y · Z · L_xᵀ`, which has covariance `C_x ⊗ C_y` without ever forming
//! the full `(nx·ny)²` matrix. [`SpectralField`] reproduces the FFT recipe
//! with spectral density `exp(-sqrt((kx·lx)² + (ky·ly)²))`. That density is
//! not the transform of the exponential correlation, so its fields have the
//! wrong correlation structure; it is kept as a reference, not as a fast
//! replacement.

mod stats;

use nalgebra::DMatrix;
use num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::prob::{cholesky_lower, RandomStream};

pub use stats::{
    estimate_correlation, fit_correlation_length, CorrelationFit, FieldEnsembleStats, PointwiseMoments,
    MIN_FIT_CORRELATION,
};

/// Above this `l/d` the axis covariance is numerically rank one.
pub const MAX_LENGTH_RATIO: f64 = 1e6;
const JITTER: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub domain_x: f64,
    pub domain_y: f64,
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, domain_x: f64, domain_y: f64) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidArgument(format!("grid needs at least 2 cells per axis, got {nx}x{ny}")));
        }
        for (name, v) in [("domain_x", domain_x), ("domain_y", domain_y)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(Self { nx, ny, domain_x, domain_y })
    }

    pub fn dx(&self) -> f64 {
        self.domain_x / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        self.domain_y / self.ny as f64
    }

    /// Cell coordinates `0, dx, …, Lx - dx`.
    pub fn x_coords(&self) -> Vec<f64> {
        (0..self.nx).map(|j| j as f64 * self.dx()).collect()
    }

    pub fn y_coords(&self) -> Vec<f64> {
        (0..self.ny).map(|i| i as f64 * self.dy()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationLengths {
    pub lx: f64,
    pub ly: f64,
}

impl CorrelationLengths {
    pub fn new(lx: f64, ly: f64) -> Result<Self> {
        for (name, v) in [("lx", lx), ("ly", ly)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(Self { lx, ly })
    }
}

/// One realization; `values` is `ny × nx` (row `i` is the line `y = i·dy`).
#[derive(Debug, Clone, PartialEq)]
pub struct FieldRealization {
    pub values: DMatrix<f64>,
    pub grid: GridSpec,
}

impl FieldRealization {
    pub fn mean(&self) -> f64 {
        self.values.mean()
    }

    /// Sample standard deviation over all cells (`n - 1` denominator).
    pub fn std_dev(&self) -> f64 {
        sample_std(self.values.as_slice())
    }
}

fn sample_std(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)).sqrt()
}

fn standardize(values: &mut DMatrix<f64>) {
    let m = values.mean();
    let s = sample_std(values.as_slice());
    values.apply(|v| *v = (*v - m) / s);
}

/// Symmetric Toeplitz matrix with entries `exp(-|i-j|·d/l)`.
pub fn build_axis_covariance(n: usize, d: f64, l: f64) -> Result<DMatrix<f64>> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("axis needs at least 2 cells, got {n}")));
    }
    if !(d > 0.0 && l > 0.0) || !d.is_finite() || !l.is_finite() {
        return Err(Error::InvalidArgument(format!("spacing and length must be > 0, got d={d}, l={l}")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| (-(i.abs_diff(j) as f64) * d / l).exp()))
}

fn axis_factor(n: usize, d: f64, l: f64) -> Result<DMatrix<f64>> {
    if l / d > MAX_LENGTH_RATIO {
        return Err(Error::NearSingular(format!(
            "correlation length {l} is {:.3e} cell widths; the axis covariance is rank one",
            l / d
        )));
    }
    let c = build_axis_covariance(n, d, l)?;
    match cholesky_lower(&c) {
        Ok(f) => Ok(f.into_matrix()),
        Err(Error::NotPositiveDefinite { .. }) => {
            let jittered = &c + DMatrix::identity(n, n) * JITTER;
            cholesky_lower(&jittered).map(|f| f.into_matrix()).map_err(|_| {
                Error::NearSingular(format!("axis covariance (n={n}, l/d={:.3e}) not positive definite", l / d))
            })
        }
        Err(e) => Err(e),
    }
}

/// Covariance-decomposition generator with both axis factors precomputed.
#[derive(Debug, Clone)]
pub struct CholeskyField {
    grid: GridSpec,
    lengths: CorrelationLengths,
    lx_factor: DMatrix<f64>,
    ly_factor_t: DMatrix<f64>,
}

impl CholeskyField {
    pub fn new(grid: GridSpec, lengths: CorrelationLengths) -> Result<Self> {
        let lx_factor = axis_factor(grid.nx, grid.dx(), lengths.lx)?;
        let ly_factor = axis_factor(grid.ny, grid.dy(), lengths.ly)?;
        Ok(Self { grid, lengths, lx_factor, ly_factor_t: ly_factor.transpose() })
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn lengths(&self) -> CorrelationLengths {
        self.lengths
    }

    /// `L_y · Z · L_xᵀ` with `Z` filled row by row from `stream`.
    pub fn sample(&self, standardize_field: bool, stream: &mut RandomStream) -> FieldRealization {
        let (ny, nx) = (self.grid.ny, self.grid.nx);
        // Column-major storage of Zᵀ (nx × ny) is row-major Z.
        let mut zt = DMatrix::zeros(nx, ny);
        stream.fill_standard_normal(zt.as_mut_slice());
        // (L_y Z L_xᵀ) = (L_x Zᵀ L_yᵀ)ᵀ
        let ft = &self.lx_factor * zt * &self.ly_factor_t;
        let mut values = ft.transpose();
        if standardize_field {
            standardize(&mut values);
        }
        FieldRealization { values, grid: self.grid }
    }
}

pub fn generate_field_chol(
    grid: GridSpec,
    lengths: CorrelationLengths,
    standardize_field: bool,
    stream: &mut RandomStream,
) -> Result<FieldRealization> {
    Ok(CholeskyField::new(grid, lengths)?.sample(standardize_field, stream))
}

/// FFT generator with spectral density `exp(-sqrt((kx·lx)² + (ky·ly)²))`.
#[derive(Debug, Clone)]
pub struct SpectralField {
    grid: GridSpec,
    amplitude: Vec<f64>,
}

impl SpectralField {
    /// Both cell counts must be powers of two.
    pub fn new(grid: GridSpec, lengths: CorrelationLengths) -> Result<Self> {
        if !grid.nx.is_power_of_two() || !grid.ny.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "spectral generation needs power-of-two grid sizes, got {}x{}",
                grid.nx, grid.ny
            )));
        }
        let kx = wavenumbers(grid.nx, grid.domain_x);
        let ky = wavenumbers(grid.ny, grid.domain_y);
        let mut amplitude = Vec::with_capacity(grid.nx * grid.ny);
        for &ky_i in &ky {
            for &kx_j in &kx {
                let s = (-((kx_j * lengths.lx).powi(2) + (ky_i * lengths.ly).powi(2)).sqrt()).exp();
                amplitude.push(s.sqrt());
            }
        }
        Ok(Self { grid, amplitude })
    }

    /// Real part of the inverse 2D DFT of `sqrt(S)·(a + ib)`, globally
    /// standardized. `a` and then `b` are drawn row by row.
    pub fn sample(&self, stream: &mut RandomStream) -> FieldRealization {
        let (ny, nx) = (self.grid.ny, self.grid.nx);
        let mut re = vec![0.0; nx * ny];
        let mut im = vec![0.0; nx * ny];
        stream.fill_standard_normal(&mut re);
        stream.fill_standard_normal(&mut im);
        let mut buf: Vec<Complex<f64>> =
            (0..nx * ny).map(|k| Complex::new(self.amplitude[k] * re[k], self.amplitude[k] * im[k])).collect();

        let mut planner = FftPlanner::new();
        let row_fft = planner.plan_fft_inverse(nx);
        row_fft.process(&mut buf);
        let col_fft = planner.plan_fft_inverse(ny);
        let mut col = vec![Complex::new(0.0, 0.0); ny];
        for j in 0..nx {
            for i in 0..ny {
                col[i] = buf[i * nx + j];
            }
            col_fft.process(&mut col);
            for i in 0..ny {
                buf[i * nx + j] = col[i];
            }
        }
        let scale = 1.0 / (nx * ny) as f64;
        let mut values = DMatrix::from_fn(ny, nx, |i, j| buf[i * nx + j].re * scale);
        standardize(&mut values);
        FieldRealization { values, grid: self.grid }
    }
}

/// `2π·[0, 1, …, n/2, -n/2+1, …, -1] / L`
fn wavenumbers(n: usize, domain: f64) -> Vec<f64> {
    let half = (n / 2) as i64;
    (0..=half).chain(-half + 1..0).map(|k| 2.0 * std::f64::consts::PI * k as f64 / domain).collect()
}

pub fn generate_field_spectral(
    grid: GridSpec,
    lengths: CorrelationLengths,
    stream: &mut RandomStream,
) -> Result<FieldRealization> {
    Ok(SpectralField::new(grid, lengths)?.sample(stream))
}

#[derive(Debug, Clone)]
pub enum FieldMethod {
    Cholesky { standardize: bool },
    Spectral,
}

/// A configured generator whose realization `t` uses the substream `(seed, t)`.
#[derive(Debug, Clone)]
pub struct FieldEnsemble {
    generator: Generator,
    seed: u64,
}

#[derive(Debug, Clone)]
enum Generator {
    Cholesky(CholeskyField, bool),
    Spectral(SpectralField),
}

impl FieldEnsemble {
    pub fn new(grid: GridSpec, lengths: CorrelationLengths, method: FieldMethod, seed: u64) -> Result<Self> {
        let generator = match method {
            FieldMethod::Cholesky { standardize } => {
                Generator::Cholesky(CholeskyField::new(grid, lengths)?, standardize)
            }
            FieldMethod::Spectral => Generator::Spectral(SpectralField::new(grid, lengths)?),
        };
        Ok(Self { generator, seed })
    }

    pub fn grid(&self) -> GridSpec {
        match &self.generator {
            Generator::Cholesky(g, _) => g.grid,
            Generator::Spectral(g) => g.grid,
        }
    }

    pub fn realization(&self, t: usize) -> FieldRealization {
        let mut stream = RandomStream::derive(self.seed, &[t as u64]);
        match &self.generator {
            Generator::Cholesky(g, standardize) => g.sample(*standardize, &mut stream),
            Generator::Spectral(g) => g.sample(&mut stream),
        }
    }

    pub fn realizations(&self, count: usize, exec: Execution) -> Vec<FieldRealization> {
        map_indexed(count, exec, |t| self.realization(t))
    }

    /// Ensemble statistics over realizations `0..count` without keeping them
    /// in memory: each realization is generated twice, once for the
    /// pointwise moments and once for the lagged products.
    pub fn stats(&self, count: usize, max_lag: Option<usize>, exec: Execution) -> Result<FieldEnsembleStats> {
        stats::ensemble_stats(self.grid(), count, max_lag, exec, |t| std::borrow::Cow::Owned(self.realization(t)))
    }

    /// Pointwise mean and standard deviation over realizations `0..count`.
    pub fn moments(&self, count: usize, exec: Execution) -> PointwiseMoments {
        stats::pointwise_moments(self.grid(), count, exec, |t| std::borrow::Cow::Owned(self.realization(t)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> GridSpec {
        GridSpec::new(n, n, 100.0, 100.0).unwrap()
    }

    #[test]
    fn axis_covariance_entries() {
        let c = build_axis_covariance(256, 100.0 / 256.0, 10.0).unwrap();
        assert!((0..256).all(|i| c[(i, i)] == 1.0));
        assert!((c[(0, 1)] - 0.961_684).abs() < 1e-5);
        assert!((c[(0, 1)] - (-0.0390625f64).exp()).abs() < 1e-15);
        assert_eq!(c, c.transpose());
        assert!(build_axis_covariance(1, 1.0, 1.0).is_err());
        assert!(build_axis_covariance(4, 1.0, 0.0).is_err());
    }

    #[test]
    fn huge_length_is_near_singular() {
        let g = grid(16);
        let err = CholeskyField::new(g, CorrelationLengths::new(g.dx() * 2e6, 5.0).unwrap()).unwrap_err();
        assert!(matches!(err, Error::NearSingular(_)));
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(1, 4, 1.0, 1.0).is_err());
        assert!(GridSpec::new(4, 4, 0.0, 1.0).is_err());
        assert!(CorrelationLengths::new(-1.0, 1.0).is_err());
        let g = GridSpec::new(4, 2, 8.0, 1.0).unwrap();
        assert_eq!(g.x_coords(), vec![0.0, 2.0, 4.0, 6.0]);
        assert_eq!(g.y_coords(), vec![0.0, 0.5]);
    }

    #[test]
    fn cholesky_matches_direct_product() {
        let g = GridSpec::new(5, 3, 5.0, 3.0).unwrap();
        let l = CorrelationLengths::new(2.0, 1.5).unwrap();
        let f = generate_field_chol(g, l, false, &mut RandomStream::new(4)).unwrap();
        let mut s = RandomStream::new(4);
        let z = DMatrix::from_row_slice(3, 5, &sample(&mut s, 15));
        let lx = cholesky_lower(&build_axis_covariance(5, 1.0, 2.0).unwrap()).unwrap().into_matrix();
        let ly = cholesky_lower(&build_axis_covariance(3, 1.0, 1.5).unwrap()).unwrap().into_matrix();
        let direct = ly * z * lx.transpose();
        assert!((f.values - direct).amax() < 1e-12);
    }

    fn sample(s: &mut RandomStream, n: usize) -> Vec<f64> {
        crate::prob::sample_standard_normals(s, n)
    }

    #[test]
    fn standardized_fields_have_unit_moments() {
        let l = CorrelationLengths::new(10.0, 5.0).unwrap();
        let c = generate_field_chol(grid(64), l, true, &mut RandomStream::new(1)).unwrap();
        let s = generate_field_spectral(grid(64), l, &mut RandomStream::new(1)).unwrap();
        for f in [c, s] {
            assert_eq!(f.values.shape(), (64, 64));
            assert!(f.values.iter().all(|v| v.is_finite()));
            assert!(f.mean().abs() < 1e-12);
            assert!((f.std_dev() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let l = CorrelationLengths::new(10.0, 5.0).unwrap();
        let a = generate_field_chol(grid(32), l, true, &mut RandomStream::new(8)).unwrap();
        let b = generate_field_chol(grid(32), l, true, &mut RandomStream::new(8)).unwrap();
        assert_eq!(a, b);
        let a = generate_field_spectral(grid(32), l, &mut RandomStream::new(8)).unwrap();
        let b = generate_field_spectral(grid(32), l, &mut RandomStream::new(8)).unwrap();
        assert_eq!(a, b);
        let e = FieldEnsemble::new(grid(32), l, FieldMethod::Spectral, 3).unwrap();
        assert_eq!(e.realizations(4, Execution::Parallel), e.realizations(4, Execution::Sequential));
    }

    #[test]
    fn spectral_rejects_non_power_of_two() {
        let l = CorrelationLengths::new(1.0, 1.0).unwrap();
        let g = GridSpec::new(48, 64, 1.0, 1.0).unwrap();
        assert!(generate_field_spectral(g, l, &mut RandomStream::new(0)).is_err());
    }

    #[test]
    fn wavenumber_layout() {
        let k = wavenumbers(8, 2.0 * std::f64::consts::PI);
        assert_eq!(k, vec![0.0, 1.0, 2.0, 3.0, 4.0, -3.0, -2.0, -1.0]);
    }

    #[test]
    fn spectral_transform_matches_naive_dft() {
        let g = GridSpec::new(4, 8, 3.0, 5.0).unwrap();
        let l = CorrelationLengths::new(0.7, 1.1).unwrap();
        let gen = SpectralField::new(g, l).unwrap();
        let f = gen.sample(&mut RandomStream::new(12));
        let mut s = RandomStream::new(12);
        let re = sample(&mut s, 32);
        let im = sample(&mut s, 32);
        let mut naive = DMatrix::zeros(8, 4);
        for y in 0..8 {
            for x in 0..4 {
                let mut acc = 0.0;
                for ky in 0..8 {
                    for kx in 0..4 {
                        let a = gen.amplitude[ky * 4 + kx];
                        let ph = 2.0 * std::f64::consts::PI * ((kx * x) as f64 / 4.0 + (ky * y) as f64 / 8.0);
                        acc += a * (re[ky * 4 + kx] * ph.cos() - im[ky * 4 + kx] * ph.sin());
                    }
                }
                naive[(y, x)] = acc / 32.0;
            }
        }
        standardize(&mut naive);
        assert!((f.values - naive).amax() < 1e-12);
    }
}
