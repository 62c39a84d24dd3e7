//! Ensemble statistics and correlation-length estimation.
//!
//! The autocorrelation at lag `k` along an axis is the average, over all
//! cell pairs `k` apart on that axis, of the across-realization Pearson
//! correlation of the pair. Centering and scaling happen per cell with the
//! ensemble mean and standard deviation. Demeaning each row of a single
//! realization instead would bias the estimate low whenever the row spans
//! only a few correlation lengths.

use std::borrow::Cow;

use nalgebra::DMatrix;

use super::{FieldRealization, GridSpec};
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};

/// Lags are fitted while the estimate stays above this value.
pub const MIN_FIT_CORRELATION: f64 = 0.05;
const CHUNK: usize = 8;

/// Streaming pointwise mean and variance (Welford), mergeable across chunks.
#[derive(Debug, Clone, PartialEq)]
pub struct PointwiseMoments {
    count: usize,
    mean: DMatrix<f64>,
    m2: DMatrix<f64>,
}

impl PointwiseMoments {
    pub fn new(grid: GridSpec) -> Self {
        Self { count: 0, mean: DMatrix::zeros(grid.ny, grid.nx), m2: DMatrix::zeros(grid.ny, grid.nx) }
    }

    pub fn push(&mut self, field: &FieldRealization) {
        self.count += 1;
        let n = self.count as f64;
        for ((m, s), &v) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(field.values.iter()) {
            let d = v - *m;
            *m += d / n;
            *s += d * (v - *m);
        }
    }

    pub fn merge(&mut self, other: &Self) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        for ((m, s), (&mb, &sb)) in
            self.mean.iter_mut().zip(self.m2.iter_mut()).zip(other.mean.iter().zip(other.m2.iter()))
        {
            let d = mb - *m;
            *m += d * nb / n;
            *s += sb + d * d * na * nb / n;
        }
        self.count += other.count;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> &DMatrix<f64> {
        &self.mean
    }

    /// Pointwise sample standard deviation (`n - 1` denominator).
    pub fn std_dev(&self) -> DMatrix<f64> {
        let d = (self.count.max(2) - 1) as f64;
        self.m2.map(|s| (s / d).sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationFit {
    pub length: f64,
    /// Leading lags (including lag 0) used in the fit.
    pub lags_used: usize,
    pub sum_squared_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldEnsembleStats {
    pub pointwise_mean: DMatrix<f64>,
    pub pointwise_std: DMatrix<f64>,
    /// Autocorrelation along x at lags `0, dx, 2dx, …`.
    pub corr_x: Vec<f64>,
    pub corr_y: Vec<f64>,
    pub n_realizations: usize,
    pub dx: f64,
    pub dy: f64,
    /// `None` when fewer than two lags exceed the fit cutoff.
    pub fit_x: Option<CorrelationFit>,
    pub fit_y: Option<CorrelationFit>,
}

impl FieldEnsembleStats {
    pub fn length_x(&self) -> Option<f64> {
        self.fit_x.map(|f| f.length)
    }

    pub fn length_y(&self) -> Option<f64> {
        self.fit_y.map(|f| f.length)
    }
}

/// Statistics of a stored ensemble. `max_lag` defaults to half the axis
/// length.
pub fn estimate_correlation(ensemble: &[FieldRealization], max_lag: Option<usize>) -> Result<FieldEnsembleStats> {
    let Some(first) = ensemble.first() else {
        return Err(Error::InsufficientData("need at least 2 realizations, got 0".into()));
    };
    if let Some(bad) = ensemble.iter().position(|f| f.grid != first.grid || f.values.shape() != first.values.shape()) {
        return Err(Error::InvalidArgument(format!("realization {bad} is on a different grid")));
    }
    ensemble_stats(first.grid, ensemble.len(), max_lag, Execution::default(), |t| Cow::Borrowed(&ensemble[t]))
}

pub(crate) fn pointwise_moments<'a, F>(grid: GridSpec, count: usize, exec: Execution, get: F) -> PointwiseMoments
where
    F: Fn(usize) -> Cow<'a, FieldRealization> + Sync + Send,
{
    let chunks = count.div_ceil(CHUNK);
    let parts = map_indexed(chunks, exec, |c| {
        let mut acc = PointwiseMoments::new(grid);
        for t in c * CHUNK..((c + 1) * CHUNK).min(count) {
            acc.push(&get(t));
        }
        acc
    });
    let mut total = PointwiseMoments::new(grid);
    for p in &parts {
        total.merge(p);
    }
    total
}

pub(crate) fn ensemble_stats<'a, F>(
    grid: GridSpec,
    count: usize,
    max_lag: Option<usize>,
    exec: Execution,
    get: F,
) -> Result<FieldEnsembleStats>
where
    F: Fn(usize) -> Cow<'a, FieldRealization> + Sync + Send,
{
    if count < 2 {
        return Err(Error::InsufficientData(format!("need at least 2 realizations, got {count}")));
    }
    let (ny, nx) = (grid.ny, grid.nx);
    let lag_x = max_lag.unwrap_or(nx / 2).min(nx - 1);
    let lag_y = max_lag.unwrap_or(ny / 2).min(ny - 1);

    let moments = pointwise_moments(grid, count, exec, &get);
    let mean = moments.mean().clone();
    let std = moments.std_dev();
    if let Some(k) = std.iter().position(|&s| !(s > 0.0)) {
        return Err(Error::DegenerateProblem(format!(
            "zero variance across realizations at cell (row {}, column {})",
            k % ny,
            k / ny
        )));
    }
    let inv_std = std.map(|s| 1.0 / s);

    let chunks = count.div_ceil(CHUNK);
    let parts = map_indexed(chunks, exec, |c| {
        let mut sx = vec![0.0; lag_x + 1];
        let mut sy = vec![0.0; lag_y + 1];
        for t in c * CHUNK..((c + 1) * CHUNK).min(count) {
            let f = get(t);
            let w: Vec<f64> =
                f.values.iter().zip(mean.iter()).zip(inv_std.iter()).map(|((v, m), is)| (v - m) * is).collect();
            // Column-major: shifting by k columns is an offset of k·ny.
            for (k, acc) in sx.iter_mut().enumerate().skip(1) {
                *acc += dot(&w[..ny * (nx - k)], &w[ny * k..]);
            }
            for col in w.chunks_exact(ny) {
                for (k, acc) in sy.iter_mut().enumerate().skip(1) {
                    *acc += dot(&col[..ny - k], &col[k..]);
                }
            }
        }
        (sx, sy)
    });
    let mut sx = vec![0.0; lag_x + 1];
    let mut sy = vec![0.0; lag_y + 1];
    for (px, py) in &parts {
        sx.iter_mut().zip(px).for_each(|(a, b)| *a += b);
        sy.iter_mut().zip(py).for_each(|(a, b)| *a += b);
    }
    let r1 = (count - 1) as f64;
    let finish = |s: Vec<f64>, along: usize, across: usize| -> Vec<f64> {
        s.iter()
            .enumerate()
            .map(|(k, v)| if k == 0 { 1.0 } else { (v / (r1 * (across * (along - k)) as f64)).clamp(-1.0, 1.0) })
            .collect()
    };
    let corr_x = finish(sx, nx, ny);
    let corr_y = finish(sy, ny, nx);
    let fit_x = fit_correlation_length(&corr_x, grid.dx());
    let fit_y = fit_correlation_length(&corr_y, grid.dy());
    Ok(FieldEnsembleStats {
        pointwise_mean: mean,
        pointwise_std: std,
        corr_x,
        corr_y,
        n_realizations: count,
        dx: grid.dx(),
        dy: grid.dy(),
        fit_x,
        fit_y,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Least-squares fit of `exp(-τ/l)` to `rho[k]` at `τ = k·spacing`, over the
/// leading lags whose estimate exceeds [`MIN_FIT_CORRELATION`].
///
/// The search is a golden-section minimization on `ln l`, bracketed around
/// the first lag where the estimate drops below `1/e`.
pub fn fit_correlation_length(rho: &[f64], spacing: f64) -> Option<CorrelationFit> {
    let used = rho.iter().take_while(|&&r| r > MIN_FIT_CORRELATION).count();
    if used < 2 || !(spacing > 0.0) {
        return None;
    }
    let pts = &rho[..used];
    let sse = |log_l: f64| -> f64 {
        let l = log_l.exp();
        pts.iter()
            .enumerate()
            .map(|(k, r)| {
                let e = r - (-(k as f64) * spacing / l).exp();
                e * e
            })
            .sum()
    };
    let first_below = pts.iter().position(|&r| r < (-1.0f64).exp()).unwrap_or(used - 1).max(1);
    let guess = (first_below as f64 * spacing).ln();
    let (mut a, mut b) = (guess - 4.0, guess + 4.0);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (sse(c), sse(d));
    while b - a > 1e-10 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = sse(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = sse(d);
        }
    }
    let log_l = 0.5 * (a + b);
    Some(CorrelationFit { length: log_l.exp(), lags_used: used, sum_squared_residual: sse(log_l) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{CholeskyField, CorrelationLengths, FieldEnsemble, FieldMethod};
    use crate::prob::RandomStream;

    #[test]
    fn fit_recovers_exact_exponential() {
        let rho: Vec<f64> = (0..60).map(|k| (-(k as f64) * 0.5 / 7.0).exp()).collect();
        let fit = fit_correlation_length(&rho, 0.5).unwrap();
        assert!((fit.length - 7.0).abs() < 1e-6, "{fit:?}");
        // exp(-k/14) > 0.05 for k < 41.9
        assert_eq!(fit.lags_used, 42);
    }

    #[test]
    fn fit_needs_two_lags() {
        assert!(fit_correlation_length(&[1.0, 0.01, 0.3], 1.0).is_none());
    }

    #[test]
    fn moments_merge_equals_sequential_push() {
        let g = GridSpec::new(4, 3, 4.0, 3.0).unwrap();
        let gen = CholeskyField::new(g, CorrelationLengths::new(1.0, 1.0).unwrap()).unwrap();
        let mut s = RandomStream::new(3);
        let fields: Vec<_> = (0..10).map(|_| gen.sample(false, &mut s)).collect();
        let mut all = PointwiseMoments::new(g);
        fields.iter().for_each(|f| all.push(f));
        let mut a = PointwiseMoments::new(g);
        let mut b = PointwiseMoments::new(g);
        fields[..3].iter().for_each(|f| a.push(f));
        fields[3..].iter().for_each(|f| b.push(f));
        a.merge(&b);
        assert_eq!(a.count(), 10);
        assert!((a.mean() - all.mean()).amax() < 1e-14);
        assert!((a.std_dev() - all.std_dev()).amax() < 1e-14);
        // Oracle: two-pass formulas at one cell.
        let v: Vec<f64> = fields.iter().map(|f| f.values[(1, 2)]).collect();
        let m = v.iter().sum::<f64>() / 10.0;
        let sd = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 9.0).sqrt();
        assert!((all.mean()[(1, 2)] - m).abs() < 1e-14);
        assert!((all.std_dev()[(1, 2)] - sd).abs() < 1e-14);
    }

    #[test]
    fn lag_zero_is_one_and_values_bounded() {
        let g = GridSpec::new(32, 16, 32.0, 16.0).unwrap();
        let e = FieldEnsemble::new(
            g,
            CorrelationLengths::new(4.0, 2.0).unwrap(),
            FieldMethod::Cholesky { standardize: true },
            1,
        )
        .unwrap();
        let st = e.stats(20, None, Execution::Parallel).unwrap();
        assert_eq!(st.corr_x[0], 1.0);
        assert_eq!(st.corr_y[0], 1.0);
        assert_eq!(st.corr_x.len(), 17);
        assert_eq!(st.corr_y.len(), 9);
        assert!(st.corr_x.iter().chain(&st.corr_y).all(|r| r.abs() <= 1.0));
        // Streaming and stored paths agree.
        let stored = estimate_correlation(&e.realizations(20, Execution::Sequential), None).unwrap();
        assert_eq!(stored.corr_x.len(), st.corr_x.len());
        for (a, b) in stored.corr_x.iter().zip(&st.corr_x) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn estimator_matches_brute_force_pearson() {
        let g = GridSpec::new(6, 5, 6.0, 5.0).unwrap();
        let gen = CholeskyField::new(g, CorrelationLengths::new(2.0, 1.0).unwrap()).unwrap();
        let mut s = RandomStream::new(5);
        let fields: Vec<_> = (0..7).map(|_| gen.sample(false, &mut s)).collect();
        let st = estimate_correlation(&fields, Some(3)).unwrap();
        let pearson = |a: (usize, usize), b: (usize, usize)| {
            let x: Vec<f64> = fields.iter().map(|f| f.values[a]).collect();
            let y: Vec<f64> = fields.iter().map(|f| f.values[b]).collect();
            let mx = x.iter().sum::<f64>() / 7.0;
            let my = y.iter().sum::<f64>() / 7.0;
            let sxy: f64 = x.iter().zip(&y).map(|(p, q)| (p - mx) * (q - my)).sum();
            let sxx: f64 = x.iter().map(|p| (p - mx).powi(2)).sum();
            let syy: f64 = y.iter().map(|q| (q - my).powi(2)).sum();
            sxy / (sxx * syy).sqrt()
        };
        for k in 1..=3 {
            let mut acc = 0.0;
            let mut n = 0.0;
            for i in 0..5 {
                for j in 0..6 - k {
                    acc += pearson((i, j), (i, j + k));
                    n += 1.0;
                }
            }
            assert!((st.corr_x[k] - acc / n).abs() < 1e-12);
            let mut acc = 0.0;
            let mut n = 0.0;
            for i in 0..5 - k {
                for j in 0..6 {
                    acc += pearson((i, j), (i + k, j));
                    n += 1.0;
                }
            }
            assert!((st.corr_y[k] - acc / n).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_ensembles_are_errors() {
        let g = GridSpec::new(4, 4, 1.0, 1.0).unwrap();
        let zero = FieldRealization { values: DMatrix::zeros(4, 4), grid: g };
        assert!(matches!(
            estimate_correlation(&[zero.clone(), zero.clone(), zero.clone()], None),
            Err(Error::DegenerateProblem(_))
        ));
        assert!(matches!(estimate_correlation(&[zero], None), Err(Error::InsufficientData(_))));
        assert!(estimate_correlation(&[], None).is_err());
    }

    #[test]
    fn white_noise_limit_has_no_lag_one_correlation() {
        let g = GridSpec::new(64, 64, 64.0, 64.0).unwrap();
        let l = CorrelationLengths::new(0.01, 0.01).unwrap();
        let e = FieldEnsemble::new(g, l, FieldMethod::Cholesky { standardize: false }, 2).unwrap();
        let st = e.stats(50, Some(4), Execution::Parallel).unwrap();
        assert!(st.corr_x[1].abs() < 0.02 && st.corr_y[1].abs() < 0.02, "{:?} {:?}", st.corr_x, st.corr_y);
        assert!(st.fit_x.is_none());
    }

    #[test]
    fn kronecker_covariance_small_grid() {
        // Brute force over the full 64x64 covariance of an 8x8 grid.
        let g = GridSpec::new(8, 8, 8.0, 8.0).unwrap();
        let l = CorrelationLengths::new(3.0, 1.5).unwrap();
        let gen = CholeskyField::new(g, l).unwrap();
        let cx = crate::field::build_axis_covariance(8, 1.0, 3.0).unwrap();
        let cy = crate::field::build_axis_covariance(8, 1.0, 1.5).unwrap();
        let samples = 50_000;
        let mut s = RandomStream::new(17);
        let mut sum = DMatrix::<f64>::zeros(64, 64);
        for _ in 0..samples {
            let f = gen.sample(false, &mut s);
            // Row-major flattening: index i·nx + j
            let v = nalgebra::DVector::from_iterator(64, (0..64).map(|p| f.values[(p / 8, p % 8)]));
            sum.ger(1.0, &v, &v, 1.0);
        }
        let emp = sum / samples as f64;
        let mut max_err: f64 = 0.0;
        for p in 0..64 {
            for q in 0..64 {
                let exact = cy[(p / 8, q / 8)] * cx[(p % 8, q % 8)];
                max_err = max_err.max((emp[(p, q)] - exact).abs());
            }
        }
        assert!(max_err <= 0.05, "{max_err}");
    }
}
