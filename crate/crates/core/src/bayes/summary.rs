use nalgebra::{DMatrix, DVector};

use super::PosteriorSamples;
use crate::error::{Error, Result};
use crate::prob::{cholesky_lower, RandomStream};

/// Posterior-predictive draws stacked by retained posterior draw.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveDraws {
    /// Index into the retained posterior draws for each row of `points`.
    pub draw_index: Vec<usize>,
    pub points: DMatrix<f64>,
}

/// `count_per_draw` points from `N(μ_t, Σ_t)` for every retained draw `t`.
pub fn posterior_predictive(
    samples: &PosteriorSamples,
    count_per_draw: usize,
    stream: &mut RandomStream,
) -> Result<PredictiveDraws> {
    let n = samples.dim();
    let total = samples.len() * count_per_draw;
    let mut points = DMatrix::zeros(total, n);
    let mut draw_index = Vec::with_capacity(total);
    let mut z = vec![0.0; n];
    for (t, sigma) in samples.sigma_samples.iter().enumerate() {
        if count_per_draw == 0 {
            break;
        }
        let l = cholesky_lower(sigma)?;
        for _ in 0..count_per_draw {
            stream.fill_standard_normal(&mut z);
            let lz = l.mul_vec(&z);
            let row = draw_index.len();
            for j in 0..n {
                points[(row, j)] = samples.mu_samples[(t, j)] + lz[j];
            }
            draw_index.push(t);
        }
    }
    Ok(PredictiveDraws { draw_index, points })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MissingInterval {
    /// 0-based cell position.
    pub row: usize,
    pub column: usize,
    pub lower: f64,
    pub median: f64,
    pub upper: f64,
}

/// Central `level` interval and median of every missing cell's imputed
/// draws (linearly interpolated empirical quantiles).
pub fn missing_value_intervals(samples: &PosteriorSamples, level: f64) -> Result<Vec<MissingInterval>> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("level must be in (0, 1), got {level}")));
    }
    if samples.is_empty() {
        return Err(Error::InsufficientData("no retained draws".into()));
    }
    let tail = (1.0 - level) / 2.0;
    let (m, n) = samples.missing.shape();
    let mut out = Vec::new();
    let mut buf = Vec::with_capacity(samples.len());
    for i in 0..m {
        for j in 0..n {
            if !samples.missing[(i, j)] {
                continue;
            }
            buf.clear();
            buf.extend(samples.imputed_data_samples.iter().map(|d| d[(i, j)]));
            buf.sort_by(f64::total_cmp);
            out.push(MissingInterval {
                row: i,
                column: j,
                lower: quantile_sorted(&buf, tail),
                median: quantile_sorted(&buf, 0.5),
                upper: quantile_sorted(&buf, 1.0 - tail),
            });
        }
    }
    Ok(out)
}

fn quantile_sorted(v: &[f64], p: f64) -> f64 {
    let h = (v.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

/// Share of data points inside the empirical `level` contour of one pair of
/// predictive variables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairCoverage {
    pub i: usize,
    pub j: usize,
    pub coverage: f64,
}

/// For every pair of variables, the fraction of `data` rows inside the
/// elliptical contour that holds a `level` share of the predictive points.
///
/// Contours are levels of the Mahalanobis distance under the predictive
/// sample mean and covariance of the pair; the threshold is the empirical
/// `level` quantile of the predictive points' own distances.
pub fn pairwise_contour_coverage(
    predictive: &DMatrix<f64>,
    data: &DMatrix<f64>,
    level: f64,
) -> Result<Vec<PairCoverage>> {
    let n = predictive.ncols();
    if data.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, found: data.ncols() });
    }
    if predictive.nrows() < 3 || data.nrows() == 0 {
        return Err(Error::InsufficientData("need at least 3 predictive points and 1 data row".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("level must be in (0, 1), got {level}")));
    }
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let pts = DMatrix::from_fn(predictive.nrows(), 2, |r, c| predictive[(r, if c == 0 { i } else { j })]);
            let mean = pts.row_mean().transpose();
            let k = pts.nrows() as f64;
            let mut cov = DMatrix::zeros(2, 2);
            for r in 0..pts.nrows() {
                let d = DVector::from_vec(vec![pts[(r, 0)] - mean[0], pts[(r, 1)] - mean[1]]);
                cov += &d * d.transpose();
            }
            cov /= k - 1.0;
            let l = cholesky_lower(&cov)?;
            let dist = |a: f64, b: f64| -> f64 {
                let w = l.solve_lower(&[a - mean[0], b - mean[1]]);
                w[0] * w[0] + w[1] * w[1]
            };
            let mut d: Vec<f64> = (0..pts.nrows()).map(|r| dist(pts[(r, 0)], pts[(r, 1)])).collect();
            d.sort_by(f64::total_cmp);
            let threshold = quantile_sorted(&d, level);
            let inside = (0..data.nrows()).filter(|&r| dist(data[(r, i)], data[(r, j)]) <= threshold).count();
            out.push(PairCoverage { i, j, coverage: inside as f64 / data.nrows() as f64 });
        }
    }
    Ok(out)
}
