//! Crude Monte Carlo, the reference estimator for FORM and subset simulation.

use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::prob::{std_normal_inv_cdf, RandomStream};
use crate::problem::ReliabilityProblem;

const Z_975: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq)]
pub struct McsResult {
    pub pf_hat: f64,
    pub n_samples: u64,
    pub n_failures: u64,
    pub std_error: f64,
    /// Normal-approximation 95% interval, clipped to [0, 1].
    pub ci95: (f64, f64),
    /// `-Φ⁻¹(pf_hat)`; `None` when `pf_hat` is 0 or 1.
    pub beta_hat: Option<f64>,
}

impl McsResult {
    pub fn from_counts(n_failures: u64, n_samples: u64) -> Self {
        let n = n_samples as f64;
        let p = n_failures as f64 / n;
        let se = (p * (1.0 - p) / n).sqrt();
        let beta_hat = std_normal_inv_cdf(p).ok().map(|z| -z);
        Self {
            pf_hat: p,
            n_samples,
            n_failures,
            std_error: se,
            ci95: ((p - Z_975 * se).max(0.0), (p + Z_975 * se).min(1.0)),
            beta_hat,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McsOptions {
    /// Samples per work item.
    pub block_size: u64,
    pub execution: Execution,
}

impl Default for McsOptions {
    fn default() -> Self {
        Self { block_size: 1 << 16, execution: Execution::default() }
    }
}

pub fn crude_mcs(problem: &ReliabilityProblem, n_samples: u64, seed: u64) -> Result<McsResult> {
    crude_mcs_with(problem, n_samples, seed, &McsOptions::default())
}

/// Sample `i` always uses draws `i·n .. (i+1)·n` of the stream for `seed`, so
/// the failure count is independent of block size and thread count.
pub fn crude_mcs_with(
    problem: &ReliabilityProblem,
    n_samples: u64,
    seed: u64,
    options: &McsOptions,
) -> Result<McsResult> {
    if n_samples == 0 {
        return Err(Error::InvalidArgument("n_samples must be at least 1".into()));
    }
    if options.block_size == 0 {
        return Err(Error::InvalidArgument("block_size must be at least 1".into()));
    }
    let n = problem.dim() as u64;
    let blocks = n_samples.div_ceil(options.block_size);
    let counts = map_indexed(blocks as usize, options.execution, |b| -> Result<u64> {
        let start = b as u64 * options.block_size;
        let end = (start + options.block_size).min(n_samples);
        let mut stream = RandomStream::new(seed);
        stream.seek(start * n);
        let mut u = vec![0.0; n as usize];
        let mut failures = 0;
        for i in start..end {
            stream.fill_standard_normal(&mut u);
            let x = problem.to_x(&u);
            let g = problem
                .limit_state()
                .eval_unchecked(&x)
                .map_err(|source| Error::SampleEvaluation { index: i, source })?;
            if g <= 0.0 {
                failures += 1;
            }
        }
        Ok(failures)
    });
    let mut total = 0;
    for c in counts {
        total += c?;
    }
    Ok(McsResult::from_counts(total, n_samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::CorrelationMatrix;

    fn circle(r: f64) -> ReliabilityProblem {
        let text = format!("{r:?} - sqrt(x1^2 + x2^2)");
        ReliabilityProblem::normal(&[0.0, 0.0], &[1.0, 1.0], CorrelationMatrix::identity(2), &text).unwrap()
    }

    #[test]
    fn result_invariants() {
        let r = crude_mcs(&circle(2.0), 100_000, 1).unwrap();
        assert_eq!(r.pf_hat, r.n_failures as f64 / r.n_samples as f64);
        assert_eq!(r.std_error, (r.pf_hat * (1.0 - r.pf_hat) / 1e5).sqrt());
        assert!(r.ci95.0 <= r.pf_hat && r.pf_hat <= r.ci95.1);
        let beta = r.beta_hat.unwrap();
        assert!((beta + std_normal_inv_cdf(r.pf_hat).unwrap()).abs() < 1e-15);
        // exp(-2) = 0.1353
        assert!((r.pf_hat - (-2.0f64).exp()).abs() < 4.0 * r.std_error);
    }

    #[test]
    fn always_failing() {
        let p = ReliabilityProblem::normal(&[0.0], &[1.0], CorrelationMatrix::identity(1), "-1").unwrap();
        let r = crude_mcs(&p, 1000, 0).unwrap();
        assert_eq!(r.pf_hat, 1.0);
        assert_eq!(r.beta_hat, None);
        assert_eq!(r.std_error, 0.0);
    }

    #[test]
    fn zero_samples_rejected() {
        assert!(crude_mcs(&circle(3.0), 0, 0).is_err());
    }

    #[test]
    fn evaluation_error_names_sample() {
        let p = ReliabilityProblem::normal(&[0.0], &[1.0], CorrelationMatrix::identity(1), "sqrt(x1)").unwrap();
        let opts = McsOptions { block_size: 7, execution: Execution::Parallel };
        let err = crude_mcs_with(&p, 1000, 3, &opts).unwrap_err();
        let Error::SampleEvaluation { index, .. } = err else { panic!("{err:?}") };
        // The first negative draw in sample order is reported.
        let mut s = RandomStream::new(3);
        let first = (0..1000u64).find(|_| s.standard_normal() < 0.0).unwrap();
        assert_eq!(index, first);
    }

    #[test]
    fn block_size_and_execution_do_not_change_count() {
        let p = circle(2.5);
        let single =
            crude_mcs_with(&p, 50_001, 9, &McsOptions { block_size: 50_001, execution: Execution::Sequential })
                .unwrap();
        for block_size in [1, 1000, 4096, 33_333] {
            for execution in [Execution::Sequential, Execution::Parallel] {
                let r = crude_mcs_with(&p, 50_001, 9, &McsOptions { block_size, execution }).unwrap();
                assert_eq!(r, single, "block {block_size} {execution:?}");
            }
        }
    }

    #[test]
    fn analytic_value_inside_ci_for_most_seeds() {
        let exact = (-4.5f64).exp();
        let hits = (0..20)
            .filter(|&s| {
                let r = crude_mcs(&circle(3.0), 200_000, 1000 + s).unwrap();
                r.ci95.0 <= exact && exact <= r.ci95.1
            })
            .count();
        assert!(hits >= 17, "{hits}/20");
    }
}
