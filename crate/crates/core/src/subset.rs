//! Subset simulation.
//!
//! The failure probability is written as a product of conditional
//! probabilities over nested events `{g ≤ y₁} ⊃ {g ≤ y₂} ⊃ … ⊃ {g ≤ 0}`.
//! Each threshold `yᵢ` is the `⌈p0·N⌉`-th smallest limit-state value of the
//! current population, and the next population is grown from the samples
//! below it by conditional MCMC.
//!
//! Two kernels are available:
//!
//! * [`Kernel::ListingJointWalk`] works in physical space. One chain is
//!   threaded through the population: the first `Ns` slots hold the seeds in
//!   ascending order of `g`, and slot `i` is a correlated Gaussian step from
//!   slot `i - 1`, accepted with the joint input-density ratio when it stays
//!   below the threshold.
//! * [`Kernel::ComponentwiseMmh`] is the modified Metropolis–Hastings
//!   sampler in independent standard space: `Ns` chains of length `N/Ns`,
//!   componentwise proposals accepted with 1-D standard normal density
//!   ratios, then the whole candidate rejected if it leaves the level.

use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::limit_state::EvalError;
use crate::prob::normal::std_normal_pdf;
use crate::prob::RandomStream;
use crate::problem::ReliabilityProblem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Kernel {
    #[default]
    ListingJointWalk,
    ComponentwiseMmh,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsetConfig {
    pub n_samples: usize,
    pub p0: f64,
    pub max_levels: usize,
    pub proposal_std: f64,
    pub kernel: Kernel,
    pub seed: u64,
    /// Keep every level's population for plotting/export.
    pub record_levels: bool,
}

impl Default for SubsetConfig {
    fn default() -> Self {
        Self {
            n_samples: 20_000,
            p0: 0.1,
            max_levels: 20,
            proposal_std: 0.1,
            kernel: Kernel::ListingJointWalk,
            seed: 0,
            record_levels: false,
        }
    }
}

impl SubsetConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p0 > 0.0 && self.p0 < 1.0) {
            return Err(Error::InvalidArgument(format!("p0 must be in (0, 1), got {}", self.p0)));
        }
        if (self.n_samples as f64) * self.p0 < 10.0 {
            return Err(Error::InvalidArgument(format!(
                "n_samples * p0 must be at least 10, got {}",
                self.n_samples as f64 * self.p0
            )));
        }
        if !(self.proposal_std > 0.0) || !self.proposal_std.is_finite() {
            return Err(Error::InvalidArgument(format!("proposal_std must be > 0, got {}", self.proposal_std)));
        }
        if self.max_levels == 0 {
            return Err(Error::InvalidArgument("max_levels must be at least 1".into()));
        }
        Ok(())
    }

    /// Number of seeds kept per level, `⌈p0·N⌉`.
    pub fn n_seeds(&self) -> usize {
        ((self.p0 * self.n_samples as f64).ceil() as usize).clamp(1, self.n_samples)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubsetStatus {
    Converged,
    /// `max_levels` used up before a threshold reached 0; `pf` is the upper
    /// bound `p0^max_levels`.
    Truncated,
}

/// Samples of one level, row-major `N × n`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSamples {
    pub level: usize,
    pub dim: usize,
    pub x: Vec<f64>,
    pub g: Vec<f64>,
}

impl LevelSamples {
    pub fn len(&self) -> usize {
        self.g.len()
    }

    pub fn is_empty(&self) -> bool {
        self.g.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsetResult {
    pub pf: f64,
    pub levels_used: usize,
    pub thresholds: Vec<f64>,
    pub conditional_probs: Vec<f64>,
    pub acceptance_rate_per_level: Vec<f64>,
    pub status: SubsetStatus,
    pub final_level_samples: LevelSamples,
    /// Populations of every level when `record_levels` is set (level 0 is
    /// the direct Monte Carlo population).
    pub level_samples: Vec<LevelSamples>,
}

/// Outcome of one MCMC transition.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub point: Vec<f64>,
    pub g: f64,
    pub accepted: bool,
}

struct Population {
    /// Standard-space coordinates (MMH only).
    u: Vec<f64>,
    x: Vec<f64>,
    g: Vec<f64>,
}

pub fn run_subset(problem: &ReliabilityProblem, config: &SubsetConfig) -> Result<SubsetResult> {
    config.validate()?;
    let n = problem.dim();
    let big_n = config.n_samples;
    let ns = config.n_seeds();
    let g = problem.limit_state();
    let mut stream = RandomStream::new(config.seed);

    let mut pop = {
        let mut u = vec![0.0; big_n * n];
        stream.fill_standard_normal(&mut u);
        let mut x = Vec::with_capacity(big_n * n);
        let mut gv = Vec::with_capacity(big_n);
        for i in 0..big_n {
            let xi = problem.to_x(&u[i * n..(i + 1) * n]);
            gv.push(eval_at(problem, &xi, i as u64)?);
            x.extend_from_slice(&xi);
        }
        Population { u, x, g: gv }
    };

    let mut level_samples = Vec::new();
    if config.record_levels {
        level_samples.push(LevelSamples { level: 0, dim: n, x: pop.x.clone(), g: pop.g.clone() });
    }

    let mut thresholds = Vec::new();
    let mut conditional_probs = Vec::new();
    let mut acceptance = Vec::new();
    let mut status = SubsetStatus::Truncated;
    let mut pf = config.p0.powi(config.max_levels as i32);
    let mut levels_used = config.max_levels;

    for level in 1..=config.max_levels {
        let mut order: Vec<usize> = (0..big_n).collect();
        order.sort_by(|&a, &b| pop.g[a].total_cmp(&pop.g[b]));
        let threshold = pop.g[order[ns - 1]];
        thresholds.push(threshold);

        if level == 1 && threshold > 0.0 && pop.g.iter().all(|&v| v == pop.g[0]) {
            return Err(Error::DegenerateProblem(format!("all {big_n} limit-state values equal {threshold}")));
        }

        if threshold <= 0.0 {
            let failures = pop.g.iter().filter(|&&v| v <= 0.0).count();
            let frac = failures as f64 / big_n as f64;
            conditional_probs.push(frac);
            pf = config.p0.powi(level as i32 - 1) * frac;
            levels_used = level;
            status = SubsetStatus::Converged;
            break;
        }
        conditional_probs.push(ns as f64 / big_n as f64);
        if level == config.max_levels {
            break;
        }

        let seeds = &order[..ns];
        let (next, rate) = match config.kernel {
            Kernel::ListingJointWalk => repopulate_joint_walk(problem, &pop, seeds, threshold, config, &mut stream)?,
            Kernel::ComponentwiseMmh => repopulate_mmh(problem, &pop, seeds, threshold, config, &mut stream)?,
        };
        pop = next;
        acceptance.push(rate);
        if config.record_levels {
            level_samples.push(LevelSamples { level, dim: n, x: pop.x.clone(), g: pop.g.clone() });
        }
    }
    let _ = g;

    Ok(SubsetResult {
        pf,
        levels_used,
        thresholds,
        conditional_probs,
        acceptance_rate_per_level: acceptance,
        status,
        final_level_samples: LevelSamples { level: levels_used - 1, dim: n, x: pop.x, g: pop.g },
        level_samples,
    })
}

/// Independent repetitions with seeds `config.seed + k`, returned in seed order.
pub fn run_subset_batch(
    problem: &ReliabilityProblem,
    config: &SubsetConfig,
    runs: usize,
    exec: Execution,
) -> Vec<Result<SubsetResult>> {
    map_indexed(runs, exec, |k| {
        let cfg = SubsetConfig { seed: config.seed.wrapping_add(k as u64), ..config.clone() };
        run_subset(problem, &cfg)
    })
}

fn eval_at(problem: &ReliabilityProblem, x: &[f64], index: u64) -> Result<f64> {
    problem.limit_state().eval_unchecked(x).map_err(|source| Error::SampleEvaluation { index, source })
}

fn repopulate_joint_walk(
    problem: &ReliabilityProblem,
    pop: &Population,
    seeds: &[usize],
    threshold: f64,
    config: &SubsetConfig,
    stream: &mut RandomStream,
) -> Result<(Population, f64)> {
    let n = problem.dim();
    let big_n = config.n_samples;
    let mut x = Vec::with_capacity(big_n * n);
    let mut g = Vec::with_capacity(big_n);
    for &s in seeds {
        x.extend_from_slice(&pop.x[s * n..(s + 1) * n]);
        g.push(pop.g[s]);
    }
    let mut accepted = 0usize;
    let mut current = x[(seeds.len() - 1) * n..].to_vec();
    let mut current_g = *g.last().expect("at least one seed");
    let mut current_lp = problem.log_density(&current);
    for _ in seeds.len()..big_n {
        let step =
            joint_walk_transition(problem, &current, current_g, current_lp, config.proposal_std, threshold, stream)?;
        if step.0.accepted {
            accepted += 1;
            current = step.0.point;
            current_g = step.0.g;
            current_lp = step.1;
        }
        x.extend_from_slice(&current);
        g.push(current_g);
    }
    let steps = (big_n - seeds.len()).max(1);
    Ok((Population { u: Vec::new(), x, g }, accepted as f64 / steps as f64))
}

/// One transition of the joint random walk in physical space.
///
/// The candidate is `current + proposal_std · L·z` with `L` the Cholesky
/// factor of the input correlation. It is accepted with probability
/// `min{1, f_X(candidate)/f_X(current)}` when `g(candidate) ≤ threshold`
/// and rejected otherwise. Always consumes `n + 1` draws.
pub fn joint_walk_step(
    current: &[f64],
    current_g: f64,
    proposal_std: f64,
    threshold: f64,
    problem: &ReliabilityProblem,
    stream: &mut RandomStream,
) -> Result<Step> {
    if current.len() != problem.dim() {
        return Err(Error::DimensionMismatch { expected: problem.dim(), found: current.len() });
    }
    let lp = problem.log_density(current);
    Ok(joint_walk_transition(problem, current, current_g, lp, proposal_std, threshold, stream)?.0)
}

fn joint_walk_transition(
    problem: &ReliabilityProblem,
    current: &[f64],
    current_g: f64,
    current_lp: f64,
    proposal_std: f64,
    threshold: f64,
    stream: &mut RandomStream,
) -> Result<(Step, f64)> {
    let n = current.len();
    let mut z = vec![0.0; n];
    stream.fill_standard_normal(&mut z);
    let step = problem.correlation().factor().mul_vec(&z);
    let proposal: Vec<f64> = current.iter().zip(&step).map(|(c, s)| c + proposal_std * s).collect();
    let coin = stream.uniform();

    let lp = problem.log_density(&proposal);
    let mut alpha = 0.0;
    let mut g_prop = f64::NAN;
    if lp > f64::NEG_INFINITY {
        g_prop = problem
            .limit_state()
            .eval_unchecked(&proposal)
            .map_err(|source| Error::SampleEvaluation { index: 0, source })?;
        if g_prop <= threshold {
            alpha = (lp - current_lp).exp().min(1.0);
        }
    }
    if coin < alpha {
        Ok((Step { point: proposal, g: g_prop, accepted: true }, lp))
    } else {
        Ok((Step { point: current.to_vec(), g: current_g, accepted: false }, current_lp))
    }
}

fn repopulate_mmh(
    problem: &ReliabilityProblem,
    pop: &Population,
    seeds: &[usize],
    threshold: f64,
    config: &SubsetConfig,
    stream: &mut RandomStream,
) -> Result<(Population, f64)> {
    let n = problem.dim();
    let big_n = config.n_samples;
    let ns = seeds.len();
    let sigma = vec![config.proposal_std; n];
    let base = big_n / ns;
    let extra = big_n % ns;

    let mut u = Vec::with_capacity(big_n * n);
    let mut x = Vec::with_capacity(big_n * n);
    let mut g = Vec::with_capacity(big_n);
    let mut accepted = 0usize;
    let mut steps = 0usize;
    let level_fn = |v: &[f64]| -> Result<f64, EvalError> { problem.limit_state().eval_unchecked(&problem.to_x(v)) };

    for (k, &s) in seeds.iter().enumerate() {
        let len = base + usize::from(k < extra);
        let mut cur_u = pop.u[s * n..(s + 1) * n].to_vec();
        let mut cur_g = pop.g[s];
        for step_idx in 0..len {
            if step_idx > 0 {
                let step = mmh_componentwise_step(&cur_u, cur_g, &sigma, threshold, &level_fn, stream)
                    .map_err(|source| Error::SampleEvaluation { index: g.len() as u64, source })?;
                steps += 1;
                if step.accepted {
                    accepted += 1;
                    cur_u = step.point;
                    cur_g = step.g;
                }
            }
            u.extend_from_slice(&cur_u);
            x.extend_from_slice(&problem.to_x(&cur_u));
            g.push(cur_g);
        }
    }
    Ok((Population { u, x, g }, accepted as f64 / steps.max(1) as f64))
}

/// One modified Metropolis–Hastings transition in independent standard space.
///
/// Each component proposes `ξⱼ + σⱼ·Zⱼ` and keeps it with probability
/// `min{1, φ(candidate)/φ(current)}`; the assembled candidate replaces the
/// current state only if `level_fn(candidate) ≤ threshold`. Always consumes
/// `2n` draws.
pub fn mmh_componentwise_step<F>(
    current: &[f64],
    current_g: f64,
    sigma: &[f64],
    threshold: f64,
    level_fn: &F,
    stream: &mut RandomStream,
) -> Result<Step, EvalError>
where
    F: Fn(&[f64]) -> Result<f64, EvalError>,
{
    let mut candidate = current.to_vec();
    let mut moved = false;
    for (j, c) in candidate.iter_mut().enumerate() {
        let xi = current[j] + sigma[j] * stream.standard_normal();
        let ratio = std_normal_pdf(xi) / std_normal_pdf(current[j]);
        if stream.uniform() < ratio.min(1.0) && xi != current[j] {
            *c = xi;
            moved = true;
        }
    }
    if moved {
        let gc = level_fn(&candidate)?;
        if gc <= threshold {
            return Ok(Step { point: candidate, g: gc, accepted: true });
        }
    }
    Ok(Step { point: current.to_vec(), g: current_g, accepted: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::CorrelationMatrix;

    fn circle(r: f64) -> ReliabilityProblem {
        ReliabilityProblem::normal(
            &[0.0, 0.0],
            &[1.0, 1.0],
            CorrelationMatrix::identity(2),
            &format!("{r:?} - sqrt(x1^2 + x2^2)"),
        )
        .unwrap()
    }

    #[test]
    fn config_validation() {
        let bad = [
            SubsetConfig { p0: 0.0, ..Default::default() },
            SubsetConfig { p0: 1.0, ..Default::default() },
            SubsetConfig { n_samples: 50, ..Default::default() },
            SubsetConfig { proposal_std: 0.0, ..Default::default() },
            SubsetConfig { max_levels: 0, ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
        assert_eq!(SubsetConfig::default().n_seeds(), 2000);
    }

    #[test]
    fn always_failing_terminates_at_level_one() {
        let p = ReliabilityProblem::normal(&[0.0, 0.0], &[1.0, 1.0], CorrelationMatrix::identity(2), "-1").unwrap();
        let r = run_subset(&p, &SubsetConfig::default()).unwrap();
        assert_eq!(r.pf, 1.0);
        assert_eq!(r.levels_used, 1);
        assert_eq!(r.status, SubsetStatus::Converged);
    }

    #[test]
    fn constant_safe_limit_state_is_degenerate() {
        let p = ReliabilityProblem::normal(&[0.0], &[1.0], CorrelationMatrix::identity(1), "3 + 0*x1").unwrap();
        assert!(matches!(run_subset(&p, &SubsetConfig::default()), Err(Error::DegenerateProblem(_))));
    }

    #[test]
    fn truncated_run_reports_upper_bound() {
        let cfg = SubsetConfig { max_levels: 2, n_samples: 2000, ..Default::default() };
        let r = run_subset(&circle(5.0), &cfg).unwrap();
        assert_eq!(r.status, SubsetStatus::Truncated);
        assert!((r.pf - 0.01).abs() < 1e-15);
        assert_eq!(r.levels_used, 2);
        assert!(r.thresholds.iter().all(|&t| t > 0.0));
    }

    #[test]
    fn circle_single_run_within_factor_two() {
        let exact = (-8.0f64).exp();
        for kernel in [Kernel::ListingJointWalk, Kernel::ComponentwiseMmh] {
            let proposal_std = if kernel == Kernel::ComponentwiseMmh { 1.0 } else { 0.1 };
            let cfg = SubsetConfig { seed: 3, kernel, proposal_std, ..Default::default() };
            let r = run_subset(&circle(4.0), &cfg).unwrap();
            assert_eq!(r.status, SubsetStatus::Converged);
            let ratio = r.pf / exact;
            assert!((0.5..=2.0).contains(&ratio), "{kernel:?}: pf {} ratio {ratio}", r.pf);
        }
    }

    #[test]
    fn result_structure() {
        for kernel in [Kernel::ListingJointWalk, Kernel::ComponentwiseMmh] {
            let cfg = SubsetConfig { seed: 11, kernel, proposal_std: 0.8, record_levels: true, ..Default::default() };
            let r = run_subset(&circle(4.0), &cfg).unwrap();
            let m = r.levels_used;
            assert_eq!(r.thresholds.len(), m);
            assert_eq!(r.conditional_probs.len(), m);
            assert!(r.thresholds.windows(2).all(|w| w[1] < w[0]), "{:?}", r.thresholds);
            assert!(*r.thresholds.last().unwrap() <= 0.0);
            for cp in &r.conditional_probs[..m - 1] {
                assert_eq!(*cp, 0.1);
            }
            let expected = cfg.p0.powi(m as i32 - 1) * r.conditional_probs[m - 1];
            assert_eq!(r.pf, expected);
            assert!((0.0..=1.0).contains(&r.pf));
            // Every conditional sample respects the threshold it was grown under.
            assert_eq!(r.level_samples.len(), m);
            for lv in &r.level_samples[1..] {
                let y = r.thresholds[lv.level - 1];
                assert!(lv.g.iter().all(|&v| v <= y));
                for i in 0..lv.len() {
                    let gx = circle(4.0).limit_state().evaluate(lv.point(i)).unwrap();
                    assert_eq!(gx, lv.g[i]);
                }
            }
            assert!(r.acceptance_rate_per_level.iter().all(|a| (0.0..=1.0).contains(a)));
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let cfg = SubsetConfig { seed: 99, n_samples: 5000, ..Default::default() };
        let a = run_subset(&circle(3.5), &cfg).unwrap();
        let b = run_subset(&circle(3.5), &cfg).unwrap();
        assert_eq!(a, b);
        let batch = run_subset_batch(&circle(3.5), &SubsetConfig { seed: 98, ..cfg.clone() }, 3, Execution::Parallel);
        assert_eq!(batch[1].as_ref().unwrap(), &a);
        let seq = run_subset_batch(&circle(3.5), &SubsetConfig { seed: 98, ..cfg }, 3, Execution::Sequential);
        assert_eq!(batch, seq);
    }

    #[test]
    fn mmh_zero_step_returns_current() {
        let mut s = RandomStream::new(1);
        let f = |v: &[f64]| -> Result<f64, EvalError> { Ok(v[0]) };
        let step = mmh_componentwise_step(&[0.3, -0.2], 0.3, &[0.0, 0.0], 10.0, &f, &mut s).unwrap();
        assert_eq!(step.point, vec![0.3, -0.2]);
        assert!(!step.accepted);
    }

    #[test]
    fn mmh_rejects_outside_level() {
        let mut s = RandomStream::new(2);
        // Every move increases the level function beyond the threshold.
        let f = |v: &[f64]| -> Result<f64, EvalError> { Ok(1.0 + v[0].abs()) };
        for _ in 0..100 {
            let step = mmh_componentwise_step(&[0.0], 1.0, &[1.0], 1.0, &f, &mut s).unwrap();
            assert_eq!(step.point, vec![0.0]);
        }
    }

    #[test]
    fn mmh_stationary_at_infinite_threshold() {
        let mut s = RandomStream::new(5);
        let f = |_: &[f64]| -> Result<f64, EvalError> { Ok(0.0) };
        let mut cur = vec![0.0];
        let (mut s1, mut s2) = (0.0, 0.0);
        let steps = 100_000;
        for _ in 0..steps {
            cur = mmh_componentwise_step(&cur, 0.0, &[2.4], f64::INFINITY, &f, &mut s).unwrap().point;
            s1 += cur[0];
            s2 += cur[0] * cur[0];
        }
        let mean = s1 / steps as f64;
        let var = s2 / steps as f64 - mean * mean;
        assert!((var - 1.0).abs() <= 0.02, "var {var}");
    }

    #[test]
    fn joint_walk_stationary_at_infinite_threshold() {
        let p = ReliabilityProblem::normal(&[0.0], &[1.0], CorrelationMatrix::identity(1), "x1").unwrap();
        let mut s = RandomStream::new(6);
        let mut cur = vec![0.0];
        let (mut s1, mut s2) = (0.0, 0.0);
        let steps = 100_000;
        for _ in 0..steps {
            let g = cur[0];
            cur = joint_walk_step(&cur, g, 2.4, f64::INFINITY, &p, &mut s).unwrap().point;
            s1 += cur[0];
            s2 += cur[0] * cur[0];
        }
        let mean = s1 / steps as f64;
        let var = s2 / steps as f64 - mean * mean;
        assert!((var - 1.0).abs() <= 0.02, "var {var}");
    }

    #[test]
    fn joint_walk_rejects_outside_level() {
        let p = circle(4.0);
        let mut s = RandomStream::new(8);
        // At the origin g = 4; a threshold of 0 excludes the neighbourhood.
        for _ in 0..100 {
            let step = joint_walk_step(&[0.0, 0.0], 4.0, 0.1, 0.0, &p, &mut s).unwrap();
            assert!(!step.accepted);
            assert_eq!(step.point, vec![0.0, 0.0]);
        }
    }
}
