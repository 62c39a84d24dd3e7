//! First-order reliability method.
//!
//! The design point is located with the Hasofer–Lind / Rackwitz–Fiessler
//! fixed point in standard space. Each step linearizes `g` at the current
//! iterate, takes the unit direction `α = -∇g_u/‖∇g_u‖` and moves to
//! `u = β·α` with `β = G/‖∇g_u‖ + uᵀα`. The X-space gradient is obtained by
//! finite differences and mapped to U-space through the chain rule
//! `∇g_u = Lᵀ·(∇g_x ∘ dx/dz)`.

use crate::error::{Error, Result};
use crate::limit_state::GradientSettings;
use crate::prob::{std_normal_cdf, std_normal_inv_cdf};
use crate::problem::ReliabilityProblem;

#[derive(Debug, Clone, PartialEq, Default)]
pub enum StartPoint {
    #[default]
    Means,
    Custom(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FormOptions {
    pub max_iter: usize,
    pub tol: f64,
    pub gradient: GradientSettings,
    pub start: StartPoint,
}

impl Default for FormOptions {
    fn default() -> Self {
        Self { max_iter: 100, tol: 1e-6, gradient: GradientSettings::default(), start: StartPoint::Means }
    }
}

/// State at the start of one HL-RF iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct FormIterate {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub g: f64,
    pub beta_new: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FormResult {
    pub beta: f64,
    pub pf: f64,
    /// Design point in physical space.
    pub x_star: Vec<f64>,
    /// Design point in uncorrelated standard space.
    pub u_star: Vec<f64>,
    /// Unit importance direction at the design point.
    pub alpha: Vec<f64>,
    /// Completed update steps; the step that detects convergence is not counted.
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<FormIterate>,
}

pub fn solve_form(problem: &ReliabilityProblem, options: &FormOptions) -> Result<FormResult> {
    if options.max_iter == 0 {
        return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
    }
    if !(options.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be > 0, got {}", options.tol)));
    }
    let n = problem.dim();
    let g = problem.limit_state();
    let factor = problem.correlation().factor();
    let mut x = match &options.start {
        StartPoint::Means => problem.mean_point(),
        StartPoint::Custom(x0) => {
            if x0.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: x0.len() });
            }
            x0.clone()
        }
    };

    let mut beta = f64::INFINITY;
    let mut iterations = 0;
    let mut history = Vec::new();
    let mut last_alpha = vec![0.0; n];
    let mut converged = false;
    let mut beta_at_exit = f64::NAN;

    while iterations < options.max_iter {
        let z: Vec<f64> = x.iter().zip(problem.marginals()).map(|(&xi, m)| m.to_standard(xi)).collect::<Result<_>>()?;
        let u = factor.solve_lower(&z);

        let big_g = g.evaluate(&x)?;
        let grad_x = g.gradient_at(&x, big_g, &options.gradient)?;
        let scaled: Vec<f64> =
            grad_x.iter().zip(problem.marginals().iter().zip(&z)).map(|(d, (m, &zi))| d * m.dx_dz(zi)).collect();
        let grad_u = factor.transpose_mul_vec(&scaled);
        let norm = grad_u.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm >= 1e-14) {
            return Err(Error::ZeroGradient { iteration: iterations });
        }
        let alpha: Vec<f64> = grad_u.iter().map(|v| -v / norm).collect();
        let grad_dot_alpha: f64 = grad_u.iter().zip(&alpha).map(|(a, b)| a * b).sum();
        let u_dot_alpha: f64 = u.iter().zip(&alpha).map(|(a, b)| a * b).sum();
        let beta_new = -big_g / grad_dot_alpha + u_dot_alpha;

        history.push(FormIterate { x: x.clone(), u: u.clone(), g: big_g, beta_new });
        last_alpha = alpha;

        let step_gap = last_alpha.iter().zip(&u).map(|(a, ui)| (beta_new * a - ui).powi(2)).sum::<f64>().sqrt();
        if (beta_new - beta).abs() < options.tol || step_gap < options.tol {
            converged = true;
            // The reported index belongs to the current iterate, which was
            // placed at β·α by the previous step (or is the start point).
            beta_at_exit = if beta.is_finite() { beta } else { beta_new };
            break;
        }

        beta = beta_new;
        let u_next: Vec<f64> = last_alpha.iter().map(|a| beta * a).collect();
        x = problem.to_x(&u_next);
        iterations += 1;
    }

    if !converged {
        beta_at_exit = beta;
    }
    let u_star = problem.to_u(&x)?;
    let pf = std_normal_cdf(-beta_at_exit)?;
    Ok(FormResult { beta: beta_at_exit, pf, x_star: x, u_star, alpha: last_alpha, iterations, converged, history })
}

/// Reliability index equivalent to a failure probability, `β = -Φ⁻¹(pf)`.
pub fn beta_from_pf(pf: f64) -> Result<f64> {
    Ok(-std_normal_inv_cdf(pf)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::limit_state::LimitStateExpr;
    use crate::prob::{CorrelationMatrix, Marginal};
    use proptest::prelude::*;

    fn rho(r: f64) -> CorrelationMatrix {
        CorrelationMatrix::from_rows(&[vec![1.0, r], vec![r, 1.0]]).unwrap()
    }

    fn golden(mu: [f64; 2]) -> ReliabilityProblem {
        ReliabilityProblem::normal(&mu, &[1.5, 2.5], rho(0.6), "x1^2 + x2^3 - 50").unwrap()
    }

    #[test]
    fn golden_case_one() {
        let r = solve_form(&golden([7.0, 10.0]), &FormOptions::default()).unwrap();
        assert!(r.converged);
        assert!((r.beta - 2.74).abs() < 0.005, "beta {}", r.beta);
        assert!((r.pf - 3.07e-3).abs() / 3.07e-3 < 0.02, "pf {}", r.pf);
        assert_eq!(r.iterations, 6);
    }

    #[test]
    fn golden_case_two() {
        let r = solve_form(&golden([8.0, 12.0]), &FormOptions::default()).unwrap();
        assert!(r.converged);
        assert!((r.beta - 3.56).abs() < 0.005, "beta {}", r.beta);
        assert!((r.pf - 1.83e-4).abs() / 1.83e-4 < 0.02, "pf {}", r.pf);
        assert_eq!(r.iterations, 7);
    }

    #[test]
    fn result_invariants_on_golden_cases() {
        for mu in [[7.0, 10.0], [8.0, 12.0]] {
            let p = golden(mu);
            let opts = FormOptions::default();
            let r = solve_form(&p, &opts).unwrap();
            assert!((r.pf - std_normal_cdf(-r.beta).unwrap()).abs() <= 1e-12);
            let un = r.u_star.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((un - r.beta.abs()).abs() <= 1e-6, "{un} vs {}", r.beta);
            let an = r.alpha.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((an - 1.0).abs() <= 1e-10);
            let g_mean = p.limit_state().evaluate(&p.mean_point()).unwrap();
            let g_star = p.limit_state().evaluate(&r.x_star).unwrap();
            assert!(g_star.abs() <= opts.tol * g_mean.abs().max(1.0), "g(x*) = {g_star}");
        }
    }

    #[test]
    fn linear_closed_form() {
        let p =
            ReliabilityProblem::normal(&[5.0, 3.0], &[1.0, 1.0], CorrelationMatrix::identity(2), "x1 - x2").unwrap();
        let r = solve_form(&p, &FormOptions::default()).unwrap();
        let beta = 2.0 / 2f64.sqrt();
        assert!((r.beta - beta).abs() < 1e-6);
        assert!((r.pf - 0.078_65).abs() < 1e-5, "{}", r.pf);
        assert!(r.converged);
    }

    #[test]
    fn zero_gradient() {
        let p = ReliabilityProblem::normal(&[1.0], &[1.0], CorrelationMatrix::identity(1), "0*x1 + 5").unwrap();
        assert_eq!(solve_form(&p, &FormOptions::default()), Err(Error::ZeroGradient { iteration: 0 }));
    }

    #[test]
    fn non_convergence_is_reported() {
        let opts = FormOptions { max_iter: 2, ..Default::default() };
        let r = solve_form(&golden([7.0, 10.0]), &opts).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 2);
        assert!(r.beta.is_finite());
    }

    #[test]
    fn option_validation() {
        let p = golden([7.0, 10.0]);
        assert!(solve_form(&p, &FormOptions { max_iter: 0, ..Default::default() }).is_err());
        assert!(solve_form(&p, &FormOptions { tol: 0.0, ..Default::default() }).is_err());
        let custom = FormOptions { start: StartPoint::Custom(vec![1.0]), ..Default::default() };
        assert!(matches!(solve_form(&p, &custom), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn custom_start_reaches_same_design_point() {
        let p = golden([7.0, 10.0]);
        let base = solve_form(&p, &FormOptions::default()).unwrap();
        let opts = FormOptions { start: StartPoint::Custom(vec![6.0, 7.0]), ..Default::default() };
        let r = solve_form(&p, &opts).unwrap();
        assert!((r.beta - base.beta).abs() < 1e-5);
    }

    #[test]
    fn beta_from_pf_examples() {
        assert_eq!(beta_from_pf(0.5).unwrap(), 0.0);
        assert!((beta_from_pf(2.87e-3).unwrap() - 2.76).abs() < 0.005);
        assert!((beta_from_pf(1.73e-4).unwrap() - 3.58).abs() < 0.005);
        assert!(beta_from_pf(0.0).is_err());
        assert!(beta_from_pf(1.0).is_err());
    }

    /// A common broken variant of the iteration: the direction is built from
    /// gradients divided by σ² and the update drops the `G` term. Because
    /// its standardized start is always the origin, it ignores the means
    /// entirely. The real solver must not.
    #[test]
    fn solver_depends_on_means() {
        let mk = |m1: f64| {
            ReliabilityProblem::normal(&[m1, 3.0], &[1.0, 1.0], CorrelationMatrix::identity(2), "x1^2 + x2^2 - 25")
                .unwrap()
        };
        let a = solve_form(&mk(5.0), &FormOptions::default()).unwrap();
        let b = solve_form(&mk(7.0), &FormOptions::default()).unwrap();
        assert!((a.beta - b.beta).abs() > 1.0, "{} vs {}", a.beta, b.beta);
        assert!(a.pf > 0.01 && b.pf < 0.01);
    }

    #[test]
    fn lognormal_marginals_are_supported() {
        // ln R - ln S ≤ 0 with lognormal R, S has an exact linear form in standard space.
        let r = Marginal::lognormal(10.0, 1.5).unwrap();
        let s = Marginal::lognormal(5.0, 1.0).unwrap();
        let g = LimitStateExpr::parse("log(x1) - log(x2)", 2).unwrap();
        let p = ReliabilityProblem::new(vec![r, s], CorrelationMatrix::identity(2), g).unwrap();
        let res = solve_form(&p, &FormOptions::default()).unwrap();
        let zr2 = (1.0f64 + 0.15f64.powi(2)).ln();
        let zs2 = (1.0f64 + 0.2f64.powi(2)).ln();
        let lam = (10f64.ln() - zr2 / 2.0) - (5f64.ln() - zs2 / 2.0);
        let exact = lam / (zr2 + zs2).sqrt();
        assert!((res.beta - exact).abs() < 1e-4, "{} vs {exact}", res.beta);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn linear_limit_states_match_closed_form(
            a in proptest::collection::vec(prop_oneof![-3.0f64..-0.2, 0.2f64..3.0], 3),
            mu in proptest::collection::vec(-2.0f64..2.0, 3),
            sd in proptest::collection::vec(0.3f64..2.0, 3),
            r01 in -0.5f64..0.5,
            r12 in -0.5f64..0.5,
            b in 3.0f64..15.0,
        ) {
            let corr = CorrelationMatrix::from_rows(&[
                vec![1.0, r01, 0.0],
                vec![r01, 1.0, r12],
                vec![0.0, r12, 1.0],
            ]);
            prop_assume!(corr.is_ok());
            let corr = corr.unwrap();
            let text = format!("{:?}*x1 + {:?}*x2 + {:?}*x3 + {:?}", a[0], a[1], a[2], b);
            let p = ReliabilityProblem::normal(&mu, &sd, corr.clone(), &text).unwrap();
            // Oracle: β = (aᵀμ + b) / sqrt(aᵀ·D·R·D·a), D = diag(σ).
            let mean_g: f64 = a.iter().zip(&mu).map(|(x, y)| x * y).sum::<f64>() + b;
            let mut var = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    var += a[i] * sd[i] * corr.matrix()[(i, j)] * sd[j] * a[j];
                }
            }
            let exact = mean_g / var.sqrt();
            let r = solve_form(&p, &FormOptions::default()).unwrap();
            prop_assert!(r.converged);
            prop_assert!((r.beta - exact).abs() < 1e-4, "{} vs {}", r.beta, exact);
        }

        #[test]
        fn scaling_g_leaves_result_unchanged(scale in prop_oneof![Just(0.5f64), Just(2.0), Just(8.0), Just(0.25)]) {
            let base = solve_form(&golden([7.0, 10.0]), &FormOptions::default()).unwrap();
            let text = format!("{scale:?} * (x1^2 + x2^3 - 50)");
            let p = ReliabilityProblem::normal(&[7.0, 10.0], &[1.5, 2.5], rho(0.6), &text).unwrap();
            let r = solve_form(&p, &FormOptions::default()).unwrap();
            prop_assert_eq!(r.iterations, base.iterations);
            prop_assert!((r.beta - base.beta).abs() < 1e-9);
            for k in 0..2 {
                prop_assert!((r.x_star[k] - base.x_star[k]).abs() < 1e-8);
                prop_assert!((r.u_star[k] - base.u_star[k]).abs() < 1e-8);
            }
        }

        #[test]
        fn design_point_optimality(mu2 in 9.0f64..13.0) {
            let p = ReliabilityProblem::normal(&[7.0, mu2], &[1.5, 2.5], rho(0.6), "x1^2 + x2^3 - 50").unwrap();
            let r = solve_form(&p, &FormOptions::default()).unwrap();
            prop_assert!(r.converged);
            // Central differences of u -> g(T(u)) at the reported point.
            let h = 1e-6;
            let grad: Vec<f64> = (0..2)
                .map(|k| {
                    let mut up = r.u_star.clone();
                    let mut dn = r.u_star.clone();
                    up[k] += h;
                    dn[k] -= h;
                    let gp = p.limit_state().evaluate(&p.to_x(&up)).unwrap();
                    let gm = p.limit_state().evaluate(&p.to_x(&dn)).unwrap();
                    (gp - gm) / (2.0 * h)
                })
                .collect();
            let gn = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
            let cos: f64 = -grad.iter().zip(&r.alpha).map(|(a, b)| a * b).sum::<f64>() / gn;
            prop_assert!(cos.clamp(-1.0, 1.0).acos() < 1e-4, "angle {}", cos.acos());
        }
    }
}
