use crate::error::{Error, Result};
use crate::limit_state::LimitStateExpr;
use crate::prob::transform::u_to_x_unchecked;
use crate::prob::{x_to_u, CorrelationMatrix, Marginal};

/// Marginals, their correlation and a limit state: the common input to
/// FORM, subset simulation and crude Monte Carlo.
#[derive(Debug, Clone)]
pub struct ReliabilityProblem {
    marginals: Vec<Marginal>,
    correlation: CorrelationMatrix,
    limit_state: LimitStateExpr,
}

impl ReliabilityProblem {
    pub fn new(marginals: Vec<Marginal>, correlation: CorrelationMatrix, limit_state: LimitStateExpr) -> Result<Self> {
        let n = marginals.len();
        if n == 0 {
            return Err(Error::InvalidArgument("a problem needs at least one variable".into()));
        }
        if correlation.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, found: correlation.dim() });
        }
        if limit_state.arity() != n {
            return Err(Error::DimensionMismatch { expected: n, found: limit_state.arity() });
        }
        Ok(Self { marginals, correlation, limit_state })
    }

    /// Convenience constructor: independent or correlated normals and a
    /// limit-state expression in `x1..xn`.
    pub fn normal(means: &[f64], sds: &[f64], correlation: CorrelationMatrix, expression: &str) -> Result<Self> {
        if means.len() != sds.len() {
            return Err(Error::DimensionMismatch { expected: means.len(), found: sds.len() });
        }
        let marginals = means.iter().zip(sds).map(|(&m, &s)| Marginal::normal(m, s)).collect::<Result<Vec<_>>>()?;
        let g = LimitStateExpr::parse(expression, means.len())?;
        Self::new(marginals, correlation, g)
    }

    pub fn dim(&self) -> usize {
        self.marginals.len()
    }

    pub fn marginals(&self) -> &[Marginal] {
        &self.marginals
    }

    pub fn correlation(&self) -> &CorrelationMatrix {
        &self.correlation
    }

    pub fn limit_state(&self) -> &LimitStateExpr {
        &self.limit_state
    }

    pub fn mean_point(&self) -> Vec<f64> {
        self.marginals.iter().map(Marginal::mean).collect()
    }

    pub fn to_u(&self, x: &[f64]) -> Result<Vec<f64>> {
        x_to_u(x, &self.marginals, self.correlation.factor())
    }

    /// Physical point for a standard-space point; `u` must have `dim()` entries.
    #[inline]
    pub fn to_x(&self, u: &[f64]) -> Vec<f64> {
        u_to_x_unchecked(u, &self.marginals, self.correlation.factor())
    }

    /// Log joint density of the inputs at a physical point (Gaussian copula
    /// over the marginals). Returns `-∞` outside the support.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        let mut z = Vec::with_capacity(x.len());
        let mut log_jac = 0.0;
        for (&xi, m) in x.iter().zip(&self.marginals) {
            let Ok(zi) = m.to_standard(xi) else {
                return f64::NEG_INFINITY;
            };
            if m.kind() == crate::prob::MarginalKind::Lognormal {
                // f(x)/φ(z) = 1/(ζ·x)
                log_jac -= (m.dx_dz(zi)).ln();
            } else {
                log_jac -= m.sd().ln();
            }
            z.push(zi);
        }
        let w = self.correlation.factor().solve_lower(&z);
        let quad: f64 = w.iter().map(|v| v * v).sum();
        -(x.len() as f64) * crate::prob::normal::LN_SQRT_2PI - 0.5 * self.correlation.factor().log_det() - 0.5 * quad
            + log_jac
    }
}
