use crate::error::{Error, Result};

use super::normal::{phi, std_normal_inv_cdf, std_normal_pdf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarginalKind {
    Normal,
    Lognormal,
}

/// Univariate marginal parameterized by the mean and standard deviation of
/// the physical variable.
///
/// For a lognormal marginal the parameters of the underlying normal,
/// `ln X ~ N(λ, ζ²)`, are derived from the physical mean and sd.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Marginal {
    kind: MarginalKind,
    mean: f64,
    sd: f64,
    // (λ, ζ) for lognormal, (μ, σ) for normal
    loc: f64,
    scale: f64,
}

impl Marginal {
    pub fn normal(mean: f64, sd: f64) -> Result<Self> {
        check_finite(mean, sd)?;
        Ok(Self { kind: MarginalKind::Normal, mean, sd, loc: mean, scale: sd })
    }

    pub fn lognormal(mean: f64, sd: f64) -> Result<Self> {
        check_finite(mean, sd)?;
        if mean <= 0.0 {
            return Err(Error::InvalidArgument(format!("lognormal marginal requires mean > 0, got {mean}")));
        }
        let zeta2 = (1.0 + (sd / mean).powi(2)).ln();
        let lambda = mean.ln() - 0.5 * zeta2;
        Ok(Self { kind: MarginalKind::Lognormal, mean, sd, loc: lambda, scale: zeta2.sqrt() })
    }

    pub fn new(kind: MarginalKind, mean: f64, sd: f64) -> Result<Self> {
        match kind {
            MarginalKind::Normal => Self::normal(mean, sd),
            MarginalKind::Lognormal => Self::lognormal(mean, sd),
        }
    }

    pub fn kind(&self) -> MarginalKind {
        self.kind
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn sd(&self) -> f64 {
        self.sd
    }

    /// Maps a physical value to its standard normal equivalent `Φ⁻¹(F(x))`.
    pub fn to_standard(&self, x: f64) -> Result<f64> {
        match self.kind {
            MarginalKind::Normal => Ok((x - self.loc) / self.scale),
            MarginalKind::Lognormal => {
                if x <= 0.0 {
                    return Err(Error::Domain(format!("lognormal variable must be positive, got {x}")));
                }
                Ok((x.ln() - self.loc) / self.scale)
            }
        }
    }

    /// Inverse of [`Marginal::to_standard`].
    #[inline]
    pub fn from_standard(&self, z: f64) -> f64 {
        match self.kind {
            MarginalKind::Normal => self.loc + self.scale * z,
            MarginalKind::Lognormal => (self.loc + self.scale * z).exp(),
        }
    }

    /// `dx/dz` of [`Marginal::from_standard`] at `z`.
    pub fn dx_dz(&self, z: f64) -> f64 {
        match self.kind {
            MarginalKind::Normal => self.scale,
            MarginalKind::Lognormal => self.scale * self.from_standard(z),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self.to_standard(x) {
            Ok(z) => phi(z),
            Err(_) => 0.0,
        }
    }

    pub fn inv_cdf(&self, p: f64) -> Result<f64> {
        Ok(self.from_standard(std_normal_inv_cdf(p)?))
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match self.kind {
            MarginalKind::Normal => std_normal_pdf((x - self.loc) / self.scale) / self.scale,
            MarginalKind::Lognormal => {
                if x <= 0.0 {
                    0.0
                } else {
                    std_normal_pdf((x.ln() - self.loc) / self.scale) / (self.scale * x)
                }
            }
        }
    }
}

fn check_finite(mean: f64, sd: f64) -> Result<()> {
    if !mean.is_finite() || !sd.is_finite() {
        return Err(Error::InvalidArgument("marginal parameters must be finite".into()));
    }
    if sd <= 0.0 {
        return Err(Error::InvalidArgument(format!("marginal sd must be > 0, got {sd}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(Marginal::normal(1.0, 0.0).is_err());
        assert!(Marginal::normal(1.0, -1.0).is_err());
        assert!(Marginal::lognormal(0.0, 1.0).is_err());
        assert!(Marginal::lognormal(-2.0, 1.0).is_err());
        assert!(Marginal::normal(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn lognormal_moments_are_physical() {
        let m = Marginal::lognormal(10.0, 2.0).unwrap();
        // Midpoint-rule integration of x f(x) and x² f(x).
        let (mut m1, mut m2) = (0.0, 0.0);
        let dx = 1e-3;
        let mut x = dx / 2.0;
        while x < 60.0 {
            let f = m.pdf(x);
            m1 += x * f * dx;
            m2 += x * x * f * dx;
            x += dx;
        }
        assert!((m1 - 10.0).abs() < 1e-6, "{m1}");
        assert!(((m2 - m1 * m1).sqrt() - 2.0).abs() < 1e-5);
    }

    #[test]
    fn cdf_inverse_round_trip() {
        for m in [Marginal::normal(7.0, 1.5).unwrap(), Marginal::lognormal(3.0, 1.2).unwrap()] {
            for i in 1..200 {
                let p = i as f64 / 200.0;
                let x = m.inv_cdf(p).unwrap();
                let back = m.inv_cdf(m.cdf(x)).unwrap();
                assert!((back - x).abs() <= 1e-10 * x.abs(), "{back} vs {x}");
                if i > 1 {
                    assert!(m.cdf(x) > m.cdf(m.inv_cdf((i - 1) as f64 / 200.0).unwrap()));
                }
            }
        }
    }

    #[test]
    fn lognormal_domain() {
        let m = Marginal::lognormal(3.0, 1.0).unwrap();
        assert!(matches!(m.to_standard(0.0), Err(Error::Domain(_))));
        assert_eq!(m.cdf(-1.0), 0.0);
    }
}
