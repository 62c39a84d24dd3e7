//! Mapping between physical space X and independent standard normal space U.
//!
//! Each variable is first standardized through its marginal, `zᵢ = Φ⁻¹(Fᵢ(xᵢ))`,
//! then decorrelated with the Cholesky factor of the correlation matrix,
//! `u = L⁻¹·z`. The correlation is applied to the standardized variables
//! directly (no Nataf distortion correction for non-normal marginals).

use crate::error::{Error, Result};

use super::linalg::LowerTriangularFactor;
use super::marginal::Marginal;

pub fn x_to_u(x: &[f64], marginals: &[Marginal], corr_factor: &LowerTriangularFactor) -> Result<Vec<f64>> {
    check_dims(x.len(), marginals, corr_factor)?;
    let z = x.iter().zip(marginals).map(|(&xi, m)| m.to_standard(xi)).collect::<Result<Vec<_>>>()?;
    Ok(corr_factor.solve_lower(&z))
}

pub fn u_to_x(u: &[f64], marginals: &[Marginal], corr_factor: &LowerTriangularFactor) -> Result<Vec<f64>> {
    check_dims(u.len(), marginals, corr_factor)?;
    Ok(u_to_x_unchecked(u, marginals, corr_factor))
}

#[inline]
pub(crate) fn u_to_x_unchecked(u: &[f64], marginals: &[Marginal], corr_factor: &LowerTriangularFactor) -> Vec<f64> {
    let mut z = corr_factor.mul_vec(u);
    for (zi, m) in z.iter_mut().zip(marginals) {
        *zi = m.from_standard(*zi);
    }
    z
}

fn check_dims(len: usize, marginals: &[Marginal], factor: &LowerTriangularFactor) -> Result<()> {
    if marginals.len() != len {
        return Err(Error::DimensionMismatch { expected: marginals.len(), found: len });
    }
    if factor.dim() != len {
        return Err(Error::DimensionMismatch { expected: factor.dim(), found: len });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::{cholesky_lower, CorrelationMatrix, RandomStream};
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn normals() -> Vec<Marginal> {
        vec![Marginal::normal(7.0, 1.5).unwrap(), Marginal::normal(10.0, 2.5).unwrap()]
    }

    #[test]
    fn mean_maps_to_origin() {
        let c = CorrelationMatrix::from_rows(&[vec![1.0, 0.6], vec![0.6, 1.0]]).unwrap();
        let u = x_to_u(&[7.0, 10.0], &normals(), c.factor()).unwrap();
        assert_eq!(u, vec![0.0, 0.0]);
        assert_eq!(u_to_x(&[0.0, 0.0], &normals(), c.factor()).unwrap(), vec![7.0, 10.0]);
    }

    #[test]
    fn uncorrelated_standardization() {
        let c = CorrelationMatrix::identity(2);
        let u = x_to_u(&[8.5, 12.5], &normals(), c.factor()).unwrap();
        assert!((u[0] - 1.0).abs() < 1e-15 && (u[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn correlated_forward_substitution() {
        let c = CorrelationMatrix::from_rows(&[vec![1.0, 0.6], vec![0.6, 1.0]]).unwrap();
        let u = x_to_u(&[8.5, 10.0], &normals(), c.factor()).unwrap();
        assert!((u[0] - 1.0).abs() < 1e-14 && (u[1] + 0.75).abs() < 1e-14, "{u:?}");
        let x = u_to_x(&[1.0, -0.75], &normals(), c.factor()).unwrap();
        assert!((x[0] - 8.5).abs() < 1e-14 && (x[1] - 10.0).abs() < 1e-14);
    }

    #[test]
    fn lognormal_nonpositive_is_domain_error() {
        let m = vec![Marginal::lognormal(5.0, 1.0).unwrap()];
        let c = CorrelationMatrix::identity(1);
        assert!(matches!(x_to_u(&[0.0], &m, c.factor()), Err(Error::Domain(_))));
    }

    #[test]
    fn dimension_mismatch() {
        let c = CorrelationMatrix::identity(2);
        assert!(matches!(u_to_x(&[0.0], &normals(), c.factor()), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn round_trip_hundred_points() {
        let c = CorrelationMatrix::from_rows(&[vec![1.0, 0.6], vec![0.6, 1.0]]).unwrap();
        let mut s = RandomStream::new(99);
        for _ in 0..100 {
            let x = [7.0 + 3.0 * s.standard_normal(), 10.0 + 5.0 * s.standard_normal()];
            let back = u_to_x(&x_to_u(&x, &normals(), c.factor()).unwrap(), &normals(), c.factor()).unwrap();
            for k in 0..2 {
                assert!((back[k] - x[k]).abs() <= 1e-10);
            }
        }
    }

    proptest! {
        #[test]
        fn round_trip_random_correlation(seed in any::<u64>(), n in 2usize..6) {
            let mut s = RandomStream::new(seed);
            // A random correlation matrix from normalized random Gram matrices.
            let a = DMatrix::from_fn(n, n + 2, |_, _| s.standard_normal());
            let g = &a * a.transpose();
            let d: Vec<f64> = (0..n).map(|i| g[(i, i)].sqrt()).collect();
            let mut r = DMatrix::from_fn(n, n, |i, j| g[(i, j)] / (d[i] * d[j]));
            for i in 0..n { r[(i, i)] = 1.0; }
            prop_assume!(cholesky_lower(&r).is_ok());
            let corr = CorrelationMatrix::new(r).unwrap();
            let marginals: Vec<Marginal> = (0..n)
                .map(|i| if i % 2 == 0 {
                    Marginal::normal(i as f64, 1.0 + i as f64).unwrap()
                } else {
                    Marginal::lognormal(2.0 + i as f64, 0.5).unwrap()
                })
                .collect();
            let u: Vec<f64> = (0..n).map(|_| s.standard_normal()).collect();
            let x = u_to_x(&u, &marginals, corr.factor()).unwrap();
            let back = u_to_x(&x_to_u(&x, &marginals, corr.factor()).unwrap(), &marginals, corr.factor()).unwrap();
            for k in 0..n {
                prop_assert!((back[k] - x[k]).abs() <= 1e-10 * x[k].abs().max(1.0));
            }
        }
    }
}
