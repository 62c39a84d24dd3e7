//! Probability and linear-algebra foundations shared by every solver.

pub mod linalg;
pub mod marginal;
pub mod normal;
pub mod random;
pub mod transform;

pub use linalg::{cholesky_lower, mvn_logpdf, CorrelationMatrix, LowerTriangularFactor};
pub use marginal::{Marginal, MarginalKind};
pub use normal::{std_normal_cdf, std_normal_inv_cdf, std_normal_pdf};
pub use random::{sample_standard_normals, RandomStream};
pub use transform::{u_to_x, x_to_u};
