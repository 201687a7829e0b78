//! Multivariate alternative fractional Poisson processes: Mittag-Leffler
//! functions, exact pmfs and moments, samplers, large and moderate deviation
//! rates, an estimator for the fractional order, and a Monte Carlo harness.

pub mod error;
pub mod estimation;
pub mod extended;
pub mod harness;
pub mod large_deviations;
pub mod model;
pub mod numeric;
pub mod sampling;
pub mod special;

pub use error::{Error, Result};
pub use extended::ExtendedReal;
pub use model::{covariance_matrix, CovarianceMatrix, LatticePoint, ModelParams};
