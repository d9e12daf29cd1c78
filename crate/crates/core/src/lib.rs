//! Exact necessary test of multivariate normality.
//!
//! The scaled residuals of a sample, rotated by a Helmert complement and
//! normalized, form a matrix `U` that is uniform on the Stiefel manifold when
//! the data are normal. Multiplying by the square root of an independent
//! `W_p(n, I)` matrix gives a matrix of iid standard normal entries, which
//! univariate normality tests can then examine. See [`procedure::mvn_test`].

pub mod error;
pub mod exec;
pub mod harness;
pub mod ks;
pub mod linalg;
pub mod procedure;
pub mod residuals;
pub mod rng;
pub mod sampling;
pub mod univariate;

pub use error::{Error, Result};
pub use harness::{repeat_stability, run_experiment, run_table, SimConfig, SimResult, SimTable};
pub use linalg::SymmetricMatrix;
pub use procedure::{mvn_test, TestConfig, TestReport};
pub use residuals::{stiefel_residual, Sample, StiefelResidual};
pub use rng::RngSeedSpec;
pub use sampling::AlternativeModel;
pub use univariate::UnivariateMethod;
