use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("matrix is not positive semidefinite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },
    #[error("matrix is singular (smallest eigenvalue {min_eigenvalue:e} below threshold {threshold:e})")]
    Singular { min_eigenvalue: f64, threshold: f64 },
    #[error("matrix is rank deficient")]
    RankDeficient,
    #[error("sample covariance matrix is singular; data are degenerate or N <= p")]
    SingularCovariance,
    #[error("scaled residuals lost orthonormality (defect {defect:e}); covariance is ill-conditioned")]
    OrthonormalityDefect { defect: f64 },
    #[error("invalid size: {0}")]
    InvalidSize(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },
    #[error("Wishart degrees of freedom {dof} smaller than dimension {dim}")]
    InvalidDof { dof: usize, dim: usize },
    #[error("sample contains non-finite values")]
    NonFinite,
    #[error("sample is constant")]
    ConstantSample,
    #[error("sample of size {given} is too small, need at least {needed}")]
    TooSmall { given: usize, needed: usize },
    #[error("sample size {given} outside the supported range [{min}, {max}]")]
    SizeOutOfRange { given: usize, min: usize, max: usize },
    #[error("np = {given} entries is below the minimum {needed} for the {method} test")]
    SampleTooSmall {
        given: usize,
        needed: usize,
        method: &'static str,
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
