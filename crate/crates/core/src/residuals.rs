//! Scaled residuals and their Stiefel-uniform normalization.
//!
//! Observations are rows of an `N x p` matrix. With `n = N - 1` and `K` the
//! Helmert complement, the scaled-residual matrix is `Z = K' X S^{-1/2}`
//! (`n x p`) and `U = Z / sqrt(n)` has orthonormal columns. Under normality
//! `U` is uniform on the Stiefel manifold whatever the mean and covariance.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{helmert_transpose_apply, sym_inv_sqrt, SymmetricMatrix};

/// Largest tolerated `|U'U - I|_F` before reporting an ill-conditioned covariance.
pub const ORTHONORMALITY_LIMIT: f64 = 1e-6;

/// `N x p` data matrix, one observation per row, all entries finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    data: DMatrix<f64>,
}

impl Sample {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() < 2 || data.ncols() == 0 {
            return Err(Error::InvalidSize(format!(
                "sample needs N >= 2 rows and p >= 1 columns, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != p) {
            return Err(Error::DimensionMismatch {
                expected: format!("{p} columns"),
                actual: format!("{} columns", bad.len()),
            });
        }
        Self::new(DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]))
    }

    /// Number of observations `N`.
    pub fn n_obs(&self) -> usize {
        self.data.nrows()
    }

    /// Dimension `p`.
    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.data
    }
}

/// Column means and the unbiased (divisor `N - 1`) covariance matrix.
pub fn sample_mean_cov(x: &Sample) -> (DVector<f64>, SymmetricMatrix) {
    let (centered, mean) = center(x);
    let n = (x.n_obs() - 1) as f64;
    let cov = centered.transpose() * &centered / n;
    (mean, SymmetricMatrix::symmetrize(cov))
}

fn center(x: &Sample) -> (DMatrix<f64>, DVector<f64>) {
    let mean = x.data.row_mean().transpose();
    let mut centered = x.data.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    (centered, mean)
}

/// `U = n^{-1/2} K' X S^{-1/2}` together with `Z = sqrt(n) U`.
#[derive(Debug, Clone, PartialEq)]
pub struct StiefelResidual {
    u: DMatrix<f64>,
    z: DMatrix<f64>,
}

impl StiefelResidual {
    /// Wraps a matrix that is already orthonormal-column, e.g. from a test.
    pub fn from_orthonormal(u: DMatrix<f64>) -> Result<Self> {
        if u.nrows() < u.ncols() || u.ncols() == 0 {
            return Err(Error::InvalidSize(format!(
                "need n >= p >= 1, got {}x{}",
                u.nrows(),
                u.ncols()
            )));
        }
        let defect = orthonormality_defect(&u);
        if defect.is_nan() || defect > ORTHONORMALITY_LIMIT {
            return Err(Error::OrthonormalityDefect { defect });
        }
        let z = &u * (u.nrows() as f64).sqrt();
        Ok(Self { u, z })
    }

    /// `n = N - 1`.
    pub fn n(&self) -> usize {
        self.u.nrows()
    }

    pub fn p(&self) -> usize {
        self.u.ncols()
    }

    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }
}

/// `|U'U - I|_F`.
pub fn orthonormality_defect(u: &DMatrix<f64>) -> f64 {
    let p = u.ncols();
    (u.transpose() * u - DMatrix::<f64>::identity(p, p)).norm()
}

pub fn stiefel_residual(x: &Sample) -> Result<StiefelResidual> {
    let (n_obs, p) = (x.n_obs(), x.dim());
    if n_obs < p + 1 {
        return Err(Error::SingularCovariance);
    }
    let n = (n_obs - 1) as f64;
    // Centering first keeps K'X accurate under large translations; K'1 = 0 so
    // the product is unchanged.
    let (centered, _) = center(x);
    let projected = helmert_transpose_apply(&centered)?;
    let cov = SymmetricMatrix::symmetrize(projected.transpose() * &projected / n);
    let whitening = sym_inv_sqrt(&cov).map_err(|e| match e {
        Error::Singular { .. } => Error::SingularCovariance,
        other => other,
    })?;
    let z = projected * whitening.as_matrix();
    let u = &z / n.sqrt();
    let defect = orthonormality_defect(&u);
    if defect.is_nan() || defect > ORTHONORMALITY_LIMIT {
        return Err(Error::OrthonormalityDefect { defect });
    }
    Ok(StiefelResidual { u, z })
}
