//! Small dense kernels: symmetric square roots, the Helmert complement of the
//! centering projector, and the polar decomposition.
//!
//! Square roots go through a symmetric eigendecomposition and always return
//! the unique positive semidefinite root.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative tolerance for accepting an input as symmetric.
pub const SYMMETRY_TOL: f64 = 1e-10;
/// Eigenvalues below `-PSD_TOL * trace` reject a matrix as not PSD.
pub const PSD_TOL: f64 = 1e-12;
/// Eigenvalues at or below `PD_TOL * trace` reject a matrix as singular.
pub const PD_TOL: f64 = 1e-10;

/// A square matrix whose stored entries are exactly symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix(DMatrix<f64>);

impl SymmetricMatrix {
    /// Accepts `m` if it is square and symmetric up to [`SYMMETRY_TOL`]
    /// (relative to its largest entry); the stored copy is `(m + m')/2`.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch {
                expected: "square matrix".into(),
                actual: format!("{}x{}", m.nrows(), m.ncols()),
            });
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let scale = m.amax();
        let asymmetry = (&m - m.transpose()).amax();
        if asymmetry > SYMMETRY_TOL * (1.0 + scale) {
            return Err(Error::NotSymmetric { asymmetry });
        }
        Ok(Self::symmetrize(m))
    }

    pub(crate) fn symmetrize(m: DMatrix<f64>) -> Self {
        let t = m.transpose();
        Self((m + t) * 0.5)
    }

    pub fn identity(dim: usize) -> Self {
        Self(DMatrix::identity(dim, dim))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        Self(DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.0.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }
}

impl AsRef<DMatrix<f64>> for SymmetricMatrix {
    fn as_ref(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// Rebuild `V diag(f(lambda)) V'` from an eigendecomposition.
fn spectral_map(eig: &SymmetricEigen<f64, nalgebra::Dyn>, f: impl Fn(f64) -> f64) -> SymmetricMatrix {
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for (j, lambda) in eig.eigenvalues.iter().enumerate() {
        let s = f(*lambda);
        scaled.column_mut(j).scale_mut(s);
    }
    SymmetricMatrix::symmetrize(scaled * v.transpose())
}

/// Unique PSD square root.
pub fn sym_sqrt(m: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    let eig = SymmetricEigen::new(m.0.clone());
    let trace = m.trace().abs();
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -PSD_TOL * trace || (trace == 0.0 && min < 0.0) {
        return Err(Error::NotPsd { min_eigenvalue: min });
    }
    Ok(spectral_map(&eig, |l| l.max(0.0).sqrt()))
}

/// Inverse of the PSD square root; fails with [`Error::Singular`] when the
/// smallest eigenvalue is not above `PD_TOL * trace`. No regularization is
/// attempted.
pub fn sym_inv_sqrt(m: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    let eig = SymmetricEigen::new(m.0.clone());
    let threshold = PD_TOL * m.trace();
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min.is_nan() || min <= threshold || threshold.is_nan() || threshold <= 0.0 {
        return Err(Error::Singular {
            min_eigenvalue: min,
            threshold,
        });
    }
    Ok(spectral_map(&eig, |l| 1.0 / l.sqrt()))
}

/// `N x (N-1)` Helmert submatrix `K` with `K'K = I`, `K'1 = 0` and `KK' = I - 11'/N`.
///
/// Column `j` (1-based) holds `j` leading entries `1/sqrt(j(j+1))`, then
/// `-j/sqrt(j(j+1))`, then zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct HelmertComplement {
    matrix: DMatrix<f64>,
}

impl HelmertComplement {
    pub fn new(n_obs: usize) -> Result<Self> {
        if n_obs < 2 {
            return Err(Error::InvalidSize(format!(
                "Helmert complement needs N >= 2, got {n_obs}"
            )));
        }
        let n = n_obs - 1;
        let mut matrix = DMatrix::zeros(n_obs, n);
        for col in 0..n {
            let j = (col + 1) as f64;
            let norm = (j * (j + 1.0)).sqrt();
            for row in 0..=col {
                matrix[(row, col)] = 1.0 / norm;
            }
            matrix[(col + 1, col)] = -j / norm;
        }
        Ok(Self { matrix })
    }

    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
}

pub fn helmert_complement(n_obs: usize) -> Result<HelmertComplement> {
    HelmertComplement::new(n_obs)
}

/// Computes `K' X` for the Helmert complement of size `X.nrows()` without
/// forming `K`, in O(N p) time and memory.
pub fn helmert_transpose_apply(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n_obs = x.nrows();
    if n_obs < 2 {
        return Err(Error::InvalidSize(format!(
            "Helmert complement needs N >= 2, got {n_obs}"
        )));
    }
    let n = n_obs - 1;
    let mut out = DMatrix::zeros(n, x.ncols());
    for c in 0..x.ncols() {
        let mut prefix = 0.0;
        for row in 0..n {
            prefix += x[(row, c)];
            let j = (row + 1) as f64;
            out[(row, c)] = (prefix - j * x[(row + 1, c)]) / (j * (j + 1.0)).sqrt();
        }
    }
    Ok(out)
}

/// Polar decomposition `Z0 = H T^{1/2}` with `H = Z0 (Z0'Z0)^{-1/2}`, `T = Z0'Z0`.
pub fn polar_decompose(z0: &DMatrix<f64>) -> Result<(DMatrix<f64>, SymmetricMatrix)> {
    if z0.nrows() < z0.ncols() {
        return Err(Error::RankDeficient);
    }
    let t = SymmetricMatrix::symmetrize(z0.transpose() * z0);
    let inv_root = sym_inv_sqrt(&t).map_err(|_| Error::RankDeficient)?;
    let h = z0 * inv_root.as_matrix();
    Ok((h, t))
}
