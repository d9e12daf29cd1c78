//! Random matrices and the alternative distributions used in power studies.
//!
//! Samplers take any `Rng`; reproducibility comes from drawing that `Rng`
//! from a [`crate::RngSeedSpec`].

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Beta, ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SymmetricMatrix;
use crate::residuals::Sample;

/// Null model and the four alternatives of the power study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tag", rename_all = "snake_case")]
pub enum AlternativeModel {
    NullMvn,
    /// Multivariate t: `z / sqrt(w / df)` with `w ~ chi2(df)` shared by the row.
    StudentT {
        df: f64,
    },
    /// Pearson Type II with density proportional to `(1 - |x|^2)^shape` on the unit ball.
    PearsonType2 {
        shape: f64,
    },
    /// Componentwise `exp` of `N(0, I)`.
    Lognormal,
    /// `weight * N(0, I) + (1 - weight) * N(0, scale * (rho I + (1 - rho) 11'))`.
    NormalMixture {
        weight: f64,
        scale: f64,
        rho: f64,
    },
}

impl AlternativeModel {
    pub const fn student_t() -> Self {
        Self::StudentT { df: 3.0 }
    }

    pub const fn pearson_type2() -> Self {
        Self::PearsonType2 { shape: 0.0 }
    }

    pub const fn normal_mixture() -> Self {
        Self::NormalMixture {
            weight: 0.5,
            scale: 8.0,
            rho: 0.5,
        }
    }

    /// Short machine-friendly name, used in CSV output.
    pub fn label(&self) -> String {
        match self {
            Self::NullMvn => "null_mvn".into(),
            Self::StudentT { df } => format!("student_t({df})"),
            Self::PearsonType2 { shape } => format!("pearson_type2({shape})"),
            Self::Lognormal => "lognormal".into(),
            Self::NormalMixture { weight, scale, rho } => format!("normal_mixture({weight};{scale};{rho})"),
        }
    }

    /// Parses `null`, `t[:df]`, `pearson2[:shape]`, `lognormal` and
    /// `mixture[:weight:scale:rho]`; omitted parameters take the defaults.
    pub fn parse(s: &str) -> Result<Self> {
        let mut parts = s.trim().split(':');
        let head = parts.next().unwrap_or_default().to_ascii_lowercase();
        let nums = parts
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| Error::InvalidConfig(format!("bad model parameter '{v}' in '{s}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        let model = match (head.as_str(), nums.as_slice()) {
            ("null" | "null_mvn" | "mvn" | "normal", []) => Self::NullMvn,
            ("t" | "t3" | "student_t", []) => Self::student_t(),
            ("t" | "student_t", [df]) => Self::StudentT { df: *df },
            ("pearson2" | "type2" | "pearson_type2", []) => Self::pearson_type2(),
            ("pearson2" | "type2" | "pearson_type2", [shape]) => Self::PearsonType2 { shape: *shape },
            ("lognormal", []) => Self::Lognormal,
            ("mixture" | "normal_mixture", []) => Self::normal_mixture(),
            ("mixture" | "normal_mixture", [weight, scale, rho]) => Self::NormalMixture {
                weight: *weight,
                scale: *scale,
                rho: *rho,
            },
            _ => return Err(Error::InvalidConfig(format!("unknown model '{s}'"))),
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        match *self {
            Self::StudentT { df } if !(df > 0.0 && df.is_finite()) => {
                bad(format!("t degrees of freedom must be positive, got {df}"))
            }
            Self::PearsonType2 { shape } if !(shape >= 0.0 && shape.is_finite()) => {
                bad(format!("Pearson Type II shape must be >= 0, got {shape}"))
            }
            Self::NormalMixture { weight, scale, rho }
                if !(weight > 0.0 && weight < 1.0)
                    || !(scale > 0.0 && scale.is_finite())
                    || !(rho > 0.0 && rho <= 1.0) =>
            {
                bad(format!(
                    "mixture needs weight in (0,1), scale > 0, rho in (0,1]; got {weight}, {scale}, {rho}"
                ))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for AlternativeModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NullMvn => write!(f, "MVN"),
            Self::StudentT { df } => write!(f, "t_{df}"),
            Self::PearsonType2 { shape } => write!(f, "Type II (m={shape})"),
            Self::Lognormal => write!(f, "Lognormal"),
            Self::NormalMixture { .. } => write!(f, "Mixture"),
        }
    }
}

fn check_dims(rows: usize, cols: usize) -> Result<()> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidSize(format!(
            "matrix dimensions must be positive, got {rows}x{cols}"
        )));
    }
    Ok(())
}

/// `rows x cols` matrix of iid N(0, 1) entries, filled column by column.
pub fn sample_std_normal_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    check_dims(rows, cols)?;
    Ok(DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal)))
}

/// `W_p(dof, I_p)` draw by the Bartlett decomposition `A = L L'`.
pub fn sample_wishart_identity<R: Rng + ?Sized>(dof: usize, dim: usize, rng: &mut R) -> Result<SymmetricMatrix> {
    check_dims(dim, dim)?;
    if dof < dim {
        return Err(Error::InvalidDof { dof, dim });
    }
    let mut lower = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        let chi2 = ChiSquared::new((dof - i) as f64).expect("dof - i >= 1");
        lower[(i, i)] = chi2.sample(rng).sqrt();
        for j in 0..i {
            lower[(i, j)] = rng.sample(StandardNormal);
        }
    }
    let a = &lower * lower.transpose();
    Ok(SymmetricMatrix::symmetrize(a))
}

/// Lower Cholesky factor of `scale * (rho I + (1 - rho) 11')`.
fn mixture_factor(dim: usize, scale: f64, rho: f64) -> DMatrix<f64> {
    let sigma = DMatrix::from_fn(dim, dim, |i, j| if i == j { scale } else { scale * (1.0 - rho) });
    nalgebra::Cholesky::new(sigma)
        .expect("mixture covariance is positive definite for rho in (0, 1]")
        .l()
}

/// `n_obs` iid rows from `model` in dimension `dim`.
pub fn sample_alternative<R: Rng + ?Sized>(
    model: &AlternativeModel,
    n_obs: usize,
    dim: usize,
    rng: &mut R,
) -> Result<Sample> {
    if n_obs < 2 || dim == 0 {
        return Err(Error::InvalidSize(format!(
            "need N >= 2 and p >= 1, got N={n_obs}, p={dim}"
        )));
    }
    model.validate()?;
    let mut data = DMatrix::zeros(n_obs, dim);
    let mut z = DVector::zeros(dim);
    match *model {
        AlternativeModel::NullMvn => {
            for mut row in data.row_iter_mut() {
                row.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
            }
        }
        AlternativeModel::StudentT { df } => {
            let chi2 = ChiSquared::new(df).map_err(|e| Error::InvalidConfig(e.to_string()))?;
            for mut row in data.row_iter_mut() {
                row.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
                let w: f64 = chi2.sample(rng);
                row /= (w / df).sqrt();
            }
        }
        AlternativeModel::PearsonType2 { shape } => {
            let radius_sq =
                Beta::new(dim as f64 / 2.0, shape + 1.0).map_err(|e| Error::InvalidConfig(e.to_string()))?;
            for mut row in data.row_iter_mut() {
                loop {
                    z.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
                    if z.norm() > 0.0 {
                        break;
                    }
                }
                let r = if shape == 0.0 {
                    rng.random::<f64>().powf(1.0 / dim as f64)
                } else {
                    radius_sq.sample(rng).sqrt()
                };
                let scale = r / z.norm();
                for (dst, src) in row.iter_mut().zip(z.iter()) {
                    *dst = src * scale;
                }
            }
        }
        AlternativeModel::Lognormal => {
            for mut row in data.row_iter_mut() {
                row.iter_mut()
                    .for_each(|v| *v = rng.sample::<f64, _>(StandardNormal).exp());
            }
        }
        AlternativeModel::NormalMixture { weight, scale, rho } => {
            let factor = mixture_factor(dim, scale, rho);
            for mut row in data.row_iter_mut() {
                let first = rng.random::<f64>() < weight;
                z.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
                if first {
                    row.copy_from(&z.transpose());
                } else {
                    row.copy_from(&(&factor * &z).transpose());
                }
            }
        }
    }
    Sample::new(data)
}
