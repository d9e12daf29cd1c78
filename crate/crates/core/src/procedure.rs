//! The randomized necessary test of multivariate normality.
//!
//! For a sample with Stiefel residual `U` (`n x p`), each replicate draws an
//! independent `A ~ W_p(n, I_p)` and tests the `np` entries of `U A^{1/2}`,
//! which are iid N(0, 1) when the data are normal. With `m` replicates the
//! sample is rejected when `min_i P_i <= alpha / m`.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{sym_sqrt, SymmetricMatrix};
use crate::residuals::{stiefel_residual, Sample, StiefelResidual};
use crate::rng::RngSeedSpec;
use crate::sampling::sample_wishart_identity;
use crate::univariate::UnivariateMethod;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    /// Number of Wishart replicates.
    pub m: usize,
    pub alpha: f64,
    pub method: UnivariateMethod,
    pub seed: RngSeedSpec,
}

impl Default for TestConfig {
    fn default() -> Self {
        Self {
            m: 1,
            alpha: 0.05,
            method: UnivariateMethod::ShapiroWilk,
            seed: RngSeedSpec::default(),
        }
    }
}

impl TestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::InvalidConfig("m must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    /// Checks that `n * p` entries are acceptable to the univariate test.
    pub fn check_entry_count(&self, entries: usize) -> Result<()> {
        let min = self.method.min_size();
        if entries < min {
            return Err(Error::SampleTooSmall {
                given: entries,
                needed: min,
                method: self.method.name(),
            });
        }
        if let Some(max) = self.method.max_size() {
            if entries > max {
                return Err(Error::SizeOutOfRange {
                    given: entries,
                    min,
                    max,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    /// `P_i` for each replicate, in replicate order.
    pub p_values: Vec<f64>,
    /// Univariate statistic of each replicate.
    pub statistics: Vec<f64>,
    pub min_p: f64,
    /// Bonferroni-adjusted `min(1, m * min_p)`.
    pub adjusted_p: f64,
    pub reject: bool,
    pub n: usize,
    pub p: usize,
    pub config: TestConfig,
}

impl TestReport {
    fn from_replicates(p_values: Vec<f64>, statistics: Vec<f64>, n: usize, p: usize, config: TestConfig) -> Self {
        let min_p = p_values.iter().copied().fold(f64::INFINITY, f64::min);
        let m = p_values.len() as f64;
        Self {
            reject: min_p <= config.alpha / m,
            adjusted_p: (m * min_p).min(1.0),
            min_p,
            p_values,
            statistics,
            n,
            p,
            config,
        }
    }
}

impl fmt::Display for TestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = &self.config;
        writeln!(
            f,
            "Stiefel-residual normality test ({}, m = {}, alpha = {})",
            c.method, c.m, c.alpha
        )?;
        writeln!(
            f,
            "  dimensions        n = {}, p = {} ({} entries per replicate)",
            self.n,
            self.p,
            self.n * self.p
        )?;
        writeln!(
            f,
            "  seed              {} (stream {})",
            c.seed.root_seed, c.seed.stream_id
        )?;
        for (i, (pv, st)) in self.p_values.iter().zip(&self.statistics).enumerate() {
            writeln!(
                f,
                "  replicate {:<3}     statistic = {st:.6}, p-value = {pv:.6e}",
                i + 1
            )?;
        }
        writeln!(f, "  min p-value       {:.6e}", self.min_p)?;
        writeln!(f, "  adjusted p-value  {:.6e}", self.adjusted_p)?;
        if self.reject {
            write!(f, "  decision          reject multivariate normality")
        } else {
            write!(
                f,
                "  decision          do not reject (non-rejection does not establish normality)"
            )
        }
    }
}

/// `U A^{1/2}` with the PSD root of `A`.
pub fn transform(u: &StiefelResidual, a: &SymmetricMatrix) -> Result<DMatrix<f64>> {
    if a.dim() != u.p() {
        return Err(Error::DimensionMismatch {
            expected: format!("{0}x{0} Wishart matrix", u.p()),
            actual: format!("{0}x{0}", a.dim()),
        });
    }
    Ok(u.u() * sym_sqrt(a)?.as_matrix())
}

/// Wishart draw for replicate `index`; it only depends on `(seed, index)`.
pub fn replicate_wishart(u: &StiefelResidual, seed: RngSeedSpec, index: usize) -> Result<SymmetricMatrix> {
    sample_wishart_identity(u.n(), u.p(), &mut seed.child(index as u64).rng())
}

/// Runs the test on a precomputed residual. Useful when the same data are
/// tested under many seeds.
pub fn mvn_test_residual(u: &StiefelResidual, cfg: &TestConfig) -> Result<TestReport> {
    cfg.validate()?;
    cfg.check_entry_count(u.n() * u.p())?;
    let mut p_values = Vec::with_capacity(cfg.m);
    let mut statistics = Vec::with_capacity(cfg.m);
    for i in 0..cfg.m {
        let a = replicate_wishart(u, cfg.seed, i)?;
        let y = transform(u, &a)?;
        // nalgebra storage is column-major.
        let result = cfg.method.apply(y.as_slice())?;
        p_values.push(result.p_value);
        statistics.push(result.statistic);
    }
    Ok(TestReport::from_replicates(p_values, statistics, u.n(), u.p(), *cfg))
}

pub fn mvn_test(x: &Sample, cfg: &TestConfig) -> Result<TestReport> {
    cfg.validate()?;
    if x.n_obs() >= 2 {
        cfg.check_entry_count((x.n_obs() - 1) * x.dim())?;
    }
    let u = stiefel_residual(x)?;
    mvn_test_residual(&u, cfg)
}
