//! One-sample Kolmogorov-Smirnov distance, used by the distributional checks.

use serde::{Deserialize, Serialize};

/// `sup |F_n(x) - F(x)|` for the empirical distribution of `samples`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted.iter().enumerate().fold(0.0, |d, (i, &x)| {
        let f = cdf(x);
        let above = (i + 1) as f64 / n - f;
        let below = f - i as f64 / n;
        d.max(above).max(below)
    })
}

/// Approximate upper critical value of the KS distance at level `alpha`,
/// using the Kolmogorov limit with Stephens' finite-sample adjustment.
pub fn ks_critical_value(n: usize, alpha: f64) -> f64 {
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    let rn = (n as f64).sqrt();
    c / (rn + 0.12 + 0.11 / rn)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsOutcome {
    pub statistic: f64,
    pub critical_value: f64,
    pub alpha: f64,
    pub sample_size: usize,
}

impl KsOutcome {
    pub fn new(samples: &[f64], cdf: impl Fn(f64) -> f64, alpha: f64) -> Self {
        Self {
            statistic: ks_statistic(samples, cdf),
            critical_value: ks_critical_value(samples.len(), alpha),
            alpha,
            sample_size: samples.len(),
        }
    }

    pub fn passes(&self) -> bool {
        self.statistic < self.critical_value
    }
}
