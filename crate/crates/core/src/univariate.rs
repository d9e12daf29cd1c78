//! Univariate composite normality tests: Anderson-Darling and Shapiro-Wilk.
//!
//! Both tests estimate location and scale from the data, sort their input
//! first and compute everything from the sorted copy, so results are
//! permutation invariant bit for bit.

use std::fmt;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// p-values are clamped to `[MIN_P_VALUE, 1]`.
pub const MIN_P_VALUE: f64 = 1e-300;

pub const AD_MIN_SIZE: usize = 8;
pub const SW_MIN_SIZE: usize = 3;
pub const SW_MAX_SIZE: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnivariateMethod {
    AndersonDarling,
    ShapiroWilk,
}

impl UnivariateMethod {
    pub fn apply(self, x: &[f64]) -> Result<UnivariateTestResult> {
        match self {
            Self::AndersonDarling => anderson_darling(x),
            Self::ShapiroWilk => shapiro_wilk(x),
        }
    }

    pub fn min_size(self) -> usize {
        match self {
            Self::AndersonDarling => AD_MIN_SIZE,
            Self::ShapiroWilk => SW_MIN_SIZE,
        }
    }

    pub fn max_size(self) -> Option<usize> {
        match self {
            Self::AndersonDarling => None,
            Self::ShapiroWilk => Some(SW_MAX_SIZE),
        }
    }

    /// Column label prefix: `AD` or `SW`.
    pub fn short_name(self) -> &'static str {
        match self {
            Self::AndersonDarling => "AD",
            Self::ShapiroWilk => "SW",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::AndersonDarling => "anderson_darling",
            Self::ShapiroWilk => "shapiro_wilk",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ad" | "anderson_darling" | "anderson-darling" => Ok(Self::AndersonDarling),
            "sw" | "shapiro_wilk" | "shapiro-wilk" => Ok(Self::ShapiroWilk),
            other => Err(Error::InvalidConfig(format!(
                "unknown univariate test '{other}' (expected ad or sw)"
            ))),
        }
    }
}

impl fmt::Display for UnivariateMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnivariateTestResult {
    /// `A^2` (before the small-sample correction) or `W`.
    pub statistic: f64,
    pub p_value: f64,
    pub method: UnivariateMethod,
    pub sample_size: usize,
}

fn standard_normal() -> Normal {
    Normal::standard()
}

fn sorted_checked(x: &[f64]) -> Result<Vec<f64>> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let range = sorted[sorted.len() - 1] - sorted[0];
    let magnitude = sorted[0].abs().max(sorted[sorted.len() - 1].abs());
    if range.is_nan() || range <= 1e-12 * magnitude || range == 0.0 {
        return Err(Error::ConstantSample);
    }
    Ok(sorted)
}

fn clamp_p(p: f64) -> f64 {
    if p.is_nan() {
        return 1.0;
    }
    p.clamp(MIN_P_VALUE, 1.0)
}

/// Anderson-Darling test of composite normality.
///
/// Standardizes with the sample mean and standard deviation (divisor `k-1`),
/// applies the small-sample factor `1 + 0.75/k + 2.25/k^2` and converts with
/// the D'Agostino-Stephens piecewise exponential approximation.
pub fn anderson_darling(x: &[f64]) -> Result<UnivariateTestResult> {
    let k = x.len();
    if k < AD_MIN_SIZE {
        return Err(Error::TooSmall {
            given: k,
            needed: AD_MIN_SIZE,
        });
    }
    let sorted = sorted_checked(x)?;
    let kf = k as f64;
    let mean = sorted.iter().sum::<f64>() / kf;
    let sd = (sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (kf - 1.0)).sqrt();
    let normal = standard_normal();
    let z: Vec<f64> = sorted.iter().map(|v| (v - mean) / sd).collect();
    let mut acc = 0.0;
    for i in 0..k {
        let weight = (2 * i + 1) as f64;
        // ln(1 - Phi(z)) evaluated as ln Phi(-z) to keep the upper tail accurate.
        acc += weight * (normal.cdf(z[i]).ln() + normal.cdf(-z[k - 1 - i]).ln());
    }
    let a2 = -kf - acc / kf;
    let adjusted = a2 * (1.0 + 0.75 / kf + 2.25 / (kf * kf));
    Ok(UnivariateTestResult {
        statistic: a2,
        p_value: clamp_p(anderson_darling_p_value(adjusted)),
        method: UnivariateMethod::AndersonDarling,
        sample_size: k,
    })
}

/// Upper-tail p-value for the corrected statistic `A*^2`, parameters estimated.
pub fn anderson_darling_p_value(adjusted: f64) -> f64 {
    // The last branch is a parabola in A*^2 with its minimum here; holding it
    // constant beyond keeps the map monotone.
    const VERTEX: f64 = 5.709 / (2.0 * 0.0186);
    let a = adjusted;
    if a < 0.2 {
        1.0 - (-13.436 + 101.14 * a - 223.73 * a * a).exp()
    } else if a < 0.34 {
        1.0 - (-8.318 + 42.796 * a - 59.938 * a * a).exp()
    } else if a < 0.6 {
        (0.9177 - 4.279 * a - 1.38 * a * a).exp()
    } else {
        let a = a.min(VERTEX);
        (1.2937 - 5.709 * a + 0.0186 * a * a).exp()
    }
}

fn poly(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Royston's approximate Shapiro-Wilk coefficients for sample size `k`,
/// antisymmetric and ordered to match ascending data.
pub fn shapiro_wilk_coefficients(k: usize) -> Vec<f64> {
    debug_assert!(k >= 3);
    if k == 3 {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        return vec![-s, 0.0, s];
    }
    let normal = standard_normal();
    let kf = k as f64;
    // Expected normal order statistics, mirrored from the lower half so that
    // the coefficients are exactly antisymmetric.
    let mut m = vec![0.0; k];
    for i in 0..k / 2 {
        let q = normal.inverse_cdf((i as f64 + 1.0 - 0.375) / (kf + 0.25));
        m[i] = q;
        m[k - 1 - i] = -q;
    }
    let summ2: f64 = m.iter().map(|v| v * v).sum();
    let ssumm2 = summ2.sqrt();
    let u = 1.0 / kf.sqrt();

    let an = m[k - 1] / ssumm2 + poly(&[0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056], u);
    let mut a = vec![0.0; k];
    let (fixed, phi) = if k > 5 {
        let an1 = m[k - 2] / ssumm2 + poly(&[0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633], u);
        let phi =
            (summ2 - 2.0 * m[k - 1].powi(2) - 2.0 * m[k - 2].powi(2)) / (1.0 - 2.0 * an.powi(2) - 2.0 * an1.powi(2));
        a[k - 2] = an1;
        a[1] = -an1;
        (2, phi)
    } else {
        let phi = (summ2 - 2.0 * m[k - 1].powi(2)) / (1.0 - 2.0 * an.powi(2));
        (1, phi)
    };
    a[k - 1] = an;
    a[0] = -an;
    let root_phi = phi.sqrt();
    for i in fixed..k - fixed {
        a[i] = m[i] / root_phi;
    }
    a
}

/// Shapiro-Wilk W with Royston's normalizing transformation for the p-value.
pub fn shapiro_wilk(x: &[f64]) -> Result<UnivariateTestResult> {
    let k = x.len();
    if !(SW_MIN_SIZE..=SW_MAX_SIZE).contains(&k) {
        return Err(Error::SizeOutOfRange {
            given: k,
            min: SW_MIN_SIZE,
            max: SW_MAX_SIZE,
        });
    }
    let sorted = sorted_checked(x)?;
    let kf = k as f64;
    let range = sorted[k - 1] - sorted[0];
    let scaled: Vec<f64> = sorted.iter().map(|v| (v - sorted[0]) / range).collect();
    let mean = scaled.iter().sum::<f64>() / kf;
    let ss: f64 = scaled.iter().map(|v| (v - mean).powi(2)).sum();
    let a = shapiro_wilk_coefficients(k);
    let num: f64 = a.iter().zip(&scaled).map(|(ai, xi)| ai * xi).sum();
    let w = (num * num / ss).min(1.0);

    Ok(UnivariateTestResult {
        statistic: w,
        p_value: clamp_p(shapiro_wilk_p_value(w, k)),
        method: UnivariateMethod::ShapiroWilk,
        sample_size: k,
    })
}

/// p-value of `W` for sample size `k`.
pub fn shapiro_wilk_p_value(w: f64, k: usize) -> f64 {
    let normal = standard_normal();
    let kf = k as f64;
    if k == 3 {
        let w = w.max(0.75);
        return (1.0 - 6.0 / std::f64::consts::PI * w.sqrt().acos()).max(0.0);
    }
    let y = (1.0 - w).ln();
    if k <= 11 {
        let gamma = poly(&[-2.273, 0.459], kf);
        if y >= gamma {
            return 1e-19;
        }
        let y = -(gamma - y).ln();
        let mu = poly(&[0.5440, -0.39978, 0.025054, -0.0006714], kf);
        let sigma = poly(&[1.3822, -0.77857, 0.062767, -0.0020322], kf).exp();
        normal.sf((y - mu) / sigma)
    } else {
        let ln_k = kf.ln();
        let mu = poly(&[-1.5861, -0.31082, -0.083751, 0.0038915], ln_k);
        let sigma = poly(&[-0.4803, -0.082676, 0.0030302], ln_k).exp();
        normal.sf((y - mu) / sigma)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngSeedSpec;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn normal_scores(k: usize) -> Vec<f64> {
        let n = standard_normal();
        (1..=k).map(|i| n.inverse_cdf((i as f64 - 0.5) / k as f64)).collect()
    }

    fn normals(k: usize, seed: u64) -> Vec<f64> {
        let mut rng = RngSeedSpec::new(seed).rng();
        (0..k).map(|_| rng.sample(StandardNormal)).collect()
    }

    #[test]
    fn ad_on_normal_scores() {
        let r = anderson_darling(&normal_scores(20)).unwrap();
        assert!(r.statistic > 0.0 && r.statistic < 0.2, "{r:?}");
        assert!(r.p_value > 0.9, "{r:?}");
    }

    #[test]
    fn sw_on_normal_scores() {
        let r = shapiro_wilk(&normal_scores(30)).unwrap();
        assert!(r.statistic > 0.99 && r.statistic <= 1.0, "{r:?}");
        assert!(r.p_value > 0.9, "{r:?}");
    }

    #[test]
    fn sw_minimal_size() {
        let r = shapiro_wilk(&[1.0, 2.0, 3.0]).unwrap();
        assert!(r.statistic > 0.0 && r.statistic <= 1.0);
        assert!((r.statistic - 1.0).abs() < 1e-12);
        assert!((0.0..=1.0).contains(&r.p_value));
    }

    #[test]
    fn error_paths() {
        assert!(matches!(
            anderson_darling(&[1.0; 7]),
            Err(Error::TooSmall { given: 7, needed: 8 })
        ));
        assert!(matches!(anderson_darling(&[2.5; 10]), Err(Error::ConstantSample)));
        assert!(matches!(shapiro_wilk(&[2.5; 10]), Err(Error::ConstantSample)));
        assert!(matches!(shapiro_wilk(&[1.0, 2.0]), Err(Error::SizeOutOfRange { .. })));
        assert!(matches!(
            shapiro_wilk(&vec![0.0; 5001]),
            Err(Error::SizeOutOfRange { .. })
        ));
        assert!(matches!(
            anderson_darling(&[0.0, 1.0, 2.0, f64::NAN, 4.0, 5.0, 6.0, 7.0]),
            Err(Error::NonFinite)
        ));
    }

    #[test]
    fn sw_coefficients_are_unit_antisymmetric() {
        for k in [3usize, 4, 5, 6, 11, 12, 38, 93, 600] {
            let a = shapiro_wilk_coefficients(k);
            let norm: f64 = a.iter().map(|v| v * v).sum();
            assert!((norm - 1.0).abs() < 1e-12, "k = {k}: {norm}");
            for i in 0..k {
                assert_eq!(a[i], -a[k - 1 - i]);
            }
        }
    }

    #[test]
    fn ad_p_value_is_monotone_and_continuous_enough() {
        let mut prev = 1.0;
        let mut a = 0.0;
        while a < 400.0 {
            let p = anderson_darling_p_value(a);
            assert!(p <= prev + 1e-12, "a = {a}");
            prev = p;
            a += 0.005;
        }
        for cut in [0.2, 0.34, 0.6] {
            let jump = (anderson_darling_p_value(cut - 1e-9) - anderson_darling_p_value(cut)).abs();
            assert!(jump < 0.01, "cut {cut}: {jump}");
        }
    }

    #[test]
    fn exponential_data_are_rejected_by_ad() {
        let mut rng = RngSeedSpec::new(77).rng();
        let exp = rand_distr::Exp1;
        let rejections = (0..1000)
            .filter(|_| {
                let x: Vec<f64> = (0..90).map(|_| rng.sample::<f64, _>(exp)).collect();
                anderson_darling(&x).unwrap().p_value <= 0.05
            })
            .count();
        assert!(rejections > 900, "{rejections}");
    }

    #[test]
    fn contamination_never_lowers_rejection() {
        let mut rng = RngSeedSpec::new(78).rng();
        let cauchy = rand_distr::Cauchy::new(0.0, 1.0).unwrap();
        for method in [UnivariateMethod::AndersonDarling, UnivariateMethod::ShapiroWilk] {
            let mut rates = Vec::new();
            for frac in [0.0, 0.1, 0.3] {
                let hits = (0..1000)
                    .filter(|_| {
                        let x: Vec<f64> = (0..50)
                            .map(|_| {
                                if rng.random::<f64>() < frac {
                                    rng.sample(cauchy)
                                } else {
                                    rng.sample(StandardNormal)
                                }
                            })
                            .collect();
                        method.apply(&x).unwrap().p_value <= 0.05
                    })
                    .count();
                rates.push(hits);
            }
            assert!(rates.windows(2).all(|w| w[1] >= w[0]), "{method}: {rates:?}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn affine_invariance(seed in any::<u64>(), k in 8usize..120, a in prop_oneof![-50.0..-0.01f64, 0.01..50.0f64], b in -100.0..100.0f64) {
            let x = normals(k, seed);
            let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            for method in [UnivariateMethod::AndersonDarling, UnivariateMethod::ShapiroWilk] {
                let r0 = method.apply(&x).unwrap();
                let r1 = method.apply(&y).unwrap();
                prop_assert!((r0.statistic - r1.statistic).abs() <= 1e-10);
                prop_assert!((r0.p_value - r1.p_value).abs() <= 1e-10);
            }
        }

        #[test]
        fn permutation_invariance(seed in any::<u64>(), k in 8usize..100) {
            let x = normals(k, seed);
            let mut shuffled = x.clone();
            shuffled.shuffle(&mut RngSeedSpec::new(seed ^ 0xff).rng());
            for method in [UnivariateMethod::AndersonDarling, UnivariateMethod::ShapiroWilk] {
                prop_assert_eq!(method.apply(&x).unwrap(), method.apply(&shuffled).unwrap());
            }
        }

        #[test]
        fn result_ranges(seed in any::<u64>(), k in 8usize..200) {
            let x = normals(k, seed);
            let ad = anderson_darling(&x).unwrap();
            prop_assert!(ad.statistic >= 0.0 && (0.0..=1.0).contains(&ad.p_value));
            let sw = shapiro_wilk(&x).unwrap();
            prop_assert!(sw.statistic > 0.0 && sw.statistic <= 1.0 && (0.0..=1.0).contains(&sw.p_value));
        }
    }
}
