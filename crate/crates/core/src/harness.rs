//! Monte Carlo studies of the test: rejection rates under the null and the
//! alternatives, table assembly, distributional checks and the repeated-seed
//! stability of a single decision.
//!
//! Replication `r` of a study seeded with `s` draws its data from
//! `s.child(r).child(0)` and its Wishart matrices from `s.child(r).child(1)`,
//! so counts are identical for every worker count.

use std::fmt::Write as _;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::exec::map_reduce;
use crate::ks::KsOutcome;
use crate::procedure::{mvn_test_residual, replicate_wishart, transform, TestConfig};
use crate::residuals::{stiefel_residual, Sample};
use crate::rng::RngSeedSpec;
use crate::sampling::{sample_alternative, AlternativeModel};
use crate::univariate::UnivariateMethod;

pub const MIN_REPLICATIONS: u64 = 100;

/// Header of the per-cell CSV export.
pub const CSV_HEADER: &str = "model,N,p,m,alpha,method,replications,rejection_rate,std_error,singular_count,seed";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub model: AlternativeModel,
    /// Sample size `N` (observations per replication).
    #[serde(rename = "N")]
    pub n_obs: usize,
    #[serde(rename = "p")]
    pub dim: usize,
    pub m: usize,
    pub alpha: f64,
    pub method: UnivariateMethod,
    pub replications: u64,
    pub seed: RngSeedSpec,
    #[serde(default = "default_workers")]
    pub workers: usize,
}

fn default_workers() -> usize {
    crate::exec::default_workers()
}

impl SimConfig {
    pub fn test_config(&self, seed: RngSeedSpec) -> TestConfig {
        TestConfig {
            m: self.m,
            alpha: self.alpha,
            method: self.method,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications < MIN_REPLICATIONS {
            return Err(Error::InvalidConfig(format!(
                "replications must be at least {MIN_REPLICATIONS}, got {}",
                self.replications
            )));
        }
        if self.workers == 0 {
            return Err(Error::InvalidConfig("workers must be at least 1".into()));
        }
        if self.dim == 0 || self.n_obs < self.dim + 1 {
            return Err(Error::InvalidConfig(format!(
                "need p >= 1 and N >= p + 1, got N = {}, p = {}",
                self.n_obs, self.dim
            )));
        }
        self.model.validate()?;
        let cfg = self.test_config(self.seed);
        cfg.validate()?;
        cfg.check_entry_count((self.n_obs - 1) * self.dim)
    }

    /// Column label such as `SW_5`.
    pub fn column_label(&self) -> String {
        format!("{}_{}", self.method.short_name(), self.m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    /// Rejections over replications with a usable sample.
    pub rejection_rate: f64,
    pub rejections: u64,
    pub replications: u64,
    /// Replications whose sample covariance was singular; excluded from the rate.
    pub singular_count: u64,
    pub std_error: f64,
    pub wall_time_seconds: f64,
    pub config: SimConfig,
}

impl SimResult {
    pub fn valid_replications(&self) -> u64 {
        self.replications - self.singular_count
    }

    /// One CSV record in [`CSV_HEADER`] order.
    pub fn csv_record(&self) -> String {
        let c = &self.config;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            c.model.label(),
            c.n_obs,
            c.dim,
            c.m,
            c.alpha,
            c.method.name(),
            self.replications,
            self.rejection_rate,
            self.std_error,
            self.singular_count,
            c.seed.root_seed
        )
    }
}

/// Binomial standard error `sqrt(r (1 - r) / reps)`.
pub fn binomial_std_error(rate: f64, reps: u64) -> f64 {
    if reps == 0 {
        return 0.0;
    }
    (rate * (1.0 - rate) / reps as f64).sqrt()
}

/// Affine map `x -> mean + L x` applied to every observation, with `L L' = cov`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    mean: DVector<f64>,
    factor: DMatrix<f64>,
}

impl AffineMap {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if mean.len() != cov.nrows() || !cov.is_square() {
            return Err(Error::DimensionMismatch {
                expected: format!("{0}x{0} covariance", mean.len()),
                actual: format!("{}x{}", cov.nrows(), cov.ncols()),
            });
        }
        let factor = nalgebra::Cholesky::new(cov)
            .ok_or(Error::NotPsd {
                min_eigenvalue: f64::NAN,
            })?
            .l();
        Ok(Self { mean, factor })
    }

    pub fn apply(&self, x: &Sample) -> Result<Sample> {
        let mut y = x.data() * self.factor.transpose();
        for mut row in y.row_iter_mut() {
            row += self.mean.transpose();
        }
        Sample::new(y)
    }
}

#[derive(Debug, Clone, Default)]
struct Tally {
    rejections: u64,
    singular: u64,
    first_error: Option<(u64, Error)>,
}

impl Tally {
    fn merge(mut self, other: Tally) -> Tally {
        self.rejections += other.rejections;
        self.singular += other.singular;
        self.first_error = match (self.first_error, other.first_error) {
            (Some(a), Some(b)) => Some(if a.0 <= b.0 { a } else { b }),
            (a, b) => a.or(b),
        };
        self
    }
}

fn run_replication(cfg: &SimConfig, index: u64, map: Option<&AffineMap>) -> Tally {
    let rep = cfg.seed.child(index);
    let outcome = sample_alternative(&cfg.model, cfg.n_obs, cfg.dim, &mut rep.child(0).rng())
        .and_then(|x| match map {
            Some(m) => m.apply(&x),
            None => Ok(x),
        })
        .and_then(|x| stiefel_residual(&x))
        .and_then(|u| mvn_test_residual(&u, &cfg.test_config(rep.child(1))));
    match outcome {
        Ok(report) => Tally {
            rejections: report.reject as u64,
            ..Tally::default()
        },
        Err(Error::SingularCovariance | Error::OrthonormalityDefect { .. }) => Tally {
            singular: 1,
            ..Tally::default()
        },
        Err(e) => Tally {
            first_error: Some((index, e)),
            ..Tally::default()
        },
    }
}

/// Rejection rate of the test over `cfg.replications` simulated samples.
pub fn run_experiment(cfg: &SimConfig) -> Result<SimResult> {
    run_experiment_inner(cfg, None)
}

/// As [`run_experiment`], with every simulated sample pushed through `map`
/// before testing.
pub fn run_experiment_mapped(cfg: &SimConfig, map: &AffineMap) -> Result<SimResult> {
    if map.mean.len() != cfg.dim {
        return Err(Error::DimensionMismatch {
            expected: format!("{}-dimensional map", cfg.dim),
            actual: format!("{}-dimensional map", map.mean.len()),
        });
    }
    run_experiment_inner(cfg, Some(map))
}

fn run_experiment_inner(cfg: &SimConfig, map: Option<&AffineMap>) -> Result<SimResult> {
    cfg.validate()?;
    let start = Instant::now();
    let tally = map_reduce(
        cfg.replications,
        cfg.workers,
        Tally::default(),
        |i| run_replication(cfg, i, map),
        Tally::merge,
    );
    if let Some((_, e)) = tally.first_error {
        return Err(e);
    }
    let valid = cfg.replications - tally.singular;
    let rate = if valid == 0 {
        0.0
    } else {
        tally.rejections as f64 / valid as f64
    };
    Ok(SimResult {
        rejection_rate: rate,
        rejections: tally.rejections,
        replications: cfg.replications,
        singular_count: tally.singular,
        std_error: binomial_std_error(rate, valid),
        wall_time_seconds: start.elapsed().as_secs_f64(),
        config: *cfg,
    })
}

/// Rejection proportion of the test on fixed data over `repeats` seeds
/// `cfg.seed.child(0..repeats)`.
pub fn repeat_stability(x: &Sample, cfg: &TestConfig, repeats: u64) -> Result<f64> {
    repeat_stability_with_workers(x, cfg, repeats, crate::exec::default_workers())
}

pub fn repeat_stability_with_workers(x: &Sample, cfg: &TestConfig, repeats: u64, workers: usize) -> Result<f64> {
    if repeats == 0 {
        return Err(Error::InvalidConfig("repeats must be at least 1".into()));
    }
    cfg.validate()?;
    let u = stiefel_residual(x)?;
    cfg.check_entry_count(u.n() * u.p())?;
    let tally = map_reduce(
        repeats,
        workers.max(1),
        Tally::default(),
        |i| {
            let run = TestConfig {
                seed: cfg.seed.child(i),
                ..*cfg
            };
            match mvn_test_residual(&u, &run) {
                Ok(r) => Tally {
                    rejections: r.reject as u64,
                    ..Tally::default()
                },
                Err(e) => Tally {
                    first_error: Some((i, e)),
                    ..Tally::default()
                },
            }
        },
        Tally::merge,
    );
    if let Some((_, e)) = tally.first_error {
        return Err(e);
    }
    Ok(tally.rejections as f64 / repeats as f64)
}

/// Pools the `np` entries of `U A^{1/2}` from `samples` independent normal
/// datasets and measures their KS distance from N(0, 1).
pub fn transformed_entries_ks(
    n_obs: usize,
    dim: usize,
    samples: u64,
    seed: RngSeedSpec,
    alpha: f64,
) -> Result<KsOutcome> {
    let chunks: Vec<Result<Vec<f64>>> = map_reduce(
        samples,
        crate::exec::default_workers(),
        Vec::new(),
        |i| {
            let rep = seed.child(i);
            let entries = sample_alternative(&AlternativeModel::NullMvn, n_obs, dim, &mut rep.child(0).rng())
                .and_then(|x| stiefel_residual(&x))
                .and_then(|u| {
                    let a = replicate_wishart(&u, rep.child(1), 0)?;
                    transform(&u, &a)
                })
                .map(|y| y.as_slice().to_vec());
            vec![(i, entries)]
        },
        |mut a, b| {
            a.extend(b);
            a
        },
    )
    .into_iter()
    .map(|(_, e)| e)
    .collect();
    let mut pooled = Vec::with_capacity(samples as usize * (n_obs - 1) * dim);
    for chunk in chunks {
        pooled.extend(chunk?);
    }
    let normal = Normal::standard();
    Ok(KsOutcome::new(&pooled, |v| normal.cdf(v), alpha))
}

/// For `p = 1` the squared first coordinate of `U` is Beta(1/2, (n-1)/2)
/// distributed under normality; returns its KS distance over `draws` samples.
pub fn stiefel_first_coordinate_ks(n_obs: usize, draws: u64, seed: RngSeedSpec, alpha: f64) -> Result<KsOutcome> {
    if n_obs < 3 {
        return Err(Error::InvalidSize(format!("need N >= 3, got {n_obs}")));
    }
    let n = (n_obs - 1) as f64;
    let mut values = Vec::with_capacity(draws as usize);
    for i in 0..draws {
        let x = sample_alternative(&AlternativeModel::NullMvn, n_obs, 1, &mut seed.child(i).rng())?;
        let u = stiefel_residual(&x)?;
        values.push(u.u()[(0, 0)].powi(2));
    }
    let beta = Beta::new(0.5, (n - 1.0) / 2.0).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    Ok(KsOutcome::new(&values, |v| beta.cdf(v), alpha))
}

/// One cell of a simulation table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableCell {
    pub row: usize,
    pub col: usize,
    pub config: SimConfig,
    pub result: std::result::Result<SimResult, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTable {
    pub title: String,
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    pub cells: Vec<TableCell>,
}

impl SimTable {
    pub fn cell(&self, row: usize, col: usize) -> Option<&TableCell> {
        self.cells.iter().find(|c| c.row == row && c.col == col)
    }

    /// Looks a cell up by its configuration (ignoring seed, replications and workers).
    pub fn find(
        &self,
        model: &AlternativeModel,
        n_obs: usize,
        dim: usize,
        method: UnivariateMethod,
        m: usize,
    ) -> Option<&TableCell> {
        self.cells.iter().find(|c| {
            let k = &c.config;
            k.model == *model && k.n_obs == n_obs && k.dim == dim && k.method == method && k.m == m
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for cell in &self.cells {
            match &cell.result {
                Ok(r) => out.push_str(&r.csv_record()),
                Err(_) => {
                    let c = &cell.config;
                    let _ = write!(
                        out,
                        "{},{},{},{},{},{},{},NaN,NaN,,{}",
                        c.model.label(),
                        c.n_obs,
                        c.dim,
                        c.m,
                        c.alpha,
                        c.method.name(),
                        c.replications,
                        c.seed.root_seed
                    );
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("tables serialize")
    }

    /// Aligned text grid with rejection rates in percent and standard errors
    /// in parentheses.
    pub fn to_text(&self) -> String {
        const ROW_W: usize = 20;
        const COL_W: usize = 15;
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.title);
        let _ = writeln!(
            out,
            "(rejection rate in percent, standard error in parentheses; N = sample size)"
        );
        let _ = write!(out, "{:<ROW_W$}", "");
        for label in &self.col_labels {
            let _ = write!(out, "{label:>COL_W$}");
        }
        out.push('\n');
        let _ = writeln!(out, "{}", "-".repeat(ROW_W + COL_W * self.col_labels.len()));
        for (r, label) in self.row_labels.iter().enumerate() {
            let _ = write!(out, "{label:<ROW_W$}");
            for c in 0..self.col_labels.len() {
                let text = match self.cell(r, c).map(|cell| &cell.result) {
                    Some(Ok(res)) => format!("{:.2} ({:.2})", 100.0 * res.rejection_rate, 100.0 * res.std_error),
                    Some(Err(_)) => "ERR".to_string(),
                    None => "-".to_string(),
                };
                let _ = write!(out, "{text:>COL_W$}");
            }
            out.push('\n');
        }
        for cell in &self.cells {
            if let Err(e) = &cell.result {
                let _ = writeln!(
                    out,
                    "error in {} / {}: {e}",
                    self.row_labels[cell.row], self.col_labels[cell.col]
                );
            }
        }
        out
    }
}

fn row_label(cfg: &SimConfig) -> String {
    format!("{} p={} N={}", cfg.model, cfg.dim, cfg.n_obs)
}

/// Runs each configuration and lays the results out as rows
/// (model, p, N) by columns (method, m), in first-seen order. Failing cells
/// keep their error message instead of aborting the table.
pub fn run_table(title: &str, specs: &[SimConfig]) -> Result<SimTable> {
    run_table_with_progress(title, specs, |_, _| {})
}

/// As [`run_table`], calling `progress(index, cell)` after each cell.
pub fn run_table_with_progress<F>(title: &str, specs: &[SimConfig], mut progress: F) -> Result<SimTable>
where
    F: FnMut(usize, &TableCell),
{
    if specs.is_empty() {
        return Err(Error::InvalidConfig("table specification is empty".into()));
    }
    let mut row_labels: Vec<String> = Vec::new();
    let mut col_labels: Vec<String> = Vec::new();
    let mut cells = Vec::with_capacity(specs.len());
    for cfg in specs {
        let rl = row_label(cfg);
        let cl = cfg.column_label();
        let row = position_or_push(&mut row_labels, rl);
        let col = position_or_push(&mut col_labels, cl);
        let result = run_experiment(cfg).map_err(|e| e.to_string());
        cells.push(TableCell {
            row,
            col,
            config: *cfg,
            result,
        });
        progress(cells.len() - 1, &cells[cells.len() - 1]);
    }
    Ok(SimTable {
        title: title.to_string(),
        row_labels,
        col_labels,
        cells,
    })
}

fn position_or_push(labels: &mut Vec<String>, label: String) -> usize {
    labels.iter().position(|l| *l == label).unwrap_or_else(|| {
        labels.push(label);
        labels.len() - 1
    })
}

/// Seed of a table row; all columns of a row share data and Wishart streams.
pub fn cell_seed(root_seed: u64, model: &AlternativeModel, n_obs: usize, dim: usize) -> RngSeedSpec {
    // FNV-1a over the row key.
    let key = format!("{}|{n_obs}|{dim}", model.label());
    let stream = key.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    });
    RngSeedSpec::with_stream(root_seed, stream)
}

pub const TABLE_SAMPLE_SIZES: [usize; 3] = [10, 20, 30];
pub const TABLE_REPLICATES: [usize; 3] = [1, 3, 5];

/// Models of the power tables, in table order.
pub fn power_models() -> [AlternativeModel; 4] {
    [
        AlternativeModel::student_t(),
        AlternativeModel::normal_mixture(),
        AlternativeModel::Lognormal,
        AlternativeModel::pearson_type2(),
    ]
}

fn grid(
    models: &[AlternativeModel],
    dims: &[usize],
    replications: u64,
    root_seed: u64,
    workers: usize,
) -> Vec<SimConfig> {
    let mut out = Vec::new();
    for &dim in dims {
        for model in models {
            for &n_obs in &TABLE_SAMPLE_SIZES {
                for method in [UnivariateMethod::AndersonDarling, UnivariateMethod::ShapiroWilk] {
                    for &m in &TABLE_REPLICATES {
                        out.push(SimConfig {
                            model: *model,
                            n_obs,
                            dim,
                            m,
                            alpha: 0.05,
                            method,
                            replications,
                            seed: cell_seed(root_seed, model, n_obs, dim),
                            workers,
                        });
                    }
                }
            }
        }
    }
    out
}

/// Type I error grid: p in {2, 3}, N in {10, 20, 30}, AD/SW with m in {1, 3, 5}.
pub fn table1_spec(replications: u64, root_seed: u64, workers: usize) -> Vec<SimConfig> {
    grid(&[AlternativeModel::NullMvn], &[2, 3], replications, root_seed, workers)
}

/// Power grid for p = 2.
pub fn table2_spec(replications: u64, root_seed: u64, workers: usize) -> Vec<SimConfig> {
    grid(&power_models(), &[2], replications, root_seed, workers)
}

/// Power grid for p = 3.
pub fn table3_spec(replications: u64, root_seed: u64, workers: usize) -> Vec<SimConfig> {
    grid(&power_models(), &[3], replications, root_seed, workers)
}

pub fn table_spec(table: u8, replications: u64, root_seed: u64, workers: usize) -> Result<(String, Vec<SimConfig>)> {
    match table {
        1 => Ok((
            "Table 1: empirical Type I error, alpha = 0.05".into(),
            table1_spec(replications, root_seed, workers),
        )),
        2 => Ok((
            "Table 2: empirical power, p = 2, alpha = 0.05".into(),
            table2_spec(replications, root_seed, workers),
        )),
        3 => Ok((
            "Table 3: empirical power, p = 3, alpha = 0.05".into(),
            table3_spec(replications, root_seed, workers),
        )),
        other => Err(Error::InvalidConfig(format!(
            "unknown table {other}; expected 1, 2 or 3"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base(replications: u64) -> SimConfig {
        SimConfig {
            model: AlternativeModel::NullMvn,
            n_obs: 20,
            dim: 2,
            m: 1,
            alpha: 0.05,
            method: UnivariateMethod::ShapiroWilk,
            replications,
            seed: RngSeedSpec::new(5),
            workers: 1,
        }
    }

    #[test]
    fn validation() {
        assert!(base(99).validate().is_err());
        assert!(SimConfig {
            alpha: 1.5,
            ..base(100)
        }
        .validate()
        .is_err());
        assert!(SimConfig {
            workers: 0,
            ..base(100)
        }
        .validate()
        .is_err());
        assert!(SimConfig { n_obs: 2, ..base(100) }.validate().is_err());
        assert!(SimConfig {
            n_obs: 4,
            dim: 2,
            method: UnivariateMethod::AndersonDarling,
            ..base(100)
        }
        .validate()
        .is_err());
        assert!(base(100).validate().is_ok());
    }

    #[test]
    fn tiny_alpha_never_rejects() {
        let r = run_experiment(&SimConfig {
            alpha: 1e-12,
            n_obs: 31,
            ..base(2000)
        })
        .unwrap();
        assert_eq!(r.rejections, 0);
        assert_eq!(r.rejection_rate, 0.0);
    }

    #[test]
    fn std_error_consistent() {
        let r = run_experiment(&base(1000)).unwrap();
        assert_eq!(
            r.std_error,
            binomial_std_error(r.rejection_rate, r.valid_replications())
        );
        assert_eq!(r.rejection_rate, r.rejections as f64 / 1000.0);
    }

    #[test]
    fn worker_count_does_not_change_counts() {
        let one = run_experiment(&base(3000)).unwrap();
        let many = run_experiment(&SimConfig {
            workers: 8,
            ..base(3000)
        })
        .unwrap();
        assert_eq!(one.rejections, many.rejections);
        assert_eq!(one.singular_count, many.singular_count);
    }

    #[test]
    fn table_structure() {
        assert!(run_table("empty", &[]).is_err());
        assert_eq!(table1_spec(100, 1, 1).len(), 36);
        assert_eq!(table2_spec(100, 1, 1).len(), 72);
        let spec: Vec<SimConfig> = table1_spec(100, 1, 4).into_iter().take(12).collect();
        let t = run_table("t", &spec).unwrap();
        assert_eq!(t.col_labels, vec!["AD_1", "AD_3", "AD_5", "SW_1", "SW_3", "SW_5"]);
        assert_eq!(t.row_labels.len(), 2);
        let csv = t.to_csv();
        assert!(csv.starts_with(CSV_HEADER));
        assert_eq!(csv.lines().count(), 13);
        assert!(t.to_text().contains("SW_5"));
        let back: SimTable = serde_json::from_str(&t.to_json()).unwrap();
        assert_eq!(back.cells.len(), 12);
    }

    #[test]
    fn failing_cell_is_recorded() {
        let mut bad = base(100);
        bad.n_obs = 2;
        let t = run_table("t", &[base(100), bad]).unwrap();
        assert!(t.cells[0].result.is_ok());
        assert!(t.cells[1].result.is_err());
        assert!(t.to_text().contains("ERR"));
        assert!(t.to_csv().lines().nth(2).unwrap().contains("NaN"));
    }

    #[test]
    fn singular_models_are_counted_not_fatal() {
        // N = p + 1 makes U square; still valid. Degenerate data come from an
        // affine map that collapses a direction.
        let map = AffineMap {
            mean: DVector::zeros(2),
            factor: DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 0.0]),
        };
        let r = run_experiment_mapped(&base(200), &map).unwrap();
        assert_eq!(r.singular_count, 200);
        assert_eq!(r.rejection_rate, 0.0);
    }

    #[test]
    fn stability_bounds() {
        let x = sample_alternative(&AlternativeModel::NullMvn, 20, 2, &mut RngSeedSpec::new(1).rng()).unwrap();
        let one = repeat_stability(&x, &TestConfig::default(), 1).unwrap();
        assert!(one == 0.0 || one == 1.0);
        assert!(repeat_stability(&x, &TestConfig::default(), 0).is_err());
        let a = repeat_stability_with_workers(&x, &TestConfig::default(), 300, 1).unwrap();
        let b = repeat_stability_with_workers(&x, &TestConfig::default(), 300, 6).unwrap();
        assert_eq!(a, b);
    }
}
