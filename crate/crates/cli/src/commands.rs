//! Argument definitions and subcommand drivers.

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use stiefel_mvn::exec::default_workers;
use stiefel_mvn::harness::{repeat_stability_with_workers, run_table_with_progress, table_spec};
use stiefel_mvn::{AlternativeModel, RngSeedSpec, SimConfig, TestConfig, UnivariateMethod};

use crate::dataset::{load_csv, ColumnRef, Dataset, DatasetFile};

pub const SEED_ENV: &str = "STIEFEL_MVN_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "stiefel-mvn",
    version,
    about = "Exact multivariate normality test based on Stiefel-uniform scaled residuals"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Test one dataset for multivariate normality.
    Test(TestArgs),
    /// Rejection proportion of the randomized test over many seeds.
    Stability(StabilityArgs),
    /// Monte Carlo Type I error and power tables.
    Simulate(SimulateArgs),
}

fn parse_method(s: &str) -> std::result::Result<UnivariateMethod, String> {
    UnivariateMethod::parse(s).map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// CSV file, one observation per row.
    pub path: PathBuf,
    /// Columns to use, by header name or zero-based index (default: numeric columns).
    #[arg(long, value_delimiter = ',')]
    pub columns: Option<Vec<String>>,
    /// The file has no header row.
    #[arg(long)]
    pub no_header: bool,
}

impl DataArgs {
    pub fn dataset_file(&self) -> DatasetFile {
        DatasetFile {
            path: self.path.clone(),
            has_header: !self.no_header,
            columns: self
                .columns
                .as_ref()
                .map(|c| c.iter().map(|s| ColumnRef::parse(s)).collect()),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct TestOptions {
    /// Univariate test applied to the transformed entries (ad or sw).
    #[arg(long, default_value = "sw", value_parser = parse_method)]
    pub method: UnivariateMethod,
    /// Number of Wishart replicates.
    #[arg(long = "m", default_value_t = 1)]
    pub m: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: available cores).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Also write the result as JSON to this path.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

impl TestOptions {
    fn config(&self) -> Result<TestConfig> {
        let cfg = TestConfig {
            m: self.m,
            alpha: self.alpha,
            method: self.method,
            seed: RngSeedSpec::new(self.seed),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn workers(&self) -> usize {
        self.workers.unwrap_or_else(default_workers).max(1)
    }
}

#[derive(Debug, Clone, Args)]
pub struct TestArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub options: TestOptions,
    /// Also report the rejection proportion over this many seeds.
    #[arg(long, default_value_t = 1)]
    pub repeats: u64,
}

#[derive(Debug, Clone, Args)]
pub struct StabilityArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub options: TestOptions,
    #[arg(long, default_value_t = 500)]
    pub repeats: u64,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Standard grid: 1 = Type I error (p = 2, 3), 2 = power for p = 2, 3 = power for p = 3.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3), conflicts_with_all = ["config", "model"])]
    pub table: Option<u8>,
    /// JSON file holding a list of simulation configurations.
    #[arg(long, conflicts_with = "model")]
    pub config: Option<PathBuf>,
    /// Single configuration: null, t[:df], pearson2[:shape], lognormal, mixture[:w:s:rho].
    #[arg(long)]
    pub model: Option<String>,
    /// Sample size N of the single configuration.
    #[arg(long, default_value_t = 20)]
    pub n_obs: usize,
    /// Dimension p of the single configuration.
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long = "m", default_value_t = 1)]
    pub m: usize,
    #[arg(long, default_value = "sw", value_parser = parse_method)]
    pub method: UnivariateMethod,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Monte Carlo replications per cell (default: 1e5 for `--table 1`, 1e4 otherwise).
    #[arg(long)]
    pub reps: Option<u64>,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Test(args) => cmd_test(&args, out, err),
        Command::Stability(args) => cmd_stability(&args, out),
        Command::Simulate(args) => cmd_simulate(&args, out, err),
    }
}

fn load(data: &DataArgs) -> Result<Dataset> {
    Ok(load_csv(&data.dataset_file())?)
}

fn dataset_json(data: &DataArgs, ds: &Dataset) -> serde_json::Value {
    json!({
        "path": data.path.display().to_string(),
        "N": ds.sample.n_obs(),
        "p": ds.sample.dim(),
        "columns": ds.columns,
    })
}

fn write_json(path: &PathBuf, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("cannot write {}", path.display()))
}

fn dataset_line(data: &DataArgs, ds: &Dataset) -> String {
    format!(
        "dataset {}: N = {}, p = {} (columns: {})",
        data.path.display(),
        ds.sample.n_obs(),
        ds.sample.dim(),
        ds.columns.join(", ")
    )
}

pub fn cmd_test(args: &TestArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let cfg = args.options.config()?;
    if args.repeats == 0 {
        bail!("--repeats must be at least 1");
    }
    let ds = load(&args.data)?;
    let report = stiefel_mvn::mvn_test(&ds.sample, &cfg)?;
    writeln!(out, "{}", dataset_line(&args.data, &ds))?;
    writeln!(out, "{report}")?;

    let stability = if args.repeats > 1 {
        let prop = repeat_stability_with_workers(&ds.sample, &cfg, args.repeats, args.options.workers())?;
        writeln!(
            out,
            "  stability         rejected for {prop:.4} of {} seeds",
            args.repeats
        )?;
        Some(json!({ "repeats": args.repeats, "proportion": prop }))
    } else {
        writeln!(
            err,
            "note: the test is randomized; the decision can change with --seed. \
             Use --repeats N or the `stability` subcommand to see the rejection proportion over seeds."
        )?;
        None
    };
    if let Some(path) = &args.options.json {
        let value = json!({
            "dataset": dataset_json(&args.data, &ds),
            "report": report,
            "stability": stability,
        });
        write_json(path, &value)?;
    }
    Ok(())
}

pub fn cmd_stability(args: &StabilityArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = args.options.config()?;
    if args.repeats == 0 {
        bail!("--repeats must be at least 1");
    }
    let ds = load(&args.data)?;
    stiefel_mvn::mvn_test(&ds.sample, &cfg)?;
    let prop = repeat_stability_with_workers(&ds.sample, &cfg, args.repeats, args.options.workers())?;
    writeln!(out, "{}", dataset_line(&args.data, &ds))?;
    writeln!(
        out,
        "{} with m = {}, alpha = {}: rejected for {prop:.4} of {} seeds (root seed {})",
        cfg.method, cfg.m, cfg.alpha, args.repeats, args.options.seed
    )?;
    if let Some(path) = &args.options.json {
        let value = json!({
            "dataset": dataset_json(&args.data, &ds),
            "config": cfg,
            "repeats": args.repeats,
            "proportion": prop,
        });
        write_json(path, &value)?;
    }
    Ok(())
}

/// The configurations a `simulate` invocation describes, before any work.
pub fn simulation_specs(args: &SimulateArgs) -> Result<(String, Vec<SimConfig>)> {
    let workers = args.workers.unwrap_or_else(default_workers).max(1);
    let (title, specs) = if let Some(table) = args.table {
        let reps = args.reps.unwrap_or(if table == 1 { 100_000 } else { 10_000 });
        table_spec(table, reps, args.seed, workers)?
    } else if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let mut specs: Vec<SimConfig> = serde_json::from_str(&text)
            .with_context(|| format!("{}: expected a JSON list of configurations", path.display()))?;
        if let Some(w) = args.workers {
            specs.iter_mut().for_each(|s| s.workers = w.max(1));
        }
        (format!("Simulation from {}", path.display()), specs)
    } else if let Some(model) = &args.model {
        let cfg = SimConfig {
            model: AlternativeModel::parse(model)?,
            n_obs: args.n_obs,
            dim: args.dim,
            m: args.m,
            alpha: args.alpha,
            method: args.method,
            replications: args.reps.unwrap_or(10_000),
            seed: RngSeedSpec::new(args.seed),
            workers,
        };
        ("Simulation".to_string(), vec![cfg])
    } else {
        bail!("one of --table, --config or --model is required");
    };
    if specs.is_empty() {
        bail!("no simulation configurations given");
    }
    let problems: Vec<String> = specs
        .iter()
        .enumerate()
        .filter_map(|(i, s)| s.validate().err().map(|e| format!("  configuration {}: {e}", i + 1)))
        .collect();
    if !problems.is_empty() {
        bail!("invalid simulation configuration:\n{}", problems.join("\n"));
    }
    Ok((title, specs))
}

pub fn cmd_simulate(args: &SimulateArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let (title, specs) = simulation_specs(args)?;
    let total = specs.len();
    let start = Instant::now();
    let table = run_table_with_progress(&title, &specs, |i, cell| {
        let status = match &cell.result {
            Ok(r) => format!("{:.2}% over {} replications", 100.0 * r.rejection_rate, r.replications),
            Err(e) => format!("error: {e}"),
        };
        let _ = writeln!(
            err,
            "[{}/{total}] {} p={} N={} {}: {status}",
            i + 1,
            cell.config.model,
            cell.config.dim,
            cell.config.n_obs,
            cell.config.column_label()
        );
    })?;
    let _ = writeln!(err, "finished {total} cells in {:.1}s", start.elapsed().as_secs_f64());
    write!(out, "{}", table.to_text())?;
    if let Some(path) = &args.csv {
        std::fs::write(path, table.to_csv()).with_context(|| format!("cannot write {}", path.display()))?;
    }
    if let Some(path) = &args.json {
        std::fs::write(path, table.to_json()).with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(())
}
