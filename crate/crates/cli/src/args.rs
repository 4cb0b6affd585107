//! Flag definitions. Every value flag is optional at parse time so a
//! `--config` file can fill it in; commands report missing required values
//! as usage errors themselves.

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "ncl", version, about = "Nested-coalescent numerics")]
pub struct Cli {
    /// Output directory for artifacts
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,

    /// Flat JSON config file; explicit flags override its keys
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Merger-rate table and consistency report
    Rates(RatesArgs),
    /// Fixed points of the distributional update, with diagnostics
    Solve(SolveArgs),
    /// Monte Carlo simulation of the nested process
    Simulate(SimulateArgs),
    /// Generalized binomial coefficients and the heavy-tail bracket
    Sibuya(SibuyaArgs),
}

#[derive(Args)]
pub struct RatesArgs {
    /// Measure: `beta:<alpha>` or a JSON object
    #[arg(long)]
    pub measure: Option<String>,
    /// File holding the measure JSON
    #[arg(long)]
    pub measure_file: Option<PathBuf>,
    /// Largest block count tabulated
    #[arg(long)]
    pub bmax: Option<u64>,
}

#[derive(Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub measure: Option<String>,
    #[arg(long)]
    pub measure_file: Option<PathBuf>,
    /// Species merger rate
    #[arg(long)]
    pub c: Option<f64>,
    /// Starting point: `one` or `inf`
    #[arg(long)]
    pub from: Option<String>,
    /// Truncation point of the computed distributions
    #[arg(long)]
    pub n: Option<u64>,
    /// Total-variation stagnation tolerance
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<u64>,
    /// Tail policy: `fold-n`, `fold-inf`, or `envelope`
    #[arg(long)]
    pub policy: Option<String>,
    /// Fail (exit 3) when c >= E[1/X]
    #[arg(long)]
    pub assert_finite_mean: bool,
    /// Also export the block-count kernel as CSV
    #[arg(long)]
    pub kernel_csv: bool,
}

#[derive(Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub measure: Option<String>,
    #[arg(long)]
    pub measure_file: Option<PathBuf>,
    /// Initial species count, or a comma list for a sweep (e.g. 50,200,1000)
    #[arg(long)]
    pub s: Option<String>,
    /// Record counts just before the species count drops below m
    #[arg(long)]
    pub m: Option<u64>,
    #[arg(long)]
    pub c: Option<f64>,
    /// Initial lineage count per species: `one` or `inf`
    #[arg(long)]
    pub init: Option<String>,
    #[arg(long)]
    pub reps: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Cap for the lazily built rate table (default: s)
    #[arg(long)]
    pub b_cap: Option<u64>,
    /// A solve artifact to compare the empirical marginals against
    #[arg(long)]
    pub compare_to: Option<PathBuf>,
    /// Restriction point for the TV comparison
    #[arg(long)]
    pub k_max: Option<u64>,
}

#[derive(Args)]
pub struct SibuyaArgs {
    /// Only evaluate the coefficient asymptotics (needs --alpha)
    #[arg(long)]
    pub gamma_only: bool,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub nmax: Option<u64>,
    #[arg(long)]
    pub measure: Option<String>,
    #[arg(long)]
    pub measure_file: Option<PathBuf>,
    #[arg(long)]
    pub c: Option<f64>,
    /// Second tail exponent (defaults to the middle of the admissible range)
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub n: Option<u64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<u64>,
    /// Grid-search the construction parameters (always on; kept as a flag)
    #[arg(long)]
    pub search: bool,
}
