use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use tlcp_core::lattice::parse_site_list;

#[derive(Parser, Debug)]
#[command(
    name = "tlcp",
    version,
    about = "Simulation and estimation tools for the two-level contact process"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Forward run from a given start; writes the change log.
    #[command(args_override_self = true, allow_negative_numbers = true)]
    Simulate(SimulateArgs),
    /// Compares forward and dual hitting probabilities.
    #[command(args_override_self = true, allow_negative_numbers = true)]
    DualCheck(DualCheckArgs),
    /// Estimates the block events with boundary counts and path diagnostics.
    #[command(args_override_self = true, allow_negative_numbers = true)]
    BlockEstimate(BlockArgs),
    /// Oriented percolation edges and densities, or a threshold sweep.
    #[command(args_override_self = true, allow_negative_numbers = true)]
    OpCompare(OpArgs),
    /// Exact transient law on a small line segment against simulation.
    #[command(args_override_self = true, allow_negative_numbers = true)]
    OracleCheck(OracleArgs),
    /// Factorization of hitting probabilities at growing times.
    #[command(args_override_self = true, allow_negative_numbers = true)]
    Converge(ConvergeArgs),
    /// Flea survival along a grid of μ values on coupled logs.
    #[command(args_override_self = true, allow_negative_numbers = true)]
    Scan(ScanArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::DualCheck(_) => "dual-check",
            Command::BlockEstimate(_) => "block-estimate",
            Command::OpCompare(_) => "op-compare",
            Command::OracleCheck(_) => "oracle-check",
            Command::Converge(_) => "converge",
            Command::Scan(_) => "scan",
        }
    }

    pub fn common(&self) -> &Common {
        match self {
            Command::Simulate(a) => &a.common,
            Command::DualCheck(a) => &a.common,
            Command::BlockEstimate(a) => &a.common,
            Command::OpCompare(a) => &a.common,
            Command::OracleCheck(a) => &a.common,
            Command::Converge(a) => &a.common,
            Command::Scan(a) => &a.common,
        }
    }

    /// Flags as recorded in output headers.
    pub fn config(&self) -> serde_json::Value {
        let v = match self {
            Command::Simulate(a) => serde_json::to_value(a),
            Command::DualCheck(a) => serde_json::to_value(a),
            Command::BlockEstimate(a) => serde_json::to_value(a),
            Command::OpCompare(a) => serde_json::to_value(a),
            Command::OracleCheck(a) => serde_json::to_value(a),
            Command::Converge(a) => serde_json::to_value(a),
            Command::Scan(a) => serde_json::to_value(a),
        };
        v.expect("flags serialize")
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct Common {
    /// Base seed, or `auto` to draw one from system entropy.
    #[arg(long)]
    #[serde(skip)]
    pub seed: Option<String>,
    /// Worker threads for replicate parallelism.
    #[arg(long)]
    #[serde(skip)]
    pub threads: Option<usize>,
    /// Output file; standard output when absent.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// File of `key=value` lines; command-line flags take precedence.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Confidence level of reported intervals.
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
}

/// Site list written as `x1,..,xd;y1,..,yd`.
#[derive(Clone, Debug, PartialEq)]
pub struct Sites(pub Vec<Vec<i32>>);

impl Serialize for Sites {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let parts: Vec<String> = self
            .0
            .iter()
            .map(|c| {
                c.iter()
                    .map(|v| v.to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            })
            .collect();
        s.serialize_str(&parts.join(";"))
    }
}

/// Comma-separated reals.
#[derive(Clone, Debug, PartialEq)]
pub struct Reals(pub Vec<f64>);

impl Serialize for Reals {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let parts: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
        s.serialize_str(&parts.join(","))
    }
}

pub fn sites(s: &str) -> Result<Sites, String> {
    parse_site_list(s).map(Sites).map_err(|e| e.to_string())
}

pub fn reals(s: &str) -> Result<Reals, String> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| format!("bad number {t:?}"))
        })
        .collect::<Result<_, _>>()
        .map(Reals)
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct ModelArgs {
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    /// Window is `[-radius, radius]^dim`.
    #[arg(long)]
    pub radius: u32,
    /// Births only from sites with sup-norm below this value.
    #[arg(long)]
    pub truncation: Option<u32>,
    #[arg(long)]
    pub lambda: f64,
    #[arg(long)]
    pub mu: f64,
    #[arg(long)]
    pub delta: f64,
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub t_max: f64,
    /// Animal burn-in length before time 0 (used by `--animals upper`).
    #[arg(long, default_value_t = 0.0)]
    pub burn_in: f64,
    /// `all`, `none`, `upper` (burn-in from all sites) or a site list like `0,0;1,0`.
    #[arg(long, default_value = "all", allow_hyphen_values = true)]
    pub animals: String,
    /// Initial flea sites.
    #[arg(long, value_parser = sites, allow_hyphen_values = true, default_value = "0")]
    pub fleas: Sites,
    /// Start from a configuration file instead of `--animals`/`--fleas`.
    #[arg(long)]
    pub init: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DualMode {
    Distributional,
    Pathwise,
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct DualCheckArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum, default_value_t = DualMode::Distributional)]
    pub mode: DualMode,
    /// Time horizon (largest horizon in pathwise mode).
    #[arg(long)]
    pub t: f64,
    #[arg(long, default_value_t = 5.0)]
    pub burn_in: f64,
    /// Initial flea sites.
    #[serde(rename = "B")]
    #[arg(long = "B", value_parser = sites, allow_hyphen_values = true, default_value = "0")]
    pub b: Sites,
    /// Animal target sites.
    #[serde(rename = "C")]
    #[arg(long = "C", value_parser = sites, allow_hyphen_values = true, default_value = "0")]
    pub c: Sites,
    /// Flea target sites.
    #[serde(rename = "D")]
    #[arg(long = "D", value_parser = sites, allow_hyphen_values = true, default_value = "0")]
    pub d: Sites,
    /// Replicates (random cases in pathwise mode).
    #[arg(long)]
    pub reps: u64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct BlockArgs {
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    #[arg(long)]
    pub n: u32,
    #[serde(rename = "L")]
    #[arg(long = "L")]
    pub l: u32,
    #[serde(rename = "T")]
    #[arg(long = "T")]
    pub t: f64,
    #[arg(long)]
    pub lambda: f64,
    #[arg(long)]
    pub mu: f64,
    #[arg(long)]
    pub delta: f64,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 5.0)]
    pub burn_in: f64,
    #[arg(long)]
    pub reps: u64,
    /// Read the events off the flea dual anchored at `--anchor`.
    #[arg(long)]
    pub dual: bool,
    #[arg(long, default_value_t = 0.0)]
    pub anchor: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct OpArgs {
    #[arg(long, default_value_t = 0.9)]
    pub p: f64,
    #[arg(long)]
    pub rows: u32,
    #[arg(long)]
    pub reps: u64,
    /// Rows reported per replicate: every `log_every`-th (default rows/10).
    #[arg(long)]
    pub log_every: Option<u32>,
    /// Sweep survival at `p = 1 - ε` for each listed ε instead.
    #[arg(long, value_parser = reals)]
    pub epsilons: Option<Reals>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct OracleArgs {
    /// Number of sites on the segment `{0, …, k-1}`.
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.0)]
    pub mu: f64,
    #[arg(long)]
    pub delta: f64,
    /// Comma-separated times.
    #[arg(long, value_parser = reals)]
    pub t: Reals,
    /// Simulated replicates; 0 reports the exact law only.
    #[arg(long, default_value_t = 0)]
    pub reps: u64,
    /// Initial state digits, site 0 first; default all 3.
    #[arg(long)]
    pub init: Option<String>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct ConvergeArgs {
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    #[serde(rename = "B")]
    #[arg(long = "B", value_parser = sites, allow_hyphen_values = true)]
    pub b: Sites,
    #[serde(rename = "D")]
    #[arg(long = "D", value_parser = sites, allow_hyphen_values = true)]
    pub d: Sites,
    #[arg(long, value_parser = reals)]
    pub t_grid: Reals,
    #[arg(long)]
    pub lambda: f64,
    #[arg(long)]
    pub mu: f64,
    #[arg(long)]
    pub delta: f64,
    #[arg(long)]
    pub reps: u64,
    #[arg(long, default_value_t = 10.0)]
    pub burn_in: f64,
    /// Window radius; chosen from the padding rule when absent.
    #[arg(long)]
    pub radius: Option<u32>,
    /// Speed constant of the padding rule; defaults to λ.
    #[arg(long)]
    pub speed: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct ScanArgs {
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    #[arg(long)]
    pub radius: u32,
    #[arg(long)]
    pub lambda: f64,
    #[arg(long)]
    pub delta: f64,
    #[arg(long, value_parser = reals)]
    pub mu_grid: Reals,
    #[arg(long)]
    pub horizon: f64,
    #[arg(long, default_value_t = 10.0)]
    pub burn_in: f64,
    /// Fleas start on `[-n, n]^dim`.
    #[arg(long, default_value_t = 1)]
    pub n: u32,
    #[arg(long)]
    pub reps: u64,
    #[command(flatten)]
    pub common: Common,
}
