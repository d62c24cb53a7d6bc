//! Argument definitions.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use robustkf_core::{sim, FilterNoise, ModelChoice, NoiseCase};

#[derive(Debug, Parser)]
#[command(
    name = "robustkf",
    version,
    about = "Kalman vs. maximum correntropy Kalman filter benchmarks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one experiment; write MSE, iteration and error-density tables.
    Simulate(ExperimentArgs),
    /// Sweep a sigma x epsilon grid; write MSE and iteration tables.
    Bench(ExperimentArgs),
    /// Print the sufficient-bandwidth certificate at one time step.
    Diagnose(DiagnoseArgs),
    /// Evaluate the per-step flop polynomials.
    Flops(FlopsArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NoiseArg {
    Gaussian,
    /// Impulsive measurement noise, Gaussian process noise.
    #[value(alias = "impulsive-measurement")]
    Impulsive,
    /// Impulsive process and measurement noise.
    ImpulsiveBoth,
}

impl From<NoiseArg> for NoiseCase {
    fn from(n: NoiseArg) -> Self {
        match n {
            NoiseArg::Gaussian => NoiseCase::Gaussian,
            NoiseArg::Impulsive => NoiseCase::ImpulsiveMeasurement,
            NoiseArg::ImpulsiveBoth => NoiseCase::ImpulsiveBoth,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FilterNoiseArg {
    /// Filters assume the exact second moments of the simulated noise.
    Matched,
    /// Filters assume the model's nominal Q and R.
    Nominal,
}

impl From<FilterNoiseArg> for FilterNoise {
    fn from(f: FilterNoiseArg) -> Self {
        match f {
            FilterNoiseArg::Matched => FilterNoise::Matched,
            FilterNoiseArg::Nominal => FilterNoise::Nominal,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

pub(crate) fn example_model(example: u8) -> ModelChoice {
    match example {
        1 => ModelChoice::Example1 {
            theta: sim::DEFAULT_THETA,
        },
        _ => ModelChoice::Example2 {
            dt: sim::DEFAULT_DT,
        },
    }
}

fn parse_positive(s: &str) -> Result<f64, String> {
    match s.trim().parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("expected a positive number, got {s:?}")),
    }
}

fn parse_unit_interval(s: &str) -> Result<f64, String> {
    match s.trim().parse::<f64>() {
        Ok(v) if v > 0.0 && v < 1.0 => Ok(v),
        _ => Err(format!("expected a number in (0, 1), got {s:?}")),
    }
}

#[derive(Debug, Clone, Args)]
pub struct ExperimentArgs {
    /// JSON experiment configuration; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Master seed (overrides ROBUSTKF_SEED and the config file).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Built-in system: 1 = rotating 2-D state, 2 = speed-observed target.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub example: Option<u8>,
    #[arg(long, value_enum)]
    pub noise: Option<NoiseArg>,
    /// Comma-separated kernel bandwidths.
    #[arg(long, value_delimiter = ',', value_parser = parse_positive)]
    pub sigma: Vec<f64>,
    /// Comma-separated fixed-point thresholds.
    #[arg(long, value_delimiter = ',', value_parser = parse_positive)]
    pub epsilon: Vec<f64>,
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Noise covariances the filters assume.
    #[arg(long, value_enum)]
    pub filter_noise: Option<FilterNoiseArg>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Histogram bins for the error densities.
    #[arg(long, default_value_t = 101)]
    pub bins: usize,
    /// Half-width of the histogram range (default: 3 for example 1, 25 otherwise).
    #[arg(long, value_parser = parse_positive)]
    pub density_range: Option<f64>,
}

impl Default for ExperimentArgs {
    fn default() -> Self {
        Self {
            config: None,
            out: PathBuf::from("."),
            seed: None,
            example: None,
            noise: None,
            sigma: Vec::new(),
            epsilon: Vec::new(),
            runs: None,
            steps: None,
            filter_noise: None,
            format: Format::Csv,
            bins: 101,
            density_range: None,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct DiagnoseArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Also write certificate.json into this directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub example: Option<u8>,
    #[arg(long, value_enum)]
    pub noise: Option<NoiseArg>,
    #[arg(long, value_enum)]
    pub filter_noise: Option<FilterNoiseArg>,
    /// Bandwidth the filter runs with.
    #[arg(long, default_value_t = 2.0, value_parser = parse_positive)]
    pub sigma: f64,
    #[arg(long, default_value_t = 1e-6, value_parser = parse_positive)]
    pub epsilon: f64,
    /// Monte Carlo run to replay (0-based).
    #[arg(long, default_value_t = 0)]
    pub run: usize,
    /// Time step whose measurement update is examined (1-based).
    #[arg(long, default_value_t = 1)]
    pub step: usize,
    /// Contraction target for the Jacobian 1-norm.
    #[arg(long, default_value_t = 0.5, value_parser = parse_unit_interval)]
    pub alpha: f64,
    /// Radius of the ball the iterates must stay in (default 2·max(ζ, ‖x̂⁻‖₁)).
    #[arg(long, value_parser = parse_positive)]
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct FlopsArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub m: usize,
    /// Average fixed-point iterations per step.
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}
