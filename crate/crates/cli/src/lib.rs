//! Command-line front end for the robustkf filters.
//!
//! Four subcommands:
//!
//! * `simulate` — run one Monte Carlo experiment and write `mse.csv`,
//!   `iterations.csv` and one `density_<i>.csv` per state component;
//! * `bench` — sweep a σ × ε grid of correntropy filters against the
//!   Kalman filter and write `mse.csv` and `iterations.csv`;
//! * `diagnose` — print the sufficient-bandwidth certificate for the
//!   regression solved at one time step of a simulated trajectory;
//! * `flops` — evaluate the per-step flop polynomials.
//!
//! Exit status: 0 on success, 1 on a configuration error, 2 on numerical
//! failure (for experiments: only when every run of every filter failed).

mod args;
mod output;

use std::ffi::OsString;
use std::fs;
use std::path::Path;

use clap::Parser;
use robustkf_core::{
    default_beta, flop_counts, regression_snapshot, run_monte_carlo, sufficient_sigma,
    ExperimentConfig, FilterError, FilterSpec, KernelConfig,
};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub use args::{
    Cli, Command, DiagnoseArgs, ExperimentArgs, FilterNoiseArg, FlopsArgs, Format, NoiseArg,
};

/// Environment variable overriding the seed stored in a config file.
pub const SEED_ENV: &str = "ROBUSTKF_SEED";

/// Seed used when neither a flag, the environment nor a config file sets one.
pub const DEFAULT_SEED: u64 = 1;

/// Failure of a CLI invocation, carrying its exit status.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "configuration error: {msg}"),
            CliError::Numerical(msg) => write!(f, "numerical failure: {msg}"),
        }
    }
}

impl From<FilterError> for CliError {
    fn from(e: FilterError) -> Self {
        match e {
            FilterError::Diverged { .. }
            | FilterError::SingularDesign { .. }
            | FilterError::BetaTooSmall { .. }
            | FilterError::BracketNotFound(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Config(format!("{}: {e}", path.display()))
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("robustkf: {e}");
            e.exit_code()
        }
    }
}

/// Runs a parsed command.
pub fn execute(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Simulate(a) => run_experiment(a, false),
        Command::Bench(a) => run_experiment(a, true),
        Command::Diagnose(a) => run_diagnose(a),
        Command::Flops(a) => run_flops(a),
    }
}

/// Hex SHA-256 of the canonical JSON form of the effective configuration.
pub fn config_hash(config: &ExperimentConfig) -> String {
    let canonical = serde_json::to_string(config).expect("configs always serialize");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

fn env_seed() -> Result<Option<u64>, CliError> {
    match std::env::var(SEED_ENV) {
        Ok(v) => {
            v.trim().parse().map(Some).map_err(|_| {
                CliError::Config(format!("{SEED_ENV}={v:?} is not an unsigned integer"))
            })
        }
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(CliError::Config(format!("{SEED_ENV}: {e}"))),
    }
}

fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Effective experiment configuration: config file (or defaults), then
/// flag overrides; the seed comes from `--seed`, else `ROBUSTKF_SEED`,
/// else the file, else [`DEFAULT_SEED`].
pub fn build_config(a: &ExperimentArgs, bench: bool) -> Result<ExperimentConfig, CliError> {
    let from_file = a.config.as_deref().map(load_config).transpose()?;
    let has_file = from_file.is_some();
    let mut config = from_file.unwrap_or_else(|| {
        let mut c = ExperimentConfig::new(
            args::example_model(1),
            NoiseArg::Gaussian.into(),
            DEFAULT_SEED,
        );
        c.filters.clear();
        c
    });
    if let Some(ex) = a.example {
        config.model = args::example_model(ex);
    }
    if let Some(noise) = a.noise {
        config.noise = noise.into();
    }
    if let Some(runs) = a.runs {
        config.runs = runs;
    }
    if let Some(steps) = a.steps {
        config.steps = steps;
    }
    if let Some(fnoise) = a.filter_noise {
        config.filter_noise = fnoise.into();
    }
    if let Some(seed) = a.seed.or(env_seed()?) {
        config.seed = seed;
    }
    if !a.sigma.is_empty() || !a.epsilon.is_empty() || !has_file {
        let default_sigmas: &[f64] = if bench {
            &[0.2, 0.5, 1.0, 2.0, 3.0, 10.0]
        } else {
            &[2.0]
        };
        let sigmas = if a.sigma.is_empty() {
            default_sigmas
        } else {
            &a.sigma
        };
        let epsilons = if a.epsilon.is_empty() {
            &[1e-6][..]
        } else {
            &a.epsilon
        };
        config.filters = vec![FilterSpec::Kalman];
        for &sigma in sigmas {
            for &epsilon in epsilons {
                config
                    .filters
                    .push(FilterSpec::Mckf(KernelConfig::new(sigma, epsilon)?));
            }
        }
    }
    config.keep_errors = !bench && a.format == Format::Csv;
    config.validate()?;
    Ok(config)
}

fn run_experiment(a: &ExperimentArgs, bench: bool) -> Result<(), CliError> {
    let config = build_config(a, bench)?;
    let hash = config_hash(&config);
    let result = run_monte_carlo(&config)?;
    fs::create_dir_all(&a.out).map_err(|e| io_error(&a.out, e))?;

    let header = output::comment_line(config.seed, &hash);
    match a.format {
        Format::Csv => {
            let path = a.out.join("mse.csv");
            fs::write(&path, output::mse_csv(&header, &result)).map_err(|e| io_error(&path, e))?;
            let path = a.out.join("iterations.csv");
            fs::write(&path, output::iterations_csv(&header, &result))
                .map_err(|e| io_error(&path, e))?;
            if !bench {
                let half_width = a
                    .density_range
                    .unwrap_or_else(|| output::default_density_half_width(&config));
                for (i, body) in output::density_csvs(&header, &result, a.bins, half_width)?
                    .into_iter()
                    .enumerate()
                {
                    let path = a.out.join(format!("density_{}.csv", i + 1));
                    fs::write(&path, body).map_err(|e| io_error(&path, e))?;
                }
            }
        }
        Format::Json => {
            let path = a.out.join("results.json");
            fs::write(&path, output::results_json(&config, &hash, &result))
                .map_err(|e| io_error(&path, e))?;
        }
    }
    print!("{}", output::summary_table(&result));
    for f in &result.filters {
        if f.failed_runs > 0 {
            eprintln!(
                "robustkf: {} failed in {} of {} runs",
                output::filter_label(&f.spec),
                f.failed_runs,
                result.runs
            );
        }
    }
    if result.all_runs_failed() {
        return Err(CliError::Numerical(
            "every run of every filter failed".into(),
        ));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct DiagnoseReport {
    seed: u64,
    config_hash: String,
    run: usize,
    step: usize,
    sigma: f64,
    epsilon: f64,
    iterations: usize,
    converged: bool,
    zeta: f64,
    beta: f64,
    alpha: f64,
    sigma_star: f64,
    sigma_dagger: f64,
    sigma_min: f64,
    sigma_is_sufficient: bool,
}

fn run_diagnose(a: &DiagnoseArgs) -> Result<(), CliError> {
    let experiment_args = ExperimentArgs {
        config: a.config.clone(),
        example: a.example,
        noise: a.noise,
        seed: a.seed,
        filter_noise: a.filter_noise,
        ..ExperimentArgs::default()
    };
    let config = build_config(&experiment_args, true)?;
    let kernel = KernelConfig::new(a.sigma, a.epsilon)?;
    let snapshot = regression_snapshot(&config, &kernel, a.run, a.step)?;
    let beta = match a.beta {
        Some(b) => b,
        None => default_beta(&snapshot.regression)?,
    };
    let cert = sufficient_sigma(&snapshot.regression, beta, a.alpha)?;
    let report = DiagnoseReport {
        seed: config.seed,
        config_hash: config_hash(&config),
        run: a.run,
        step: a.step,
        sigma: a.sigma,
        epsilon: a.epsilon,
        iterations: snapshot.iterations,
        converged: snapshot.converged,
        zeta: cert.zeta,
        beta: cert.beta,
        alpha: cert.alpha,
        sigma_star: cert.sigma_star,
        sigma_dagger: cert.sigma_dagger,
        sigma_min: cert.sigma_min,
        sigma_is_sufficient: a.sigma >= cert.sigma_min,
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    if let Some(out) = &a.out {
        fs::create_dir_all(out).map_err(|e| io_error(out, e))?;
        let path = out.join("certificate.json");
        fs::write(&path, &json).map_err(|e| io_error(&path, e))?;
    }
    print!("{json}");
    Ok(())
}

fn run_flops(a: &FlopsArgs) -> Result<(), CliError> {
    let counts = flop_counts(a.n, a.m, a.t)?;
    match a.format {
        Format::Csv => {
            println!("n,m,t,s_kf,s_mckf");
            println!("{},{},{},{},{}", a.n, a.m, a.t, counts.s_kf, counts.s_mckf);
        }
        Format::Json => {
            let value = serde_json::json!({
                "n": a.n,
                "m": a.m,
                "t": a.t,
                "s_kf": counts.s_kf,
                "s_mckf": counts.s_mckf,
                "kf_order_terms": counts.kf_order_terms,
                "mckf_order_terms": counts.mckf_order_terms,
            });
            println!(
                "{}",
                serde_json::to_string_pretty(&value).expect("json value serializes")
            );
        }
    }
    Ok(())
}
