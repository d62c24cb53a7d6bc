//! Table rendering. Numbers use Rust's shortest round-trip formatting so
//! identical results always produce identical bytes.

use std::fmt::Write as _;

use robustkf_core::{error_density, ExperimentConfig, ExperimentResult, FilterSpec, ModelChoice};
use serde::Serialize;

use crate::CliError;

pub(crate) fn comment_line(seed: u64, hash: &str) -> String {
    format!("# seed={seed} config_hash={hash}\n")
}

/// `sigma,epsilon` cells; empty for the Kalman filter.
fn kernel_cells(spec: &FilterSpec) -> String {
    match spec.kernel() {
        Some(k) => format!("{},{}", k.sigma, k.epsilon),
        None => ",".to_string(),
    }
}

pub(crate) fn filter_label(spec: &FilterSpec) -> String {
    match spec.kernel() {
        Some(k) => format!("MCKF(sigma={}, epsilon={})", k.sigma, k.epsilon),
        None => "KF".to_string(),
    }
}

pub(crate) fn mse_csv(header: &str, result: &ExperimentResult) -> String {
    let mut s = String::from(header);
    s.push_str("filter,sigma,epsilon,state_index,mse\n");
    for f in &result.filters {
        for (i, mse) in f.mse.iter().enumerate() {
            let _ = writeln!(
                s,
                "{},{},{},{}",
                f.spec.name(),
                kernel_cells(&f.spec),
                i + 1,
                mse
            );
        }
    }
    s
}

pub(crate) fn iterations_csv(header: &str, result: &ExperimentResult) -> String {
    let mut s = String::from(header);
    s.push_str("filter,sigma,epsilon,avg_iterations,nonconverged_steps\n");
    for f in &result.filters {
        if let Some(avg) = f.avg_iterations {
            let _ = writeln!(
                s,
                "{},{},{},{}",
                f.spec.name(),
                kernel_cells(&f.spec),
                avg,
                f.nonconverged_steps
            );
        }
    }
    s
}

pub(crate) fn default_density_half_width(config: &ExperimentConfig) -> f64 {
    match config.model {
        ModelChoice::Example2 { .. } => 25.0,
        _ => 3.0,
    }
}

/// One long-format table per state component; filters whose runs all
/// failed contribute no rows.
pub(crate) fn density_csvs(
    header: &str,
    result: &ExperimentResult,
    bins: usize,
    half_width: f64,
) -> Result<Vec<String>, CliError> {
    let n = result.filters.first().map_or(0, |f| f.errors.len());
    let mut files = Vec::with_capacity(n);
    for i in 0..n {
        let mut s = String::from(header);
        s.push_str("filter,sigma,epsilon,bin_center,mass\n");
        for f in &result.filters {
            if f.errors[i].is_empty() {
                continue;
            }
            let hist = error_density(&f.errors[i], bins, (-half_width, half_width))?;
            for (c, mass) in hist.centers.iter().zip(&hist.masses) {
                let _ = writeln!(
                    s,
                    "{},{},{},{}",
                    f.spec.name(),
                    kernel_cells(&f.spec),
                    c,
                    mass
                );
            }
        }
        files.push(s);
    }
    Ok(files)
}

#[derive(Serialize)]
struct FilterSummary<'a> {
    filter: &'static str,
    sigma: Option<f64>,
    epsilon: Option<f64>,
    mse: &'a [f64],
    avg_iterations: Option<f64>,
    nonconverged_steps: u64,
    failed_runs: usize,
    failures: &'a [String],
}

#[derive(Serialize)]
struct ResultsFile<'a> {
    seed: u64,
    config_hash: &'a str,
    config: &'a ExperimentConfig,
    runs: usize,
    steps: usize,
    filters: Vec<FilterSummary<'a>>,
}

pub(crate) fn results_json(
    config: &ExperimentConfig,
    hash: &str,
    result: &ExperimentResult,
) -> String {
    let file = ResultsFile {
        seed: config.seed,
        config_hash: hash,
        config,
        runs: result.runs,
        steps: result.steps,
        filters: result
            .filters
            .iter()
            .map(|f| FilterSummary {
                filter: f.spec.name(),
                sigma: f.spec.kernel().map(|k| k.sigma),
                epsilon: f.spec.kernel().map(|k| k.epsilon),
                mse: &f.mse,
                avg_iterations: f.avg_iterations,
                nonconverged_steps: f.nonconverged_steps,
                failed_runs: f.failed_runs,
                failures: &f.failures,
            })
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("results serialize") + "\n"
}

/// Human-readable summary for stdout.
pub(crate) fn summary_table(result: &ExperimentResult) -> String {
    let mut s = String::new();
    for f in &result.filters {
        let mse: Vec<String> = f.mse.iter().map(|v| format!("{v:.6}")).collect();
        let _ = write!(s, "{:<36} mse=[{}]", filter_label(&f.spec), mse.join(", "));
        if let Some(avg) = f.avg_iterations {
            let _ = write!(s, " avg_iterations={avg:.5}");
        }
        s.push('\n');
    }
    s
}
