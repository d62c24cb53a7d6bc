//! Monte Carlo comparison of the Kalman and correntropy filters on the two
//! reference systems: a slowly rotating 2-D state observed through the sum
//! of its coordinates, and a 1-D constant-acceleration target observed
//! through its speed.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FilterError, Result};
use crate::kf::{kf_predict, kf_update};
use crate::mckf::{
    build_regression, fixed_point_iterate, mckf_update, AugmentedRegression, KernelConfig,
};
use crate::model::{
    propagate_truth, GaussianBelief, MixtureComponent, MixtureNoiseSpec, StateSpaceModel,
};
use crate::numerics::{min_eigenvalue_symmetric, Matrix};
use crate::rng::{standard_normal, substream};

pub const DEFAULT_THETA: f64 = std::f64::consts::PI / 18.0;
pub const DEFAULT_DT: f64 = 0.1;
/// Variance of the nominal Gaussian noise on every coordinate.
pub const NOMINAL_VARIANCE: f64 = 0.01;

/// Rotation by `theta` per step, observed through `x₁ + x₂`.
pub fn make_example1(theta: f64) -> StateSpaceModel {
    let (s, c) = theta.sin_cos();
    StateSpaceModel::new(
        Matrix::from_rows(&[[c, -s], [s, c]]).expect("finite rotation"),
        Matrix::from_rows(&[[1.0, 1.0]]).unwrap(),
        Matrix::identity(2).scale(NOMINAL_VARIANCE),
        Matrix::from_rows(&[[NOMINAL_VARIANCE]]).unwrap(),
    )
    .expect("example 1 model is valid")
}

/// Position/speed/acceleration with sample interval `dt`, speed observed.
pub fn make_example2(dt: f64) -> Result<StateSpaceModel> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(FilterError::InvalidConfig(format!(
            "sample interval must be positive, got {dt}"
        )));
    }
    StateSpaceModel::new(
        Matrix::from_rows(&[[1.0, dt, 0.0], [0.0, 1.0, dt], [0.0, 0.0, 1.0]])?,
        Matrix::from_rows(&[[0.0, 1.0, 0.0]])?,
        Matrix::identity(3).scale(NOMINAL_VARIANCE),
        Matrix::from_rows(&[[NOMINAL_VARIANCE]])?,
    )
}

fn default_theta() -> f64 {
    DEFAULT_THETA
}

fn default_dt() -> f64 {
    DEFAULT_DT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelChoice {
    Example1 {
        #[serde(default = "default_theta")]
        theta: f64,
    },
    Example2 {
        #[serde(default = "default_dt")]
        dt: f64,
    },
    Custom {
        model: StateSpaceModel,
    },
}

impl ModelChoice {
    pub fn build(&self) -> Result<StateSpaceModel> {
        match self {
            ModelChoice::Example1 { theta } => Ok(make_example1(*theta)),
            ModelChoice::Example2 { dt } => make_example2(*dt),
            ModelChoice::Custom { model } => {
                crate::model::validate_model(model)?;
                Ok(model.clone())
            }
        }
    }

    /// True initial state: `[0, 0]` for the rotation example, `[0, 0, 1]`
    /// for the tracking example, zeros otherwise.
    pub fn default_true_state(&self, n: usize) -> Vec<f64> {
        match self {
            ModelChoice::Example2 { .. } => vec![0.0, 0.0, 1.0],
            _ => vec![0.0; n],
        }
    }
}

/// Noise laws driving the simulated truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NoiseCase {
    /// `N(0, 0.01)` everywhere.
    Gaussian,
    /// Measurement noise `0.9 N(0, 0.01) + 0.1 N(0, 100)`.
    ImpulsiveMeasurement,
    /// Additionally process noise `0.9 N(0, 0.01) + 0.1 N(0, 1)`.
    ImpulsiveBoth,
    Custom {
        process: MixtureNoiseSpec,
        measurement: MixtureNoiseSpec,
    },
}

impl NoiseCase {
    pub fn specs(&self, n: usize, m: usize) -> Result<(MixtureNoiseSpec, MixtureNoiseSpec)> {
        let nominal = [MixtureComponent::new(1.0, 0.0, NOMINAL_VARIANCE)];
        let impulsive_r = [
            MixtureComponent::new(0.9, 0.0, NOMINAL_VARIANCE),
            MixtureComponent::new(0.1, 0.0, 100.0),
        ];
        let impulsive_q = [
            MixtureComponent::new(0.9, 0.0, NOMINAL_VARIANCE),
            MixtureComponent::new(0.1, 0.0, 1.0),
        ];
        let (q, r) = match self {
            NoiseCase::Gaussian => (
                MixtureNoiseSpec::iid(n, &nominal)?,
                MixtureNoiseSpec::iid(m, &nominal)?,
            ),
            NoiseCase::ImpulsiveMeasurement => (
                MixtureNoiseSpec::iid(n, &nominal)?,
                MixtureNoiseSpec::iid(m, &impulsive_r)?,
            ),
            NoiseCase::ImpulsiveBoth => (
                MixtureNoiseSpec::iid(n, &impulsive_q)?,
                MixtureNoiseSpec::iid(m, &impulsive_r)?,
            ),
            NoiseCase::Custom {
                process,
                measurement,
            } => {
                process.validate()?;
                measurement.validate()?;
                (process.clone(), measurement.clone())
            }
        };
        if q.dim() != n || r.dim() != m {
            return Err(FilterError::DimensionMismatch(format!(
                "noise specs of dimension {}/{} for n = {n}, m = {m}",
                q.dim(),
                r.dim()
            )));
        }
        Ok((q, r))
    }
}

/// A filter taking part in an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FilterSpec {
    Kalman,
    Mckf(KernelConfig),
}

impl FilterSpec {
    pub fn name(&self) -> &'static str {
        match self {
            FilterSpec::Kalman => "KF",
            FilterSpec::Mckf(_) => "MCKF",
        }
    }

    pub fn kernel(&self) -> Option<&KernelConfig> {
        match self {
            FilterSpec::Kalman => None,
            FilterSpec::Mckf(k) => Some(k),
        }
    }
}

/// Initial truth and estimate convention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialCondition {
    /// `None` selects the model's default true state.
    #[serde(default)]
    pub true_state: Option<Vec<f64>>,
    /// Variance of the Gaussian perturbation added to `x(0)` to form `x̂(0|0)`.
    pub estimate_variance: f64,
    /// `P(0|0) = cov_scale · I`.
    pub cov_scale: f64,
}

impl Default for InitialCondition {
    fn default() -> Self {
        Self {
            true_state: None,
            estimate_variance: NOMINAL_VARIANCE,
            cov_scale: NOMINAL_VARIANCE,
        }
    }
}

fn default_true() -> bool {
    true
}

/// Noise covariances the filters are told about.
///
/// The truth is always simulated from the noise case; this only decides
/// which `Q` and `R` enter the filter recursions.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FilterNoise {
    /// Diagonal covariances equal to the exact second moments of the
    /// simulated noise (for mixtures: the law-of-total-variance value).
    #[default]
    Matched,
    /// The model's own `Q` and `R`, i.e. the dominant Gaussian component
    /// for the built-in examples.
    Nominal,
    /// Scalar multiples of the identity; a missing entry keeps the model's
    /// matrix.
    Explicit {
        #[serde(default)]
        process_variance: Option<f64>,
        #[serde(default)]
        measurement_variance: Option<f64>,
    },
}

impl FilterNoise {
    /// Model used inside the filters.
    pub fn filter_model(
        &self,
        model: &StateSpaceModel,
        q_spec: &MixtureNoiseSpec,
        r_spec: &MixtureNoiseSpec,
    ) -> Result<StateSpaceModel> {
        let (q, r) = match self {
            FilterNoise::Nominal => return Ok(model.clone()),
            FilterNoise::Matched => (
                Matrix::from_diagonal(&q_spec.variances()),
                Matrix::from_diagonal(&r_spec.variances()),
            ),
            FilterNoise::Explicit {
                process_variance,
                measurement_variance,
            } => {
                let scaled = |v: Option<f64>, fallback: &Matrix| match v {
                    Some(v) => Matrix::identity(fallback.rows()).scale(v),
                    None => fallback.clone(),
                };
                (
                    scaled(*process_variance, &model.q),
                    scaled(*measurement_variance, &model.r),
                )
            }
        };
        StateSpaceModel::new(model.f.clone(), model.h.clone(), q, r)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelChoice,
    pub noise: NoiseCase,
    pub runs: usize,
    pub steps: usize,
    pub filters: Vec<FilterSpec>,
    pub seed: u64,
    #[serde(default)]
    pub init: InitialCondition,
    /// Covariances assumed by the filters.
    #[serde(default)]
    pub filter_noise: FilterNoise,
    /// Keep every per-step error (needed for histograms).
    #[serde(default = "default_true")]
    pub keep_errors: bool,
}

impl ExperimentConfig {
    /// 100 runs of 1000 steps with the KF as the only filter.
    pub fn new(model: ModelChoice, noise: NoiseCase, seed: u64) -> Self {
        Self {
            model,
            noise,
            runs: 100,
            steps: 1000,
            filters: vec![FilterSpec::Kalman],
            seed,
            init: InitialCondition::default(),
            filter_noise: FilterNoise::Matched,
            keep_errors: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 || self.steps == 0 {
            return Err(FilterError::InvalidConfig(
                "runs and steps must be at least 1".into(),
            ));
        }
        if self.filters.is_empty() {
            return Err(FilterError::InvalidConfig("no filters configured".into()));
        }
        for k in self.filters.iter().filter_map(FilterSpec::kernel) {
            k.validate()?;
        }
        if !(self.init.estimate_variance >= 0.0 && self.init.cov_scale > 0.0) {
            return Err(FilterError::InvalidConfig(
                "initial variances must be nonnegative / positive".into(),
            ));
        }
        Ok(())
    }
}

/// Aggregated statistics of one filter over all runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterResult {
    pub spec: FilterSpec,
    /// Per-state mean squared error over every step of every successful run.
    pub mse: Vec<f64>,
    /// Mean fixed-point iterations per step (`None` for the KF).
    pub avg_iterations: Option<f64>,
    pub nonconverged_steps: u64,
    /// Runs aborted by a numerical error.
    pub failed_runs: usize,
    pub failures: Vec<String>,
    /// Per-state estimation errors `x − x̂`, run-major.
    pub errors: Vec<Vec<f64>>,
    /// Smallest `λ_min(P) / ‖P‖_max` seen on any posterior covariance.
    pub worst_cov_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub runs: usize,
    pub steps: usize,
    pub filters: Vec<FilterResult>,
}

impl ExperimentResult {
    pub fn all_runs_failed(&self) -> bool {
        self.filters.iter().all(|f| f.failed_runs == self.runs)
    }
}

struct RunStats {
    sq_err: Vec<f64>,
    errors: Vec<Vec<f64>>,
    iterations: u64,
    nonconverged: u64,
    worst_cov_margin: f64,
}

fn cov_margin(cov: &Matrix) -> f64 {
    let scale = cov.max_abs();
    if scale == 0.0 {
        return 0.0;
    }
    min_eigenvalue_symmetric(cov).map_or(f64::NEG_INFINITY, |l| l / scale)
}

struct Experiment {
    truth_model: StateSpaceModel,
    filter_model: StateSpaceModel,
    q_spec: MixtureNoiseSpec,
    r_spec: MixtureNoiseSpec,
    x0: Vec<f64>,
}

fn simulate_run(
    config: &ExperimentConfig,
    exp: &Experiment,
    run: usize,
) -> Vec<std::result::Result<RunStats, FilterError>> {
    let n = exp.truth_model.state_dim();
    let mut rng = substream(config.seed, run as u64);
    let sd = config.init.estimate_variance.sqrt();
    let estimate0: Vec<f64> = exp
        .x0
        .iter()
        .map(|x| x + sd * standard_normal(&mut rng))
        .collect();
    let belief0 = GaussianBelief {
        mean: estimate0,
        cov: Matrix::identity(n).scale(config.init.cov_scale),
    };

    let mut truth = exp.x0.clone();
    let mut beliefs: Vec<std::result::Result<GaussianBelief, FilterError>> =
        config.filters.iter().map(|_| Ok(belief0.clone())).collect();
    let mut stats: Vec<RunStats> = config
        .filters
        .iter()
        .map(|_| RunStats {
            sq_err: vec![0.0; n],
            errors: if config.keep_errors {
                vec![Vec::with_capacity(config.steps); n]
            } else {
                vec![Vec::new(); n]
            },
            iterations: 0,
            nonconverged: 0,
            worst_cov_margin: f64::INFINITY,
        })
        .collect();

    for _ in 0..config.steps {
        let (x, y) =
            match propagate_truth(&exp.truth_model, &truth, &exp.q_spec, &exp.r_spec, &mut rng) {
                Ok(v) => v,
                Err(e) => return config.filters.iter().map(|_| Err(e.clone())).collect(),
            };
        truth = x;
        for ((spec, belief), st) in config
            .filters
            .iter()
            .zip(beliefs.iter_mut())
            .zip(stats.iter_mut())
        {
            let Ok(current) = belief.as_ref() else {
                continue;
            };
            let step = kf_predict(&exp.filter_model, current).and_then(|prior| match spec {
                FilterSpec::Kalman => {
                    kf_update(&exp.filter_model, &prior, &y).map(|(b, _)| (b, None))
                }
                FilterSpec::Mckf(k) => {
                    mckf_update(&exp.filter_model, &prior, &y, k).map(|(b, r)| (b, Some(r)))
                }
            });
            match step {
                Ok((next, report)) => {
                    if let Some(r) = report {
                        st.iterations += r.iterations as u64;
                        st.nonconverged += u64::from(!r.converged);
                    }
                    for (i, (t, est)) in truth.iter().zip(&next.mean).enumerate() {
                        let e = t - est;
                        st.sq_err[i] += e * e;
                        if config.keep_errors {
                            st.errors[i].push(e);
                        }
                    }
                    st.worst_cov_margin = st.worst_cov_margin.min(cov_margin(&next.cov));
                    *belief = Ok(next);
                }
                Err(e) => *belief = Err(e),
            }
        }
    }
    beliefs
        .into_iter()
        .zip(stats)
        .map(|(b, st)| b.map(|_| st))
        .collect()
}

/// Runs every configured filter on shared measurement sequences.
///
/// Runs execute in parallel, each on its own random substream, and are
/// reduced in run order so the result only depends on the configuration.
pub fn run_monte_carlo(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let truth_model = config.model.build()?;
    let (n, m) = (truth_model.state_dim(), truth_model.obs_dim());
    let (q_spec, r_spec) = config.noise.specs(n, m)?;
    let filter_model = config
        .filter_noise
        .filter_model(&truth_model, &q_spec, &r_spec)?;
    let x0 = config
        .init
        .true_state
        .clone()
        .unwrap_or_else(|| config.model.default_true_state(n));
    if x0.len() != n {
        return Err(FilterError::DimensionMismatch(format!(
            "initial state of length {} for n = {n}",
            x0.len()
        )));
    }
    let exp = Experiment {
        truth_model,
        filter_model,
        q_spec,
        r_spec,
        x0,
    };

    let per_run: Vec<_> = (0..config.runs)
        .into_par_iter()
        .map(|run| simulate_run(config, &exp, run))
        .collect();

    let mut filters = Vec::with_capacity(config.filters.len());
    for (fi, spec) in config.filters.iter().enumerate() {
        let mut sq = vec![0.0; n];
        let mut errors = vec![Vec::new(); n];
        let mut iterations = 0u64;
        let mut nonconverged = 0u64;
        let mut ok_runs = 0usize;
        let mut failures = Vec::new();
        let mut worst = f64::INFINITY;
        for (run, outcome) in per_run.iter().enumerate() {
            match &outcome[fi] {
                Ok(st) => {
                    ok_runs += 1;
                    for i in 0..n {
                        sq[i] += st.sq_err[i];
                        errors[i].extend_from_slice(&st.errors[i]);
                    }
                    iterations += st.iterations;
                    nonconverged += st.nonconverged;
                    worst = worst.min(st.worst_cov_margin);
                }
                Err(e) => failures.push(format!("run {run}: {e}")),
            }
        }
        let samples = (ok_runs * config.steps) as f64;
        let mse = sq
            .iter()
            .map(|s| if ok_runs > 0 { s / samples } else { f64::NAN })
            .collect();
        let avg_iterations = spec.kernel().map(|_| {
            if ok_runs > 0 {
                iterations as f64 / samples
            } else {
                f64::NAN
            }
        });
        filters.push(FilterResult {
            spec: *spec,
            mse,
            avg_iterations,
            nonconverged_steps: nonconverged,
            failed_runs: config.runs - ok_runs,
            failures,
            errors,
            worst_cov_margin: worst,
        });
    }
    Ok(ExperimentResult {
        runs: config.runs,
        steps: config.steps,
        filters,
    })
}

/// Measurement-update regression seen by a correntropy filter at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionSnapshot {
    /// 1-based time step.
    pub step: usize,
    pub regression: AugmentedRegression,
    /// Fixed-point iterations the filter spent on this step.
    pub iterations: usize,
    pub converged: bool,
}

/// Replays run `run` of `config` with a single correntropy filter and
/// returns the regression it solves at time step `step` (1-based).
///
/// Uses the same random stream as [`run_monte_carlo`], so the snapshot
/// belongs to the trajectory the experiment would simulate.
pub fn regression_snapshot(
    config: &ExperimentConfig,
    kernel: &KernelConfig,
    run: usize,
    step: usize,
) -> Result<RegressionSnapshot> {
    kernel.validate()?;
    if step == 0 {
        return Err(FilterError::InvalidConfig(
            "snapshot step is 1-based".into(),
        ));
    }
    let truth_model = config.model.build()?;
    let (n, m) = (truth_model.state_dim(), truth_model.obs_dim());
    let (q_spec, r_spec) = config.noise.specs(n, m)?;
    let filter_model = config
        .filter_noise
        .filter_model(&truth_model, &q_spec, &r_spec)?;
    let x0 = config
        .init
        .true_state
        .clone()
        .unwrap_or_else(|| config.model.default_true_state(n));
    if x0.len() != n {
        return Err(FilterError::DimensionMismatch(format!(
            "initial state of length {} for n = {n}",
            x0.len()
        )));
    }
    let mut rng = substream(config.seed, run as u64);
    let sd = config.init.estimate_variance.sqrt();
    let mean: Vec<f64> = x0
        .iter()
        .map(|x| x + sd * standard_normal(&mut rng))
        .collect();
    let mut belief = GaussianBelief {
        mean,
        cov: Matrix::identity(n).scale(config.init.cov_scale),
    };
    let mut truth = x0;
    for k in 1..=step {
        let (x, y) = propagate_truth(&truth_model, &truth, &q_spec, &r_spec, &mut rng)?;
        truth = x;
        let prior = kf_predict(&filter_model, &belief)?;
        if k == step {
            let regression = build_regression(&filter_model, &prior, &y)?;
            let solution = fixed_point_iterate(&regression, kernel)?;
            return Ok(RegressionSnapshot {
                step,
                regression,
                iterations: solution.report.iterations,
                converged: solution.report.converged,
            });
        }
        belief = mckf_update(&filter_model, &prior, &y, kernel)?.0;
    }
    unreachable!("loop returns at k == step")
}

/// Normalized histogram of error samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub centers: Vec<f64>,
    /// Fraction of all samples falling in each bin.
    pub masses: Vec<f64>,
    /// Fraction of samples outside `[lo, hi]`.
    pub out_of_range: f64,
}

/// Bins `samples` over `[lo, hi]`; the upper edge belongs to the last bin.
pub fn error_density(samples: &[f64], bins: usize, range: (f64, f64)) -> Result<Histogram> {
    if samples.is_empty() {
        return Err(FilterError::EmptyInput);
    }
    let (lo, hi) = range;
    if bins < 2 || !(lo < hi) {
        return Err(FilterError::InvalidConfig(format!(
            "need bins >= 2 and lo < hi, got {bins} over [{lo}, {hi}]"
        )));
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    let mut outside = 0usize;
    for &s in samples {
        if s >= lo && s <= hi {
            let idx = (((s - lo) / width) as usize).min(bins - 1);
            counts[idx] += 1;
        } else {
            outside += 1;
        }
    }
    let total = samples.len() as f64;
    Ok(Histogram {
        centers: (0..bins).map(|i| lo + (i as f64 + 0.5) * width).collect(),
        masses: counts.iter().map(|&c| c as f64 / total).collect(),
        out_of_range: outside as f64 / total,
    })
}
