//! Maximum correntropy Kalman filter.
//!
//! The prior/measurement pair is stacked into a linear regression, whitened
//! by the Cholesky factors of `P(k|k-1)` and `R(k)`:
//!
//! ```text
//! D = W x + e,   D = B⁻¹ [x̂⁻; y],   W = B⁻¹ [I; H],   B = blockdiag(B_p, B_r)
//! ```
//!
//! The correntropy of the whitened residuals is maximized by a fixed-point
//! iteration. Each iteration reweights the prior and measurement
//! covariances by the inverse Gaussian-kernel weights of the residuals and
//! recomputes a Kalman-type gain from them. The same fixed point can be
//! reached by iterating the weighted least-squares form directly; both are
//! provided so one can serve as a check on the other.

use serde::{Deserialize, Serialize};

use crate::error::{FilterError, Result};
use crate::kf::{joseph_covariance, kf_predict};
use crate::model::{GaussianBelief, StateSpaceModel};
use crate::numerics::{
    cholesky_lower, norm1, norm2, norm_inf, solve_lower_triangular, solve_spd, Matrix,
};

/// Lower clamp applied to kernel weights before they are inverted.
pub const WEIGHT_FLOOR: f64 = 1e-12;

pub const DEFAULT_MAX_ITERATIONS: usize = 100;

/// Denominators below this switch the stop rule to an absolute step.
const TINY_NORM: f64 = 1e-300;

/// Vector norm used by the stop rule.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepNorm {
    #[default]
    Euclidean,
    L1,
    Max,
}

impl StepNorm {
    pub fn apply(self, v: &[f64]) -> f64 {
        match self {
            StepNorm::Euclidean => norm2(v),
            StepNorm::L1 => norm1(v),
            StepNorm::Max => norm_inf(v),
        }
    }
}

/// Kernel bandwidth and stop rule of the fixed-point solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub sigma: f64,
    pub epsilon: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default)]
    pub step_norm: StepNorm,
}

fn default_max_iterations() -> usize {
    DEFAULT_MAX_ITERATIONS
}

impl KernelConfig {
    pub fn new(sigma: f64, epsilon: f64) -> Result<Self> {
        let config = Self {
            sigma,
            epsilon,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            step_norm: StepNorm::Euclidean,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_max_iterations(mut self, max_iterations: usize) -> Self {
        self.max_iterations = max_iterations;
        self
    }

    pub fn with_step_norm(mut self, step_norm: StepNorm) -> Self {
        self.step_norm = step_norm;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(FilterError::InvalidBandwidth(self.sigma));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(FilterError::InvalidConfig(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.max_iterations == 0 {
            return Err(FilterError::InvalidConfig(
                "max_iterations must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn kernel(e: f64, sigma: f64) -> f64 {
    (-(e * e) / (2.0 * sigma * sigma)).exp()
}

/// Gaussian kernel `exp(−e² / 2σ²)`.
pub fn gaussian_kernel(e: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(FilterError::InvalidBandwidth(sigma));
    }
    Ok(kernel(e, sigma))
}

/// Sample correntropy: the mean kernel value of the errors.
pub fn correntropy_estimate(errors: &[f64], sigma: f64) -> Result<f64> {
    if errors.is_empty() {
        return Err(FilterError::EmptyInput);
    }
    if !(sigma > 0.0) {
        return Err(FilterError::InvalidBandwidth(sigma));
    }
    Ok(errors.iter().map(|&e| kernel(e, sigma)).sum::<f64>() / errors.len() as f64)
}

/// Whitened stacked regression `D = W x + e` for one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedRegression {
    /// Whitened observation stack, length `n + m`.
    pub d: Vec<f64>,
    /// Whitened design, `(n + m) x n`.
    pub w: Matrix,
    /// Cholesky factor of the prior covariance.
    pub bp: Matrix,
    /// Cholesky factor of the measurement covariance.
    pub br: Matrix,
    pub prior_mean: Vec<f64>,
    pub y: Vec<f64>,
    pub h: Matrix,
}

impl AugmentedRegression {
    pub fn n(&self) -> usize {
        self.bp.rows()
    }

    pub fn m(&self) -> usize {
        self.br.rows()
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    pub fn innovation(&self) -> Vec<f64> {
        self.y
            .iter()
            .zip(self.h.mul_vec(&self.prior_mean))
            .map(|(a, b)| a - b)
            .collect()
    }
}

/// Whitens the stacked prior/measurement regression with triangular solves.
pub fn build_regression(
    model: &StateSpaceModel,
    prior: &GaussianBelief,
    y: &[f64],
) -> Result<AugmentedRegression> {
    let n = model.state_dim();
    let m = model.obs_dim();
    if prior.dim() != n || prior.cov.rows() != n || y.len() != m {
        return Err(FilterError::DimensionMismatch(format!(
            "prior of dimension {} and measurement of length {} for n = {n}, m = {m}",
            prior.dim(),
            y.len()
        )));
    }
    let bp = cholesky_lower(&prior.cov)?;
    let br = cholesky_lower(&model.r)?;
    let w_top = solve_lower_triangular(&bp, &Matrix::identity(n));
    let w_bottom = solve_lower_triangular(&br, &model.h);
    let d_top = solve_lower_triangular(&bp, &Matrix::column(&prior.mean));
    let d_bottom = solve_lower_triangular(&br, &Matrix::column(y));
    let mut d = d_top.as_slice().to_vec();
    d.extend_from_slice(d_bottom.as_slice());
    Ok(AugmentedRegression {
        d,
        w: Matrix::vstack(&w_top, &w_bottom),
        bp,
        br,
        prior_mean: prior.mean.clone(),
        y: y.to_vec(),
        h: model.h.clone(),
    })
}

/// Residuals `e_i = d_i − w_i x`.
pub fn compute_residuals(reg: &AugmentedRegression, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != reg.n() {
        return Err(FilterError::DimensionMismatch(format!(
            "state of length {} for a regression with n = {}",
            x.len(),
            reg.n()
        )));
    }
    Ok(reg
        .d
        .iter()
        .zip(reg.w.mul_vec(x))
        .map(|(d, wx)| d - wx)
        .collect())
}

/// Correntropy cost `J_L(x)` of the whitened residuals, including the `1/L`
/// factor.
pub fn mcc_cost(reg: &AugmentedRegression, x: &[f64], sigma: f64) -> Result<f64> {
    correntropy_estimate(&compute_residuals(reg, x)?, sigma)
}

/// Diagonal kernel weights of the state (`cx`) and measurement (`cy`)
/// residuals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightMatrices {
    pub cx: Vec<f64>,
    pub cy: Vec<f64>,
}

impl WeightMatrices {
    pub fn ones(n: usize, m: usize) -> Self {
        Self {
            cx: vec![1.0; n],
            cy: vec![1.0; m],
        }
    }

    pub fn stacked(&self) -> Vec<f64> {
        self.cx.iter().chain(&self.cy).copied().collect()
    }
}

/// Splits clamped kernel weights into the state and measurement blocks.
///
/// Panics if `residuals.len() != n + m`.
pub fn weight_matrices(residuals: &[f64], sigma: f64, n: usize, m: usize) -> WeightMatrices {
    assert_eq!(
        residuals.len(),
        n + m,
        "residual stack must have length n + m"
    );
    let weight = |e: &f64| kernel(*e, sigma).max(WEIGHT_FLOOR);
    WeightMatrices {
        cx: residuals[..n].iter().map(weight).collect(),
        cy: residuals[n..].iter().map(weight).collect(),
    }
}

/// Gain and reweighted covariances of one fixed-point iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustGain {
    pub gain: Matrix,
    pub p_bar: Matrix,
    pub r_bar: Matrix,
}

fn reweight(factor: &Matrix, weights: &[f64]) -> Matrix {
    let inv: Vec<f64> = weights.iter().map(|w| 1.0 / w).collect();
    (&(factor * &Matrix::from_diagonal(&inv)) * &factor.transpose()).symmetrized()
}

fn scale_rows(a: &Matrix, s: &[f64]) -> Matrix {
    let mut out = a.clone();
    for (i, si) in s.iter().enumerate() {
        for j in 0..a.cols() {
            out[(i, j)] *= si;
        }
    }
    out
}

/// `P̄ = B_p C_x⁻¹ B_pᵀ`, `R̄ = B_r C_y⁻¹ B_rᵀ`, `K̄ = P̄ Hᵀ (H P̄ Hᵀ + R̄)⁻¹`.
///
/// `K̄` is evaluated in whitened coordinates: with
/// `A = C_y^{1/2} B_r⁻¹ H B_p C_x^{-1/2}`,
/// `K̄ = B_p C_x^{-1/2} Aᵀ (A Aᵀ + I)⁻¹ C_y^{1/2} B_r⁻¹`.
/// The matrix inverted has eigenvalues ≥ 1, so a measurement whose weight
/// sits at the floor does not turn the solve ill-conditioned the way
/// `H P̄ Hᵀ + R̄` would.
pub fn robust_gain(reg: &AugmentedRegression, weights: &WeightMatrices) -> Result<RobustGain> {
    if weights.cx.len() != reg.n() || weights.cy.len() != reg.m() {
        return Err(FilterError::DimensionMismatch(
            "weight blocks do not match the regression".into(),
        ));
    }
    if weights
        .stacked()
        .iter()
        .any(|&w| !(w > 0.0 && w.is_finite()))
    {
        return Err(FilterError::InvalidConfig(
            "kernel weights must be positive".into(),
        ));
    }
    let m = reg.m();
    let sqrt_cy: Vec<f64> = weights.cy.iter().map(|w| w.sqrt()).collect();
    let inv_sqrt_cx: Vec<f64> = weights.cx.iter().map(|w| 1.0 / w.sqrt()).collect();
    // A = C_y^{1/2} B_r⁻¹ H B_p C_x^{-1/2}
    let hw = solve_lower_triangular(&reg.br, &(&reg.h * &reg.bp));
    let a_t = scale_rows(&scale_rows(&hw, &sqrt_cy).transpose(), &inv_sqrt_cx);
    let s_w = &(&a_t.transpose() * &a_t) + &Matrix::identity(m);
    let rhs = scale_rows(
        &solve_lower_triangular(&reg.br, &Matrix::identity(m)),
        &sqrt_cy,
    );
    let gain = &(&reg.bp * &scale_rows(&a_t, &inv_sqrt_cx)) * &solve_spd(&s_w, &rhs)?;
    let p_bar = reweight(&reg.bp, &weights.cx);
    let r_bar = reweight(&reg.br, &weights.cy);
    Ok(RobustGain { gain, p_bar, r_bar })
}

/// Outcome of one fixed-point solve.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointReport {
    /// Number of fixed-point updates performed (at least one).
    pub iterations: usize,
    pub converged: bool,
    /// Weights used for the final update.
    pub final_weights: WeightMatrices,
    /// Stop-rule value of the final update.
    pub last_relative_step: f64,
    /// Starting point followed by every iterate.
    pub iterates: Vec<Vec<f64>>,
    /// `J_L` evaluated at each entry of `iterates`.
    pub cost_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointSolution {
    pub estimate: Vec<f64>,
    /// Gain of the final update.
    pub gain: Matrix,
    pub report: FixedPointReport,
}

fn relative_step(prev: &[f64], next: &[f64], norm: StepNorm) -> f64 {
    let diff: Vec<f64> = next.iter().zip(prev).map(|(a, b)| a - b).collect();
    let step = norm.apply(&diff);
    let base = norm.apply(prev);
    if base < TINY_NORM {
        step
    } else {
        step / base
    }
}

fn check_start(reg: &AugmentedRegression, x0: &[f64], config: &KernelConfig) -> Result<()> {
    config.validate()?;
    if x0.len() != reg.n() {
        return Err(FilterError::DimensionMismatch(format!(
            "start point of length {} for n = {}",
            x0.len(),
            reg.n()
        )));
    }
    Ok(())
}

/// Gain-form fixed-point solver started at the prior mean.
pub fn fixed_point_iterate(
    reg: &AugmentedRegression,
    config: &KernelConfig,
) -> Result<FixedPointSolution> {
    fixed_point_iterate_from(reg, config, &reg.prior_mean)
}

/// Gain-form fixed-point solver from an arbitrary start.
///
/// Every update reweights with the residuals of the previous iterate and
/// sets `x_t = x̂⁻ + K̄ (y − H x̂⁻)`. Stops once the relative step is at most
/// `epsilon` or after `max_iterations` updates (reported as not converged).
pub fn fixed_point_iterate_from(
    reg: &AugmentedRegression,
    config: &KernelConfig,
    x0: &[f64],
) -> Result<FixedPointSolution> {
    check_start(reg, x0, config)?;
    let (n, m) = (reg.n(), reg.m());
    let innovation = reg.innovation();
    let mut prev = x0.to_vec();
    let mut iterates = vec![prev.clone()];
    let mut cost_trace = vec![mcc_cost(reg, &prev, config.sigma)?];
    let mut iterations = 0;
    loop {
        iterations += 1;
        let residuals = compute_residuals(reg, &prev)?;
        let weights = weight_matrices(&residuals, config.sigma, n, m);
        let RobustGain { gain, .. } = robust_gain(reg, &weights)?;
        let next: Vec<f64> = reg
            .prior_mean
            .iter()
            .zip(gain.mul_vec(&innovation))
            .map(|(a, b)| a + b)
            .collect();
        if next.iter().any(|v| !v.is_finite()) {
            return Err(FilterError::Diverged {
                iteration: iterations,
            });
        }
        let step = relative_step(&prev, &next, config.step_norm);
        cost_trace.push(mcc_cost(reg, &next, config.sigma)?);
        iterates.push(next.clone());
        let converged = step <= config.epsilon;
        if converged || iterations >= config.max_iterations {
            return Ok(FixedPointSolution {
                estimate: next,
                gain,
                report: FixedPointReport {
                    iterations,
                    converged,
                    final_weights: weights,
                    last_relative_step: step,
                    iterates,
                    cost_trace,
                },
            });
        }
        prev = next;
    }
}

/// Iterates of the direct weighted least-squares form.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectSolution {
    pub estimate: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Starting point followed by every iterate.
    pub iterates: Vec<Vec<f64>>,
}

/// One application of `x ← (Wᵀ C W)⁻¹ Wᵀ C D` with `C` the clamped kernel
/// weights of the residuals at `x`.
pub fn direct_update(reg: &AugmentedRegression, x: &[f64], sigma: f64) -> Result<Vec<f64>> {
    let residuals = compute_residuals(reg, x)?;
    let weights = weight_matrices(&residuals, sigma, reg.n(), reg.m()).stacked();
    weighted_least_squares(reg, &weights)
}

pub(crate) fn weighted_least_squares(
    reg: &AugmentedRegression,
    weights: &[f64],
) -> Result<Vec<f64>> {
    let n = reg.n();
    let mut gram = Matrix::zeros(n, n);
    let mut rhs = vec![0.0; n];
    for (i, &c) in weights.iter().enumerate() {
        let wi = reg.w.row(i);
        for a in 0..n {
            rhs[a] += c * wi[a] * reg.d[i];
            for b in 0..n {
                gram[(a, b)] += c * wi[a] * wi[b];
            }
        }
    }
    Ok(solve_spd(&gram, &Matrix::column(&rhs))?.as_slice().to_vec())
}

/// Direct-form fixed-point solver started at the prior mean.
pub fn fixed_point_direct(
    reg: &AugmentedRegression,
    config: &KernelConfig,
) -> Result<DirectSolution> {
    fixed_point_direct_from(reg, config, &reg.prior_mean)
}

/// Direct-form fixed-point solver under the same stop rule as
/// [`fixed_point_iterate_from`].
pub fn fixed_point_direct_from(
    reg: &AugmentedRegression,
    config: &KernelConfig,
    x0: &[f64],
) -> Result<DirectSolution> {
    check_start(reg, x0, config)?;
    let mut prev = x0.to_vec();
    let mut iterates = vec![prev.clone()];
    let mut iterations = 0;
    loop {
        iterations += 1;
        let next = direct_update(reg, &prev, config.sigma)?;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(FilterError::Diverged {
                iteration: iterations,
            });
        }
        let converged = relative_step(&prev, &next, config.step_norm) <= config.epsilon;
        iterates.push(next.clone());
        if converged || iterations >= config.max_iterations {
            return Ok(DirectSolution {
                estimate: next,
                iterations,
                converged,
                iterates,
            });
        }
        prev = next;
    }
}

/// One full filter step: predict, whiten, solve the fixed point, then the
/// Joseph-form covariance with the final gain and the nominal `P(k|k-1)`
/// and `R(k)`.
pub fn mckf_step(
    model: &StateSpaceModel,
    posterior_prev: &GaussianBelief,
    y: &[f64],
    config: &KernelConfig,
) -> Result<(GaussianBelief, FixedPointReport)> {
    let prior = kf_predict(model, posterior_prev)?;
    mckf_update(model, &prior, y, config)
}

/// Measurement update half of [`mckf_step`].
pub fn mckf_update(
    model: &StateSpaceModel,
    prior: &GaussianBelief,
    y: &[f64],
    config: &KernelConfig,
) -> Result<(GaussianBelief, FixedPointReport)> {
    let reg = build_regression(model, prior, y)?;
    let solution = fixed_point_iterate(&reg, config)?;
    let cov = joseph_covariance(&prior.cov, &solution.gain, &model.h, &model.r);
    Ok((
        GaussianBelief {
            mean: solution.estimate,
            cov,
        },
        solution.report,
    ))
}
