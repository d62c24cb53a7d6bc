//! Convergence certificates for the fixed-point solver and flop counts.
//!
//! For a whitened regression with rows `w_i` and targets `d_i`, the
//! fixed-point map is
//!
//! ```text
//! f(x) = N(x)⁻¹ Σ G_σ(e_i) w_iᵀ d_i,   N(x) = Σ G_σ(e_i) w_iᵀ w_i,   e_i = d_i − w_i x
//! ```
//!
//! If `β > ζ` and `σ ≥ max(σ*, σ†)` then `f` maps the 1-norm ball of radius
//! `β` into itself and its Jacobian has induced 1-norm at most `α` there,
//! so the iteration contracts to a unique fixed point in that ball.

use serde::{Deserialize, Serialize};

use crate::error::{FilterError, Result};
use crate::mckf::{compute_residuals, kernel, AugmentedRegression};
use crate::numerics::{induced_l1_norm, min_eigenvalue_symmetric, norm1, solve_spd, Matrix};

/// Lower end of the bandwidth search range.
pub const SIGMA_SEARCH_MIN: f64 = 1e-6;
/// Upper end of the bandwidth search range.
pub const SIGMA_SEARCH_MAX: f64 = 1e9;
const GRID_POINTS_PER_DECADE: usize = 40;
const BISECTION_STEPS: usize = 80;

/// Sufficient-bandwidth certificate for one regression.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceCertificate {
    pub beta: f64,
    pub alpha: f64,
    pub zeta: f64,
    pub sigma_star: f64,
    pub sigma_dagger: f64,
    pub sigma_min: f64,
}

fn rows(reg: &AugmentedRegression) -> impl Iterator<Item = (&[f64], f64)> {
    (0..reg.len()).map(move |i| (reg.w.row(i), reg.d[i]))
}

fn outer(w: &[f64]) -> Matrix {
    let n = w.len();
    let mut out = Matrix::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            out[(a, b)] = w[a] * w[b];
        }
    }
    out
}

/// `√n Σ ‖w_iᵀ‖₁ |d_i|`, shared by ζ, φ and ψ.
fn bound_numerator(reg: &AugmentedRegression) -> f64 {
    (reg.n() as f64).sqrt() * rows(reg).map(|(w, d)| norm1(w) * d.abs()).sum::<f64>()
}

fn weighted_gram_min_eig(
    reg: &AugmentedRegression,
    weights: impl Iterator<Item = f64>,
) -> Result<f64> {
    let n = reg.n();
    let mut gram = Matrix::zeros(n, n);
    for ((w, _), c) in rows(reg).zip(weights) {
        for a in 0..n {
            for b in 0..n {
                gram[(a, b)] += c * w[a] * w[b];
            }
        }
    }
    let min_eigenvalue = min_eigenvalue_symmetric(&gram)?;
    if min_eigenvalue > 0.0 {
        Ok(min_eigenvalue)
    } else {
        Err(FilterError::SingularDesign { min_eigenvalue })
    }
}

/// Kernel weights `G_σ(β‖w_i‖₁ + |d_i|)` bounding every residual in the β-ball.
fn worst_case_weights<'a>(
    reg: &'a AugmentedRegression,
    beta: f64,
    sigma: f64,
) -> impl Iterator<Item = f64> + 'a {
    rows(reg).map(move |(w, d)| kernel(beta * norm1(w) + d.abs(), sigma))
}

/// `ζ = √n Σ ‖w_iᵀ‖₁ |d_i| / λ_min(Σ w_iᵀ w_i)`.
pub fn zeta(reg: &AugmentedRegression) -> Result<f64> {
    let lambda = weighted_gram_min_eig(reg, std::iter::repeat(1.0))?;
    Ok(bound_numerator(reg) / lambda)
}

/// `φ(σ)`: ζ's numerator over the minimum eigenvalue of the worst-case
/// weighted Gram matrix.
pub fn phi_sigma(reg: &AugmentedRegression, beta: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(FilterError::InvalidBandwidth(sigma));
    }
    let lambda = weighted_gram_min_eig(reg, worst_case_weights(reg, beta, sigma))?;
    Ok(bound_numerator(reg) / lambda)
}

/// `ψ(σ)`: the Jacobian-norm bound over the β-ball.
pub fn psi_sigma(reg: &AugmentedRegression, beta: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(FilterError::InvalidBandwidth(sigma));
    }
    let lambda = weighted_gram_min_eig(reg, worst_case_weights(reg, beta, sigma))?;
    let numerator: f64 = rows(reg)
        .map(|(w, d)| {
            let w1 = norm1(w);
            let ww = induced_l1_norm(&outer(w));
            let wd = norm1(w) * d.abs();
            (beta * w1 + d.abs()) * w1 * (beta * ww + wd)
        })
        .sum();
    Ok((reg.n() as f64).sqrt() * numerator / (sigma * sigma * lambda))
}

/// Heuristic radius `β = 2·max(ζ, ‖x̂⁻‖₁)`.
pub fn default_beta(reg: &AugmentedRegression) -> Result<f64> {
    Ok(2.0 * zeta(reg)?.max(norm1(&reg.prior_mean)))
}

/// Root of a nonincreasing function on the search grid. Evaluation failures
/// count as `+∞` (the weighted Gram matrix degenerates at tiny bandwidths).
fn nonincreasing_root(label: &'static str, mut g: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
    let mut eval = |s: f64| g(s).unwrap_or(f64::INFINITY);
    let decades = (SIGMA_SEARCH_MAX / SIGMA_SEARCH_MIN).log10();
    let steps = (decades * GRID_POINTS_PER_DECADE as f64).round() as usize;
    let grid = |i: usize| SIGMA_SEARCH_MIN * 10f64.powf(i as f64 / GRID_POINTS_PER_DECADE as f64);
    let mut lo = grid(0);
    if eval(lo) <= 0.0 {
        return Err(FilterError::BracketNotFound(label));
    }
    for i in 1..=steps {
        let hi = grid(i);
        if eval(hi) <= 0.0 {
            let (mut a, mut b) = (lo, hi);
            for _ in 0..BISECTION_STEPS {
                let mid = 0.5 * (a + b);
                if eval(mid) > 0.0 {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            return Ok(b);
        }
        lo = hi;
    }
    Err(FilterError::BracketNotFound(label))
}

/// Solves `φ(σ*) = β` and `ψ(σ†) = α` and returns the certificate.
pub fn sufficient_sigma(
    reg: &AugmentedRegression,
    beta: f64,
    alpha: f64,
) -> Result<ConvergenceCertificate> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(FilterError::InvalidConfig(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let zeta = zeta(reg)?;
    if !(beta > zeta) {
        return Err(FilterError::BetaTooSmall { beta, zeta });
    }
    let sigma_star = nonincreasing_root("phi", |s| Ok(phi_sigma(reg, beta, s)? - beta))?;
    let sigma_dagger = nonincreasing_root("psi", |s| Ok(psi_sigma(reg, beta, s)? - alpha))?;
    Ok(ConvergenceCertificate {
        beta,
        alpha,
        zeta,
        sigma_star,
        sigma_dagger,
        sigma_min: sigma_star.max(sigma_dagger),
    })
}

fn kernel_gram(
    reg: &AugmentedRegression,
    x: &[f64],
    sigma: f64,
) -> Result<(Vec<f64>, Vec<f64>, Matrix)> {
    let e = compute_residuals(reg, x)?;
    let g: Vec<f64> = e.iter().map(|&ei| kernel(ei, sigma)).collect();
    let n = reg.n();
    let mut nww = Matrix::zeros(n, n);
    for ((w, _), &gi) in rows(reg).zip(&g) {
        for a in 0..n {
            for b in 0..n {
                nww[(a, b)] += gi * w[a] * w[b];
            }
        }
    }
    Ok((e, g, nww))
}

fn solve_gram(nww: &Matrix, rhs: &Matrix) -> Result<Matrix> {
    solve_spd(nww, rhs).map_err(|err| match err {
        FilterError::NotPositiveDefinite { pivot, .. } => FilterError::SingularDesign {
            min_eigenvalue: pivot,
        },
        other => other,
    })
}

/// The unclamped fixed-point map `f(x)`.
pub fn fixed_point_map(reg: &AugmentedRegression, x: &[f64], sigma: f64) -> Result<Vec<f64>> {
    if !(sigma > 0.0) {
        return Err(FilterError::InvalidBandwidth(sigma));
    }
    let (_, g, nww) = kernel_gram(reg, x, sigma)?;
    let n = reg.n();
    let mut rhs = vec![0.0; n];
    for ((w, d), gi) in rows(reg).zip(g) {
        for a in 0..n {
            rhs[a] += gi * w[a] * d;
        }
    }
    Ok(solve_gram(&nww, &Matrix::column(&rhs))?.as_slice().to_vec())
}

/// Analytic Jacobian of [`fixed_point_map`], one column per state
/// coordinate:
///
/// ```text
/// ∂f/∂x_j = N⁻¹ (1/σ²) [ Σ e_i w_ij G_σ(e_i) w_iᵀ d_i − (Σ e_i w_ij G_σ(e_i) w_iᵀ w_i) f(x) ]
/// ```
pub fn jacobian_f(reg: &AugmentedRegression, x: &[f64], sigma: f64) -> Result<Matrix> {
    let f = fixed_point_map(reg, x, sigma)?;
    let (e, g, nww) = kernel_gram(reg, x, sigma)?;
    let n = reg.n();
    let inv_s2 = 1.0 / (sigma * sigma);
    let mut rhs = Matrix::zeros(n, n);
    for j in 0..n {
        let mut col = vec![0.0; n];
        for (i, (w, d)) in rows(reg).enumerate() {
            let coef = e[i] * w[j] * g[i] * inv_s2;
            if coef == 0.0 {
                continue;
            }
            let wf: f64 = w.iter().zip(&f).map(|(a, b)| a * b).sum();
            for a in 0..n {
                col[a] += coef * w[a] * (d - wf);
            }
        }
        for a in 0..n {
            rhs[(a, j)] = col[a];
        }
    }
    solve_gram(&nww, &rhs)
}

/// Floating-point operation counts of one filter step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlopCounts {
    pub s_kf: f64,
    pub s_mckf: f64,
    /// Terms with unspecified constants, kept symbolic.
    pub kf_order_terms: String,
    pub mckf_order_terms: String,
}

/// Polynomial flop counts of the Kalman filter and of the correntropy
/// filter with `t` average fixed-point iterations.
pub fn flop_counts(n: usize, m: usize, t: f64) -> Result<FlopCounts> {
    if n == 0 || m == 0 || !(t >= 1.0) {
        return Err(FilterError::InvalidConfig(format!(
            "flop counts need n, m, T >= 1 (got {n}, {m}, {t})"
        )));
    }
    let (nf, mf) = (n as f64, m as f64);
    let s_kf = 8.0 * nf.powi(3) + 10.0 * nf * nf * mf - nf * nf + 6.0 * nf * mf * mf - nf;
    let s_mckf = (2.0 * t + 8.0) * nf.powi(3)
        + (6.0 + 4.0 * t) * t * nf * nf * mf
        + (2.0 * t - 1.0) * nf * nf
        + (4.0 * t + 2.0) * nf * mf * mf
        + (3.0 * t - 1.0) * nf * mf
        + (4.0 * t - 1.0) * nf
        + 2.0 * t * mf.powi(3)
        + 2.0 * t * mf;
    Ok(FlopCounts {
        s_kf,
        s_mckf,
        kf_order_terms: "O(m^3)".to_string(),
        mckf_order_terms: format!("{t}*O(n^3) + {}*O(m^3)", 2.0 * t),
    })
}
