//! Classic Kalman filter predict and update.

use crate::error::{FilterError, Result};
use crate::model::{GaussianBelief, StateSpaceModel};
use crate::numerics::{solve_spd, Matrix};

/// Prior belief: `x⁻ = F x̂`, `P⁻ = F P Fᵀ + Q`.
pub fn kf_predict(model: &StateSpaceModel, posterior: &GaussianBelief) -> Result<GaussianBelief> {
    let n = model.state_dim();
    if posterior.dim() != n || posterior.cov.rows() != n {
        return Err(FilterError::DimensionMismatch(format!(
            "belief of dimension {} for a model with n = {n}",
            posterior.dim()
        )));
    }
    let mean = model.f.mul_vec(&posterior.mean);
    let cov = &(&(&model.f * &posterior.cov) * &model.f.transpose()) + &model.q;
    Ok(GaussianBelief {
        mean,
        cov: cov.symmetrized(),
    })
}

/// Joseph-form covariance `(I − K H) P (I − K H)ᵀ + K R Kᵀ`, symmetrized.
///
/// Valid for any gain, not only the optimal one.
pub fn joseph_covariance(prior_cov: &Matrix, gain: &Matrix, h: &Matrix, r: &Matrix) -> Matrix {
    let n = prior_cov.rows();
    let i_kh = &Matrix::identity(n) - &(gain * h);
    let left = &(&i_kh * prior_cov) * &i_kh.transpose();
    let right = &(gain * r) * &gain.transpose();
    (&left + &right).symmetrized()
}

/// `K = P Hᵀ (H P Hᵀ + R)⁻¹`, computed by an SPD solve on the transpose.
pub(crate) fn gain_from(p: &Matrix, h: &Matrix, r: &Matrix) -> Result<Matrix> {
    let pht = p * &h.transpose();
    let s = &(h * &pht) + r;
    // K Sᵀ = P Hᵀ  <=>  S Kᵀ = H P  (S symmetric)
    Ok(solve_spd(&s, &pht.transpose())?.transpose())
}

/// Measurement update. Returns the posterior and the Kalman gain.
pub fn kf_update(
    model: &StateSpaceModel,
    prior: &GaussianBelief,
    y: &[f64],
) -> Result<(GaussianBelief, Matrix)> {
    let n = model.state_dim();
    let m = model.obs_dim();
    if prior.dim() != n || y.len() != m {
        return Err(FilterError::DimensionMismatch(format!(
            "prior of dimension {} and measurement of length {} for n = {n}, m = {m}",
            prior.dim(),
            y.len()
        )));
    }
    let gain = gain_from(&prior.cov, &model.h, &model.r)?;
    let predicted = model.h.mul_vec(&prior.mean);
    let innovation: Vec<f64> = y.iter().zip(&predicted).map(|(a, b)| a - b).collect();
    let correction = gain.mul_vec(&innovation);
    let mean = prior
        .mean
        .iter()
        .zip(&correction)
        .map(|(a, b)| a + b)
        .collect();
    let cov = joseph_covariance(&prior.cov, &gain, &model.h, &model.r);
    Ok((GaussianBelief { mean, cov }, gain))
}
