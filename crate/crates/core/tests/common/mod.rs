//! Random problem generators shared by the property tests.
#![allow(dead_code)]

use rand::Rng;
use robustkf_core::rng::{seeded, standard_normal, SimRng};
use robustkf_core::{
    build_regression, AugmentedRegression, GaussianBelief, Matrix, StateSpaceModel,
};

pub fn normal_matrix(rng: &mut SimRng, rows: usize, cols: usize, scale: f64) -> Matrix {
    let data = (0..rows * cols)
        .map(|_| scale * standard_normal(rng))
        .collect();
    Matrix::new(rows, cols, data).unwrap()
}

/// `G Gᵀ + floor·I` with Gaussian `G`.
pub fn random_spd(rng: &mut SimRng, n: usize, scale: f64, floor: f64) -> Matrix {
    let g = normal_matrix(rng, n, n, scale);
    &(&g * &g.transpose()) + &Matrix::identity(n).scale(floor)
}

pub fn normal_vec(rng: &mut SimRng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * standard_normal(rng)).collect()
}

/// A random stable-ish model with `1 ≤ n ≤ n_max`, `1 ≤ m ≤ m_max`.
pub fn random_model(rng: &mut SimRng, n_max: usize, m_max: usize) -> StateSpaceModel {
    let n = rng.gen_range(1..=n_max);
    let m = rng.gen_range(1..=m_max);
    let f = &Matrix::identity(n).scale(0.9) + &normal_matrix(rng, n, n, 0.15);
    let h = normal_matrix(rng, m, n, 1.0);
    let q = random_spd(rng, n, 0.1, 0.01);
    let r = random_spd(rng, m, 0.2, 0.05);
    StateSpaceModel::new(f, h, q, r).unwrap()
}

pub struct UpdateProblem {
    pub model: StateSpaceModel,
    pub prior: GaussianBelief,
    pub y: Vec<f64>,
}

impl UpdateProblem {
    pub fn regression(&self) -> AugmentedRegression {
        build_regression(&self.model, &self.prior, &self.y).unwrap()
    }
}

/// Random measurement update; `outlier` is added to the first measurement.
pub fn random_update(seed: u64, n_max: usize, m_max: usize, outlier: f64) -> UpdateProblem {
    let mut rng = seeded(seed);
    let model = random_model(&mut rng, n_max, m_max);
    let (n, m) = (model.state_dim(), model.obs_dim());
    let prior = GaussianBelief::new(
        normal_vec(&mut rng, n, 1.0),
        random_spd(&mut rng, n, 0.5, 0.1),
    )
    .unwrap();
    let mut y: Vec<f64> = model
        .h
        .mul_vec(&prior.mean)
        .iter()
        .zip(normal_vec(&mut rng, m, 0.5))
        .map(|(a, b)| a + b)
        .collect();
    y[0] += outlier;
    UpdateProblem { model, prior, y }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).fold(0.0, f64::max)
}
