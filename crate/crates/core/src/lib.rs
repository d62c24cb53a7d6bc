//! Maximum correntropy Kalman filtering.
//!
//! The crate provides the classic Kalman filter, a Kalman filter whose
//! measurement update maximizes the correntropy of whitened residuals with
//! a fixed-point solver, bandwidth certificates for that solver, and a
//! seeded Monte Carlo harness for comparing both under Gaussian and
//! impulsive noise.

// Parameter checks are written `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod kf;
pub mod mckf;
pub mod model;
pub mod numerics;
pub mod rng;
pub mod sim;

pub use diagnostics::{
    default_beta, fixed_point_map, flop_counts, jacobian_f, phi_sigma, psi_sigma, sufficient_sigma,
    zeta, ConvergenceCertificate, FlopCounts,
};
pub use error::{FilterError, Result};
pub use kf::{joseph_covariance, kf_predict, kf_update};
pub use mckf::{
    build_regression, compute_residuals, correntropy_estimate, fixed_point_direct,
    fixed_point_direct_from, fixed_point_iterate, fixed_point_iterate_from, gaussian_kernel,
    mcc_cost, mckf_step, mckf_update, robust_gain, weight_matrices, AugmentedRegression,
    FixedPointReport, FixedPointSolution, KernelConfig, StepNorm, WeightMatrices, WEIGHT_FLOOR,
};
pub use model::{
    propagate_truth, sample_mixture, validate_model, GaussianBelief, MixtureComponent,
    MixtureNoiseSpec, StateSpaceModel,
};
pub use numerics::Matrix;
pub use sim::{
    error_density, make_example1, make_example2, regression_snapshot, run_monte_carlo,
    ExperimentConfig, ExperimentResult, FilterNoise, FilterResult, FilterSpec, Histogram,
    InitialCondition, ModelChoice, NoiseCase, RegressionSnapshot,
};
