//! Linear state-space models, Gaussian beliefs and mixture noise.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FilterError, Result};
use crate::numerics::{cholesky_strict, min_eigenvalue_symmetric, Matrix};
use crate::rng::standard_normal;

/// `x(k) = F x(k-1) + q(k-1)`, `y(k) = H x(k) + r(k)` with `cov(q) = Q`,
/// `cov(r) = R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSpaceModel {
    pub f: Matrix,
    pub h: Matrix,
    pub q: Matrix,
    pub r: Matrix,
}

impl StateSpaceModel {
    /// Builds a model and checks it with [`validate_model`].
    pub fn new(f: Matrix, h: Matrix, q: Matrix, r: Matrix) -> Result<Self> {
        let model = Self { f, h, q, r };
        validate_model(&model)?;
        Ok(model)
    }

    pub fn state_dim(&self) -> usize {
        self.f.rows()
    }

    pub fn obs_dim(&self) -> usize {
        self.h.rows()
    }

    /// Same dynamics with a different assumed measurement covariance.
    pub fn with_measurement_cov(&self, r: Matrix) -> Result<Self> {
        Self::new(self.f.clone(), self.h.clone(), self.q.clone(), r)
    }
}

/// Checks dimensions, symmetry, `R ≻ 0` and `Q ⪰ 0`.
pub fn validate_model(model: &StateSpaceModel) -> Result<()> {
    let n = model.f.rows();
    if !model.f.is_square() {
        return Err(FilterError::DimensionMismatch(format!(
            "F must be square, got {}x{}",
            model.f.rows(),
            model.f.cols()
        )));
    }
    if model.h.cols() != n {
        return Err(FilterError::DimensionMismatch(format!(
            "H must have {n} columns, got {}",
            model.h.cols()
        )));
    }
    let m = model.h.rows();
    if model.q.rows() != n || model.q.cols() != n {
        return Err(FilterError::DimensionMismatch(format!("Q must be {n}x{n}")));
    }
    if model.r.rows() != m || model.r.cols() != m {
        return Err(FilterError::DimensionMismatch(format!("R must be {m}x{m}")));
    }
    let q_min = min_eigenvalue_symmetric(&model.q)?;
    if q_min < -1e-10 * model.q.max_abs().max(1.0) {
        return Err(FilterError::NotPsd {
            min_eigenvalue: q_min,
        });
    }
    cholesky_strict(&model.r)?;
    Ok(())
}

/// State estimate and its covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianBelief {
    pub mean: Vec<f64>,
    pub cov: Matrix,
}

impl GaussianBelief {
    pub fn new(mean: Vec<f64>, cov: Matrix) -> Result<Self> {
        let belief = Self { mean, cov };
        belief.validate()?;
        Ok(belief)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.mean.is_empty() || !self.cov.is_square() || self.cov.rows() != self.mean.len() {
            return Err(FilterError::DimensionMismatch(format!(
                "belief mean has length {} but covariance is {}x{}",
                self.mean.len(),
                self.cov.rows(),
                self.cov.cols()
            )));
        }
        if self.mean.iter().any(|v| !v.is_finite()) || !self.cov.is_finite() {
            return Err(FilterError::NonFinite);
        }
        let min = min_eigenvalue_symmetric(&self.cov)?;
        if min < -1e-10 * self.cov.max_abs() {
            return Err(FilterError::NotPsd {
                min_eigenvalue: min,
            });
        }
        Ok(())
    }
}

/// One Gaussian component of a scalar mixture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: f64,
    pub variance: f64,
}

impl MixtureComponent {
    pub fn new(weight: f64, mean: f64, variance: f64) -> Self {
        Self {
            weight,
            mean,
            variance,
        }
    }
}

/// Independent per-coordinate Gaussian mixtures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureNoiseSpec {
    pub coordinates: Vec<Vec<MixtureComponent>>,
}

impl MixtureNoiseSpec {
    pub fn new(coordinates: Vec<Vec<MixtureComponent>>) -> Result<Self> {
        let spec = Self { coordinates };
        spec.validate()?;
        Ok(spec)
    }

    /// The same mixture on every one of `dim` coordinates.
    pub fn iid(dim: usize, components: &[MixtureComponent]) -> Result<Self> {
        Self::new(vec![components.to_vec(); dim])
    }

    pub fn gaussian(dim: usize, variance: f64) -> Result<Self> {
        Self::iid(dim, &[MixtureComponent::new(1.0, 0.0, variance)])
    }

    pub fn zero(dim: usize) -> Self {
        Self::gaussian(dim, 0.0).expect("zero spec is valid")
    }

    pub fn dim(&self) -> usize {
        self.coordinates.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.coordinates.is_empty() {
            return Err(FilterError::EmptyInput);
        }
        for (i, comps) in self.coordinates.iter().enumerate() {
            if comps.is_empty() {
                return Err(FilterError::InvalidConfig(format!(
                    "coordinate {i} has no components"
                )));
            }
            let total: f64 = comps.iter().map(|c| c.weight).sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(FilterError::InvalidConfig(format!(
                    "coordinate {i} weights sum to {total}"
                )));
            }
            for c in comps {
                if !(c.weight >= 0.0
                    && c.variance >= 0.0
                    && c.mean.is_finite()
                    && c.variance.is_finite())
                {
                    return Err(FilterError::InvalidConfig(format!(
                        "coordinate {i} has an invalid component {c:?}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Analytic per-coordinate mean.
    pub fn means(&self) -> Vec<f64> {
        self.coordinates
            .iter()
            .map(|comps| comps.iter().map(|c| c.weight * c.mean).sum())
            .collect()
    }

    /// Analytic per-coordinate variance (law of total variance).
    pub fn variances(&self) -> Vec<f64> {
        self.coordinates
            .iter()
            .zip(self.means())
            .map(|(comps, mu)| {
                comps
                    .iter()
                    .map(|c| c.weight * (c.variance + (c.mean - mu).powi(2)))
                    .sum()
            })
            .collect()
    }
}

/// Draws one vector: per coordinate, a component index by weight, then a
/// Gaussian with that component's moments.
pub fn sample_mixture<R: Rng + ?Sized>(spec: &MixtureNoiseSpec, rng: &mut R) -> Vec<f64> {
    spec.coordinates
        .iter()
        .map(|comps| {
            let component = if comps.len() == 1 {
                &comps[0]
            } else {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                comps
                    .iter()
                    .find(|c| {
                        acc += c.weight;
                        u < acc
                    })
                    .unwrap_or(&comps[comps.len() - 1])
            };
            let z = standard_normal(rng);
            component.mean + component.variance.sqrt() * z
        })
        .collect()
}

/// Advances the true state one step and produces the matching measurement.
pub fn propagate_truth<R: Rng + ?Sized>(
    model: &StateSpaceModel,
    x: &[f64],
    q_spec: &MixtureNoiseSpec,
    r_spec: &MixtureNoiseSpec,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = model.state_dim();
    let m = model.obs_dim();
    if x.len() != n || q_spec.dim() != n || r_spec.dim() != m {
        return Err(FilterError::DimensionMismatch(format!(
            "state {} / process noise {} / measurement noise {} against model n = {n}, m = {m}",
            x.len(),
            q_spec.dim(),
            r_spec.dim()
        )));
    }
    let q = sample_mixture(q_spec, rng);
    let x_next: Vec<f64> = model
        .f
        .mul_vec(x)
        .iter()
        .zip(&q)
        .map(|(a, b)| a + b)
        .collect();
    let r = sample_mixture(r_spec, rng);
    let y = model
        .h
        .mul_vec(&x_next)
        .iter()
        .zip(&r)
        .map(|(a, b)| a + b)
        .collect();
    Ok((x_next, y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn example1() -> StateSpaceModel {
        let th = std::f64::consts::PI / 18.0;
        StateSpaceModel::new(
            Matrix::from_rows(&[[th.cos(), -th.sin()], [th.sin(), th.cos()]]).unwrap(),
            Matrix::from_rows(&[[1.0, 1.0]]).unwrap(),
            Matrix::identity(2).scale(0.01),
            Matrix::from_rows(&[[0.01]]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn validate_example_model() {
        assert!(validate_model(&example1()).is_ok());
    }

    #[test]
    fn validate_rejects_bad_models() {
        let mut bad = example1();
        bad.h = Matrix::from_rows(&[[1.0, 1.0, 0.0]]).unwrap();
        assert!(matches!(
            validate_model(&bad),
            Err(FilterError::DimensionMismatch(_))
        ));

        let mut singular = example1();
        singular.r = Matrix::from_rows(&[[0.0]]).unwrap();
        assert!(matches!(
            validate_model(&singular),
            Err(FilterError::NotPositiveDefinite { .. })
        ));

        let mut indefinite_q = example1();
        indefinite_q.q = Matrix::from_diagonal(&[0.01, -0.5]);
        assert!(matches!(
            validate_model(&indefinite_q),
            Err(FilterError::NotPsd { .. })
        ));

        let mut asym_q = example1();
        asym_q.q = Matrix::from_rows(&[[1.0, 0.5], [0.0, 1.0]]).unwrap();
        assert!(matches!(
            validate_model(&asym_q),
            Err(FilterError::NotSymmetric { .. })
        ));
    }

    #[test]
    fn point_mass_samples_exactly_zero() {
        let mut rng = seeded(1);
        let spec = MixtureNoiseSpec::iid(3, &[MixtureComponent::new(1.0, 0.0, 0.0)]).unwrap();
        for _ in 0..10 {
            assert_eq!(sample_mixture(&spec, &mut rng), vec![0.0; 3]);
        }
    }

    #[test]
    fn mixture_variance_matches_total_variance_law() {
        let spec = MixtureNoiseSpec::iid(
            1,
            &[
                MixtureComponent::new(0.9, 0.0, 0.01),
                MixtureComponent::new(0.1, 0.0, 100.0),
            ],
        )
        .unwrap();
        assert!((spec.variances()[0] - 10.009).abs() < 1e-12);
        let mut rng = seeded(2024);
        let n = 1_000_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let v = sample_mixture(&spec, &mut rng)[0];
            sum += v;
            sum_sq += v * v;
        }
        let mean = sum / n as f64;
        let var = sum_sq / n as f64 - mean * mean;
        assert!((var - 10.009).abs() / 10.009 < 0.02, "variance {var}");
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let spec = MixtureNoiseSpec::iid(
            2,
            &[
                MixtureComponent::new(0.9, 0.0, 0.01),
                MixtureComponent::new(0.1, 0.0, 100.0),
            ],
        )
        .unwrap();
        let mut a = seeded(5);
        let mut b = seeded(5);
        for _ in 0..100 {
            assert_eq!(sample_mixture(&spec, &mut a), sample_mixture(&spec, &mut b));
        }
    }

    #[test]
    fn mixture_weights_must_sum_to_one() {
        let err = MixtureNoiseSpec::iid(1, &[MixtureComponent::new(0.5, 0.0, 1.0)]);
        assert!(matches!(err, Err(FilterError::InvalidConfig(_))));
    }

    #[test]
    fn propagation_without_noise() {
        let mut rng = seeded(0);
        let ident = StateSpaceModel::new(
            Matrix::identity(2),
            Matrix::from_rows(&[[2.0, -1.0]]).unwrap(),
            Matrix::identity(2),
            Matrix::identity(1),
        )
        .unwrap();
        let (x, y) = propagate_truth(
            &ident,
            &[1.5, 2.0],
            &MixtureNoiseSpec::zero(2),
            &MixtureNoiseSpec::zero(1),
            &mut rng,
        )
        .unwrap();
        assert_eq!(x, vec![1.5, 2.0]);
        assert_eq!(y, vec![1.0]);

        let quarter = std::f64::consts::FRAC_PI_2;
        let rot = StateSpaceModel::new(
            Matrix::from_rows(&[
                [quarter.cos(), -quarter.sin()],
                [quarter.sin(), quarter.cos()],
            ])
            .unwrap(),
            Matrix::from_rows(&[[1.0, 1.0]]).unwrap(),
            Matrix::identity(2),
            Matrix::identity(1),
        )
        .unwrap();
        let (x, _) = propagate_truth(
            &rot,
            &[1.0, 0.0],
            &MixtureNoiseSpec::zero(2),
            &MixtureNoiseSpec::zero(1),
            &mut rng,
        )
        .unwrap();
        assert!(x[0].abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);

        let bad = propagate_truth(
            &rot,
            &[1.0],
            &MixtureNoiseSpec::zero(2),
            &MixtureNoiseSpec::zero(1),
            &mut rng,
        );
        assert!(matches!(bad, Err(FilterError::DimensionMismatch(_))));
    }
}
