//! Fixtures shared by the benchmarks.

use robustkf_core::{
    kf_predict, make_example1, make_example2, sim, GaussianBelief, Matrix, StateSpaceModel,
};

/// A model together with a prior and a measurement containing an outlier.
pub struct UpdateFixture {
    pub model: StateSpaceModel,
    pub prior: GaussianBelief,
    pub y: Vec<f64>,
}

/// Measurement update of the rotating 2-D system, or of the speed-observed
/// target when `example == 2`, one step after a unit-covariance estimate.
pub fn update_fixture(example: u8) -> UpdateFixture {
    let model = if example == 2 {
        make_example2(sim::DEFAULT_DT).expect("example 2 model")
    } else {
        make_example1(sim::DEFAULT_THETA)
    };
    let n = model.state_dim();
    let start =
        GaussianBelief::new(vec![0.5; n], Matrix::identity(n).scale(0.1)).expect("valid belief");
    let prior = kf_predict(&model, &start).expect("predict");
    let mut y = model.h.mul_vec(&prior.mean);
    y[0] += 8.0;
    UpdateFixture { model, prior, y }
}
