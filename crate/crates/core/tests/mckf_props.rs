mod common;

use common::{max_abs, max_abs_diff, random_update};
use proptest::prelude::*;
use robustkf_core::numerics::min_eigenvalue_symmetric;
use robustkf_core::{
    default_beta, fixed_point_direct, fixed_point_iterate, kf_update, mckf_update,
    sufficient_sigma, KernelConfig,
};

fn kernel(sigma: f64, epsilon: f64) -> KernelConfig {
    KernelConfig::new(sigma, epsilon).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    /// The gain form and the direct weighted least-squares form produce the
    /// same iterates.
    #[test]
    fn gain_form_matches_direct_form(seed in any::<u64>(), sigma in 0.5f64..5.0, outlier in 0.0f64..10.0) {
        let reg = random_update(seed, 4, 2, outlier).regression();
        let config = kernel(sigma, 1e-9).with_max_iterations(20);
        let gain = fixed_point_iterate(&reg, &config).unwrap();
        let direct = fixed_point_direct(&reg, &config).unwrap();
        for (a, b) in gain.report.iterates.iter().zip(&direct.iterates) {
            prop_assert!(max_abs_diff(a, b) <= 1e-10 * max_abs(b).max(1.0), "{a:?} vs {b:?}");
        }
    }

    /// Gross outliers push the measurement weight to the floor; the forms
    /// still agree.
    #[test]
    fn gain_form_matches_direct_form_at_the_floor(seed in any::<u64>(), outlier in 30.0f64..100.0) {
        let reg = random_update(seed, 4, 2, outlier).regression();
        let config = kernel(1.0, 1e-9).with_max_iterations(20);
        let gain = fixed_point_iterate(&reg, &config).unwrap();
        let direct = fixed_point_direct(&reg, &config).unwrap();
        for (a, b) in gain.report.iterates.iter().zip(&direct.iterates) {
            prop_assert!(max_abs_diff(a, b) <= 1e-10 * max_abs(b).max(1.0), "{a:?} vs {b:?}");
        }
    }

    /// Huge bandwidths reproduce the Kalman update.
    #[test]
    fn huge_bandwidth_is_kalman(seed in any::<u64>(), outlier in 0.0f64..20.0) {
        let p = random_update(seed, 4, 2, outlier);
        let (kf, _) = kf_update(&p.model, &p.prior, &p.y).unwrap();
        let (mc, _) = mckf_update(&p.model, &p.prior, &p.y, &kernel(1e8, 1e-6)).unwrap();
        prop_assert!(max_abs_diff(&mc.mean, &kf.mean) <= 1e-8 * max_abs(&kf.mean).max(1e-300));
        prop_assert!((&mc.cov - &kf.cov).max_abs() <= 1e-8 * kf.cov.max_abs());
    }

    /// The gap to the Kalman update shrinks like 1/σ².
    #[test]
    fn kalman_gap_is_second_order(seed in any::<u64>(), outlier in 2.0f64..8.0) {
        let p = random_update(seed, 4, 2, outlier);
        let (kf, _) = kf_update(&p.model, &p.prior, &p.y).unwrap();
        let gap = |sigma: f64| {
            let (mc, _) = mckf_update(&p.model, &p.prior, &p.y, &kernel(sigma, 1e-14)).unwrap();
            max_abs_diff(&mc.mean, &kf.mean)
        };
        let (g1, g2) = (gap(1e4), gap(2e4));
        prop_assert!(g1 >= 3.0 * g2, "gap {g1:e} at 1e4 vs {g2:e} at 2e4");
    }

    #[test]
    fn posterior_covariance_is_psd(seed in any::<u64>(), sigma in 0.3f64..10.0, outlier in 0.0f64..50.0) {
        let p = random_update(seed, 4, 2, outlier);
        let (post, report) = mckf_update(&p.model, &p.prior, &p.y, &kernel(sigma, 1e-6)).unwrap();
        prop_assert!(report.iterations >= 1);
        prop_assert!(post.cov.asymmetry() == 0.0);
        prop_assert!(min_eigenvalue_symmetric(&post.cov).unwrap() >= -1e-10 * post.cov.max_abs());
    }
}

/// Ascent of the correntropy objective is not guaranteed by the fixed-point
/// construction; the fraction of ascending solves is only reported.
#[test]
fn cost_ascent_is_observed() {
    let (mut eligible, mut ascending) = (0, 0);
    for seed in 0..400u64 {
        let reg = random_update(seed, 4, 2, 3.0).regression();
        let Ok(beta) = default_beta(&reg) else {
            continue;
        };
        let Ok(cert) = sufficient_sigma(&reg, beta, 0.5) else {
            continue;
        };
        let sol = fixed_point_iterate(&reg, &kernel(cert.sigma_min, 1e-9)).unwrap();
        let trace = &sol.report.cost_trace;
        assert_eq!(trace.len(), sol.report.iterates.len());
        eligible += 1;
        ascending += usize::from(trace.last().unwrap() >= &trace[0]);
    }
    assert!(eligible > 0);
    println!("cost ascent on {ascending} of {eligible} certified solves");
}
