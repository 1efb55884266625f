use approx::assert_relative_eq;
use coexbo_core::gp::{fit_gp, standardization};
use coexbo_core::{Dataset, Domain, GpModel, KernelParams};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn toy(n: usize) -> (Dataset, Domain) {
    let domain = Domain::new(vec![-1.0, 0.0], vec![1.0, 2.0]).unwrap();
    let x: Vec<Vec<f64>> = (0..n).map(|i| vec![-1.0 + 2.0 * ((i * 7) % n) as f64 / n as f64, 2.0 * i as f64 / n as f64]).collect();
    let y = x.iter().map(|p| (3.0 * p[0]).sin() + 0.5 * p[1] * p[1]).collect();
    (Dataset::new(x, y).unwrap(), domain)
}

fn model(n: usize) -> GpModel {
    let (data, domain) = toy(n);
    let (m, s) = standardization(&data.y);
    let params = KernelParams { outputscale: 1.3, lengthscales: vec![0.4, 0.7], noise: 1e-3, constant_mean: 0.2 };
    GpModel::condition(params, domain, data, m, s).unwrap()
}

#[test]
fn posterior_matches_linear_solve() {
    let gp = model(12);
    let unit = |x: &[f64]| vec![(x[0] + 1.0) / 2.0, x[1] / 2.0];
    let k = |a: &[f64], b: &[f64]| {
        let (a, b) = (unit(a), unit(b));
        1.3 * (-0.5 * (((a[0] - b[0]) / 0.4).powi(2) + ((a[1] - b[1]) / 0.7).powi(2))).exp()
    };
    let n = gp.data.len();
    let kxx = DMatrix::from_fn(n, n, |i, j| k(&gp.data.x[i], &gp.data.x[j]) + if i == j { 1e-3 } else { 0.0 });
    let t = DVector::from_iterator(n, gp.data.y.iter().map(|y| (y - gp.y_mean) / gp.y_std - 0.2));
    let lu = kxx.lu();
    let q = [0.3, 1.1];
    let ks = DVector::from_iterator(n, gp.data.x.iter().map(|x| k(x, &q)));
    let w = lu.solve(&t).unwrap();
    let m = gp.y_mean + gp.y_std * (0.2 + ks.dot(&w));
    let v = gp.y_std.powi(2) * (1.3 - ks.dot(&lu.solve(&ks).unwrap()));
    let (pm, pv) = gp.posterior(&q).unwrap();
    assert_relative_eq!(pm, m, max_relative = 1e-10);
    assert_relative_eq!(pv, v, max_relative = 1e-8);
}

#[test]
fn incremental_update_equals_refit_with_fixed_params() {
    let gp = model(10);
    let inc = gp.with_observation(&[0.1, 0.9], 0.4).unwrap();
    let mut data = gp.data.clone();
    data.push(vec![0.1, 0.9], 0.4);
    let full = GpModel::condition(gp.params.clone(), gp.domain.clone(), data, gp.y_mean, gp.y_std).unwrap();
    for q in [[0.0, 0.0], [0.5, 1.5], [-0.9, 1.9]] {
        let (a, b) = (inc.posterior(&q).unwrap(), full.posterior(&q).unwrap());
        assert_relative_eq!(a.0, b.0, max_relative = 1e-12);
        assert_relative_eq!(a.1, b.1, max_relative = 1e-12);
    }
}

#[test]
fn sample_covariance_approaches_posterior() {
    let gp = model(8);
    let xs = vec![vec![0.2, 0.3], vec![0.25, 0.35], vec![-0.8, 1.7]];
    let draws = gp.sample_posterior(&xs, 20_000, 4).unwrap();
    let cov = gp.posterior_cov(&xs, &xs).unwrap();
    let mean = gp.posterior_means(&xs).unwrap();
    for j in 0..3 {
        let col = draws.column(j);
        let m = col.mean();
        assert!((m - mean[j]).abs() < 4.0 * (cov[(j, j)] / 20_000.0).sqrt() + 1e-9);
        let v = col.iter().map(|c| (c - m).powi(2)).sum::<f64>() / 19_999.0;
        assert_relative_eq!(v, cov[(j, j)], max_relative = 0.05);
    }
}

#[test]
fn fitting_beats_default_hyperparameters() {
    let (data, domain) = toy(20);
    let fitted = fit_gp(&data, &domain, 1).unwrap();
    let (m, s) = standardization(&data.y);
    let default = GpModel::condition(KernelParams::default_for(2), domain, data, m, s).unwrap();
    assert!(fitted.log_marginal_likelihood() >= default.log_marginal_likelihood());
    assert_eq!(fit_gp(&fitted.data, &fitted.domain, 1).unwrap().params, fitted.params, "deterministic for a seed");
}

#[test]
fn fit_rejects_bad_inputs() {
    let (data, domain) = toy(5);
    assert!(fit_gp(&Dataset::new(vec![vec![0.0, 0.0]], vec![1.0]).unwrap(), &domain, 0).is_err());
    let mut outside = data.clone();
    outside.push(vec![5.0, 0.0], 1.0);
    assert!(fit_gp(&outside, &domain, 0).is_err());
    let mut nan = data;
    nan.push(vec![0.0, 0.0], f64::NAN);
    assert!(fit_gp(&nan, &domain, 0).is_err());
}

#[test]
fn serde_round_trip_is_lossless() {
    let gp = model(9);
    let text = serde_json::to_string(&gp).unwrap();
    let back: GpModel = serde_json::from_str(&text).unwrap();
    assert_eq!(serde_json::to_string(&back).unwrap(), text);
    assert_eq!(back.posterior(&[0.1, 0.1]).unwrap(), gp.posterior(&[0.1, 0.1]).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn variance_is_between_zero_and_prior(a in -1.0f64..1.0, b in 0.0f64..2.0) {
        let gp = model(10);
        let (_, v) = gp.posterior(&[a, b]).unwrap();
        prop_assert!(v >= 0.0);
        prop_assert!(v <= 1.3 * gp.y_std * gp.y_std * (1.0 + 1e-12));
    }

    #[test]
    fn conditioning_never_increases_variance(a in -1.0f64..1.0, b in 0.0f64..2.0, c in -1.0f64..1.0, d in 0.0f64..2.0) {
        let gp = model(6);
        let more = gp.with_observation(&[c, d], 0.0).unwrap();
        prop_assert!(more.posterior(&[a, b]).unwrap().1 <= gp.posterior(&[a, b]).unwrap().1 + 1e-12);
    }
}
