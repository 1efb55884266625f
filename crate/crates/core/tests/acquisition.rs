use approx::assert_relative_eq;
use coexbo_core::acquisition::{
    batch_ucb, maximize_af, product_of_gaussians, regret_ratio, scale_belief, thompson_candidate, ucb, AcqConfig,
    RhoConvention, YStats,
};
use coexbo_core::gp::standardization;
use coexbo_core::{Dataset, Domain, GpModel, KernelParams};
use proptest::prelude::*;

fn gp() -> GpModel {
    let dom = Domain::new(vec![-2.0, -2.0], vec![2.0, 2.0]).unwrap();
    let x: Vec<Vec<f64>> = (0..12).map(|i| vec![-1.8 + 0.3 * i as f64, 1.5 - 0.25 * i as f64]).collect();
    let y: Vec<f64> = x.iter().map(|p| -(p[0] - 0.4).powi(2) - (p[1] + 0.2).powi(2)).collect();
    let (m, s) = standardization(&y);
    let params = KernelParams { outputscale: 1.0, lengthscales: vec![0.4, 0.4], noise: 1e-4, constant_mean: 0.0 };
    GpModel::condition(params, dom, Dataset::new(x, y).unwrap(), m, s).unwrap()
}

#[test]
fn maximizer_finds_interior_peak() {
    let dom = Domain::new(vec![-2.0, -2.0], vec![2.0, 2.0]).unwrap();
    let x = maximize_af(|x| -(x[0] - 0.37).powi(2) - 2.0 * (x[1] + 1.21).powi(2), &dom, 4, 0).unwrap();
    assert!((x[0] - 0.37).abs() < 1e-3 && (x[1] + 1.21).abs() < 1e-3, "{x:?}");
    let corner = maximize_af(|x| x[0] + x[1], &dom, 4, 0).unwrap();
    assert!(corner[0] > 1.99 && corner[1] > 1.99);
}

#[test]
fn batch_ucb_hallucinates_a_second_point() {
    let g = gp();
    let (a, b) = batch_ucb(&g, 2.0, 5).unwrap();
    assert_ne!(a, b);
    let best = maximize_af(|x| ucb(&g, x, 2.0), &g.domain, 10, 5).unwrap();
    assert_eq!(a, best);
    let h = g.with_observation(&a, g.posterior_mean(&a)).unwrap();
    assert!(h.posterior(&a).unwrap().1 < g.posterior(&a).unwrap().1);
}

#[test]
fn thompson_is_seeded() {
    let g = gp();
    assert_eq!(thompson_candidate(&g, 3).unwrap(), thompson_candidate(&g, 3).unwrap());
    assert!(g.domain.contains(&thompson_candidate(&g, 4).unwrap()));
}

#[test]
fn belief_scaling_conventions() {
    let stats = YStats { mean: -2.0, std: 3.0 };
    let base = AcqConfig { beta_sqrt: 2.0, gamma: 0.5, t: 2, rho: RhoConvention::Swapped };
    let s = scale_belief(0.4, 0.1, stats, 0.2, &base);
    assert_relative_eq!(s.mu_pi, 3.0 * 0.4 - 2.0, epsilon = 1e-15);
    assert_relative_eq!(s.var_pi, 9.0 * 0.1 + 0.5 * 4.0 * 0.2, epsilon = 1e-15);
    let lit = scale_belief(0.4, 0.1, stats, 0.2, &AcqConfig { rho: RhoConvention::PaperLiteral, ..base });
    assert_relative_eq!(lit.mu_pi, -2.0 * 0.4 + 3.0, epsilon = 1e-15);
    assert_relative_eq!(lit.var_pi, 4.0 * 0.1 + 0.5 * 4.0 * 0.2, epsilon = 1e-15);
}

#[test]
fn invalid_acquisition_settings() {
    assert!(AcqConfig { gamma: 0.0, ..AcqConfig::default() }.validate().is_err());
    assert!(AcqConfig { beta_sqrt: -1.0, ..AcqConfig::default() }.validate().is_err());
    assert!(AcqConfig::default().validate().is_ok());
}

proptest! {
    #[test]
    fn product_is_a_precision_weighted_average(
        m1 in -5.0f64..5.0, m2 in -5.0f64..5.0, v1 in 1e-3f64..10.0, v2 in 1e-3f64..10.0
    ) {
        let (m, v) = product_of_gaussians(m1, v1, m2, v2);
        prop_assert!(v <= v1.min(v2) * (1.0 + 1e-12));
        prop_assert!(m >= m1.min(m2) - 1e-12 && m <= m1.max(m2) + 1e-12);
        let (ms, vs) = product_of_gaussians(m2, v2, m1, v1);
        prop_assert!((m - ms).abs() < 1e-12 && (v - vs).abs() < 1e-12);
        prop_assert!((1.0 / v - (1.0 / v1 + 1.0 / v2)).abs() < 1e-9 * (1.0 / v));
    }

    #[test]
    fn regret_ratio_is_below_one(rv in 0.0f64..10.0, g in 1e-4f64..1.0, t in 1usize..1000, v1 in 1e-6f64..10.0, v2 in 0.0f64..10.0) {
        let r = regret_ratio(rv, g, t, v1, v2).unwrap();
        prop_assert!((0.0..1.0).contains(&r));
    }
}
