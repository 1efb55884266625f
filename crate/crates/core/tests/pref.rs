use approx::assert_relative_eq;
use coexbo_core::pref::{
    augment_duels, build_soft_copeland, dirichlet_transform, fit_preference_gp, predict_preference, sample_from_belief,
    DuelRecord, PreferenceGp, SoftCopeland,
};
use coexbo_core::{Domain, Error};
use proptest::prelude::*;
use std::sync::OnceLock;

fn duels_for(f: impl Fn(f64) -> f64, n: usize) -> Vec<DuelRecord> {
    (0..n)
        .map(|i| {
            let a = ((i * 37) % 97) as f64 / 96.0;
            let b = ((i * 61 + 13) % 97) as f64 / 96.0;
            DuelRecord { x1: vec![a], x2: vec![b], y_pref: u8::from(f(a) > f(b)) }
        })
        .collect()
}

fn fitted() -> &'static (PreferenceGp, SoftCopeland) {
    static CELL: OnceLock<(PreferenceGp, SoftCopeland)> = OnceLock::new();
    CELL.get_or_init(|| {
        let g = fit_preference_gp(&duels_for(|x| -(x - 0.7f64).powi(2), 80), &Domain::unit(1), 0.01, 3).unwrap();
        let sc = build_soft_copeland(&g, 64, 3).unwrap();
        (g, sc)
    })
}

#[test]
fn dirichlet_targets_are_frozen() {
    // Independently computed: s = ln(1/α + 1), target = ln α − s/2.
    let (t, s) = dirichlet_transform(&[1, 0], 0.01).unwrap();
    assert_relative_eq!(s[(1, 0)], 0.6881843912178163, max_relative = 1e-14);
    assert_relative_eq!(t[(1, 0)], -0.33414186475574004, max_relative = 1e-14);
    assert_relative_eq!(s[(0, 0)], 4.61512051684126, max_relative = 1e-14);
    assert_relative_eq!(t[(0, 0)], -6.912730444408721, max_relative = 1e-14);
    assert_eq!((t[(0, 1)], s[(0, 1)]), (t[(1, 0)], s[(1, 0)]));
    assert!(dirichlet_transform(&[2], 0.01).is_err());
    assert!(dirichlet_transform(&[1], 0.0).is_err());
}

#[test]
fn augmentation_mirrors_every_duel() {
    let d = vec![DuelRecord { x1: vec![0.1], x2: vec![0.9], y_pref: 1 }];
    let a = augment_duels(&d);
    assert_eq!(a.len(), 2);
    assert_eq!(a[1], DuelRecord { x1: vec![0.9], x2: vec![0.1], y_pref: 0 });
}

#[test]
fn invalid_duel_sets() {
    let dom = Domain::unit(1);
    assert!(matches!(fit_preference_gp(&[], &dom, 0.01, 0), Err(Error::Input(_))));
    let same = vec![DuelRecord { x1: vec![0.3], x2: vec![0.3], y_pref: 1 }; 4];
    assert!(matches!(fit_preference_gp(&same, &dom, 0.01, 0), Err(Error::Degenerate(_))));
    let outside = vec![DuelRecord { x1: vec![1.3], x2: vec![0.3], y_pref: 1 }];
    assert!(fit_preference_gp(&outside, &dom, 0.01, 0).is_err());
}

#[test]
fn learned_preferences_follow_the_objective() {
    let (g, sc) = fitted();
    assert!(predict_preference(g, &[0.7], &[0.1], 256, 0).unwrap().0 > 0.8);
    assert!(predict_preference(g, &[0.05], &[0.65], 256, 0).unwrap().0 < 0.2);
    assert!(sc.copeland_mean(&[0.7]) > sc.copeland_mean(&[0.1]));
    assert!(sc.copeland_var(&[0.5]) >= 0.0);
}

#[test]
fn belief_samples_favor_preferred_region() {
    let (_, sc) = fitted();
    let xs = sample_from_belief(sc, 400, 1).unwrap();
    assert_eq!(xs.len(), 400);
    assert!(xs.iter().all(|x| (0.0..=1.0).contains(&x[0])));
    let mean = xs.iter().map(|x| x[0]).sum::<f64>() / 400.0;
    assert!((mean - 0.7).abs() < 0.15, "mean {mean}");
    assert_eq!(sample_from_belief(sc, 5, 9).unwrap(), sample_from_belief(sc, 5, 9).unwrap());
}

#[test]
fn models_serialize_losslessly() {
    let (g, sc) = fitted();
    let g2: PreferenceGp = serde_json::from_str(&serde_json::to_string(g).unwrap()).unwrap();
    assert_eq!(predict_preference(&g2, &[0.2], &[0.4], 32, 1).unwrap(), predict_preference(g, &[0.2], &[0.4], 32, 1).unwrap());
    let sc2: SoftCopeland = serde_json::from_str(&serde_json::to_string(sc).unwrap()).unwrap();
    assert_eq!(&sc2, sc);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn swap_symmetry_is_exact(a in 0.0f64..1.0, b in 0.0f64..1.0, n_mc in 1usize..300, seed in 0u64..100) {
        let (g, _) = fitted();
        let p = predict_preference(g, &[a], &[b], n_mc, seed).unwrap().0;
        let q = predict_preference(g, &[b], &[a], n_mc, seed).unwrap().0;
        prop_assert!((p + q - 1.0).abs() < 1e-12);
        prop_assert!((predict_preference(g, &[a], &[a], n_mc, seed).unwrap().0 - 0.5).abs() < 1e-12);
    }
}
