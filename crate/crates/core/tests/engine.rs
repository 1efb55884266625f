use coexbo_core::engine::{
    init_session, load_session, run_baseline, save_session, session_from_json, session_to_json, Baseline, HumanSource,
    ObjectiveRef, Phase, SessionConfig, SCHEMA_VERSION,
};
use coexbo_core::oracle::SyntheticHumanConfig;
use coexbo_core::Error;

fn small(baseline: Baseline, seed: u64) -> SessionConfig {
    let mut cfg = SessionConfig::new(ObjectiveRef::Preset("gaussian_bump".into()), baseline, seed);
    cfg.n_obj = 5;
    cfg.n_pref = 20;
    cfg.iterations = 3;
    cfg.n_mc = 32;
    cfg.deterministic_timing = true;
    cfg
}

#[test]
fn every_baseline_runs() {
    for b in Baseline::ALL {
        let mut cfg = small(b, 7);
        cfg.iterations = 2;
        cfg.explain = false;
        let rows = run_baseline(b, &cfg).unwrap_or_else(|e| panic!("{b}: {e}"));
        assert_eq!(rows.len(), 2, "{b}");
        assert!(rows.iter().all(|r| r.regret >= 0.0 && r.regret.is_finite()), "{b}");
        assert!(rows[1].regret <= rows[0].regret, "{b}: best-so-far regret cannot grow");
        assert_eq!(rows[0].selection_correct.is_some(), b.uses_pairs(), "{b}");
    }
}

#[test]
fn same_seed_same_trace() {
    let cfg = small(Baseline::Coexbo, 3);
    let a = run_baseline(Baseline::Coexbo, &cfg).unwrap();
    let b = run_baseline(Baseline::Coexbo, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn state_machine_rejects_out_of_order_calls() {
    let mut s = init_session(small(Baseline::Coexbo, 1)).unwrap();
    assert_eq!(s.t, 1);
    assert!(matches!(s.apply_choice(1), Err(Error::State(_))));
    let pending = s.step_candidates().unwrap().clone();
    let bundle = pending.explanation.expect("explanations on by default");
    assert_eq!(bundle.candidates.len(), 2);
    assert_eq!(bundle.heatmaps.gp_mean.len(), 64);
    assert_eq!(bundle.heatmaps.gp_mean[0].len(), 64);
    assert!(matches!(s.step_candidates(), Err(Error::State(_))));
    assert!(matches!(s.apply_choice(3), Err(Error::Input(_))));
    let out = s.apply_choice(2).unwrap();
    assert_eq!(out.t, 2);
    assert!((0.0..=1.0).contains(&out.feedback.prob_mean));
    assert_eq!(s.phase, Phase::Ready);
    assert_eq!(s.history[0].x2, s.data.x[s.data.len() - 1]);
}

#[test]
fn budget_is_enforced() {
    let mut cfg = small(Baseline::Ucb, 2);
    cfg.iterations = 1;
    let mut s = init_session(cfg).unwrap();
    s.step_synthetic().unwrap();
    assert!(s.is_finished());
    assert!(matches!(s.step_candidates(), Err(Error::State(_))));
}

#[test]
fn interactive_session_with_supplied_duels() {
    let mut cfg = small(Baseline::Coexbo, 4);
    cfg.human = HumanSource::Interactive { initial_duels: vec![], prior_human: None };
    assert!(cfg.validate().is_err());
    cfg.human = HumanSource::Interactive {
        initial_duels: vec![],
        prior_human: Some(SyntheticHumanConfig { sigma_pref_sq: 0.0, adversarial: false }),
    };
    let mut s = init_session(cfg).unwrap();
    assert_eq!(s.duels.len(), 20);
    s.step_candidates().unwrap();
    assert!(s.synthetic_choice().is_err());
    s.apply_choice(1).unwrap();
    assert_eq!(s.duels.len(), 21);
}

#[test]
fn persistence_round_trip_and_resume() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.json");
    let mut s = init_session(small(Baseline::Coexbo, 5)).unwrap();
    s.step_synthetic().unwrap();
    s.step_candidates().unwrap();
    save_session(&s, &path).unwrap();
    let mut r = load_session(&path).unwrap();
    assert_eq!(session_to_json(&r).unwrap(), session_to_json(&s).unwrap());
    let c = s.synthetic_choice().unwrap();
    s.apply_choice(c).unwrap();
    r.apply_choice(c).unwrap();
    assert_eq!(s.history.last(), r.history.last());
}

#[test]
fn persistence_errors() {
    let s = init_session(small(Baseline::Ucb, 6)).unwrap();
    let text = session_to_json(&s).unwrap();
    assert!(matches!(session_from_json(&text[..text.len() / 2]), Err(Error::Corrupt(_))));
    let newer = text.replacen(
        &format!("\"schema_version\":{SCHEMA_VERSION}"),
        &format!("\"schema_version\":{}", SCHEMA_VERSION + 1),
        1,
    );
    assert!(matches!(session_from_json(&newer), Err(Error::SchemaVersion { .. })));
    let v1 = text
        .replacen(&format!("\"schema_version\":{SCHEMA_VERSION}"), "\"schema_version\":1", 1)
        .replacen("\"duels\":", "\"preferences\":", 1)
        .replacen(",\"last_feedback\":null", "", 1);
    let migrated = session_from_json(&v1).unwrap();
    assert_eq!(migrated.schema_version, SCHEMA_VERSION);
    assert_eq!(session_to_json(&migrated).unwrap(), text);
}
