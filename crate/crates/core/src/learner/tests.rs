use super::*;
use crate::oracles::{builtin, drug_table, DrugLookup, FourOps};

fn small(seed: u64, max_runs: usize) -> CampaignConfig {
    let mut c = CampaignConfig::for_oracle(&FourOps, 8, max_runs, seed);
    c.fit.restarts = 4;
    c.ego.x_starts = 6;
    c.design.budget.sequence.restarts = 2;
    c.design.budget.sequence.steps = 500;
    c.design.budget.lhd.steps = 500;
    c
}

#[test]
fn stopping_rule() {
    assert!(should_stop(&[9.0, 0.5, 0.3, 0.2], 100.0, 0.01));
    assert!(!should_stop(&[0.1, 0.1], 100.0, 0.01));
    assert!(!should_stop(&[0.5, 1.5, 0.2], 100.0, 0.01));
    assert!(should_stop(&[0.5, 0.3, 0.2], -100.0, 0.01));
    assert!(!should_stop(&[1e-13, 1e-13, 1e-11], 0.0, 0.01));
}

#[test]
fn budget_equal_to_design_runs_no_loop() {
    let c = run_campaign(&FourOps, "b", small(1, 8), None).unwrap();
    assert_eq!(c.status, Status::Stopped { reason: StopReason::Budget });
    assert_eq!(c.counters.sequential, 0);
    assert!(c.ei_trace.is_empty());
    assert_eq!(c.n(), 8);
}

#[test]
fn four_ops_campaign_invariants() {
    let a = run_campaign(&FourOps, "a", small(3, 14), None).unwrap();
    let b = run_campaign(&FourOps, "a", small(3, 14), None).unwrap();
    assert_eq!(a.history, b.history, "same seed, same trajectory");
    assert!(a.n() <= 14);
    assert_eq!(a.ei_trace.len(), a.counters.sequential);
    let best = a.cumulative_best();
    assert!(best.windows(2).all(|w| w[1] >= w[0]));
    let inc = a.incumbent.as_ref().unwrap();
    assert_eq!(inc.y, *best.last().unwrap());
    assert_eq!(a.history[inc.index].y, inc.y);
    for o in &a.history {
        let want = crate::oracles::four_ops(&o.point.x, &o.point.o).unwrap();
        assert_eq!(o.y, want);
    }
}

#[test]
fn ask_tell_contract() {
    let mut c = Campaign::new("t", small(5, 10)).unwrap();
    let s1 = c.suggest().unwrap();
    assert_eq!(s1, c.suggest().unwrap());
    assert_eq!(s1.source, Source::Initial);
    assert!(c.observe(&s1.point, f64::NAN, None, false).is_err());
    let other = QSPoint { x: vec![0.5; 4], o: vec![1, 2, 3, 4] };
    assert!(c.observe(&other, 1.0, None, false).is_err());
    assert!(c.observe(&s1.point, 10.0, Some("n1"), false).unwrap());
    assert!(!c.observe(&s1.point, 10.0, Some("n1"), false).unwrap());
    assert_eq!(c.n(), 1);
    assert!(c.observe(&other, 25.0, None, true).unwrap());
    assert_eq!(c.incumbent.as_ref().unwrap().y, 25.0);
    assert_eq!(c.history[1].source, Source::Manual);
    assert!(matches!(c.model_summary(), Err(Error::NotFitted)));
    while c.initial_done() < c.design.len() {
        let s = c.suggest().unwrap();
        c.observe(&s.point, FourOps.evaluate(&s.point).unwrap(), None, false).unwrap();
    }
    let m = c.model_summary().unwrap();
    assert_eq!(m.latent.len(), 4);
    let s = c.suggest().unwrap();
    assert_eq!(s.source, Source::Sequential);
    assert!(s.ei.unwrap() >= 0.0);
    c.observe(&s.point, FourOps.evaluate(&s.point).unwrap(), None, false).unwrap();
    assert_eq!(c.ei_trace.len(), 1);
    assert_eq!(c.status, Status::Stopped { reason: StopReason::Budget });
    assert!(matches!(c.suggest(), Err(Error::Stopped(_))));
    assert!(matches!(c.observe(&s.point, 1.0, None, true), Err(Error::Stopped(_))));
}

#[test]
fn persistence_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    let mut c = Campaign::new("p", small(7, 12)).unwrap();
    c.attach(&path).unwrap();
    for _ in 0..9 {
        let s = c.suggest().unwrap();
        c.observe(&s.point, FourOps.evaluate(&s.point).unwrap(), None, false).unwrap();
    }
    let text = fs::read_to_string(&path).unwrap();
    let again = Campaign::from_json(&text).unwrap().to_json().unwrap();
    assert_eq!(text, again);
    assert!(!dir.path().join("c.json.tmp").exists());

    let mut loaded = Campaign::load(&path).unwrap();
    let s_loaded = loaded.suggest().unwrap();
    let s_live = c.suggest().unwrap();
    assert_eq!(s_loaded, s_live);
    assert_eq!(fs::read_to_string(&path).unwrap(), c.to_json().unwrap());
}

#[test]
fn history_csv_round_trip() {
    let c = run_campaign(&FourOps, "h", small(2, 9), None).unwrap();
    let mut buf = Vec::new();
    c.write_history_csv(&mut buf).unwrap();
    let (k, runs) = crate::qscore::read_runs(buf.as_slice()).unwrap();
    assert_eq!(k, 4);
    let mut d = Campaign::new("h2", small(2, 20)).unwrap();
    assert_eq!(d.import_runs(&runs).unwrap(), 9);
    assert_eq!(d.incumbent.as_ref().unwrap().y, c.incumbent.as_ref().unwrap().y);
}

#[test]
fn drug_candidates_are_never_repeated() {
    let oracle = DrugLookup;
    let mut cfg = CampaignConfig::for_oracle(&oracle, 8, 24, 4);
    cfg.stop_on_ei = false;
    cfg.fit.tau2 = crate::magp::Tau2Policy::Fixed(1e-6);
    cfg.fit.restarts = 4;
    let c = run_campaign(&oracle, "d", cfg, None).unwrap();
    assert_eq!(c.n(), 24);
    assert_eq!(c.status, Status::Stopped { reason: StopReason::Exhausted });
    for (i, a) in c.history.iter().enumerate() {
        assert!(c.history[..i].iter().all(|b| !same_point(&a.point, &b.point)));
    }
    let max = drug_table().unwrap().iter().map(|r| r.y).fold(f64::MIN, f64::max);
    assert_eq!(c.incumbent.as_ref().unwrap().y, max);
}

#[test]
fn fast_mode_bookkeeping() {
    let mut cfg = small(9, 16);
    cfg.max_seconds = Some(600.0);
    let c = run_fast_campaign(&FourOps, "f", cfg, None).unwrap();
    let after_initial = c.n() - c.design.len();
    assert_eq!(c.counters.refits + c.counters.sm_updates + c.counters.refit_failures, after_initial + 1);
    assert!(!c.fast.batch_sizes.is_empty());
    // the frozen model still interpolates every observation
    let mut c = c;
    let hist = c.history.clone();
    let b = c.config.bounds.clone();
    let m = c.current_model().unwrap();
    for o in &hist {
        let p = m.predict(&QSPoint { x: b.to_unit(&o.point.x), o: o.point.o.clone() });
        assert!((p.mean - o.y).abs() < 1e-5 * o.y.abs().max(1.0), "{} vs {}", p.mean, o.y);
    }
}

#[test]
fn fixed_x_campaign_keeps_quantities() {
    let oracle = builtin("sms").unwrap();
    let mut cfg = CampaignConfig::for_oracle(oracle.as_ref(), 8, 11, 1);
    cfg.fit.restarts = 2;
    let fx = cfg.fixed_x.clone().unwrap();
    let c = run_campaign(oracle.as_ref(), "s", cfg, None).unwrap();
    assert!(c.history.iter().all(|o| o.point.x == fx));
}

#[test]
fn config_rejects_unknown_keys() {
    let text = serde_json::to_string(&small(1, 10)).unwrap();
    let bad = text.replacen('{', "{\"surprise\":1,", 1);
    assert!(serde_json::from_str::<CampaignConfig>(&bad).is_err());
    let mut c = small(1, 10);
    c.max_runs = 4;
    assert!(Campaign::new("x", c).is_err());
}

mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig { cases: 6, ..ProptestConfig::default() })]

        #[test]
        fn campaign_contracts(seed in 0u64..1000, extra in 0usize..4) {
            let max_runs = 8 + extra;
            let c = run_campaign(&FourOps, "p", small(seed, max_runs), None).unwrap();
            prop_assert!(c.n() <= max_runs);
            let best = c.cumulative_best();
            prop_assert!(best.windows(2).all(|w| w[1] >= w[0]));
            let text = c.to_json().unwrap();
            prop_assert_eq!(Campaign::from_json(&text).unwrap().to_json().unwrap(), text);
        }
    }
}
