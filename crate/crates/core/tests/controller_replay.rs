use cwlearn::controller::{run_replay, ControllerConfig, Policy, RecordDecision, ReplayDriver, RunLog, Traffic};
use cwlearn::workload::{active_count, generate_trace, GenParams, Trace};

fn toy() -> Trace {
    // 10 periods, 5 stations, activity pattern varies per second.
    let vols = (0..10)
        .map(|t| (0..5).map(|i| if (t * 3 + i * 7) % 4 == 0 { 0 } else { 1200 + t as u64 }).collect())
        .collect();
    Trace::from_volumes(vols).unwrap()
}

#[test]
fn actives_follow_the_trace() {
    let trace = toy();
    for policy in [Policy::Beb, Policy::Aba, Policy::Fixed { cw: 31 }, Policy::MlbaLr] {
        let cfg = ControllerConfig {
            policy,
            ..ControllerConfig::default()
        };
        let log = run_replay(&cfg, &trace).unwrap();
        assert_eq!(log.records.len(), 10);
        for r in &log.records {
            assert_eq!(r.actives, active_count(&trace, r.period as usize).unwrap(), "{policy:?}");
            let idle = r.per_ap_tp_bps.iter().zip(&trace.volumes[r.period as usize]).all(|(tp, v)| *v > 0 || *tp == 0.0);
            assert!(idle, "idle AP carried traffic");
        }
    }
}

#[test]
fn identical_runs_are_byte_identical() {
    let trace = generate_trace(&GenParams::uniform(6, 120, 0.05, 0.05, 9)).unwrap();
    for policy in [Policy::Aba, Policy::MlbaNb, Policy::MlbaDnn] {
        let cfg = ControllerConfig {
            policy,
            ..ControllerConfig::default()
        };
        let a = run_replay(&cfg, &trace).unwrap().to_ndjson();
        let b = run_replay(&cfg, &trace).unwrap().to_ndjson();
        assert_eq!(a, b);
    }
}

#[test]
fn learner_calibrates_then_predicts() {
    let trace = generate_trace(&GenParams::uniform(6, 200, 0.05, 0.05, 2)).unwrap();
    let cfg = ControllerConfig {
        policy: Policy::MlbaLr,
        ..ControllerConfig::default()
    };
    let log = run_replay(&cfg, &trace).unwrap();
    assert!(log.records[..30].iter().all(|r| r.decision == RecordDecision::Calibration));
    let predicted = log.records[30..].iter().filter(|r| r.decision == RecordDecision::Predict).count();
    assert!(predicted > 150, "{predicted}");
    assert!(!log.footer.calibration_only);
    assert!(log.footer.model.as_ref().unwrap().fitted().unwrap().is_some());

    let short = run_replay(&cfg, &trace.window(0, 20).unwrap()).unwrap();
    assert!(short.footer.calibration_only);
}

#[test]
fn run_log_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.ndjson");
    let cfg = ControllerConfig {
        policy: Policy::MlbaDnn,
        output: Some(path.clone()),
        ..ControllerConfig::default()
    };
    let trace = generate_trace(&GenParams::uniform(3, 40, 0.1, 0.1, 4)).unwrap();
    let log = run_replay(&cfg, &trace).unwrap();
    let back = RunLog::read_ndjson(std::io::BufReader::new(std::fs::File::open(&path).unwrap())).unwrap();
    assert_eq!(back, log);
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.lines().next().unwrap().contains("\"record\":\"header\""));
    assert!(text.lines().last().unwrap().contains("\"record\":\"final\""));
}

#[test]
fn volume_traffic_respects_budgets() {
    let trace = Trace::from_volumes(vec![vec![10_000, 0, 25_000]; 5]).unwrap();
    let cfg = ControllerConfig {
        traffic: Traffic::Volume,
        ..ControllerConfig::default()
    };
    let log = run_replay(&cfg, &trace).unwrap();
    for r in &log.records {
        assert_eq!(r.per_ap_tp_bps, vec![80_000.0, 0.0, 200_000.0]);
    }
}

#[test]
fn warm_start_skips_calibration() {
    let trace = generate_trace(&GenParams::uniform(5, 120, 0.05, 0.05, 8)).unwrap();
    let cfg = ControllerConfig {
        policy: Policy::MlbaLr,
        ..ControllerConfig::default()
    };
    let mut first = ReplayDriver::new(cfg.clone(), trace.window(0, 60).unwrap()).unwrap();
    first.run_to_end().unwrap();
    let state = first.learner().unwrap().state();
    let mut second = ReplayDriver::new(cfg, trace.window(60, 60).unwrap())
        .unwrap()
        .with_learner_state(state.clone())
        .unwrap();
    second.run_to_end().unwrap();
    assert!(second.records().iter().all(|r| r.decision != RecordDecision::Calibration));

    let nb = ControllerConfig {
        policy: Policy::MlbaNb,
        ..ControllerConfig::default()
    };
    let d = ReplayDriver::new(nb, trace.window(0, 10).unwrap()).unwrap();
    assert!(d.with_learner_state(state).is_err());
}

#[test]
fn partial_control_leaves_other_aps_on_beb() {
    let trace = Trace::from_volumes(vec![vec![1000; 4]; 3]).unwrap();
    let cfg = ControllerConfig {
        policy: Policy::Fixed { cw: 127 },
        controlled_aps: Some(2),
        ..ControllerConfig::default()
    };
    let mut d = ReplayDriver::new(cfg, trace).unwrap();
    d.run_to_end().unwrap();
    let aps = &d.bank().aps;
    assert!(aps[..2].iter().all(|ap| (ap.cw_min, ap.cw_max) == (127, 127)));
    assert!(aps[2..].iter().all(|ap| (ap.cw_min, ap.cw_max) == (15, 63)));
}
