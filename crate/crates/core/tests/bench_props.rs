use cwlearn::bench::{
    avg_sigl, exhaustive_calibration, jain_index, median, opportunity_sweep, run_bench, training_speed_sim,
    BenchConfig, SpeedAlgorithm, SweepSpec, TrainSpeedConfig,
};
use cwlearn::controller::Traffic;
use cwlearn::learner::{LearnerConfig, DEFAULT_GRID};
use cwlearn::mac_sim::SimConfig;
use cwlearn::workload::{generate_trace, GenParams};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]
    #[test]
    fn jain_bounds(xs in prop::collection::vec(0.0f64..1e9, 1..40)) {
        prop_assume!(xs.iter().any(|&x| x > 0.0));
        let j = jain_index(&xs).unwrap();
        let n = xs.len() as f64;
        prop_assert!(j >= 1.0 / n - 1e-12 && j <= 1.0 + 1e-12, "{j}");
    }
}

proptest! {
    #[test]
    fn self_comparison(xs in prop::collection::vec(1e-3f64..1e9, 1..200)) {
        let r = avg_sigl(&xs, &xs).unwrap();
        prop_assert_eq!((r.avg_pct, r.sigl, r.excluded), (0.0, 100, 0));
    }

    #[test]
    fn sigl_is_multiple_of_five(a in prop::collection::vec(1.0f64..2.0, 1..100), b in prop::collection::vec(1.0f64..2.0, 1..100)) {
        let n = a.len().min(b.len());
        let r = avg_sigl(&a[..n], &b[..n]).unwrap();
        prop_assert!(r.sigl.is_multiple_of(5) && r.sigl <= 100);
        let worse = a[..n].iter().zip(&b[..n]).filter(|(x, y)| x <= y).count() as f64 / n as f64;
        prop_assert!(r.sigl as f64 >= 100.0 * worse - 1e-9 && (r.sigl as f64) < 100.0 * worse + 5.0);
    }

    #[test]
    fn swap_algebra_for_constant_ratio(b in prop::collection::vec(1.0f64..1e9, 1..50), k in 0.2f64..5.0) {
        let a: Vec<f64> = b.iter().map(|x| x * k).collect();
        let ab = avg_sigl(&a, &b).unwrap().avg_pct;
        let ba = avg_sigl(&b, &a).unwrap().avg_pct;
        prop_assert!((ab - (-ba / (1.0 + ba / 100.0))).abs() < 1e-6 * (1.0 + ab.abs()));
    }

    #[test]
    fn median_ignores_order(mut xs in prop::collection::vec(-1e6f64..1e6, 1..30), seed in any::<u64>()) {
        let m = median(&xs).unwrap();
        let n = xs.len();
        for i in 0..n {
            let j = (seed as usize).wrapping_add(i * 7) % n;
            xs.swap(i, j);
        }
        prop_assert_eq!(median(&xs).unwrap(), m);
    }
}

#[test]
fn sweep_argmax_grows_with_n() {
    let spec = SweepSpec {
        n_min: 2,
        n_max: 8,
        rtscts: false,
        include_baselines: false,
        ..SweepSpec::default()
    };
    let rows = opportunity_sweep(&spec).unwrap();
    let best = |n: usize| {
        rows.iter()
            .filter(|r| r.n == n)
            .max_by(|a, b| a.median_tp_bps.total_cmp(&b.median_tp_bps))
            .unwrap()
            .cw_min
    };
    let (b2, b4, b8) = (best(2), best(4), best(8));
    assert!(b2 <= b4 && b4 <= b8, "{b2} {b4} {b8}");
}

#[test]
fn training_speed_bounds() {
    let trace = generate_trace(&GenParams::uniform(6, 400, 0.05, 0.05, 12)).unwrap();
    let rows = exhaustive_calibration(&trace, &DEFAULT_GRID, &SimConfig::aggregated_basic(), 1, Traffic::Saturated).unwrap();
    let cfg = TrainSpeedConfig {
        train_times: vec![5, 20, 60],
        eval_start: 200,
        eval_len: 200,
        repetitions: 3,
        seed: 4,
        learner: LearnerConfig::default(),
    };
    let out = training_speed_sim(&rows, &SpeedAlgorithm::all(), &cfg).unwrap();
    assert_eq!(out.len(), 6 * 3);
    for r in &out {
        assert!(r.ratio <= 1.0 + 1e-12 && r.ratio > 0.0, "{r:?}");
        if r.algorithm == "Optimal" {
            assert_eq!(r.ratio, 1.0);
        }
    }
    assert_eq!(out, training_speed_sim(&rows, &SpeedAlgorithm::all(), &cfg).unwrap());
    let bad = TrainSpeedConfig {
        eval_start: 390,
        ..cfg
    };
    assert!(training_speed_sim(&rows, &SpeedAlgorithm::all(), &bad).is_err());
}

#[test]
fn lr_beats_beb_in_heaviest_window() {
    let cfg = BenchConfig {
        run_sweep: false,
        ..BenchConfig::default()
    };
    let report = run_bench(&cfg).unwrap();
    let c = &report.comparison;
    let trace = cfg.generate_trace().unwrap();
    let counts = trace.active_counts();
    let load = |w: &cwlearn::bench::Window| counts[w.start_s..w.start_s + w.len_s].iter().sum::<u32>();
    let heaviest = (0..c.windows.len()).max_by_key(|&w| load(&c.windows[w])).unwrap();
    let (lr, beb) = (c.index("MLBA-LR").unwrap(), c.index("BEB").unwrap());
    assert!(c.window_avg[heaviest][lr][beb] > 0.0, "{:?}", c.window_avg[heaviest][lr]);
}
