use cwlearn::workload::{acf, generate_trace, read_trace, GenParams, InitialState, Trace};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn activity_series(tr: &Trace, station: usize) -> Vec<f64> {
    tr.volumes
        .iter()
        .map(|r| if r[station] > 0 { 1.0 } else { 0.0 })
        .collect()
}

#[test]
fn two_state_chain_lag_one() {
    let p = GenParams::uniform(1, 10_000, 0.1, 0.1, 7);
    let tr = generate_trace(&p).unwrap();
    let r = acf(&activity_series(&tr, 0), 1).unwrap();
    // ACF(1) of a two-state chain is 1 - p01 - p10.
    let expected = 1.0 - 0.1 - 0.1;
    assert!((r[1] - expected).abs() < 0.05, "acf(1) = {}", r[1]);
}

#[test]
fn white_noise_and_ar1() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let noise: Vec<f64> = (0..10_000).map(|_| rng.sample(StandardNormal)).collect();
    let r = acf(&noise, 3).unwrap();
    assert_eq!(r[0], 1.0);
    assert!(r[1].abs() < 0.05, "{}", r[1]);

    let mut x = 0.0f64;
    let ar: Vec<f64> = noise
        .iter()
        .map(|e| {
            x = 0.8 * x + e;
            x
        })
        .collect();
    let r = acf(&ar, 1).unwrap();
    assert!((0.75..=0.85).contains(&r[1]), "{}", r[1]);
}

#[test]
fn default_trace_counts_are_persistent() {
    let tr = generate_trace(&GenParams::default()).unwrap();
    let counts: Vec<f64> = tr.active_counts().iter().map(|&a| a as f64).collect();
    let r1 = acf(&counts, 1).unwrap()[1];
    let tens: Vec<f64> = counts
        .chunks_exact(10)
        .map(|c| c.iter().sum::<f64>() / 10.0)
        .collect();
    let r10 = acf(&tens, 1).unwrap()[1];
    assert!(r1 > 0.3 && r10 > 0.3, "r1={r1} r10={r10}");

    let busy = counts.iter().filter(|&&a| a >= 4.0).count() as f64 / counts.len() as f64;
    assert!(busy > 0.3, "busy fraction {busy}");
    assert!(counts.iter().any(|&a| a >= 7.0));
}

#[test]
fn stationary_start_fraction() {
    let mut p = GenParams::uniform(2000, 1, 0.3, 0.1, 5);
    p.initial = InitialState::Stationary;
    let tr = generate_trace(&p).unwrap();
    let on = tr.volumes[0].iter().filter(|&&v| v > 0).count() as f64 / 2000.0;
    assert!((on - 0.25).abs() < 0.04, "{on}");
}

fn arb_trace() -> impl Strategy<Value = Trace> {
    (1usize..6, 1usize..30).prop_flat_map(|(n, t)| {
        (
            prop::collection::vec(prop::collection::vec(0u64..5_000_000_000, n), t),
            prop::collection::vec(1u64..1000, t),
            Just(n),
        )
            .prop_map(|(volumes, gaps, n)| {
                let mut ts = 0u64;
                let timestamps = gaps
                    .iter()
                    .map(|g| {
                        ts += g;
                        ts
                    })
                    .collect();
                let ids = (0..n).map(|i| format!("station_{i}")).collect();
                Trace::new(ids, timestamps, volumes).unwrap()
            })
    })
}

proptest! {
    #[test]
    fn csv_round_trip(tr in arb_trace()) {
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let back = read_trace(buf.as_slice()).unwrap();
        prop_assert_eq!(back, tr);
    }

    #[test]
    fn acf_lag_zero_is_one(xs in prop::collection::vec(-1e6f64..1e6, 3..200)) {
        if let Ok(r) = acf(&xs, 1) {
            prop_assert!((r[0] - 1.0).abs() < 1e-12);
            prop_assert!(r[1].abs() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn generation_deterministic(seed in any::<u64>(), a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let p = GenParams::uniform(3, 50, a, b, seed);
        prop_assert_eq!(generate_trace(&p).unwrap(), generate_trace(&p).unwrap());
    }
}
