mod common;

use std::time::Instant;

use common::oracle;
use proptest::prelude::*;
use usv_core::signal::{
    replay_file, sample_time_ns, synthesize_voyage, window_stream, write_sample_file, ImpactScenario, ImuSample,
    Pacing, WindowSpec, RATE_HZ,
};
use usv_core::ImpactLabel;

fn ramp(n: usize) -> Vec<ImuSample> {
    (0..n)
        .map(|i| {
            let v = i as f64;
            ImuSample::new(sample_time_ns(i, RATE_HZ), [v, -v, 0.5 * v], [v.sin(), v.cos(), 1.0 / (v + 1.0)])
        })
        .collect()
}

fn label() -> impl Strategy<Value = ImpactLabel> {
    prop_oneof![
        Just(ImpactLabel::Bow),
        Just(ImpactLabel::Port),
        Just(ImpactLabel::Starboard),
        Just(ImpactLabel::None)
    ]
}

proptest! {
    #[test]
    fn window_count_and_overlap(s in 0usize..3000) {
        let samples = ramp(s);
        let windows = window_stream(&samples, &WindowSpec::default()).unwrap();
        prop_assert_eq!(windows.len(), oracle::window_count(s));
        for (k, w) in windows.iter().enumerate() {
            prop_assert_eq!(w.samples.len(), 500);
            prop_assert_eq!(w.window_seq, k as u64);
            prop_assert_eq!(&w.samples[..], &samples[k * 300..k * 300 + 500]);
        }
        for pair in windows.windows(2) {
            prop_assert_eq!(pair[1].start_t_ns - pair[0].start_t_ns, 3_000_000_000);
            prop_assert_eq!(&pair[0].samples[300..], &pair[1].samples[..200]);
        }
    }

    #[test]
    fn labels_mark_windows_containing_the_impact(
        lab in label(),
        t0 in 0.0f64..20.0,
        duration in 5.0f64..24.0,
        seed in any::<u64>(),
    ) {
        let scenario = ImpactScenario {
            label: lab,
            impact_t_s: t0,
            duration_s: duration,
            rng_seed: seed,
            ..Default::default()
        };
        let voyage = synthesize_voyage(&scenario).unwrap();
        prop_assert_eq!(voyage.window_labels.len(), oracle::window_count(voyage.samples.len()));
        for (k, &got) in voyage.window_labels.iter().enumerate() {
            let start = 3.0 * k as f64;
            let inside = t0 >= start && t0 < start + 5.0;
            let expected = if inside { lab } else { ImpactLabel::None };
            prop_assert_eq!(got, expected, "window {}", k);
        }
    }

    #[test]
    fn generator_is_pure(lab in label(), seed in any::<u64>(), sigma in 0.0f64..1.0) {
        let scenario = ImpactScenario { label: lab, sea_state_sigma: sigma, rng_seed: seed, ..Default::default() };
        let a = synthesize_voyage(&scenario).unwrap();
        let b = synthesize_voyage(&scenario).unwrap();
        let bits = |v: &[ImuSample]| -> Vec<u64> {
            v.iter().flat_map(|s| s.lin_acc.iter().chain(&s.ang_vel).map(|x| x.to_bits()).collect::<Vec<_>>()).collect()
        };
        prop_assert_eq!(bits(&a.samples), bits(&b.samples));
        prop_assert_eq!(a.window_labels, b.window_labels);
    }
}

#[test]
fn five_hundred_samples_give_one_full_window() {
    let windows = window_stream(&ramp(500), &WindowSpec::default()).unwrap();
    assert_eq!(windows.len(), 1);
    assert_eq!(windows[0].samples.len(), 500);
}

#[test]
fn realtime_replay_takes_five_seconds() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("walk.csv");
    write_sample_file(&path, &ramp(500)).unwrap();
    let start = Instant::now();
    let out = replay_file(&path, Pacing::RealTime).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    assert_eq!(out, ramp(500));
    assert!((elapsed - 5.0).abs() <= 0.25, "took {elapsed:.3} s");
}
