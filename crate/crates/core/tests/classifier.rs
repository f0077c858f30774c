mod common;

use common::oracle;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use usv_core::classifier::{
    forward, load_weights, logits, read_weights, save_weights, write_weights, NetworkConfig, Weights,
    WeightsFileError,
};

fn stem_only(c: usize, h: usize, w: usize, stem: usize) -> NetworkConfig {
    NetworkConfig { input_channels: c, input_height: h, input_width: w, stem_channels: stem, blocks: vec![], classes: 4 }
}

fn set(weights: &mut Weights<f64>, name: &str, data: Vec<f64>) {
    let t = weights.tensors_mut().iter_mut().find(|t| t.name == name).unwrap();
    assert_eq!(t.data.len(), data.len(), "{name}");
    t.data = data;
}

fn tensor(weights: &Weights<f64>, name: &str) -> Vec<f64> {
    weights.get(name).unwrap().data.clone()
}

#[test]
fn hand_set_pointwise_fixture() {
    // 2×2 input, 2 channels; only the centre tap is nonzero so the stem acts
    // as a 1×1 convolution on pixel (0, 0).
    let cfg = stem_only(2, 2, 2, 3);
    let mut wts = Weights::<f64>::zeros(&cfg);
    let mut conv = vec![0.0; 9 * 2 * 3];
    let centre = 4 * 2 * 3;
    conv[centre..centre + 6].copy_from_slice(&[1.0, -1.0, 0.5, 2.0, 0.0, 0.5]);
    set(&mut wts, "stem.conv.weight", conv);
    set(&mut wts, "stem.bn.scale", vec![1.0; 3]);
    set(&mut wts, "head.fc.weight", vec![1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0]);
    set(&mut wts, "head.fc.bias", vec![0.0, 0.0, 0.0, 0.5]);
    let input = [1.0, 2.0, 3.0, 4.0, 0.5, -1.0, 2.0, 0.0];
    // pixel (0,0) = (1, 0.5): co0 = 1 + 1 = 2, co1 = -1 -> 0, co2 = 0.5 + 0.25
    let z = logits(&wts, &input).unwrap();
    assert_eq!(z, vec![2.0, 0.0, 0.75, 3.25]);
}

#[test]
fn zero_weights_are_uniform() {
    let cfg = NetworkConfig::reduced();
    let p = forward(&Weights::<f32>::zeros(&cfg), &vec![0.3f32; cfg.input_len()]).unwrap();
    assert_eq!(p.0, [0.25; 4]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn stem_network_matches_dense_oracle(seed in any::<u64>(), h in 1usize..7, w in 1usize..7) {
        let (c, stem) = (3, 5);
        let cfg = stem_only(c, h, w, stem);
        let mut wts = Weights::<f64>::init(&cfg, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        set(&mut wts, "stem.bn.scale", (0..stem).map(|_| rng.random_range(0.5..2.0)).collect());
        set(&mut wts, "stem.bn.bias", (0..stem).map(|_| rng.random_range(-0.5..0.5)).collect());
        set(&mut wts, "head.fc.bias", (0..4).map(|_| rng.random_range(-1.0..1.0)).collect());
        let input: Vec<f64> = (0..cfg.input_len()).map(|_| rng.random_range(-4.0..4.0)).collect();
        let got = logits(&wts, &input).unwrap();
        let want = oracle::stem_only_logits(
            &input,
            (c, h, w),
            &tensor(&wts, "stem.conv.weight"),
            stem,
            &tensor(&wts, "stem.bn.scale"),
            &tensor(&wts, "stem.bn.bias"),
            &tensor(&wts, "head.fc.weight"),
            &tensor(&wts, "head.fc.bias"),
        );
        for (a, b) in got.iter().zip(&want) {
            prop_assert!((a - b).abs() <= 1e-9, "{:?} vs {:?}", got, want);
        }
    }

    #[test]
    fn probabilities_lie_on_the_simplex(seed in any::<u64>(), gain in 0.01f32..50.0) {
        let cfg = NetworkConfig::reduced();
        let wts = Weights::<f32>::init(&cfg, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
        let input: Vec<f32> = (0..cfg.input_len()).map(|_| gain * rng.random_range(-1.0f32..1.0)).collect();
        let p = forward(&wts, &input).unwrap();
        prop_assert!(p.0.iter().all(|v| (0.0..=1.0).contains(v)));
        prop_assert!((p.0.iter().sum::<f64>() - 1.0).abs() <= 1e-6);
        prop_assert!(p.is_valid());
    }

    #[test]
    fn argmax_survives_positive_head_scaling(seed in any::<u64>(), k in 0.05f64..20.0) {
        let cfg = NetworkConfig::reduced();
        let wts = Weights::<f64>::init(&cfg, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(3));
        let input: Vec<f64> = (0..cfg.input_len()).map(|_| rng.random_range(0.0..1.0)).collect();
        let base = forward(&wts, &input).unwrap();
        let mut scaled = wts.clone();
        let fc: Vec<f64> = tensor(&wts, "head.fc.weight").iter().map(|v| v * k).collect();
        let fb: Vec<f64> = tensor(&wts, "head.fc.bias").iter().map(|v| v * k).collect();
        set(&mut scaled, "head.fc.weight", fc);
        set(&mut scaled, "head.fc.bias", fb);
        let after = forward(&scaled, &input).unwrap();
        prop_assert_eq!(base.argmax(), after.argmax());
    }
}

#[test]
fn weight_file_round_trip_is_bit_exact() {
    let cfg = NetworkConfig::mini();
    let mut wts = Weights::<f32>::init(&cfg, 42);
    wts.meta.epochs = 15;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.mnv2");
    save_weights(&wts, &path).unwrap();
    let back = load_weights(&path, &cfg).unwrap();
    assert_eq!(back.meta, wts.meta);
    for (a, b) in wts.tensors().iter().zip(back.tensors()) {
        assert_eq!(a.name, b.name);
        assert_eq!(a.shape, b.shape);
        let bits = |t: &[f32]| t.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.data), bits(&b.data));
    }
}

#[test]
fn truncated_weight_files_are_rejected() {
    let cfg = NetworkConfig::reduced();
    let bytes = write_weights(&Weights::<f32>::init(&cfg, 1));
    for cut in [0, 3, 6, 40, 60, bytes.len() / 2, bytes.len() - 1] {
        let err = read_weights(&bytes[..cut], &cfg).unwrap_err();
        assert!(matches!(err, WeightsFileError::Truncated(_)), "cut at {cut}: {err}");
    }
}

#[test]
fn other_config_is_incompatible() {
    let bytes = write_weights(&Weights::<f32>::init(&NetworkConfig::reduced(), 1));
    let err = read_weights(&bytes, &NetworkConfig::mini()).unwrap_err();
    assert!(matches!(err, WeightsFileError::HashMismatch), "{err}");
    assert!(err.to_string().contains("hash"), "{err}");
}
