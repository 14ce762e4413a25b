use pulsebench_core::numerics::Tensor;
use pulsebench_neural::{build_noobheart, build_seq_rppg, train, Error, Mode, Sample, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A 450-frame window whose pixels carry a 1.2 Hz pulse plus noise.
fn pulse_window(seed: u64) -> (Tensor<f32>, Vec<f32>) {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let y: Vec<f32> = (0..450)
        .map(|t| (2.0 * std::f32::consts::PI * 1.2 * t as f32 / 30.0).sin())
        .collect();
    let gains = [0.3f32, 0.8, 0.5];
    let x = Tensor::from_fn(&[450, 8, 8, 3], |i| {
        let t = i / 192;
        gains[i % 3] * y[t] + r.random_range(-0.2..0.2)
    });
    (x, y)
}

fn seq_sample(seed: u64) -> Sample<f32> {
    let (x, y) = pulse_window(seed);
    Sample {
        x: pulsebench_neural::models::reshape_video_to_sequence(&x).unwrap(),
        y,
    }
}

#[test]
fn zero_learning_rate_keeps_loss_constant() {
    let mut model = build_noobheart::<f32>(1);
    let (x, y) = pulse_window(1);
    let cfg = TrainConfig {
        lr: 0.0,
        epochs: 4,
        ..TrainConfig::default()
    };
    let report = train(&mut model, &[Sample { x, y }], &cfg).unwrap();
    assert!(
        report.epoch_losses.windows(2).all(|w| w[0] == w[1]),
        "{:?}",
        report.epoch_losses
    );
}

#[test]
fn single_window_overfits() {
    let mut model = build_seq_rppg::<f32>(2);
    let cfg = TrainConfig {
        epochs: 200,
        ..TrainConfig::default()
    };
    let report = train(&mut model, &[seq_sample(2)], &cfg).unwrap();
    let (first, last) = (report.epoch_losses[0], *report.epoch_losses.last().unwrap());
    assert!(last < 0.1 * first, "{first} -> {last}");
}

#[test]
fn same_seed_gives_identical_weights() {
    let samples: Vec<Sample<f32>> = (0..3).map(seq_sample).collect();
    let cfg = TrainConfig {
        epochs: 2,
        batch_size: 2,
        ..TrainConfig::default()
    };
    let run = || {
        let mut m = build_seq_rppg::<f32>(cfg.seed);
        let report = train(&mut m, &samples, &cfg).unwrap();
        (m.named_tensors(), report)
    };
    let (a, ra) = run();
    let (b, rb) = run();
    assert_eq!(ra, rb);
    for ((na, ta), (nb, tb)) in a.iter().zip(&b) {
        assert_eq!(na, nb);
        let bits_a: Vec<u32> = ta.data().iter().map(|v| v.to_bits()).collect();
        let bits_b: Vec<u32> = tb.data().iter().map(|v| v.to_bits()).collect();
        assert_eq!(bits_a, bits_b, "{na}");
    }
}

#[test]
fn nan_input_aborts() {
    let mut model = build_noobheart::<f32>(0);
    let (mut x, y) = pulse_window(0);
    x.data_mut()[10] = f32::NAN;
    let err = train(&mut model, &[Sample { x, y }], &TrainConfig::default()).unwrap_err();
    assert!(
        matches!(
            err,
            Error::NonFinite {
                epoch: 0,
                batch: 0,
                ..
            }
        ),
        "{err}"
    );
}

#[test]
fn invalid_configs() {
    let mut model = build_noobheart::<f32>(0);
    let (x, y) = pulse_window(0);
    let s = [Sample { x, y }];
    for cfg in [
        TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        },
        TrainConfig {
            lr: -1.0,
            ..TrainConfig::default()
        },
        TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        },
    ] {
        assert!(matches!(train(&mut model, &s, &cfg), Err(Error::Config(_))));
    }
    assert!(matches!(
        train(&mut model, &[], &TrainConfig::default()),
        Err(Error::Config(_))
    ));
}

#[test]
fn training_improves_pearson_of_predictions() {
    let samples: Vec<Sample<f32>> = (10..14).map(seq_sample).collect();
    let mut model = build_seq_rppg::<f32>(5);
    let cfg = TrainConfig {
        epochs: 15,
        batch_size: 2,
        ..TrainConfig::default()
    };
    train(&mut model, &samples, &cfg).unwrap();
    let test = seq_sample(99);
    let x = test.x.clone().reshape(vec![1, 1350, 64]).unwrap();
    let pred = model.forward(&x, Mode::Eval).unwrap();
    let p: Vec<f64> = pred.data().iter().map(|&v| v as f64).collect();
    let y: Vec<f64> = test.y.iter().map(|&v| v as f64).collect();
    let rho = pulsebench_core::numerics::pearson(&p, &y).unwrap();
    assert!(rho > 0.8, "pearson {rho}");
}
