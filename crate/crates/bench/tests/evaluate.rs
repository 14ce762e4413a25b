use std::f64::consts::PI;

use pulsebench_bench::evaluate::{sdnn_mae, FLAG_SHORT_WINDOW};
use pulsebench_bench::{hr_metrics, windowed_hr};
use pulsebench_core::postprocess::{bandpass_hr, PulseSignal};
use pulsebench_core::synth::{gen_bvp, HrTrace};

fn sine(bpm: f64, fs: f64, seconds: f64) -> PulseSignal {
    let f = bpm / 60.0;
    let n = (seconds * fs) as usize;
    PulseSignal::new(
        (0..n)
            .map(|i| (2.0 * PI * f * i as f64 / fs).sin())
            .collect(),
        fs,
    )
    .unwrap()
}

#[test]
fn sixty_seconds_gives_four_windows() {
    let s = sine(72.0, 30.0, 60.0);
    let w = windowed_hr(&s, &s, 30.0, 10.0).unwrap();
    assert_eq!(w.len(), 4);
    let starts: Vec<f64> = w.iter().map(|w| w.start).collect();
    assert_eq!(starts, vec![0.0, 10.0, 20.0, 30.0]);
    assert!(w.iter().all(|w| (w.end - w.start - 30.0).abs() < 1e-9));
    let pairs: Vec<(f64, f64)> = w.iter().map(|w| (w.hr_pred, w.hr_gt)).collect();
    assert_eq!(hr_metrics(&pairs).unwrap().mae, 0.0);
}

#[test]
fn short_signal_is_one_flagged_window() {
    let s = sine(80.0, 30.0, 20.0);
    let w = windowed_hr(&s, &s, 30.0, 10.0).unwrap();
    assert_eq!(w.len(), 1);
    assert!(w[0].flags.iter().any(|f| f == FLAG_SHORT_WINDOW));
    assert!((w[0].end - 20.0).abs() < 1e-9);
}

#[test]
fn mismatched_inputs_are_rejected() {
    let a = sine(72.0, 30.0, 40.0);
    let b = sine(72.0, 25.0, 40.0);
    assert!(windowed_hr(&a, &b, 30.0, 10.0).is_err());
    assert!(windowed_hr(&a, &a, 30.0, 0.0).is_err());
}

#[test]
fn hr_step_is_tracked_by_windows() {
    let trace = HrTrace(vec![(0.0, 66.0), (29.9, 66.0), (30.1, 78.0), (60.0, 78.0)]);
    let bvp = bandpass_hr(&gen_bvp(&trace, 30.0, 60.0).unwrap()).unwrap();
    let w = windowed_hr(&bvp, &bvp, 30.0, 10.0).unwrap();
    assert!((w[0].hr_gt - 66.0).abs() < 1.0, "{}", w[0].hr_gt);
    assert!(
        (w.last().unwrap().hr_gt - 78.0).abs() < 1.0,
        "{}",
        w.last().unwrap().hr_gt
    );
}

#[test]
fn out_of_range_hr_is_clamped_and_flagged() {
    // The band's lower edge sits just under 40 bpm, so a slower tone peaks there.
    let s = sine(30.0, 30.0, 30.0);
    let w = windowed_hr(&s, &s, 30.0, 10.0).unwrap();
    assert_eq!(w[0].hr_pred, 40.0);
    assert!(w[0].flags.iter().any(|f| f == "gt_clamped"));
    assert!(w[0].flags.iter().any(|f| f == "pred_clamped"));
}

#[test]
fn metric_examples() {
    let same = [(60.0, 60.0), (70.0, 70.0), (80.0, 80.0)];
    let m = hr_metrics(&same).unwrap();
    assert_eq!((m.mae, m.rmse), (0.0, 0.0));
    assert!((m.pearson.unwrap() - 1.0).abs() < 1e-12);

    let offset: Vec<(f64, f64)> = same.iter().map(|&(p, g)| (p + 5.0, g)).collect();
    let m = hr_metrics(&offset).unwrap();
    assert!((m.mae - 5.0).abs() < 1e-12 && (m.rmse - 5.0).abs() < 1e-12);
    assert!((m.pearson.unwrap() - 1.0).abs() < 1e-12);

    // cov 210, std product sqrt(46800).
    let m = hr_metrics(&[(62.0, 60.0), (68.0, 70.0), (83.0, 80.0)]).unwrap();
    assert!((m.mae - 7.0 / 3.0).abs() < 1e-3, "{}", m.mae);
    assert!((m.rmse - (17.0f64 / 3.0).sqrt()).abs() < 1e-3, "{}", m.rmse);
    assert!(
        (m.pearson.unwrap() - 210.0 / 46800f64.sqrt()).abs() < 1e-3,
        "{:?}",
        m.pearson
    );

    assert!(hr_metrics(&[]).is_err());
    assert_eq!(hr_metrics(&[(70.0, 72.0)]).unwrap().pearson, None);
}

#[test]
fn sdnn_mae_skips_missing_windows() {
    let s = sine(60.0, 60.0, 60.0);
    let mut w = windowed_hr(&s, &s, 30.0, 10.0).unwrap();
    assert_eq!(sdnn_mae(&w), Some(0.0));
    for x in &mut w {
        x.sdnn_pred = None;
    }
    assert_eq!(sdnn_mae(&w), None);
}
