use pulsebench_core::clipio::{
    align_bvp_to_frames, inject_offset, read_clip, write_clip, ClipContainer,
};
use pulsebench_core::preprocess::{
    area_resize, area_resize_region, make_windows, normalize_frames, prepare_frames, smooth_boxes,
    BoundingBox, BoxTrack, InputNormalization,
};
use pulsebench_core::synth::{
    clip_file_name, gen_corpus, render_clip, write_corpus, CorpusConfig, HrTrace, SynthConfig,
};
use pulsebench_core::Error;

fn short_cfg() -> SynthConfig {
    SynthConfig {
        duration: 4.0,
        noise_std: 1.5,
        seed: 3,
        ..SynthConfig::default()
    }
}

#[test]
fn file_round_trip_and_rejects_truncation() {
    let clip = render_clip(&short_cfg()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.pbvc");
    write_clip(&clip, &path).unwrap();
    assert_eq!(read_clip(&path).unwrap(), clip);

    let bytes = std::fs::read(&path).unwrap();
    for cut in [3, 10, bytes.len() / 2, bytes.len() - 1] {
        assert!(
            ClipContainer::from_reader(&bytes[..cut]).is_err(),
            "cut at {cut}"
        );
    }
    let mut bad = bytes.clone();
    bad[0] ^= 0xff;
    assert!(ClipContainer::from_reader(bad.as_slice()).is_err());
}

#[test]
fn header_reports_geometry_and_rate() {
    let clip = render_clip(&short_cfg()).unwrap();
    let h = clip.header();
    assert_eq!((h.width, h.height, h.frame_count), (8, 8, 120));
    assert!((h.effective_fps - 30.0).abs() < 1e-6);
    assert_eq!(h.meta["scenario"], "clean");
}

#[test]
fn alignment_interpolates_bvp_onto_frames() {
    let clip = render_clip(&short_cfg()).unwrap();
    let labels = align_bvp_to_frames(&clip).unwrap();
    assert_eq!(labels.len(), clip.frame_count());
    // BVP at 60 Hz, frames at 30 Hz: every frame lands on an even BVP sample.
    for (i, v) in labels.iter().enumerate() {
        assert!((v - clip.bvp_vals[2 * i] as f64).abs() < 1e-5, "frame {i}");
    }
}

#[test]
fn offset_shifts_labels_and_undoes_exactly() {
    let clip = render_clip(&short_cfg()).unwrap();
    let shifted = inject_offset(&clip, 1.0 / 30.0);
    let a = align_bvp_to_frames(&clip).unwrap();
    let b = align_bvp_to_frames(&shifted).unwrap();
    // Labels move one frame later in time.
    for i in 1..a.len() {
        assert!((b[i] - a[i - 1]).abs() < 1e-4, "{i}");
    }
    assert_eq!(inject_offset(&shifted, -1.0 / 30.0).bvp_ts, clip.bvp_ts);
    assert_eq!(shifted.frames, clip.frames);
}

#[test]
fn area_resize_matches_block_mean() {
    let (h, w) = (12, 16);
    let img: Vec<f32> = (0..h * w * 3).map(|i| ((i * 37) % 251) as f32).collect();
    let out = area_resize(&img, h, w, 3, 4, 4).unwrap();
    for oi in 0..4 {
        for oj in 0..4 {
            for c in 0..3 {
                let mut sum = 0.0;
                for i in oi * 3..oi * 3 + 3 {
                    for j in oj * 4..oj * 4 + 4 {
                        sum += img[(i * w + j) * 3 + c] as f64;
                    }
                }
                let got = out[(oi * 4 + oj) * 3 + c] as f64;
                assert!((got - sum / 12.0).abs() < 1e-3, "({oi},{oj},{c})");
            }
        }
    }
    assert!(matches!(
        area_resize(&img, h, w, 3, 20, 4),
        Err(Error::UnsupportedDirection(_))
    ));
}

#[test]
fn area_resize_preserves_constant_and_mean() {
    let (h, w) = (10, 10);
    let flat = vec![42.0f32; h * w * 3];
    let region = BoundingBox {
        x: 1.3,
        y: 0.7,
        w: 7.1,
        h: 8.2,
    };
    assert!(area_resize_region(&flat, h, w, 3, region, 3, 3)
        .unwrap()
        .iter()
        .all(|v| (v - 42.0).abs() < 1e-4));
    // 10 -> 4 uses fractional coverage; whole-image mean is preserved.
    let img: Vec<f32> = (0..h * w * 3).map(|i| (i % 17) as f32).collect();
    let out = area_resize(&img, h, w, 3, 4, 4).unwrap();
    for c in 0..3 {
        let m_in: f64 = img
            .iter()
            .skip(c)
            .step_by(3)
            .map(|&v| v as f64)
            .sum::<f64>()
            / 100.0;
        let m_out: f64 = out
            .iter()
            .skip(c)
            .step_by(3)
            .map(|&v| v as f64)
            .sum::<f64>()
            / 16.0;
        assert!((m_in - m_out).abs() < 1e-4);
    }
}

#[test]
fn box_smoothing_is_an_ema() {
    let track = BoxTrack(vec![
        BoundingBox {
            x: 0.0,
            y: 0.0,
            w: 10.0,
            h: 10.0,
        },
        BoundingBox {
            x: 10.0,
            y: 0.0,
            w: 10.0,
            h: 10.0,
        },
        BoundingBox {
            x: 10.0,
            y: 0.0,
            w: 10.0,
            h: 10.0,
        },
    ]);
    let s = smooth_boxes(&track, 0.5).unwrap();
    assert_eq!(s.0[1].x, 5.0);
    assert_eq!(s.0[2].x, 7.5);
    assert_eq!(smooth_boxes(&track, 1.0).unwrap(), track);
    assert!(smooth_boxes(&track, 0.0).is_err());
}

#[test]
fn sidecar_boxes_crop_the_region() {
    let clip = render_clip(&SynthConfig {
        height: 16,
        width: 16,
        duration: 1.0,
        ..SynthConfig::default()
    })
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.boxes.json");
    let boxes: Vec<[f64; 4]> = vec![[4.0, 4.0, 8.0, 8.0]; clip.frame_count()];
    std::fs::write(&path, serde_json::to_string(&boxes).unwrap()).unwrap();
    let track = BoxTrack::from_sidecar(&path).unwrap();
    let cropped = prepare_frames(&clip, Some(&track), 0.3, 8).unwrap();
    // An 8x8 crop to 8x8 is a copy of the centre pixels.
    let f0 = clip.frame(0);
    for i in 0..8 {
        for j in 0..8 {
            for c in 0..3 {
                let src = f0[((i + 4) * 16 + j + 4) * 3 + c] as f32;
                assert_eq!(cropped[(i * 8 + j) * 3 + c], src);
            }
        }
    }
    let short = BoxTrack(vec![track.0[0]; 3]);
    assert!(prepare_frames(&clip, Some(&short), 0.3, 8).is_err());
}

#[test]
fn normalization_invariances() {
    let frames = 20;
    let raw: Vec<f32> = (0..frames * 8 * 8 * 3)
        .map(|i| 100.0 + ((i * 7) % 13) as f32)
        .collect();
    let a = normalize_frames(&raw, frames, 8, InputNormalization::MeanRemoved).unwrap();
    let lifted: Vec<f32> = raw.iter().map(|v| v + 30.0).collect();
    let b = normalize_frames(&lifted, frames, 8, InputNormalization::MeanRemoved).unwrap();
    for (x, y) in a.data().iter().zip(b.data()) {
        assert!((x - y).abs() < 1e-5);
    }
    let per = 8 * 8 * 3;
    for k in [0, 17, per - 1] {
        let m: f32 = (0..frames).map(|t| a.data()[t * per + k]).sum::<f32>() / frames as f32;
        assert!(m.abs() < 1e-6);
    }
    let s = normalize_frames(&raw, frames, 8, InputNormalization::ScaleOnly).unwrap();
    assert!((s.data()[0] - raw[0] / 255.0).abs() < 1e-7);
    assert!(normalize_frames(&raw[1..], frames, 8, InputNormalization::ScaleOnly).is_err());
}

#[test]
fn windows_have_standardized_labels() {
    let clip = render_clip(&SynthConfig {
        duration: 20.0,
        ..SynthConfig::default()
    })
    .unwrap();
    let frames = prepare_frames(&clip, None, 0.3, 8).unwrap();
    let labels = align_bvp_to_frames(&clip).unwrap();
    let w = make_windows(
        &frames,
        &labels,
        8,
        450,
        75,
        InputNormalization::MeanRemoved,
    )
    .unwrap();
    assert_eq!(w.iter().map(|w| w.t0).collect::<Vec<_>>(), vec![0, 75, 150]);
    for win in &w {
        let n = win.y.len() as f64;
        let m = win.y.iter().map(|&v| v as f64).sum::<f64>() / n;
        let v = win.y.iter().map(|&v| (v as f64 - m).powi(2)).sum::<f64>() / n;
        assert!(m.abs() < 1e-5 && (v - 1.0).abs() < 1e-4);
        assert_eq!(win.x.shape(), &[450, 8, 8, 3]);
    }
    assert!(make_windows(
        &frames[..per_frame(100)],
        &labels[..100],
        8,
        450,
        75,
        InputNormalization::MeanRemoved
    )
    .is_err());
}

fn per_frame(n: usize) -> usize {
    n * 8 * 8 * 3
}

#[test]
fn synth_is_a_pure_function_of_config() {
    let cfg = short_cfg();
    assert_eq!(render_clip(&cfg).unwrap(), render_clip(&cfg).unwrap());
    let other = render_clip(&SynthConfig {
        seed: 4,
        ..cfg.clone()
    })
    .unwrap();
    assert_ne!(other.frames, render_clip(&cfg).unwrap().frames);
    assert!(render_clip(&SynthConfig {
        smooth_k: 0,
        ..cfg.clone()
    })
    .is_err());
    assert!(render_clip(&SynthConfig {
        hr_trace: HrTrace::constant(200.0),
        ..cfg
    })
    .is_err());
}

#[test]
fn smoothing_reduces_inband_green_power() {
    let power = |k: usize| {
        let clip = render_clip(&SynthConfig {
            smooth_k: k,
            hr_trace: HrTrace::constant(120.0),
            diffuse_gain: 3.0,
            ..SynthConfig::default()
        })
        .unwrap();
        let g: Vec<f64> = (0..clip.frame_count())
            .map(|t| clip.frame(t).chunks(3).map(|p| p[1] as f64).sum::<f64>() / 64.0)
            .collect();
        let m = g.iter().sum::<f64>() / g.len() as f64;
        g.iter().map(|v| (v - m).powi(2)).sum::<f64>()
    };
    let p: Vec<f64> = [1, 3, 5, 9].iter().map(|&k| power(k)).collect();
    assert!(p.windows(2).all(|w| w[1] < w[0]), "{p:?}");
}

#[test]
fn corpus_is_reproducible_and_written_with_manifest() {
    let cfg = CorpusConfig {
        n: 3,
        duration: 5.0,
        ..CorpusConfig::default()
    };
    let a = gen_corpus(&cfg).unwrap();
    let b = gen_corpus(&cfg).unwrap();
    assert_eq!(a.clips, b.clips);
    assert!(a
        .manifest
        .clips
        .iter()
        .all(|c| (45.0..=150.0).contains(&c.mean_bpm)));
    let dir = tempfile::tempdir().unwrap();
    write_corpus(&a, dir.path()).unwrap();
    for i in 0..3 {
        assert_eq!(
            read_clip(dir.path().join(clip_file_name(i))).unwrap(),
            a.clips[i]
        );
    }
    assert!(dir.path().join("manifest.json").exists());
}
