use std::path::PathBuf;

use pulsebench_bench::algorithms::{inference_starts, INFERENCE_STEP};
use pulsebench_bench::dataset::{build_dataset, DatasetConfig};
use pulsebench_bench::report::evaluate_handles;
use pulsebench_bench::{
    run_benchmark, AlgorithmRegistry, AlgorithmSpec, BenchConfig, BenchReport, ClipSource, Error,
    NeuralAlgorithm, PulseAlgorithm,
};
use pulsebench_core::synth::{gen_corpus, write_corpus, CorpusConfig};
use pulsebench_neural::{build_noobheart, save_weights, Architecture};

fn corpus(n: usize, seed: u64) -> CorpusConfig {
    CorpusConfig {
        n,
        seed,
        ..CorpusConfig::default()
    }
}

fn config(names: &[&str], source: ClipSource) -> BenchConfig {
    BenchConfig {
        algorithms: names.iter().map(|n| AlgorithmSpec::named(n)).collect(),
        source,
        ..BenchConfig::default()
    }
}

#[test]
fn registry_lists_builtins_and_rejects_unknown() {
    let r = AlgorithmRegistry::default();
    assert_eq!(
        r.names(),
        vec!["chrom", "green", "ica", "noobheart", "pos", "seq_rppg"]
    );
    let err = r.create(&AlgorithmSpec::named("nope")).err().unwrap();
    assert!(
        matches!(err, Error::Config(ref m) if m.contains("pos")),
        "{err}"
    );
}

#[test]
fn neural_without_weights_is_config_error() {
    let r = AlgorithmRegistry::default();
    assert!(matches!(
        r.create(&AlgorithmSpec::named("seq_rppg")),
        Err(Error::Config(_))
    ));
    let mut spec = AlgorithmSpec::named("noobheart");
    spec.weights = Some(PathBuf::from("/nonexistent/w.pbwt"));
    assert!(matches!(r.create(&spec), Err(Error::Config(_))));
    let cfg = config(&["pos", "seq_rppg"], ClipSource::Synth(corpus(2, 1)));
    assert!(matches!(run_benchmark(&cfg, &r), Err(Error::Config(_))));
}

#[test]
fn spec_parses_from_string_or_object() {
    let specs: Vec<AlgorithmSpec> =
        serde_json::from_str(r#"["pos", {"name": "chrom", "win_seconds": 2.0}, {"name": "seq_rppg", "weights": "w.pbwt"}]"#)
            .unwrap();
    assert_eq!(specs[0], AlgorithmSpec::named("pos"));
    assert_eq!(specs[1].win_seconds, Some(2.0));
    assert_eq!(specs[2].weights, Some(PathBuf::from("w.pbwt")));
    let cfg: Result<BenchConfig, _> = serde_json::from_str(r#"{"algorithms": [], "bogus": 1}"#);
    assert!(cfg.is_err());
}

#[test]
fn empty_algorithm_list_gives_valid_report() {
    let report = run_benchmark(
        &config(&[], ClipSource::default()),
        &AlgorithmRegistry::default(),
    )
    .unwrap();
    assert!(report.algorithms.is_empty());
    report.check_consistency().unwrap();
    let back: BenchReport = serde_json::from_str(&report.to_json().unwrap()).unwrap();
    assert_eq!(back, report);
}

#[test]
fn pos_on_clean_corpus() {
    let report = run_benchmark(
        &config(&["pos"], ClipSource::Synth(corpus(20, 3))),
        &AlgorithmRegistry::default(),
    )
    .unwrap();
    let pos = &report.algorithms[0];
    assert!(pos.errors.is_empty());
    assert!(pos.mae.unwrap() < 2.0, "{:?}", pos.mae);
}

#[test]
fn thread_count_does_not_change_results() {
    let registry = AlgorithmRegistry::default();
    let mut cfg = config(&["green", "pos"], ClipSource::Synth(corpus(5, 9)));
    cfg.threads = 1;
    let one = run_benchmark(&cfg, &registry).unwrap();
    cfg.threads = 4;
    let four = run_benchmark(&cfg, &registry).unwrap();
    assert_eq!(one.algorithms, four.algorithms);
}

#[test]
fn directory_source_matches_synth_source() {
    let c = corpus(3, 4);
    let dir = tempfile::tempdir().unwrap();
    write_corpus(&gen_corpus(&c).unwrap(), dir.path()).unwrap();
    let registry = AlgorithmRegistry::default();
    let from_dir = run_benchmark(
        &config(&["chrom"], ClipSource::Dir(dir.path().to_path_buf())),
        &registry,
    )
    .unwrap();
    let from_synth = run_benchmark(&config(&["chrom"], ClipSource::Synth(c)), &registry).unwrap();
    assert_eq!(from_dir.algorithms, from_synth.algorithms);
}

#[test]
fn seed_override_changes_corpus() {
    let registry = AlgorithmRegistry::default();
    let mut cfg = config(&["pos"], ClipSource::Synth(corpus(2, 1)));
    let a = run_benchmark(&cfg, &registry).unwrap();
    cfg.seed = Some(2);
    let b = run_benchmark(&cfg, &registry).unwrap();
    assert_ne!(a.algorithms[0].windows, b.algorithms[0].windows);
}

#[test]
fn tampered_report_fails_consistency() {
    let mut report = run_benchmark(
        &config(&["green"], ClipSource::Synth(corpus(2, 5))),
        &AlgorithmRegistry::default(),
    )
    .unwrap();
    report.algorithms[0].windows[0].hr_pred += 1.0;
    assert!(matches!(
        report.check_consistency(),
        Err(Error::Consistency(_))
    ));
}

#[test]
fn inference_windows_cover_every_frame() {
    assert_eq!(inference_starts(450), vec![0]);
    assert_eq!(inference_starts(900), vec![0, INFERENCE_STEP, 450]);
    let starts = inference_starts(1000);
    assert_eq!(*starts.last().unwrap(), 550);
    assert!(starts.windows(2).all(|w| w[1] - w[0] <= INFERENCE_STEP));
}

#[test]
fn neural_algorithm_round_trips_through_weights_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("noob.pbwt");
    save_weights(&build_noobheart::<f32>(3), &path).unwrap();
    let mut spec = AlgorithmSpec::named("noobheart");
    spec.weights = Some(path);
    let from_file = AlgorithmRegistry::default().create(&spec).unwrap();
    let direct: Box<dyn PulseAlgorithm> = Box::new(NeuralAlgorithm::from_model(
        Architecture::NoobHeart,
        build_noobheart(3),
    ));
    let handles = ClipSource::Synth(corpus(1, 6)).handles().unwrap();
    let clip = handles[0].load(0.0).unwrap();
    let a = from_file.predict(&clip).unwrap();
    let b = direct.predict(&clip).unwrap();
    assert_eq!(a.len(), clip.n_frames);
    assert_eq!(a, b);
    let reports = evaluate_handles(&[direct], &handles, &BenchConfig::default()).unwrap();
    assert!(reports[0].errors.is_empty());
}

#[test]
fn label_offsets_are_seeded_and_bounded() {
    let ds = DatasetConfig {
        label_offset_s: [0.0, 0.2],
        ..DatasetConfig::default()
    };
    let offs: Vec<f64> = (0..50).map(|i| ds.offset_for(i)).collect();
    assert!(offs.iter().all(|o| (0.0..0.2).contains(o)));
    assert_eq!(offs, (0..50).map(|i| ds.offset_for(i)).collect::<Vec<_>>());
    assert!(offs.iter().any(|&o| o > 0.1) && offs.iter().any(|&o| o < 0.1));

    let clips = gen_corpus(&corpus(2, 8)).unwrap().clips;
    let plain = build_dataset(&clips, Architecture::SeqRppg, &DatasetConfig::default()).unwrap();
    let shifted = build_dataset(&clips, Architecture::SeqRppg, &ds).unwrap();
    assert_eq!(plain.len(), 6);
    assert_eq!(plain.len(), shifted.len());
    assert_eq!(plain[0].x.data(), shifted[0].x.data());
    assert_ne!(plain[0].y, shifted[0].y);
}
