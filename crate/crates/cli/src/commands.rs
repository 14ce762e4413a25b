use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::anyhow;
use pulsebench_bench::dataset::{run_training, TrainJob};
use pulsebench_bench::evaluate::window_sdnn;
use pulsebench_bench::{
    run_benchmark, windowed_hr, AlgorithmRegistry, AlgorithmSpec, BenchConfig, BenchReport,
    ClipHandle,
};
use pulsebench_core::clipio::read_clip;
use pulsebench_core::postprocess::{bandpass_hr, welch_hr, welch_psd, PulseSignal};
use pulsebench_core::preprocess::DEFAULT_BOX_ALPHA;
use pulsebench_core::synth::{gen_corpus, write_corpus, CorpusConfig};
use pulsebench_neural::models::{COLORS, FRAMES, SIDE};
use pulsebench_neural::{save_weights, Architecture};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;

use crate::svg::{Panel, Series, Svg};
use crate::{CmdResult, Failure, DEFAULT_SEED};

fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, Failure> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::usage(anyhow!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Failure::usage(anyhow!("invalid config {}: {e}", path.display())))
}

fn print_json(value: &impl Serialize) -> CmdResult {
    let s = serde_json::to_string_pretty(value).map_err(Failure::runtime)?;
    print_line(&s)
}

/// Writes one line to stdout; a closed pipe (`| head`) is not an error.
fn print_line(s: &str) -> CmdResult {
    match writeln!(std::io::stdout().lock(), "{s}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Failure::runtime(e)),
        _ => Ok(()),
    }
}

fn write_output(path: &Path, contents: impl AsRef<[u8]>) -> CmdResult {
    fs::write(path, contents)
        .map_err(|e| Failure::usage(anyhow!("cannot write {}: {e}", path.display())))
}

pub fn synth(
    config: Option<PathBuf>,
    out: &Path,
    seed: Option<u64>,
    n: Option<usize>,
) -> CmdResult {
    let mut cfg: CorpusConfig = load_config(config.as_deref())?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(n) = n {
        cfg.n = n;
    }
    if cfg.n == 0 {
        return Err(Failure::usage(anyhow!("corpus needs n >= 1")));
    }
    fs::create_dir_all(out)
        .map_err(|e| Failure::usage(anyhow!("cannot create {}: {e}", out.display())))?;
    let corpus = gen_corpus(&cfg).map_err(Failure::usage)?;
    let manifest = write_corpus(&corpus, out).map_err(|e| match e {
        pulsebench_core::Error::Io(_) => Failure::usage(e),
        e => Failure::runtime(e),
    })?;
    eprintln!(
        "wrote {} clips (seed {}) to {}",
        corpus.clips.len(),
        cfg.seed,
        out.display()
    );
    print_line(&manifest.display().to_string())
}

fn standardize(x: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let s = (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n).sqrt();
    x.iter()
        .map(|v| if s > 0.0 { (v - m) / s } else { 0.0 })
        .collect()
}

pub fn run(
    algo: &str,
    clip_path: &Path,
    weights: Option<PathBuf>,
    plot: Option<PathBuf>,
    window_s: f64,
    stride_s: f64,
) -> CmdResult {
    let spec = AlgorithmSpec {
        name: algo.to_string(),
        weights,
        win_seconds: None,
    };
    let algorithm = AlgorithmRegistry::default().create(&spec)?;
    if !clip_path.is_file() {
        return Err(Failure::usage(anyhow!(
            "clip {} not found",
            clip_path.display()
        )));
    }
    let id = clip_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let handle = ClipHandle::File {
        id: id.clone(),
        path: clip_path.to_path_buf(),
    };
    let clip = handle.load(DEFAULT_BOX_ALPHA)?;
    let pulse = algorithm.predict(&clip)?;
    let pred = bandpass_hr(&PulseSignal::new(pulse, clip.fs)?)?;
    let gt = bandpass_hr(&PulseSignal::new(clip.gt.clone(), clip.fs)?)?;
    let mut windows = windowed_hr(&pred, &gt, window_s, stride_s)?;
    for w in &mut windows {
        w.clip = id.clone();
    }
    let mean = |f: fn(&pulsebench_bench::WindowedEstimate) -> f64| {
        windows.iter().map(f).sum::<f64>() / windows.len() as f64
    };
    let out = json!({
        "algorithm": algorithm.name(),
        "clip": id,
        "fs": clip.fs,
        "hr": mean(|w| w.hr_pred),
        "hr_gt": mean(|w| w.hr_gt),
        "sdnn": window_sdnn(&pred),
        "sdnn_gt": window_sdnn(&gt),
        "windows": windows,
    });
    if let Some(path) = plot {
        write_output(&path, waveform_svg(algorithm.name(), &pred, &gt)?)?;
        eprintln!("plot written to {}", path.display());
    }
    print_json(&out)
}

fn waveform_svg(name: &str, pred: &PulseSignal, gt: &PulseSignal) -> Result<String, Failure> {
    let fs = pred.fs;
    let shown = pred.len().min((10.0 * fs) as usize);
    let t: Vec<f64> = (0..shown).map(|i| i as f64 / fs).collect();
    let (p, g) = (standardize(&pred.samples), standardize(&gt.samples));
    let mut svg = Svg::new(720.0, 560.0);
    svg.title(&format!("{name}: predicted vs reference pulse"));
    svg.panel(&Panel {
        y0: 40.0,
        height: 220.0,
        x_label: "time (s)",
        y_label: "z-score",
        series: vec![
            Series::line("reference", &t, &g[..shown], "#555555"),
            Series::line(name, &t, &p[..shown], "#d62728"),
        ],
    });

    let mut spectra = Vec::new();
    for (label, sig, color) in [("reference", gt, "#555555"), (name, pred, "#d62728")] {
        if let Ok(psd) = welch_psd(sig) {
            let keep: Vec<usize> = (0..psd.freqs.len())
                .filter(|&k| (0.5..=4.0).contains(&psd.freqs[k]))
                .collect();
            let peak = keep
                .iter()
                .map(|&k| psd.power[k])
                .fold(0.0, f64::max)
                .max(f64::MIN_POSITIVE);
            let bpm: Vec<f64> = keep.iter().map(|&k| psd.freqs[k] * 60.0).collect();
            let pow: Vec<f64> = keep.iter().map(|&k| psd.power[k] / peak).collect();
            spectra.push(Series::line(label, &bpm, &pow, color));
        }
    }
    if !spectra.is_empty() {
        let hr = welch_hr(pred)
            .map(|e| format!("Welch PSD, predicted HR {:.1} bpm", e.bpm))
            .unwrap_or_default();
        svg.panel(&Panel {
            y0: 310.0,
            height: 200.0,
            x_label: if hr.is_empty() { "bpm" } else { &hr },
            y_label: "relative power",
            series: spectra,
        });
    }
    Ok(svg.finish())
}

pub fn train(
    config: Option<PathBuf>,
    out: &Path,
    loss_csv: Option<PathBuf>,
    seed: Option<u64>,
    epochs: Option<usize>,
) -> CmdResult {
    let mut job: TrainJob = load_config(config.as_deref())?;
    if let Some(s) = seed {
        job.train.seed = s;
    }
    if let Some(e) = epochs {
        job.train.epochs = e;
    }
    job.train.validate()?;
    let csv_path = loss_csv.unwrap_or_else(|| {
        let mut p = out.as_os_str().to_owned();
        p.push(".loss.csv");
        PathBuf::from(p)
    });
    eprintln!(
        "training {} for {} epochs (seed {})",
        job.model, job.train.epochs, job.train.seed
    );
    let outcome = run_training(&job, |epoch, loss| {
        eprintln!("epoch {:>3}  loss {loss:.6}", epoch + 1)
    })?;
    save_weights(&outcome.model, out).map_err(|e| match e {
        pulsebench_neural::Error::Io(_) => Failure::usage(e),
        e => Failure::runtime(e),
    })?;
    let mut csv = String::from("epoch,loss\n");
    for (i, l) in outcome.report.epoch_losses.iter().enumerate() {
        let _ = writeln!(csv, "{},{l}", i + 1);
    }
    write_output(&csv_path, csv)?;
    print_json(&json!({
        "model": job.model.name(),
        "weights": out,
        "loss_csv": csv_path,
        "windows": outcome.windows,
        "epochs": outcome.report.epoch_losses.len(),
        "final_loss": outcome.report.epoch_losses.last(),
    }))
}

pub fn bench(config: &Path, out: &Path, seed: Option<u64>, threads: Option<usize>) -> CmdResult {
    let mut cfg: BenchConfig = load_config(Some(config))?;
    if let Some(s) = seed {
        cfg.seed = Some(s);
    }
    if let Some(t) = threads {
        cfg.threads = t;
    }
    let report = run_benchmark(&cfg, &AlgorithmRegistry::default())?;
    write_output(out, report.to_json()?)?;
    for a in &report.algorithms {
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "-".into());
        eprintln!(
            "{:<10} windows {:>4}  MAE {:>7}  RMSE {:>7}  r {:>6}  errors {}",
            a.name,
            a.windows.len(),
            fmt(a.mae),
            fmt(a.rmse),
            fmt(a.pearson),
            a.errors.len()
        );
    }
    eprintln!("report written to {}", out.display());
    if report.has_errors() {
        return Err(Failure::runtime(anyhow!(
            "some clips failed; see the errors field of the report"
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct FlopsRow {
    model: &'static str,
    input_resolution: String,
    params: usize,
    flops_per_frame: f64,
}

fn flops_row(arch: Architecture) -> FlopsRow {
    let model = arch.build::<f32>(DEFAULT_SEED);
    FlopsRow {
        model: arch.name(),
        input_resolution: format!("{FRAMES}x{SIDE}x{SIDE}x{COLORS}"),
        params: model.count_params(),
        flops_per_frame: model.count_flops(FRAMES),
    }
}

pub fn flops(model: Option<&str>) -> CmdResult {
    match model {
        Some(name) => print_json(&flops_row(Architecture::from_name(name)?)),
        None => print_json(
            &Architecture::ALL
                .iter()
                .map(|&a| flops_row(a))
                .collect::<Vec<_>>(),
        ),
    }
}

pub fn inspect(path: &Path) -> CmdResult {
    if !path.is_file() {
        return Err(Failure::usage(anyhow!("clip {} not found", path.display())));
    }
    print_json(&read_clip(path)?.header())
}

pub fn plot(report_path: &Path, out: &Path) -> CmdResult {
    let text = fs::read_to_string(report_path)
        .map_err(|e| Failure::usage(anyhow!("cannot read {}: {e}", report_path.display())))?;
    let report: BenchReport = serde_json::from_str(&text)
        .map_err(|e| Failure::usage(anyhow!("not a benchmark report: {e}")))?;
    const COLORS: [&str; 6] = [
        "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
    ];
    let mut series = Vec::new();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (i, a) in report.algorithms.iter().enumerate() {
        let gt: Vec<f64> = a.windows.iter().map(|w| w.hr_gt).collect();
        let pred: Vec<f64> = a.windows.iter().map(|w| w.hr_pred).collect();
        for v in gt.iter().chain(&pred) {
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
        series.push(Series::points(
            &a.name,
            &gt,
            &pred,
            COLORS[i % COLORS.len()],
        ));
    }
    if series.is_empty() {
        return Err(Failure::usage(anyhow!("report has no algorithms to plot")));
    }
    if lo <= hi {
        series.insert(0, Series::line("identity", &[lo, hi], &[lo, hi], "#999999"));
    }
    let mut svg = Svg::new(600.0, 560.0);
    svg.title("heart rate per window");
    svg.panel(&Panel {
        y0: 40.0,
        height: 460.0,
        x_label: "reference HR (bpm)",
        y_label: "predicted HR (bpm)",
        series,
    });
    write_output(out, svg.finish())?;
    eprintln!("plot written to {}", out.display());
    Ok(())
}
