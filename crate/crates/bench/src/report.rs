//! Benchmark configuration, the clip-parallel runner and JSON reports.

use std::collections::BTreeMap;

use pulsebench_core::postprocess::{bandpass_hr, PulseSignal};
use pulsebench_core::preprocess::DEFAULT_BOX_ALPHA;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algorithms::{AlgorithmRegistry, AlgorithmSpec, PulseAlgorithm};
use crate::clip::{ClipHandle, ClipSource, PreparedClip};
use crate::error::{Error, Result};
use crate::evaluate::{
    hr_metrics, sdnn_mae, windowed_hr, WindowedEstimate, DEFAULT_STRIDE_S, DEFAULT_WINDOW_S,
};

pub const REPORT_FORMAT: &str = "1";

/// Relative tolerance of the self-consistency check; covers summation order only.
const CONSISTENCY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub algorithms: Vec<AlgorithmSpec>,
    pub source: ClipSource,
    pub window_s: f64,
    pub stride_s: f64,
    /// Overrides the synthetic corpus seed when set.
    pub seed: Option<u64>,
    /// Worker threads; 0 lets rayon decide.
    pub threads: usize,
    pub box_alpha: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            algorithms: Vec::new(),
            source: ClipSource::default(),
            window_s: DEFAULT_WINDOW_S,
            stride_s: DEFAULT_STRIDE_S,
            seed: None,
            threads: 0,
            box_alpha: DEFAULT_BOX_ALPHA,
        }
    }
}

impl BenchConfig {
    /// The source with the seed override applied.
    pub fn effective_source(&self) -> ClipSource {
        match (&self.source, self.seed) {
            (ClipSource::Synth(c), Some(seed)) => {
                let mut c = c.clone();
                c.seed = seed;
                ClipSource::Synth(c)
            }
            (s, _) => s.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.window_s >= 10.0) {
            return Err(Error::Config(format!(
                "window_s must be >= 10 s (Welch segment), got {}",
                self.window_s
            )));
        }
        if !(self.stride_s > 0.0) {
            return Err(Error::Config("stride_s must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.box_alpha) {
            return Err(Error::Config("box_alpha must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipError {
    pub clip: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmReport {
    pub name: String,
    pub windows: Vec<WindowedEstimate>,
    pub mae: Option<f64>,
    pub rmse: Option<f64>,
    pub pearson: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sdnn_mae: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<ClipError>,
}

impl AlgorithmReport {
    /// Aggregates computed from `windows`.
    pub fn from_windows(
        name: &str,
        windows: Vec<WindowedEstimate>,
        errors: Vec<ClipError>,
    ) -> Self {
        let pairs: Vec<(f64, f64)> = windows.iter().map(|w| (w.hr_pred, w.hr_gt)).collect();
        let m = hr_metrics(&pairs).ok();
        Self {
            name: name.to_string(),
            mae: m.map(|m| m.mae),
            rmse: m.map(|m| m.rmse),
            pearson: m.and_then(|m| m.pearson),
            sdnn_mae: sdnn_mae(&windows),
            windows,
            errors,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub config: BenchConfig,
    pub algorithms: Vec<AlgorithmReport>,
    pub versions: BTreeMap<String, String>,
    pub timestamp: String,
}

fn close(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(x), Some(y)) => (x - y).abs() <= CONSISTENCY_TOL * x.abs().max(y.abs()).max(1.0),
        _ => false,
    }
}

impl BenchReport {
    /// Recomputes every aggregate from the report's own window rows.
    pub fn check_consistency(&self) -> Result<()> {
        for a in &self.algorithms {
            let again = AlgorithmReport::from_windows(&a.name, a.windows.clone(), Vec::new());
            for (field, stored, recomputed) in [
                ("mae", a.mae, again.mae),
                ("rmse", a.rmse, again.rmse),
                ("pearson", a.pearson, again.pearson),
                ("sdnn_mae", a.sdnn_mae, again.sdnn_mae),
            ] {
                if !close(stored, recomputed) {
                    return Err(Error::Consistency(format!(
                        "{}: stored {field} {stored:?} but windows give {recomputed:?}",
                        a.name
                    )));
                }
            }
            for w in &a.windows {
                if !(w.end > w.start) {
                    return Err(Error::Consistency(format!(
                        "{}: empty window in {}",
                        a.name, w.clip
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn has_errors(&self) -> bool {
        self.algorithms.iter().any(|a| !a.errors.is_empty())
    }

    /// The report with its timestamp blanked, for reproducibility comparisons.
    pub fn without_timestamp(&self) -> Self {
        Self {
            timestamp: String::new(),
            ..self.clone()
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn versions() -> BTreeMap<String, String> {
    BTreeMap::from([
        (
            "pulsebench".to_string(),
            env!("CARGO_PKG_VERSION").to_string(),
        ),
        ("report_format".to_string(), REPORT_FORMAT.to_string()),
    ])
}

/// Runs `algo` on one prepared clip and scores it against the clip's BVP.
pub fn evaluate_clip(
    algo: &dyn PulseAlgorithm,
    clip: &PreparedClip,
    window_s: f64,
    stride_s: f64,
) -> Result<Vec<WindowedEstimate>> {
    let pulse = algo.predict(clip)?;
    let pred = bandpass_hr(&PulseSignal::new(pulse, clip.fs)?)?;
    let gt = bandpass_hr(&PulseSignal::new(clip.gt.clone(), clip.fs)?)?;
    let mut windows = windowed_hr(&pred, &gt, window_s, stride_s)?;
    for w in &mut windows {
        w.clip = clip.id.clone();
    }
    Ok(windows)
}

type ClipOutcome = (String, Vec<Result<Vec<WindowedEstimate>, String>>);

fn process(
    handle: &ClipHandle,
    algos: &[Box<dyn PulseAlgorithm>],
    cfg: &BenchConfig,
) -> ClipOutcome {
    let id = handle.id().to_string();
    match handle.load(cfg.box_alpha) {
        Ok(clip) => {
            let per_algo = algos
                .iter()
                .map(|a| {
                    evaluate_clip(a.as_ref(), &clip, cfg.window_s, cfg.stride_s)
                        .map_err(|e| e.to_string())
                })
                .collect();
            (id, per_algo)
        }
        Err(e) => {
            let msg = format!("loading clip: {e}");
            (id, algos.iter().map(|_| Err(msg.clone())).collect())
        }
    }
}

/// Scores pre-built algorithms on clip handles with a pool of `threads`
/// workers. Results are merged in clip-id order, so the output does not
/// depend on scheduling.
pub fn evaluate_handles(
    algos: &[Box<dyn PulseAlgorithm>],
    handles: &[ClipHandle],
    cfg: &BenchConfig,
) -> Result<Vec<AlgorithmReport>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let mut outcomes: Vec<ClipOutcome> =
        pool.install(|| handles.par_iter().map(|h| process(h, algos, cfg)).collect());
    outcomes.sort_by(|a, b| a.0.cmp(&b.0));

    Ok(algos
        .iter()
        .enumerate()
        .map(|(ai, algo)| {
            let mut windows = Vec::new();
            let mut errors = Vec::new();
            for (clip, results) in &outcomes {
                match &results[ai] {
                    Ok(w) => windows.extend(w.iter().cloned()),
                    Err(e) => {
                        log::warn!("{} failed on {clip}: {e}", algo.name());
                        errors.push(ClipError {
                            clip: clip.clone(),
                            error: e.clone(),
                        })
                    }
                }
            }
            AlgorithmReport::from_windows(algo.name(), windows, errors)
        })
        .collect())
}

/// Builds every algorithm (failing fast on configuration problems), scores
/// all clips and assembles the report.
pub fn run_benchmark(cfg: &BenchConfig, registry: &AlgorithmRegistry) -> Result<BenchReport> {
    cfg.validate()?;
    let algos = cfg
        .algorithms
        .iter()
        .map(|spec| registry.create(spec))
        .collect::<Result<Vec<_>>>()?;
    let handles = if algos.is_empty() {
        Vec::new()
    } else {
        cfg.effective_source().handles()?
    };
    let algorithms = evaluate_handles(&algos, &handles, cfg)?;
    let report = BenchReport {
        config: cfg.clone(),
        algorithms,
        versions: versions(),
        timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
    };
    report.check_consistency()?;
    Ok(report)
}
