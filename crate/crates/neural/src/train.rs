//! Mini-batch training with Adam.

use pulsebench_core::numerics::Tensor;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::ModelGraph;
use crate::layers::{Mode, Param};
use crate::scalar::Real;

const STD_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// MSE between the standardized prediction and standardized label.
    #[default]
    Mse,
    /// `1 - pearson(prediction, label)`.
    NegPearson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub loss: LossKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            batch_size: 8,
            epochs: 30,
            seed: 42,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            loss: LossKind::Mse,
        }
    }
}

impl TrainConfig {
    /// `lr = 0` is accepted so a frozen run can serve as a baseline.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !self.lr.is_finite() || self.lr < 0.0 {
            return bad("lr must be finite and non-negative");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("Adam betas must lie in [0, 1)");
        }
        if self.adam_eps <= 0.0 {
            return bad("adam_eps must be positive");
        }
        Ok(())
    }
}

/// One training pair: a per-sample model input and its target waveform.
#[derive(Debug, Clone)]
pub struct Sample<T> {
    pub x: Tensor<T>,
    pub y: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainReport {
    /// Mean training loss of each epoch, in order.
    pub epoch_losses: Vec<f64>,
}

fn standardize(v: &[f64]) -> Vec<f64> {
    let n = v.len() as f64;
    let mu = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|a| (a - mu) * (a - mu)).sum::<f64>() / n;
    let sd = (var + STD_EPS).sqrt();
    v.iter().map(|a| (a - mu) / sd).collect()
}

/// Loss of one prediction and its gradient with respect to the raw prediction.
pub fn loss_and_grad(kind: LossKind, pred: &[f64], label: &[f64]) -> (f64, Vec<f64>) {
    let n = pred.len() as f64;
    let mu = pred.iter().sum::<f64>() / n;
    let var = pred.iter().map(|a| (a - mu) * (a - mu)).sum::<f64>() / n;
    let sd = (var + STD_EPS).sqrt();
    let p: Vec<f64> = pred.iter().map(|a| (a - mu) / sd).collect();
    let y = standardize(label);
    // Loss and its gradient with respect to the standardized prediction.
    let (loss, g): (f64, Vec<f64>) = match kind {
        LossKind::Mse => (
            p.iter()
                .zip(&y)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                / n,
            p.iter().zip(&y).map(|(a, b)| 2.0 * (a - b) / n).collect(),
        ),
        LossKind::NegPearson => (
            1.0 - p.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() / n,
            y.iter().map(|b| -b / n).collect(),
        ),
    };
    let g_mean = g.iter().sum::<f64>() / n;
    let gp_mean = g.iter().zip(&p).map(|(a, b)| a * b).sum::<f64>() / n;
    let grad = g
        .iter()
        .zip(&p)
        .map(|(gi, pi)| (gi - g_mean - pi * gp_mean) / sd)
        .collect();
    (loss, grad)
}

/// Adam with bias correction; moment buffers follow the model's parameter order.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(cfg: &TrainConfig) -> Self {
        Self {
            lr: cfg.lr,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.adam_eps,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn step<T: Real>(&mut self, params: &mut [&mut Param<T>]) {
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![0.0; p.value.len()]).collect();
            self.v = self.m.clone();
        }
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        for ((p, m), v) in params.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            let grads: Vec<f64> = p.grad.data().iter().map(|g| g.as_f64()).collect();
            for (i, w) in p.value.data_mut().iter_mut().enumerate() {
                let g = grads[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
                let update = self.lr * (m[i] / c1) / ((v[i] / c2).sqrt() + self.eps);
                *w = T::real(w.as_f64() - update);
            }
        }
    }
}

fn stack<T: Real>(samples: &[&Sample<T>], input_shape: &[usize]) -> Result<Tensor<T>> {
    let mut data = Vec::with_capacity(samples.len() * samples[0].x.len());
    for s in samples {
        if s.x.shape() != input_shape {
            return Err(Error::Shape(format!(
                "sample shape {:?} does not match model input {input_shape:?}",
                s.x.shape()
            )));
        }
        data.extend_from_slice(s.x.data());
    }
    let mut shape = vec![samples.len()];
    shape.extend_from_slice(input_shape);
    Ok(Tensor::new(shape, data)?)
}

pub fn train<T: Real>(
    model: &mut ModelGraph<T>,
    samples: &[Sample<T>],
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    train_with(model, samples, cfg, |_, _| {})
}

/// Trains in place. `on_epoch(epoch, mean_loss)` runs after every epoch.
/// Shuffling and initialization depend only on `cfg.seed`.
pub fn train_with<T: Real>(
    model: &mut ModelGraph<T>,
    samples: &[Sample<T>],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<TrainReport> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::Config("no training windows".into()));
    }
    let out_len = *model.output_shape()?.last().unwrap_or(&0);
    if let Some(s) = samples.iter().find(|s| s.y.len() != out_len) {
        return Err(Error::Shape(format!(
            "label of length {} for model output {out_len}",
            s.y.len()
        )));
    }
    let input_shape = model.input_shape().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(cfg);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (bi, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&Sample<T>> = chunk.iter().map(|&i| &samples[i]).collect();
            let x = stack(&batch, &input_shape)?;
            model.zero_grad();
            let out = model.forward(&x, Mode::Train)?;
            let b = batch.len();
            let mut grad = Vec::with_capacity(out.len());
            let mut batch_loss = 0.0;
            for (pred, s) in out.data().chunks_exact(out_len).zip(&batch) {
                let pred: Vec<f64> = pred.iter().map(|v| v.as_f64()).collect();
                let label: Vec<f64> = s.y.iter().map(|v| v.as_f64()).collect();
                let (l, g) = loss_and_grad(cfg.loss, &pred, &label);
                batch_loss += l;
                grad.extend(g.into_iter().map(|v| T::real(v / b as f64)));
            }
            if !batch_loss.is_finite() {
                model.clear_cache();
                return Err(Error::NonFinite {
                    epoch,
                    batch: bi,
                    detail: format!("loss {batch_loss} over {b} windows"),
                });
            }
            total += batch_loss;
            model.backward(&Tensor::new(out.shape().to_vec(), grad)?)?;
            adam.step(&mut model.params_mut());
        }
        let mean = total / samples.len() as f64;
        log::info!("epoch {} loss {mean:.6}", epoch + 1);
        on_epoch(epoch, mean);
        epoch_losses.push(mean);
    }
    Ok(TrainReport { epoch_losses })
}

/// Eval-mode predictions, one waveform per sample, in input order.
pub fn predict<T: Real>(
    model: &mut ModelGraph<T>,
    samples: &[Tensor<T>],
    batch_size: usize,
) -> Result<Vec<Vec<T>>> {
    let input_shape = model.input_shape().to_vec();
    let mut out = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(batch_size.max(1)) {
        let wrapped: Vec<Sample<T>> = chunk
            .iter()
            .map(|x| Sample {
                x: x.clone(),
                y: Vec::new(),
            })
            .collect();
        let refs: Vec<&Sample<T>> = wrapped.iter().collect();
        let y = model.forward(&stack(&refs, &input_shape)?, Mode::Eval)?;
        let per = y.len() / chunk.len();
        out.extend(y.data().chunks_exact(per).map(|c| c.to_vec()));
    }
    model.clear_cache();
    Ok(out)
}
