//! Streaming minibatch trainer: momentum, error centering and a bold-driver
//! global learning rate.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{encode_input, BinaryInput, Params, RecogError, RecognitionModel};
use crate::model::{Bn2oNetwork, DiseaseVector, ModelError, ObservationModel};
use crate::rng::{stream, substream, Rng};
use crate::sampler::sample_augmented;
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid trainer config: {0}")]
    InvalidConfig(String),
    #[error("training diverged at batch {batch}: loss {loss}, learning rate {eta}")]
    Diverged { batch: usize, loss: f64, eta: f64 },
    #[error("sample stream ended after {0} samples")]
    StreamExhausted(usize),
    #[error(transparent)]
    Recog(#[from] RecogError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerConfig {
    pub momentum: f64,
    pub eta0: f64,
    pub eta_up: f64,
    pub eta_down: f64,
    pub batch_size: usize,
    /// Decay of the per-weight EMA of applied steps. `None` disables centering.
    pub center_decay: Option<f64>,
    /// Decay of the loss EMA that drives the learning-rate adaptation.
    pub loss_decay: f64,
    /// Minibatches between learning-rate adjustments.
    pub adapt_interval: usize,
    pub clip: f64,
    pub samples: usize,
    pub p_plus: f64,
    pub p_minus: f64,
    pub seed: u64,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            momentum: 0.95,
            eta0: 0.01,
            eta_up: 1.1,
            eta_down: 0.5,
            batch_size: 100,
            center_decay: Some(0.999),
            loss_decay: 0.99,
            adapt_interval: 100,
            clip: 1e-7,
            samples: 100_000,
            p_plus: 0.5,
            p_minus: 1.0,
            seed: 0,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::InvalidConfig(m));
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum {} outside [0, 1)", self.momentum));
        }
        if !(self.clip > 0.0 && self.clip < 0.5) {
            return bad(format!("clip {} outside (0, 0.5)", self.clip));
        }
        if self.adapt_interval == 0 {
            return bad("adapt interval must be at least 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1".into());
        }
        if !(self.eta0 > 0.0 && self.eta0.is_finite()) {
            return bad(format!("eta0 {} must be positive", self.eta0));
        }
        if !(self.eta_up > 0.0 && self.eta_down > 0.0) {
            return bad("learning-rate factors must be positive".into());
        }
        if let Some(c) = self.center_decay {
            if !(0.0..1.0).contains(&c) {
                return bad(format!("center decay {c} outside [0, 1)"));
            }
        }
        if !(0.0..1.0).contains(&self.loss_decay) {
            return bad(format!("loss decay {} outside [0, 1)", self.loss_decay));
        }
        ObservationModel::<f64>::new(self.p_plus, self.p_minus)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Smoothed per-sample loss after each minibatch.
    pub loss_trace: Vec<f64>,
    pub final_eta: f64,
    pub batches: usize,
    pub samples: usize,
}

/// Endless stream of fresh `(x, d)` training pairs from the augmented network.
pub struct TrainingStream<'a, S: Scalar> {
    net: &'a Bn2oNetwork<S>,
    obs: ObservationModel<S>,
    rng: Rng,
}

impl<'a, S: Scalar> TrainingStream<'a, S> {
    pub fn new(net: &'a Bn2oNetwork<S>, obs: ObservationModel<S>, rng: Rng) -> Self {
        Self { net, obs, rng }
    }
}

impl<S: Scalar> Iterator for TrainingStream<'_, S> {
    type Item = (BinaryInput, DiseaseVector);

    fn next(&mut self) -> Option<Self::Item> {
        let (d, o) = sample_augmented(self.net, &self.obs, &mut self.rng);
        Some((encode_input(&o), d))
    }
}

/// Trains `model` on `cfg.samples` pairs drawn from `stream`.
pub fn train<S: Scalar>(
    model: &mut RecognitionModel<S>,
    stream: impl IntoIterator<Item = (BinaryInput, DiseaseVector)>,
    cfg: &TrainerConfig,
) -> Result<TrainReport, TrainError> {
    cfg.validate()?;
    let mut stream = stream.into_iter();
    let mu = S::of(cfg.momentum);
    let clip = S::of(cfg.clip);
    let mut prev_step = model.params().zeros_like();
    let mut center = model.params().zeros_like();
    let mut eta = cfg.eta0;
    let mut smoothed: Option<f64> = None;
    let mut reference: Option<f64> = None;
    let mut trace = Vec::new();
    let mut seen = 0;
    let mut batch = Vec::with_capacity(cfg.batch_size);
    while seen < cfg.samples {
        batch.clear();
        let n = cfg.batch_size.min(cfg.samples - seen);
        batch.extend(stream.by_ref().take(n));
        if batch.len() < n {
            return Err(TrainError::StreamExhausted(seen + batch.len()));
        }
        seen += n;
        let (loss, grad) = model.loss_and_grad(&batch, clip)?;
        let mean_loss = loss.as_f64() / n as f64;
        if !mean_loss.is_finite() || !grad.all_finite() {
            return Err(TrainError::Diverged {
                batch: trace.len(),
                loss: mean_loss,
                eta,
            });
        }
        apply_step(model, &grad, &mut prev_step, &mut center, S::of(eta), mu, cfg.center_decay);
        if !model.params().all_finite() {
            return Err(TrainError::Diverged {
                batch: trace.len(),
                loss: mean_loss,
                eta,
            });
        }

        let s = match smoothed {
            None => mean_loss,
            Some(prev) => cfg.loss_decay * prev + (1.0 - cfg.loss_decay) * mean_loss,
        };
        smoothed = Some(s);
        trace.push(s);
        if trace.len() % cfg.adapt_interval == 0 {
            if let Some(r) = reference {
                eta *= if s < r { cfg.eta_up } else { cfg.eta_down };
            }
            reference = Some(s);
        }
    }
    Ok(TrainReport {
        batches: trace.len(),
        loss_trace: trace,
        final_eta: eta,
        samples: seen,
    })
}

fn apply_step<S: Scalar>(
    model: &mut RecognitionModel<S>,
    grad: &Params<S>,
    prev_step: &mut Params<S>,
    center: &mut Params<S>,
    eta: S,
    mu: S,
    center_decay: Option<f64>,
) {
    let frozen_w = model.frozen_w();
    let decay = center_decay.map(S::of);
    let groups = model
        .params_mut()
        .groups_mut()
        .into_iter()
        .zip(grad.groups())
        .zip(prev_step.groups_mut())
        .zip(center.groups_mut());
    for ((((name, w, bias), (_, g, _)), (_, prev, _)), (_, c, _)) in groups {
        if frozen_w && name == "W" {
            continue;
        }
        for i in 0..w.len() {
            let mut step = -eta * g[i] + mu * prev[i];
            if let (Some(decay), false) = (decay, bias) {
                step -= c[i];
                c[i] = decay * c[i] + (S::one() - decay) * step;
            }
            prev[i] = step;
            w[i] += step;
        }
    }
}

/// Trains on fresh samples from `net` under the observation model and seed in
/// `cfg`.
pub fn train_on_network<S: Scalar>(
    model: &mut RecognitionModel<S>,
    net: &Bn2oNetwork<S>,
    cfg: &TrainerConfig,
) -> Result<TrainReport, TrainError> {
    cfg.validate()?;
    let obs = ObservationModel::new(S::of(cfg.p_plus), S::of(cfg.p_minus))?;
    let rng = substream(cfg.seed, stream::TRAINING, 0);
    train(model, TrainingStream::new(net, obs, rng), cfg)
}

/// Mean per-sample cross-entropy over `samples`.
pub fn held_out_loss<S: Scalar>(
    model: &RecognitionModel<S>,
    samples: &[(BinaryInput, DiseaseVector)],
    clip: f64,
) -> Result<f64, RecogError> {
    if samples.is_empty() {
        return Ok(0.0);
    }
    let (loss, _) = model.loss_and_grad(samples, S::of(clip))?;
    Ok(loss.as_f64() / samples.len() as f64)
}
