//! Masked binary cross-entropy, Adam, the learning-rate schedule and the
//! training loop.
//!
//! A sentence's loss is the BCE summed over its valid cells; a batch's loss
//! is the mean over its sentences.

use std::ops::ControlFlow;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::ExDocument;
use crate::error::{Error, Result};
use crate::eval::Metrics;
use crate::fsutil;
use crate::model::{Ablations, Example, Model};
use crate::ndiff::{Graph, ParamStore};
use crate::scoring::ScoreTensor;
use crate::structures::{TargetTensor, DEFAULT_THRESHOLD};

pub use crate::ndiff::{bce, BCE_EPS};

/// Masked loss of a finished score tensor: BCE summed over valid cells.
pub fn masked_loss(scores: &ScoreTensor, target: &TargetTensor) -> Result<f64> {
    let s = scores.values();
    if s.shape() != target.values.shape() {
        return Err(Error::Shape { op: "masked_loss", lhs: s.shape().to_vec(), rhs: target.values.shape().to_vec() });
    }
    Ok(s.data()
        .iter()
        .zip(target.values.data())
        .zip(target.valid.data())
        .filter(|(_, &m)| m == 1.0)
        .map(|((&p, &y), _)| bce(y, p))
        .sum())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Fraction of all steps spent warming up linearly from 0.
    pub warmup_rate: f64,
    /// Decay linearly to 0 after warmup; otherwise hold.
    pub linear_decay: bool,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub weight_decay: f64,
    /// Threshold used for the per-epoch F1 on the training set.
    pub threshold: f64,
    pub ablations: Ablations,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 8,
            epochs: 100,
            warmup_rate: 0.06,
            linear_decay: true,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            weight_decay: 0.0,
            threshold: DEFAULT_THRESHOLD,
            ablations: Ablations::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if !(0.0..1.0).contains(&self.warmup_rate) {
            return bad(format!("warmup_rate must lie in [0, 1), got {}", self.warmup_rate));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad(format!("threshold must lie in (0, 1), got {}", self.threshold));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.adam_eps <= 0.0 {
            return bad("Adam betas must lie in [0, 1) and eps be positive".into());
        }
        Ok(())
    }
}

/// Learning rate at 0-based `step` of `total`.
pub fn learning_rate_at(config: &TrainConfig, step: usize, total: usize) -> f64 {
    let base = config.learning_rate;
    let warm = (config.warmup_rate * total as f64).ceil() as usize;
    if step < warm {
        return base * (step + 1) as f64 / warm as f64;
    }
    if !config.linear_decay || total <= warm {
        return base;
    }
    base * (total - step) as f64 / (total - warm) as f64
}

/// Adam with optional decoupled weight decay.
#[derive(Clone, Debug)]
pub struct Adam {
    m: ParamStore,
    v: ParamStore,
    t: u64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    weight_decay: f64,
}

impl Adam {
    pub fn new(params: &ParamStore, config: &TrainConfig) -> Self {
        Adam {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
            beta1: config.beta1,
            beta2: config.beta2,
            eps: config.adam_eps,
            weight_decay: config.weight_decay,
        }
    }

    pub fn step(&mut self, params: &mut ParamStore, grads: &ParamStore, lr: f64) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for (name, p) in params.iter_mut() {
            let Some(g) = grads.get(name) else { continue };
            let m = self.m.get_mut(name).expect("moment per parameter");
            let v = self.v.get_mut(name).expect("moment per parameter");
            let (p, m, v) = (p.data_mut(), m.data_mut(), v.data_mut());
            for i in 0..p.len() {
                let gi = g.data()[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * gi;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * gi * gi;
                let mh = m[i] / c1;
                let vh = v[i] / c2;
                p[i] -= lr * (mh / (vh.sqrt() + self.eps) + self.weight_decay * p[i]);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    /// 1-based.
    pub epoch: usize,
    pub mean_loss: f64,
    /// Headline metric of the schema's task kind on the training documents.
    pub f1: f64,
}

/// Mean loss and gradients over `batch`.
pub fn batch_gradients(model: &Model, examples: &[&Example], params: &ParamStore) -> Result<(f64, ParamStore)> {
    let mut total = params.zeros_like();
    let mut loss = 0.0;
    for ex in examples {
        let mut g = Graph::new();
        let l = model.loss_on(&mut g, ex, params)?;
        let lv = g.value(l).item();
        if !lv.is_finite() {
            return Err(Error::NonFinite("sentence loss".into()));
        }
        loss += lv;
        let grads = g.backward(l)?;
        total.add_scaled(&g.param_grads(&grads), 1.0);
    }
    let k = 1.0 / examples.len() as f64;
    total.scale(k);
    Ok((loss * k, total))
}

/// Headline F1 of `model` on `docs`.
pub fn training_f1(model: &Model, docs: &[ExDocument], tau: f64) -> Result<f64> {
    let pred = docs.iter().map(|d| model.predict_document(d, tau)).collect::<Result<Vec<_>>>()?;
    Ok(Metrics::compute(&pred, docs)?.primary(model.schemas.kind).f1)
}

/// Trains `model` in place. After each epoch `on_epoch` sees the stats and
/// may stop the run. Returns one entry per completed epoch.
pub fn train(
    model: &mut Model,
    docs: &[ExDocument],
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochStats) -> ControlFlow<()>,
) -> Result<Vec<EpochStats>> {
    config.validate()?;
    if docs.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    let examples: Vec<Example> = docs.iter().map(|d| model.example(d)).collect::<Result<_>>()?;
    let mut order: Vec<usize> = (0..docs.len()).collect();
    let steps_per_epoch = docs.len().div_ceil(config.batch_size);
    let total = steps_per_epoch * config.epochs;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = Adam::new(&model.params, config);
    let mut trace = Vec::with_capacity(config.epochs);
    let mut step = 0;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&Example> = chunk.iter().map(|&i| &examples[i]).collect();
            let (loss, grads) = batch_gradients(model, &batch, &model.params).map_err(|e| match e {
                Error::NonFinite(_) => Error::NonFinite(format!("loss at epoch {epoch}, batch of sentences {chunk:?}")),
                other => other,
            })?;
            epoch_loss += loss * chunk.len() as f64;
            let lr = learning_rate_at(config, step, total);
            adam.step(&mut model.params, &grads, lr);
            step += 1;
        }
        if !model.params.is_finite() {
            return Err(Error::NonFinite(format!("parameters after epoch {epoch}")));
        }
        let stats = EpochStats {
            epoch,
            mean_loss: epoch_loss / docs.len() as f64,
            f1: training_f1(model, docs, config.threshold)?,
        };
        log::info!("epoch {} loss {:.6} f1 {:.4}", stats.epoch, stats.mean_loss, stats.f1);
        let flow = on_epoch(&stats);
        trace.push(stats);
        if flow.is_break() {
            break;
        }
    }
    Ok(trace)
}

/// `epoch,loss,f1` lines with a header.
pub fn trace_csv(trace: &[EpochStats]) -> String {
    let mut s = String::from("epoch,loss,f1\n");
    for t in trace {
        s.push_str(&format!("{},{},{}\n", t.epoch, t.mean_loss, t.f1));
    }
    s
}

pub fn write_trace(path: &Path, trace: &[EpochStats]) -> Result<()> {
    fsutil::write_atomic(path, trace_csv(trace).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ndiff::Array;

    fn target(values: Vec<f64>, valid: Vec<f64>) -> TargetTensor {
        TargetTensor {
            values: Array::new(vec![1, 2, 2], values).unwrap(),
            valid: Array::new(vec![1, 2, 2], valid).unwrap(),
        }
    }

    #[test]
    fn masked_loss_values() {
        let s = ScoreTensor::from_array(Array::new(vec![1, 2, 2], vec![0.5, 0.3, 0.2, 0.9]).unwrap()).unwrap();
        assert_eq!(masked_loss(&s, &target(vec![1.0, 0.0, 0.0, 1.0], vec![0.0; 4])).unwrap(), 0.0);
        let l = masked_loss(&s, &target(vec![1.0, 0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0, 0.0])).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-6);
    }

    #[test]
    fn schedule_shape() {
        let c = TrainConfig { learning_rate: 1.0, warmup_rate: 0.1, ..Default::default() };
        assert_eq!(learning_rate_at(&c, 0, 100), 0.1);
        assert_eq!(learning_rate_at(&c, 9, 100), 1.0);
        assert_eq!(learning_rate_at(&c, 10, 100), 1.0);
        assert!((learning_rate_at(&c, 55, 100) - 0.5).abs() < 1e-12);
        assert!(learning_rate_at(&c, 99, 100) > 0.0);
        let flat = TrainConfig { linear_decay: false, ..c };
        assert_eq!(learning_rate_at(&flat, 99, 100), 1.0);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut p = ParamStore::new();
        p.insert("x", Array::from_rows(&[vec![1.0, -2.0]]));
        let mut g = ParamStore::new();
        g.insert("x", Array::from_rows(&[vec![0.5, -3.0]]));
        let mut adam = Adam::new(&p, &TrainConfig::default());
        adam.step(&mut p, &g, 0.1);
        let x = p.get("x").unwrap().data();
        assert!((x[0] - 0.9).abs() < 1e-6 && (x[1] + 1.9).abs() < 1e-6);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig { warmup_rate: 1.0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { batch_size: 0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig::default().validate().is_ok());
    }
}
