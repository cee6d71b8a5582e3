use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use rfdrone_nn::{softmax_cross_entropy, Adam, AdamConfig, Mode, Module, NnError};

use super::dataset::Dataset;
use super::metrics::{ConfusionMatrix, Metrics};
use crate::error::{Error, Result};
use crate::models::{argmax, Classifier};
use crate::signal::ClassificationCase;
use crate::synth::derive_seed;

/// Samples per forward pass during evaluation.
pub const EVAL_BATCH: usize = 16;

const SHUFFLE_SALT: u64 = 0x5348_5546;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub lr: f64,
    pub l2: f64,
    pub seed: u64,
    pub repeats: usize,
}

impl TrainConfig {
    /// Settings for the raw-dataset cases (I, II-A, III).
    pub fn paper_raw() -> Self {
        Self {
            batch_size: 8,
            epochs: 50,
            lr: 1e-4,
            l2: 1e-4,
            seed: 0,
            repeats: 5,
        }
    }

    /// Settings for the extended cases (II-B, II-C).
    pub fn paper_extended() -> Self {
        Self {
            batch_size: 32,
            epochs: 5,
            ..Self::paper_raw()
        }
    }

    pub fn paper_for(case: ClassificationCase) -> Self {
        if case.uses_extended() {
            Self::paper_extended()
        } else {
            Self::paper_raw()
        }
    }

    /// Budget for the desk-scale synthetic Case II-C set
    /// ([`DESK_SAMPLES_PER_CLASS`](crate::synth::DESK_SAMPLES_PER_CLASS) per class).
    pub fn desk() -> Self {
        Self {
            batch_size: 8,
            epochs: 5,
            lr: 1e-3,
            l2: 1e-4,
            seed: 0,
            repeats: 5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::InvalidConfig("batch size must be at least 2 for batch norm".into()));
        }
        if self.epochs == 0 || self.repeats == 0 {
            return Err(Error::InvalidConfig("epochs and repeats must be positive".into()));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) || !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::InvalidConfig("lr and l2 must be finite and non-negative".into()));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            weight_decay: self.l2,
            ..AdamConfig::default()
        }
    }

    /// Seed of repeat `run`: the base seed plus the run index.
    pub fn run_seed(&self, run: usize) -> u64 {
        self.seed.wrapping_add(run as u64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Iteration that closed the epoch.
    pub iteration: usize,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Curves {
    pub iterations: Vec<IterationRecord>,
    pub epochs: Vec<EpochRecord>,
}

impl Curves {
    pub fn final_val_accuracy(&self) -> Option<f64> {
        self.epochs.last().and_then(|e| e.val_accuracy)
    }

    pub fn val_accuracy_at(&self, epoch: usize) -> Option<f64> {
        self.epochs.iter().find(|e| e.epoch == epoch).and_then(|e| e.val_accuracy)
    }
}

/// Trailing mean over up to `window` points.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    (0..values.len())
        .map(|i| {
            let lo = (i + 1).saturating_sub(window);
            values[lo..=i].iter().sum::<f64>() / (i + 1 - lo) as f64
        })
        .collect()
}

fn gather<'a>(data: &'a Dataset, idx: &[usize]) -> Vec<&'a [f64]> {
    idx.iter().map(|&i| data.features[i].as_slice()).collect()
}

fn diverged(iteration: usize) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::Nn(NnError::NonFinite(_)) => Error::DivergedLoss(iteration),
        other => other,
    }
}

/// Mini-batch Adam training for a fixed number of epochs. Each epoch reshuffles the
/// training indices and drops the final incomplete batch. Validation, when `val` is
/// non-empty, runs in eval mode after every epoch and does not affect training.
pub fn train(
    model: &mut Classifier,
    data: &Dataset,
    train_idx: &[usize],
    val_idx: &[usize],
    cfg: &TrainConfig,
) -> Result<(Adam, Curves)> {
    cfg.validate()?;
    if train_idx.is_empty() {
        return Err(Error::EmptyTrainSet);
    }
    if cfg.batch_size > train_idx.len() {
        return Err(Error::InvalidConfig(format!(
            "batch size {} exceeds the {} training samples",
            cfg.batch_size,
            train_idx.len()
        )));
    }
    let mut adam = Adam::new(cfg.adam());
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, SHUFFLE_SALT));
    let mut order = train_idx.to_vec();
    let mut curves = Curves::default();
    let mut iteration = 0;
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks_exact(cfg.batch_size) {
            iteration += 1;
            let x = model.batch(&gather(data, batch))?;
            let labels: Vec<usize> = batch.iter().map(|&i| data.labels[i]).collect();
            model.zero_grad();
            let logits = model.forward(&x, Mode::Train).map_err(|e| diverged(iteration)(e.into()))?;
            let (loss, grad) = softmax_cross_entropy(&logits, &labels)?;
            if !loss.is_finite() {
                return Err(Error::DivergedLoss(iteration));
            }
            let correct = logits
                .data()
                .chunks(model.num_classes())
                .zip(&labels)
                .filter(|(row, &l)| argmax(row) == l)
                .count();
            model.backward(&grad).map_err(|e| diverged(iteration)(e.into()))?;
            adam.step(model)?;
            curves.iterations.push(IterationRecord {
                iteration,
                epoch,
                loss,
                accuracy: correct as f64 / labels.len() as f64,
            });
        }
        let (val_loss, val_accuracy) = if val_idx.is_empty() {
            (None, None)
        } else {
            let r = evaluate(model, data, val_idx)?;
            (Some(r.loss), Some(r.metrics.accuracy))
        };
        log::debug!("epoch {epoch}: iteration {iteration}, val accuracy {val_accuracy:?}");
        curves.epochs.push(EpochRecord {
            epoch,
            iteration,
            val_loss,
            val_accuracy,
        });
    }
    Ok((adam, curves))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub confusion: ConfusionMatrix,
    pub metrics: Metrics,
    /// Mean cross-entropy over the evaluated samples.
    pub loss: f64,
}

/// Eval-mode predictions and metrics over `idx`.
pub fn evaluate(model: &mut Classifier, data: &Dataset, idx: &[usize]) -> Result<EvalReport> {
    if idx.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    let mut confusion = ConfusionMatrix::new(model.num_classes());
    let mut loss_sum = 0.0;
    for chunk in idx.chunks(EVAL_BATCH) {
        let x = model.batch(&gather(data, chunk))?;
        let labels: Vec<usize> = chunk.iter().map(|&i| data.labels[i]).collect();
        let logits = model.forward(&x, Mode::Eval)?;
        let (loss, _) = softmax_cross_entropy(&logits, &labels)?;
        loss_sum += loss * chunk.len() as f64;
        for (row, &l) in logits.data().chunks(model.num_classes()).zip(&labels) {
            confusion.record(l, argmax(row))?;
        }
    }
    Ok(EvalReport {
        metrics: confusion.metrics()?,
        confusion,
        loss: loss_sum / idx.len() as f64,
    })
}
