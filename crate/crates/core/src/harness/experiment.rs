use std::path::Path;

use serde::{Deserialize, Serialize};

use rfdrone_nn::Adam;

use super::dataset::Dataset;
use super::metrics::ConfusionMatrix;
use super::split::{split_indices, SplitSpec};
use super::train::{evaluate, moving_average, train, Curves, EvalReport, TrainConfig};
use crate::error::{io_err, Error, Result};
use crate::features::FeatureMethod;
use crate::models::{Classifier, ModelSpec};

pub const MA_WINDOW: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub run: usize,
    pub seed: u64,
    pub train_size: usize,
    pub val_size: usize,
    pub test_size: usize,
    pub report: EvalReport,
    pub curves: Curves,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub struct Experiment {
    pub runs: Vec<RunResult>,
    pub mean: MeanMetrics,
    /// Trained model and optimizer state of the last run.
    pub final_model: Classifier,
    pub final_optimizer: Adam,
}

fn check_pairing(method: &FeatureMethod, spec: &ModelSpec) -> Result<()> {
    let ok = matches!(
        (method, spec),
        (FeatureMethod::Stft(_) | FeatureMethod::Scu, ModelSpec::ResnetStft(_)) | (FeatureMethod::Psd(_), ModelSpec::Psd1d(_))
    );
    if !ok {
        return Err(Error::InvalidConfig(format!(
            "model {} cannot take {} features",
            spec.kind(),
            method.name()
        )));
    }
    if method.input_shape() != spec.input_shape() {
        return Err(Error::InvalidConfig(format!(
            "feature shape {:?} does not match model input {:?}",
            method.input_shape(),
            spec.input_shape()
        )));
    }
    Ok(())
}

/// One split, training run and test evaluation per repeat. Repeat `r` uses seed
/// `cfg.seed + r` for the split, the initialization and the batch order.
pub fn run_experiment(data: &Dataset, spec: &ModelSpec, cfg: &TrainConfig, split: &SplitSpec) -> Result<Experiment> {
    cfg.validate()?;
    check_pairing(&data.method, spec)?;
    if spec.num_classes() != data.num_classes() {
        return Err(Error::InvalidConfig(format!(
            "model has {} classes, case {} has {}",
            spec.num_classes(),
            data.case,
            data.num_classes()
        )));
    }
    let mut runs = Vec::with_capacity(cfg.repeats);
    let mut last = None;
    for run in 0..cfg.repeats {
        let seed = cfg.run_seed(run);
        let parts = split_indices(&data.labels, data.num_classes(), &SplitSpec { seed, ..*split })?;
        let mut model = Classifier::build(spec, seed)?;
        let run_cfg = TrainConfig { seed, ..*cfg };
        let (adam, curves) = train(&mut model, data, &parts.train, &parts.val, &run_cfg)?;
        let report = evaluate(&mut model, data, &parts.test)?;
        log::info!(
            "run {run} (seed {seed}): test accuracy {:.4}, macro F1 {:.4}",
            report.metrics.accuracy,
            report.metrics.f1
        );
        runs.push(RunResult {
            run,
            seed,
            train_size: parts.train.len(),
            val_size: parts.val.len(),
            test_size: parts.test.len(),
            report,
            curves,
        });
        last = Some((model, adam));
    }
    let (final_model, final_optimizer) = last.expect("at least one repeat");
    Ok(Experiment {
        mean: mean_metrics(&runs),
        runs,
        final_model,
        final_optimizer,
    })
}

pub fn mean_metrics(runs: &[RunResult]) -> MeanMetrics {
    let n = runs.len() as f64;
    let mean = |f: fn(&RunResult) -> f64| runs.iter().map(f).sum::<f64>() / n;
    MeanMetrics {
        accuracy: mean(|r| r.report.metrics.accuracy),
        precision: mean(|r| r.report.metrics.precision),
        recall: mean(|r| r.report.metrics.recall),
        f1: mean(|r| r.report.metrics.f1),
    }
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| csv_err(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => io_err(path)(source),
        other => Error::Parse {
            path: path.to_path_buf(),
            detail: format!("{other:?}"),
        },
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per run plus a `mean` row. Values are written at full precision.
pub fn write_report_csv(path: &Path, runs: &[RunResult], mean: &MeanMetrics) -> Result<()> {
    let mut w = writer(path)?;
    let res = (|| -> csv::Result<()> {
        w.write_record(["run", "seed", "train_size", "val_size", "test_size", "accuracy", "precision", "recall", "f1"])?;
        for r in runs {
            let m = &r.report.metrics;
            w.write_record([
                r.run.to_string(),
                r.seed.to_string(),
                r.train_size.to_string(),
                r.val_size.to_string(),
                r.test_size.to_string(),
                m.accuracy.to_string(),
                m.precision.to_string(),
                m.recall.to_string(),
                m.f1.to_string(),
            ])?;
        }
        w.write_record([
            "mean".to_string(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            mean.accuracy.to_string(),
            mean.precision.to_string(),
            mean.recall.to_string(),
            mean.f1.to_string(),
        ])?;
        w.flush()?;
        Ok(())
    })();
    res.map_err(|e| csv_err(path, e))
}

pub fn write_per_class_csv(path: &Path, runs: &[RunResult], class_names: &[String]) -> Result<()> {
    let mut w = writer(path)?;
    let res = (|| -> csv::Result<()> {
        w.write_record(["run", "class", "name", "precision", "recall", "f1", "support"])?;
        for r in runs {
            for (c, m) in r.report.metrics.per_class.iter().enumerate() {
                w.write_record([
                    r.run.to_string(),
                    c.to_string(),
                    class_names.get(c).cloned().unwrap_or_default(),
                    m.precision.to_string(),
                    m.recall.to_string(),
                    m.f1.to_string(),
                    m.support.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    })();
    res.map_err(|e| csv_err(path, e))
}

/// Rows: `run, true class, counts per predicted class`.
pub fn write_confusion_csv(path: &Path, matrices: &[(usize, &ConfusionMatrix)], class_names: &[String]) -> Result<()> {
    let mut w = writer(path)?;
    let res = (|| -> csv::Result<()> {
        let mut header = vec!["run".to_string(), "true".to_string()];
        header.extend(class_names.iter().cloned());
        w.write_record(&header)?;
        for (run, m) in matrices {
            for (t, row) in m.counts().iter().enumerate() {
                let mut rec = vec![run.to_string(), class_names.get(t).cloned().unwrap_or_else(|| t.to_string())];
                rec.extend(row.iter().map(u64::to_string));
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
        Ok(())
    })();
    res.map_err(|e| csv_err(path, e))
}

/// Per-iteration training loss/accuracy with 5-point moving averages; validation
/// values appear on the iteration that closed each epoch.
pub fn write_curves_csv(path: &Path, runs: &[RunResult]) -> Result<()> {
    let mut w = writer(path)?;
    let res = (|| -> csv::Result<()> {
        w.write_record([
            "run",
            "iteration",
            "epoch",
            "train_loss",
            "train_acc",
            "train_loss_ma5",
            "train_acc_ma5",
            "val_loss",
            "val_acc",
        ])?;
        for r in runs {
            let it = &r.curves.iterations;
            let loss: Vec<f64> = it.iter().map(|i| i.loss).collect();
            let acc: Vec<f64> = it.iter().map(|i| i.accuracy).collect();
            let (loss_ma, acc_ma) = (moving_average(&loss, MA_WINDOW), moving_average(&acc, MA_WINDOW));
            for (k, rec) in it.iter().enumerate() {
                let val = r.curves.epochs.iter().find(|e| e.iteration == rec.iteration);
                w.write_record([
                    r.run.to_string(),
                    rec.iteration.to_string(),
                    rec.epoch.to_string(),
                    rec.loss.to_string(),
                    rec.accuracy.to_string(),
                    loss_ma[k].to_string(),
                    acc_ma[k].to_string(),
                    opt(val.and_then(|e| e.val_loss)),
                    opt(val.and_then(|e| e.val_accuracy)),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    })();
    res.map_err(|e| csv_err(path, e))
}
