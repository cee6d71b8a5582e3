use crate::error::{NnError, Result};
use crate::tensor::Tensor;

/// Row-wise softmax of `[N, K]` logits, shifted by the row max for stability.
pub fn softmax(logits: &Tensor) -> Result<Tensor> {
    logits.expect_rank(2, "softmax")?;
    let k = logits.shape()[1];
    let mut out = Vec::with_capacity(logits.numel());
    for row in logits.data().chunks(k) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        out.extend(exps.into_iter().map(|e| e / z));
    }
    Tensor::new(logits.shape(), out)?.check_finite("softmax")
}

/// Mean cross-entropy of softmax(logits) against class indices.
///
/// Returns the loss and its gradient with respect to the logits, `(p - one_hot) / N`.
pub fn softmax_cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
    let probs = softmax(logits)?;
    let (n, k) = (logits.shape()[0], logits.shape()[1]);
    if labels.len() != n {
        return Err(NnError::ShapeMismatch(format!(
            "{} labels for a batch of {n}",
            labels.len()
        )));
    }
    if let Some(&label) = labels.iter().find(|&&l| l >= k) {
        return Err(NnError::InvalidLabel { label, classes: k });
    }
    let mut grad = probs.into_data();
    let mut loss = 0.0;
    for ((row, logit_row), &label) in grad.chunks_mut(k).zip(logits.data().chunks(k)).zip(labels) {
        let max = logit_row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_z = logit_row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        loss -= logit_row[label] - max - log_z;
        row[label] -= 1.0;
        row.iter_mut().for_each(|g| *g /= n as f64);
    }
    let loss = loss / n as f64;
    if !loss.is_finite() {
        return Err(NnError::NonFinite("cross entropy"));
    }
    Ok((loss, Tensor::new(&[n, k], grad)?))
}
