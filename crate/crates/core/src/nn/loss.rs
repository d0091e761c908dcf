//! Softmax cross-entropy over class logits.

use super::{NnError, Real};

/// Numerically stable softmax (max subtraction).
pub fn softmax<R: Real>(logits: &[R]) -> Vec<R> {
    let mut max = logits[0];
    for &v in logits {
        if v > max {
            max = v;
        }
    }
    let mut out: Vec<R> = logits.iter().map(|&v| (v - max).exp()).collect();
    let mut sum = R::zero();
    for &v in &out {
        sum += v;
    }
    for v in out.iter_mut() {
        *v = *v / sum;
    }
    out
}

/// Cross-entropy loss of one frame and its gradient with respect to the
/// logits: `loss = -log softmax(logits)[label]`, `grad = softmax - onehot`.
pub fn softmax_xent<R: Real>(logits: &[R], label: usize) -> Result<(R, Vec<R>), NnError> {
    if label >= logits.len() {
        return Err(NnError::LabelOutOfRange {
            label,
            classes: logits.len(),
        });
    }
    let mut max = logits[0];
    for &v in logits {
        if v > max {
            max = v;
        }
    }
    let mut sum = R::zero();
    for &v in logits {
        sum += (v - max).exp();
    }
    let log_z = max + sum.ln();
    let loss = log_z - logits[label];
    let mut grad: Vec<R> = logits.iter().map(|&v| (v - max).exp() / sum).collect();
    grad[label] = grad[label] - R::one();
    Ok((loss, grad))
}
