use crate::{Error, Result};

/// −log softmax(logits)[label], computed through log-sum-exp.
pub fn cross_entropy(logits: &[f64], label: usize) -> Result<f64> {
    if label >= logits.len() {
        return Err(Error::ClassOutOfRange {
            class: label,
            n_classes: logits.len(),
        });
    }
    if logits.iter().any(|l| !l.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(log_sum_exp(logits) - logits[label])
}

/// Cross-entropy plus `scale · ∂CE/∂logits = scale · (softmax − onehot)`
/// written to `grad`.
pub fn cross_entropy_grad(
    logits: &[f64],
    label: usize,
    scale: f64,
    grad: &mut [f64],
) -> Result<f64> {
    let loss = cross_entropy(logits, label)?;
    let lse = log_sum_exp(logits);
    for (k, (g, &l)) in grad.iter_mut().zip(logits).enumerate() {
        let p = libm::exp(l - lse);
        *g = scale * (p - if k == label { 1.0 } else { 0.0 });
    }
    Ok(loss)
}

fn log_sum_exp(logits: &[f64]) -> f64 {
    let peak = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    peak + libm::log(logits.iter().map(|l| libm::exp(l - peak)).sum::<f64>())
}

/// (1 − α)·ce + α·penalty.
pub fn total_loss(ce: f64, penalty: f64, alpha: f64) -> f64 {
    (1.0 - alpha) * ce + alpha * penalty
}
