use super::RlError;
use crate::math::entropy;

/// Clipped surrogate objective, to be maximized.
#[derive(Clone, Debug, PartialEq)]
pub struct Surrogate {
    /// Mean over samples of `min(r·A, clip(r, 1 − ε, 1 + ε)·A)`.
    pub value: f64,
    /// Derivative of `value` with respect to each new log-probability.
    pub grad_new_log_probs: Vec<f64>,
    /// Fraction of samples whose ratio left `[1 − ε, 1 + ε]`.
    pub clip_fraction: f64,
}

pub fn ppo_clip_loss(
    new_log_probs: &[f64],
    old_log_probs: &[f64],
    advantages: &[f64],
    epsilon: f64,
) -> Result<Surrogate, RlError> {
    let n = new_log_probs.len();
    if old_log_probs.len() != n || advantages.len() != n {
        return Err(RlError::LengthMismatch);
    }
    if n == 0 {
        return Ok(Surrogate { value: 0.0, grad_new_log_probs: Vec::new(), clip_fraction: 0.0 });
    }
    let finite = new_log_probs.iter().chain(old_log_probs).chain(advantages).all(|v| v.is_finite());
    if !finite {
        return Err(RlError::NonFinite("surrogate inputs"));
    }
    let mut total = 0.0;
    let mut clipped = 0usize;
    let mut grad = vec![0.0; n];
    for i in 0..n {
        let ratio = (new_log_probs[i] - old_log_probs[i]).exp();
        let a = advantages[i];
        let unclipped = ratio * a;
        let clipped_term = ratio.clamp(1.0 - epsilon, 1.0 + epsilon) * a;
        if (ratio - 1.0).abs() > epsilon {
            clipped += 1;
        }
        if unclipped <= clipped_term {
            total += unclipped;
            // d(r·A)/d(log π) = r·A
            grad[i] = unclipped / n as f64;
        } else {
            total += clipped_term;
        }
    }
    Ok(Surrogate { value: total / n as f64, grad_new_log_probs: grad, clip_fraction: clipped as f64 / n as f64 })
}

/// Mean squared error and its gradient with respect to the predictions.
pub fn value_loss(preds: &[f64], targets: &[f64]) -> Result<(f64, Vec<f64>), RlError> {
    if preds.len() != targets.len() {
        return Err(RlError::LengthMismatch);
    }
    if preds.is_empty() {
        return Ok((0.0, Vec::new()));
    }
    let n = preds.len() as f64;
    let loss = preds.iter().zip(targets).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / n;
    let grad = preds.iter().zip(targets).map(|(p, t)| 2.0 * (p - t) / n).collect();
    Ok((loss, grad))
}

/// Mean Shannon entropy (nats) of a batch of distributions.
pub fn entropy_bonus<D: AsRef<[f64]>>(distributions: &[D]) -> f64 {
    if distributions.is_empty() {
        return 0.0;
    }
    distributions.iter().map(|d| entropy(d.as_ref())).sum::<f64>() / distributions.len() as f64
}

/// `E[(r − 1) − ln r]`, a nonnegative estimate of KL(old ‖ new).
pub fn approx_kl(new_log_probs: &[f64], old_log_probs: &[f64]) -> f64 {
    if new_log_probs.is_empty() {
        return 0.0;
    }
    new_log_probs
        .iter()
        .zip(old_log_probs)
        .map(|(n, o)| {
            let log_ratio = n - o;
            log_ratio.exp() - 1.0 - log_ratio
        })
        .sum::<f64>()
        / new_log_probs.len() as f64
}
