use crate::{Error, Result};

/// Discounted reward-to-go of one episode.
pub fn returns(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for t in (0..rewards.len()).rev() {
        acc = rewards[t] + gamma * acc;
        out[t] = acc;
    }
    out
}

/// Standardises over the whole batch with the population standard deviation.
pub fn normalize_advantages(values: &[f64], eps: f64) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("cannot normalise an empty batch".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    Ok(values.iter().map(|v| (v - mean) / (std + eps)).collect())
}

/// Clipped surrogate of one sample: `min(r A, clip(r, 1-eps, 1+eps) A)`.
pub fn clipped_objective(log_ratio: f64, advantage: f64, epsilon: f64) -> f64 {
    let ratio = log_ratio.exp();
    let clipped = ratio.clamp(1.0 - epsilon, 1.0 + epsilon);
    (ratio * advantage).min(clipped * advantage)
}

/// k2 estimator `0.5 (log pi - log pi_ref)^2`.
pub fn kl_k2_penalty(log_prob: f64, ref_log_prob: f64) -> f64 {
    0.5 * (log_prob - ref_log_prob).powi(2)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurrogateSample {
    pub log_prob: f64,
    pub old_log_prob: f64,
    pub ref_log_prob: f64,
    pub advantage: f64,
}

/// Batch loss (negated objective) and its derivative per sample log-prob.
#[derive(Debug, Clone, PartialEq)]
pub struct Surrogate {
    pub loss: f64,
    pub grad_log_prob: Vec<f64>,
    pub clip_fraction: f64,
    pub kl: f64,
}

impl Surrogate {
    pub fn compute(samples: &[SurrogateSample], epsilon: f64, kl_coef: f64) -> Self {
        let n = samples.len().max(1) as f64;
        let mut loss = 0.0;
        let mut clipped = 0usize;
        let mut kl = 0.0;
        let mut grad = Vec::with_capacity(samples.len());
        for s in samples {
            let log_ratio = s.log_prob - s.old_log_prob;
            let ratio = log_ratio.exp();
            let obj = clipped_objective(log_ratio, s.advantage, epsilon);
            let k2 = kl_k2_penalty(s.log_prob, s.ref_log_prob);
            kl += k2;
            loss -= obj - kl_coef * k2;
            // The unclipped branch is active unless the ratio left the trust
            // region in the direction the advantage rewards.
            let is_clipped = (s.advantage > 0.0 && ratio > 1.0 + epsilon) || (s.advantage < 0.0 && ratio < 1.0 - epsilon);
            if is_clipped {
                clipped += 1;
            }
            let d_obj = if is_clipped { 0.0 } else { ratio * s.advantage };
            let d_k2 = s.log_prob - s.ref_log_prob;
            grad.push(-(d_obj - kl_coef * d_k2) / n);
        }
        Self {
            loss: loss / n,
            grad_log_prob: grad,
            clip_fraction: clipped as f64 / n,
            kl: kl / n,
        }
    }
}
