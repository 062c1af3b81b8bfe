//! Critic-free policy optimisation: masked categorical heads over an MLP,
//! globally normalised returns as advantages, a clipped likelihood-ratio
//! surrogate and a k2 penalty toward the initial policy.

mod objective;
mod policy;
mod trainer;

pub use objective::{clipped_objective, kl_k2_penalty, normalize_advantages, returns, Surrogate, SurrogateSample};
pub use policy::{Adam, PolicyNetwork};
pub use trainer::{batch_log_probs, surrogate_gradient, train, CurvePoint, TrainConfig, TrainOutcome, UpdateBatch};

use rand::Rng;

use crate::{Error, Result};

/// Softmax over the unmasked entries of one head.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedCategorical {
    log_probs: Vec<f64>,
}

impl MaskedCategorical {
    pub fn new(logits: &[f64], mask: &[bool], head: usize) -> Result<Self> {
        if logits.len() != mask.len() {
            return Err(Error::InvalidArgument(format!(
                "head {head}: {} logits for a mask of {}",
                logits.len(),
                mask.len()
            )));
        }
        let max = logits
            .iter()
            .zip(mask)
            .filter(|(_, &m)| m)
            .map(|(&l, _)| l)
            .fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(Error::EmptyMask { head });
        }
        let lse = max
            + logits
                .iter()
                .zip(mask)
                .filter(|(_, &m)| m)
                .map(|(&l, _)| (l - max).exp())
                .sum::<f64>()
                .ln();
        let log_probs = logits
            .iter()
            .zip(mask)
            .map(|(&l, &m)| if m { l - lse } else { f64::NEG_INFINITY })
            .collect();
        Ok(Self { log_probs })
    }

    pub fn len(&self) -> usize {
        self.log_probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_probs.is_empty()
    }

    /// `-inf` for masked entries.
    pub fn log_prob(&self, i: usize) -> f64 {
        self.log_probs[i]
    }

    pub fn probs(&self) -> Vec<f64> {
        self.log_probs.iter().map(|l| l.exp()).collect()
    }

    pub fn entropy(&self) -> f64 {
        self.log_probs
            .iter()
            .filter(|l| l.is_finite())
            .map(|&l| -l.exp() * l)
            .sum()
    }

    /// Lowest-index entry of maximal probability.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &l) in self.log_probs.iter().enumerate() {
            if l > self.log_probs[best] {
                best = i;
            }
        }
        best
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut last = self.argmax();
        for (i, &l) in self.log_probs.iter().enumerate() {
            if l.is_finite() {
                acc += l.exp();
                last = i;
                if u < acc {
                    return i;
                }
            }
        }
        // Rounding left u above the cumulative sum.
        last
    }
}
