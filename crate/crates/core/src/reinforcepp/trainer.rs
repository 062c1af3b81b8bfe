use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::objective::{normalize_advantages, returns, Surrogate, SurrogateSample};
use super::policy::{Adam, PolicyNetwork};
use super::MaskedCategorical;
use crate::env::{head_offsets, rollout, Decision, Environment, Selection, Trajectory};
use crate::rng::{derive_seed, stream, tag};
use crate::{Error, Result};

/// Stabiliser in the advantage normalisation denominator.
const ADVANTAGE_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub iterations: usize,
    pub episodes_per_batch: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub gamma: f64,
    pub clip_epsilon: f64,
    pub kl_coef: f64,
    pub hidden: Vec<usize>,
    /// Slots per training episode; the environment horizon when unset.
    pub episode_len: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 200,
            episodes_per_batch: 16,
            epochs: 4,
            learning_rate: 3e-4,
            gamma: 0.99,
            clip_epsilon: 0.2,
            kl_coef: 0.01,
            hidden: vec![256, 256],
            episode_len: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.episodes_per_batch == 0 {
            return Err(Error::config("train.episodes_per_batch", "must be at least 1"));
        }
        if self.epochs == 0 {
            return Err(Error::config("train.epochs", "must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("train.learning_rate", "must be positive"));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::config("train.gamma", "must lie in (0, 1]"));
        }
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 1.0) {
            return Err(Error::config("train.clip_epsilon", "must lie in (0, 1)"));
        }
        if !(self.kl_coef >= 0.0 && self.kl_coef.is_finite()) {
            return Err(Error::config("train.kl_coef", "must be non-negative"));
        }
        if self.hidden.contains(&0) {
            return Err(Error::config("train.hidden", "layer widths must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub iteration: usize,
    /// Mean per-slot reward of the batch, collected before the update.
    pub mean_reward: f64,
    pub mean_return: f64,
    pub loss: f64,
    pub kl: f64,
    pub clip_fraction: f64,
    /// Mean masked head entries per slot.
    pub masked_entries: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub network: PolicyNetwork,
    pub curve: Vec<CurvePoint>,
}

/// Joint log-probability and `d logp / d logits` for the decisions of one slot.
fn joint_log_prob(
    logits: &[f64],
    decisions: &[Decision],
    sizes: &[usize],
    offsets: &[usize],
    grad: Option<&mut [f64]>,
) -> Result<f64> {
    let mut total = 0.0;
    let mut grad = grad;
    for d in decisions {
        let start = offsets[d.head];
        let dist = MaskedCategorical::new(&logits[start..start + sizes[d.head]], &d.mask, d.head)?;
        total += dist.log_prob(d.choice);
        if let Some(g) = grad.as_deref_mut() {
            for (i, p) in dist.probs().into_iter().enumerate() {
                g[start + i] += if i == d.choice { 1.0 } else { 0.0 } - p;
            }
        }
    }
    Ok(total)
}

/// Joint log-probability of every row's decisions under `net`.
pub fn batch_log_probs(net: &PolicyNetwork, observations: &Array2<f64>, decisions: &[&[Decision]], head_sizes: &[usize]) -> Result<Vec<f64>> {
    let offsets = head_offsets(head_sizes);
    let logits = net.forward(observations);
    decisions
        .iter()
        .enumerate()
        .map(|(i, d)| joint_log_prob(logits.row(i).as_slice().expect("row-major"), d, head_sizes, &offsets, None))
        .collect()
}

/// One policy-update batch: observations (one per row) and what was done in them.
#[derive(Debug, Clone, Copy)]
pub struct UpdateBatch<'a> {
    pub observations: &'a Array2<f64>,
    pub decisions: &'a [&'a [Decision]],
    pub old_log_probs: &'a [f64],
    pub ref_log_probs: &'a [f64],
    pub advantages: &'a [f64],
}

/// Loss `-(L_clip - kl_coef * J_k2)` of `net` on `batch` and its gradient in parameter space.
pub fn surrogate_gradient(
    net: &PolicyNetwork,
    head_sizes: &[usize],
    batch: &UpdateBatch<'_>,
    clip_epsilon: f64,
    kl_coef: f64,
) -> Result<(Surrogate, Vec<f64>)> {
    let offsets = head_offsets(head_sizes);
    let n = batch.decisions.len();
    let logits = net.forward(batch.observations);
    let mut dlogp = Array2::<f64>::zeros((n, net.output_dim()));
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let row = logits.row(i);
        let mut g = dlogp.row_mut(i);
        let lp = joint_log_prob(
            row.as_slice().expect("row-major"),
            batch.decisions[i],
            head_sizes,
            &offsets,
            Some(g.as_slice_mut().expect("row-major")),
        )?;
        samples.push(SurrogateSample {
            log_prob: lp,
            old_log_prob: batch.old_log_probs[i],
            ref_log_prob: batch.ref_log_probs[i],
            advantage: batch.advantages[i],
        });
    }
    let sur = Surrogate::compute(&samples, clip_epsilon, kl_coef);
    for (i, mut row) in dlogp.rows_mut().into_iter().enumerate() {
        row *= sur.grad_log_prob[i];
    }
    let grad = net.backward(batch.observations, &dlogp);
    Ok((sur, grad))
}

/// REINFORCE++ over episodes drawn from clones of `env`.
///
/// Episode `i` of iteration `k` uses exogenous seed `derive_seed(seed, [TRAIN_EPISODE, k, i])`
/// and its own policy-sampling stream, so results do not depend on thread scheduling.
pub fn train<E>(env: &E, config: &TrainConfig, seed: u64) -> Result<TrainOutcome>
where
    E: Environment + Clone + Send + Sync,
{
    config.validate()?;
    let sizes = env.head_sizes();
    let outputs: usize = sizes.iter().sum();
    let dim = env.observation_dim();
    let horizon = config.episode_len.unwrap_or(env.horizon());
    let mut net = PolicyNetwork::new(dim, &config.hidden, outputs, &mut stream(seed, &[tag::INIT]))?;
    let reference = net.clone();
    let mut opt = Adam::new(net.params().len(), config.learning_rate);
    let mut curve = Vec::with_capacity(config.iterations);

    for it in 0..config.iterations {
        let trajectories: Vec<Trajectory> = (0..config.episodes_per_batch)
            .into_par_iter()
            .map(|i| {
                let mut local = env.clone();
                let episode_seed = derive_seed(seed, &[tag::TRAIN_EPISODE, it as u64, i as u64]);
                let mut rng = stream(seed, &[tag::POLICY, it as u64, i as u64]);
                rollout(&mut local, &net, episode_seed, horizon, Selection::Sample(&mut rng))
            })
            .collect::<Result<_>>()?;

        let steps: Vec<_> = trajectories.iter().flat_map(|t| t.steps.iter()).collect();
        if steps.is_empty() {
            curve.push(CurvePoint {
                iteration: it,
                mean_reward: 0.0,
                mean_return: 0.0,
                loss: 0.0,
                kl: 0.0,
                clip_fraction: 0.0,
                masked_entries: 0.0,
            });
            continue;
        }
        let raw_returns: Vec<f64> = trajectories.iter().flat_map(|t| returns(&t.rewards(), config.gamma)).collect();
        let advantages = normalize_advantages(&raw_returns, ADVANTAGE_EPS)?;
        let n = steps.len();
        let obs = Array2::from_shape_fn((n, dim), |(i, j)| steps[i].observation[j]);
        let decisions: Vec<&[Decision]> = steps.iter().map(|s| s.decisions.as_slice()).collect();
        let old: Vec<f64> = steps.iter().map(|s| s.log_prob).collect();
        let reference_lp = batch_log_probs(&reference, &obs, &decisions, &sizes)?;
        let batch = UpdateBatch {
            observations: &obs,
            decisions: &decisions,
            old_log_probs: &old,
            ref_log_probs: &reference_lp,
            advantages: &advantages,
        };

        let mut last = None;
        for _ in 0..config.epochs {
            let (sur, grad) = surrogate_gradient(&net, &sizes, &batch, config.clip_epsilon, config.kl_coef)?;
            let grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if !sur.loss.is_finite() || !grad_norm.is_finite() {
                return Err(Error::NonFiniteLoss {
                    iteration: it,
                    diagnostics: format!(
                        "loss={} grad_norm={} kl={} clip_fraction={}",
                        sur.loss, grad_norm, sur.kl, sur.clip_fraction
                    ),
                });
            }
            opt.step(net.params_mut(), &grad);
            last = Some(sur);
        }
        let sur = last.expect("at least one epoch");
        let mean_reward = steps.iter().map(|s| s.reward).sum::<f64>() / n as f64;
        curve.push(CurvePoint {
            iteration: it,
            mean_reward,
            mean_return: raw_returns.iter().sum::<f64>() / n as f64,
            loss: sur.loss,
            kl: sur.kl,
            clip_fraction: sur.clip_fraction,
            masked_entries: steps.iter().map(|s| s.masked_entries as f64).sum::<f64>() / n as f64,
        });
    }
    Ok(TrainOutcome { network: net, curve })
}
