//! Clipped-surrogate PPO loss, its analytic gradient, Adam and the epoch loop.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::nn::dot;
use super::policy::{gaussian_entropy, gaussian_log_prob, ActorCritic};
use super::TrainerConfig;
use crate::error::{Error, Result};

/// Flat per-transition training data. Rows are indexed `0..len`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UpdateBatch {
    pub obs_dim: usize,
    pub privileged_dim: usize,
    pub action_dim: usize,
    pub obs: Vec<f64>,
    pub privileged: Vec<f64>,
    pub actions: Vec<f64>,
    pub old_log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
    /// Rows excluded from the update (e.g. faulted episodes) are `false`.
    pub valid: Vec<bool>,
}

impl UpdateBatch {
    pub fn len(&self) -> usize {
        self.old_log_probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.old_log_probs.is_empty()
    }

    pub fn obs_row(&self, i: usize) -> &[f64] {
        &self.obs[i * self.obs_dim..(i + 1) * self.obs_dim]
    }

    pub fn privileged_row(&self, i: usize) -> &[f64] {
        &self.privileged[i * self.privileged_dim..(i + 1) * self.privileged_dim]
    }

    pub fn action_row(&self, i: usize) -> &[f64] {
        &self.actions[i * self.action_dim..(i + 1) * self.action_dim]
    }
}

/// Coefficients of the loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossCoefficients {
    pub clip_ratio: f64,
    pub entropy_coeff: f64,
    pub value_coeff: f64,
}

impl From<&TrainerConfig> for LossCoefficients {
    fn from(c: &TrainerConfig) -> Self {
        Self { clip_ratio: c.clip_ratio, entropy_coeff: c.entropy_coeff, value_coeff: c.value_coeff }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossStats {
    pub total: f64,
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    /// Largest `|ratio - 1|` in the minibatch.
    pub max_ratio_deviation: f64,
}

/// Gradient of the clipped surrogate `min(r A, clip(r) A)` with respect to `log pi`.
pub fn surrogate_grad_logp(ratio: f64, advantage: f64, clip: f64) -> f64 {
    let clipped = (advantage >= 0.0 && ratio > 1.0 + clip) || (advantage < 0.0 && ratio < 1.0 - clip);
    if clipped {
        0.0
    } else {
        ratio * advantage
    }
}

pub fn clipped_surrogate(ratio: f64, advantage: f64, clip: f64) -> f64 {
    (ratio * advantage).min(ratio.clamp(1.0 - clip, 1.0 + clip) * advantage)
}

/// Mean loss over `indices` and its gradient with respect to all parameters:
/// `-mean(surrogate) + c_v mean((V - R)^2) - c_e H`.
pub fn loss_and_grad(
    ac: &ActorCritic,
    batch: &UpdateBatch,
    indices: &[usize],
    coeffs: &LossCoefficients,
) -> Result<(LossStats, Vec<f64>)> {
    let layout = &ac.layout;
    let mut grad = vec![0.0; ac.params.len()];
    if indices.is_empty() {
        return Ok((LossStats::default(), grad));
    }
    let b = indices.len() as f64;
    let log_std = ac.log_std().to_vec();
    let inv_std: Vec<f64> = log_std.iter().map(|ls| (-ls).exp()).collect();
    let ls_range = layout.log_std_range();
    let mut stats = LossStats::default();
    let mut actor_cache = Vec::new();
    let mut critic_cache = Vec::new();
    let mut grad_mean = vec![0.0; layout.action_dim];

    for &i in indices {
        let mean = layout.actor.forward_cached(&ac.params, batch.obs_row(i), &mut actor_cache);
        let action = batch.action_row(i);
        // Same routine as collection, so fresh data gives a ratio of exactly 1.
        let logp = gaussian_log_prob(action, &mean, &log_std);
        let log_ratio = logp - batch.old_log_probs[i];
        let ratio = log_ratio.exp();
        let adv = batch.advantages[i];
        let surr = clipped_surrogate(ratio, adv, coeffs.clip_ratio);
        stats.policy -= surr / b;
        stats.approx_kl += ((ratio - 1.0) - log_ratio) / b;
        if (ratio - 1.0).abs() > coeffs.clip_ratio {
            stats.clip_fraction += 1.0 / b;
        }
        stats.max_ratio_deviation = stats.max_ratio_deviation.max((ratio - 1.0).abs());

        let d_logp = -surrogate_grad_logp(ratio, adv, coeffs.clip_ratio) / b;
        if d_logp != 0.0 {
            for j in 0..layout.action_dim {
                let z = (action[j] - mean[j]) * inv_std[j];
                grad_mean[j] = d_logp * z * inv_std[j];
                grad[ls_range.start + j] += d_logp * (z * z - 1.0);
            }
            layout.actor.backward(&ac.params, &actor_cache, &grad_mean, &mut grad);
        }

        let value = layout.critic.forward_cached(&ac.params, batch.privileged_row(i), &mut critic_cache)[0];
        let err = value - batch.returns[i];
        stats.value += err * err / b;
        let d_value = 2.0 * coeffs.value_coeff * err / b;
        if d_value != 0.0 {
            layout.critic.backward(&ac.params, &critic_cache, &[d_value], &mut grad);
        }
    }
    stats.entropy = gaussian_entropy(&log_std);
    for g in &mut grad[ls_range] {
        *g -= coeffs.entropy_coeff;
    }
    stats.total = stats.policy + coeffs.value_coeff * stats.value - coeffs.entropy_coeff * stats.entropy;
    Ok((stats, grad))
}

/// Adam optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Adam {
    pub fn new(n: usize) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], t: 0, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let t = self.t as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Scales `grad` so that its L2 norm is at most `max_norm`. Returns the original norm.
pub fn clip_grad_norm(grad: &mut [f64], max_norm: f64) -> f64 {
    let norm = dot(grad, grad).sqrt();
    if max_norm > 0.0 && norm > max_norm {
        let s = max_norm / norm;
        grad.iter_mut().for_each(|g| *g *= s);
    }
    norm
}

/// Averages of the loss statistics over every minibatch of an update.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub grad_norm: f64,
    /// Largest `|ratio - 1|` in the first minibatch, before any parameter
    /// step; zero when collection and update agree on log-probabilities.
    pub fresh_max_ratio_deviation: f64,
    pub minibatches: usize,
}

/// Runs `epochs` passes of shuffled minibatch Adam steps. On any non-finite loss
/// or gradient the update is abandoned and `ac` is left untouched.
pub fn ppo_update<R: Rng + ?Sized>(
    ac: &mut ActorCritic,
    adam: &mut Adam,
    batch: &UpdateBatch,
    config: &TrainerConfig,
    rng: &mut R,
) -> Result<UpdateStats> {
    let coeffs = LossCoefficients::from(config);
    let mut work = ac.clone();
    let mut opt = adam.clone();
    let mut valid: Vec<usize> = (0..batch.len()).filter(|&i| batch.valid[i]).collect();
    let mut stats = UpdateStats::default();
    if valid.is_empty() {
        return Ok(stats);
    }
    let ls_range = work.layout.log_std_range();
    for epoch in 0..config.epochs {
        valid.shuffle(rng);
        for chunk in valid.chunks(config.minibatch_size.max(1)) {
            let (loss, mut grad) = loss_and_grad(&work, batch, chunk, &coeffs)?;
            if !loss.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::TrainingHalted(format!(
                    "non-finite loss in epoch {epoch} (policy {}, value {}, entropy {}); minibatch of {} rows starting at row {}",
                    loss.policy,
                    loss.value,
                    loss.entropy,
                    chunk.len(),
                    chunk[0]
                )));
            }
            if stats.minibatches == 0 {
                stats.fresh_max_ratio_deviation = loss.max_ratio_deviation;
            }
            stats.grad_norm += clip_grad_norm(&mut grad, config.max_grad_norm);
            opt.step(&mut work.params, &grad, config.learning_rate);
            for ls in &mut work.params[ls_range.clone()] {
                *ls = ls.max(config.min_log_std);
            }
            stats.policy_loss += loss.policy;
            stats.value_loss += loss.value;
            stats.entropy += loss.entropy;
            stats.approx_kl += loss.approx_kl;
            stats.clip_fraction += loss.clip_fraction;
            stats.minibatches += 1;
        }
    }
    let n = stats.minibatches.max(1) as f64;
    stats.policy_loss /= n;
    stats.value_loss /= n;
    stats.entropy /= n;
    stats.approx_kl /= n;
    stats.clip_fraction /= n;
    stats.grad_norm /= n;
    work.check_finite().map_err(|e| Error::TrainingHalted(e.to_string()))?;
    *ac = work;
    *adam = opt;
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn surrogate_clip_arithmetic() {
        assert_eq!(clipped_surrogate(2.0, 1.0, 0.2), 1.2);
        assert_eq!(surrogate_grad_logp(2.0, 1.0, 0.2), 0.0);
        assert_eq!(clipped_surrogate(0.5, -1.0, 0.2), -0.8);
        assert_eq!(surrogate_grad_logp(1.1, -2.0, 0.2), 1.1 * -2.0);
    }

    #[test]
    fn grad_norm_clipping() {
        let mut g = vec![3.0, 4.0];
        assert_eq!(clip_grad_norm(&mut g, 1.0), 5.0);
        assert!((g[0] - 0.6).abs() < 1e-15 && (g[1] - 0.8).abs() < 1e-15);
    }
}
