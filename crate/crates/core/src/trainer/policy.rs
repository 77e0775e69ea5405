//! Gaussian actor with state-independent log-std and a separate critic, both
//! stored in one flat parameter vector: actor, then log-std, then critic.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::nn::MlpLayout;
use crate::error::{ensure_len, Error, Result};

/// `0.5 * ln(2 pi)`.
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyLayout {
    pub actor: MlpLayout,
    pub log_std_offset: usize,
    pub action_dim: usize,
    pub critic: MlpLayout,
}

impl PolicyLayout {
    pub fn new(obs_dim: usize, privileged_dim: usize, action_dim: usize, actor_hidden: &[usize], critic_hidden: &[usize]) -> Self {
        let actor = MlpLayout::new(obs_dim, actor_hidden, action_dim, 0);
        let log_std_offset = actor.end();
        let critic = MlpLayout::new(privileged_dim, critic_hidden, 1, log_std_offset + action_dim);
        Self { actor, log_std_offset, action_dim, critic }
    }

    pub fn num_params(&self) -> usize {
        self.critic.end()
    }

    pub fn obs_dim(&self) -> usize {
        self.actor.input()
    }

    pub fn privileged_dim(&self) -> usize {
        self.critic.input()
    }

    pub fn log_std_range(&self) -> std::ops::Range<usize> {
        self.log_std_offset..self.log_std_offset + self.action_dim
    }
}

/// Log density of `action` under a diagonal Gaussian.
pub fn gaussian_log_prob(action: &[f64], mean: &[f64], log_std: &[f64]) -> f64 {
    action
        .iter()
        .zip(mean)
        .zip(log_std)
        .map(|((a, m), ls)| {
            let z = (a - m) / ls.exp();
            -0.5 * z * z - ls - HALF_LN_2PI
        })
        .sum()
}

/// Differential entropy of a diagonal Gaussian.
pub fn gaussian_entropy(log_std: &[f64]) -> f64 {
    log_std.iter().map(|ls| ls + 0.5 * (2.0 * PI * std::f64::consts::E).ln()).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActorCritic {
    pub layout: PolicyLayout,
    pub params: Vec<f64>,
}

impl ActorCritic {
    pub fn new<R: Rng + ?Sized>(layout: PolicyLayout, init_log_std: f64, rng: &mut R) -> Self {
        let mut params = vec![0.0; layout.num_params()];
        layout.actor.init(&mut params, rng, 1.0, 0.01);
        params[layout.log_std_range()].fill(init_log_std);
        layout.critic.init(&mut params, rng, 1.0, 1.0);
        Self { layout, params }
    }

    pub fn from_params(layout: PolicyLayout, params: Vec<f64>) -> Result<Self> {
        ensure_len("policy parameters", layout.num_params(), params.len())?;
        Ok(Self { layout, params })
    }

    pub fn log_std(&self) -> &[f64] {
        &self.params[self.layout.log_std_range()]
    }

    pub fn mean(&self, obs: &[f64]) -> Result<Vec<f64>> {
        ensure_len("observation", self.layout.obs_dim(), obs.len())?;
        Ok(self.layout.actor.forward(&self.params, obs))
    }

    pub fn value(&self, privileged: &[f64]) -> Result<f64> {
        ensure_len("privileged observation", self.layout.privileged_dim(), privileged.len())?;
        Ok(self.layout.critic.forward(&self.params, privileged)[0])
    }

    /// Samples an action, or returns the mean when `rng` is `None`, with its log-probability.
    pub fn act<R: Rng + ?Sized>(&self, obs: &[f64], rng: Option<&mut R>) -> Result<(Vec<f64>, f64)> {
        let mean = self.mean(obs)?;
        let log_std = self.log_std();
        let action = match rng {
            Some(rng) => mean
                .iter()
                .zip(log_std)
                .map(|(m, ls)| {
                    let z: f64 = StandardNormal.sample(rng);
                    m + ls.exp() * z
                })
                .collect(),
            None => mean.clone(),
        };
        let lp = gaussian_log_prob(&action, &mean, log_std);
        Ok((action, lp))
    }

    pub fn entropy(&self) -> f64 {
        gaussian_entropy(self.log_std())
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.params.iter().position(|p| !p.is_finite()) {
            None => Ok(()),
            Some(i) => Err(Error::NonFinite(format!("policy parameter {i} is not finite"))),
        }
    }
}
