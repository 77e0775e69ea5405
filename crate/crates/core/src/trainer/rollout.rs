//! Parallel rollout collection.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::normalizer::RunningNorm;
use super::policy::ActorCritic;
use super::ppo::UpdateBatch;
use crate::curriculum::CurriculumState;
use crate::env::{EnvDims, EnvStep, Environment, Termination};
use crate::error::{Error, Result};
use crate::rewards::TERM_NAMES;

/// Derives an independent seed for stream `index` of a run seeded with `seed`.
pub fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    // SplitMix64 finalizer over the packed inputs.
    let mut z = seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(stream.wrapping_mul(0xBF58_476D_1CE4_E5B9))
        .wrapping_add(index.wrapping_mul(0x94D0_49BB_1331_11EB))
        .wrapping_add(0x2545_F491_4F6C_DD1D);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One environment with its action-noise stream and episode bookkeeping.
pub struct EnvSlot<E> {
    pub env: E,
    pub rng: ChaCha8Rng,
    episode_tracking: f64,
    episode_steps: usize,
    /// Row (time index) in the current rollout where the running episode began.
    episode_start: usize,
}

impl<E: Environment> EnvSlot<E> {
    pub fn new(mut env: E, action_seed: u64, curriculum: &CurriculumState) -> Self {
        env.reset(curriculum);
        Self { env, rng: ChaCha8Rng::seed_from_u64(action_seed), episode_tracking: 0.0, episode_steps: 0, episode_start: 0 }
    }
}

/// Time-major `[horizon][num_envs]` transitions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RolloutBatch {
    pub horizon: usize,
    pub num_envs: usize,
    pub dims: Option<EnvDims>,
    /// Normalized observations as seen by the policy.
    pub obs: Vec<f64>,
    pub privileged: Vec<f64>,
    pub actions: Vec<f64>,
    pub log_probs: Vec<f64>,
    /// Rewards, including the `gamma V` bootstrap added on timeouts.
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    pub terminations: Vec<Termination>,
    pub valid: Vec<bool>,
    pub tracking: Vec<f64>,
    pub last_values: Vec<f64>,
}

impl RolloutBatch {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn into_update_batch(self, advantages: Vec<f64>, returns: Vec<f64>) -> UpdateBatch {
        let dims = self.dims.unwrap_or(EnvDims { observation: 0, privileged: 0, action: 0 });
        UpdateBatch {
            obs_dim: dims.observation,
            privileged_dim: dims.privileged,
            action_dim: dims.action,
            obs: self.obs,
            privileged: self.privileged,
            actions: self.actions,
            old_log_probs: self.log_probs,
            advantages,
            returns,
            valid: self.valid,
        }
    }
}

/// Aggregates of one collection pass.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RolloutStats {
    /// Mean tracking reward of every episode that ended during the pass.
    pub episode_tracking: Vec<f64>,
    pub episodes: usize,
    pub falls: usize,
    pub timeouts: usize,
    pub faults: usize,
    pub fault_messages: Vec<String>,
    pub mean_reward: f64,
    pub mean_tracking: f64,
    pub mean_abs_yaw_momentum: f64,
    /// Mean weighted contribution of each term, in [`TERM_NAMES`] order.
    pub term_means: Vec<f64>,
}

struct StepOut {
    obs: Vec<f64>,
    privileged: Vec<f64>,
    action: Vec<f64>,
    log_prob: f64,
    value: f64,
    step: EnvStep,
    bootstrap: f64,
}

fn normalize_rows(norm: Option<&mut RunningNorm>, rows: Vec<Vec<f64>>, update: bool) -> Result<Vec<Vec<f64>>> {
    match norm {
        Some(n) => {
            if update {
                n.update(&rows)?;
            }
            Ok(rows.iter().map(|r| n.normalize(r)).collect())
        }
        None => Ok(rows),
    }
}

/// Steps every environment `horizon` times with the stochastic policy.
///
/// Observation statistics are updated with each step's raw observations before
/// they are normalized, so stored observations are exactly what the policy saw.
#[allow(clippy::too_many_arguments)]
pub fn collect_rollouts<E: Environment>(
    slots: &mut [EnvSlot<E>],
    ac: &ActorCritic,
    mut obs_norm: Option<&mut RunningNorm>,
    mut priv_norm: Option<&mut RunningNorm>,
    curriculum: &CurriculumState,
    horizon: usize,
    gamma: f64,
) -> Result<(RolloutBatch, RolloutStats)> {
    if slots.is_empty() || horizon == 0 {
        return Err(Error::InvalidInput("rollout needs at least one env and horizon >= 1".into()));
    }
    let dims = slots[0].env.dims();
    let n_env = slots.len();
    let cap = horizon * n_env;
    let mut batch = RolloutBatch {
        horizon,
        num_envs: n_env,
        dims: Some(dims),
        obs: Vec::with_capacity(cap * dims.observation),
        privileged: Vec::with_capacity(cap * dims.privileged),
        actions: Vec::with_capacity(cap * dims.action),
        ..Default::default()
    };
    let mut stats = RolloutStats { term_means: vec![0.0; TERM_NAMES.len()], ..Default::default() };
    let mut term_count = 0usize;
    for s in slots.iter_mut() {
        s.episode_start = 0;
    }

    for t in 0..horizon {
        let raw_obs: Vec<Vec<f64>> = slots.iter().map(|s| s.env.observation()).collect();
        let raw_priv: Vec<Vec<f64>> = slots.iter().map(|s| s.env.privileged_observation()).collect();
        let obs = normalize_rows(obs_norm.as_deref_mut(), raw_obs, true)?;
        let privileged = normalize_rows(priv_norm.as_deref_mut(), raw_priv, true)?;
        let pn = priv_norm.as_deref();

        let outs: Vec<Result<StepOut>> = slots
            .par_iter_mut()
            .zip(obs.into_par_iter().zip(privileged.into_par_iter()))
            .map(|(slot, (o, p))| {
                let (action, log_prob) = ac.act(&o, Some(&mut slot.rng))?;
                let value = ac.value(&p)?;
                let step = slot.env.step(&action, curriculum);
                let mut bootstrap = 0.0;
                if step.termination == Termination::Timeout && step.fault.is_none() {
                    let raw = slot.env.privileged_observation();
                    let terminal = match pn {
                        Some(n) => n.normalize(&raw),
                        None => raw,
                    };
                    bootstrap = gamma * ac.value(&terminal)?;
                }
                if step.termination.is_done() {
                    slot.env.reset(curriculum);
                }
                Ok(StepOut { obs: o, privileged: p, action, log_prob, value, step, bootstrap })
            })
            .collect();

        for (n, out) in outs.into_iter().enumerate() {
            let out = out?;
            let slot = &mut slots[n];
            batch.obs.extend_from_slice(&out.obs);
            batch.privileged.extend_from_slice(&out.privileged);
            batch.actions.extend_from_slice(&out.action);
            batch.log_probs.push(out.log_prob);
            batch.values.push(out.value);
            batch.rewards.push(out.step.reward + out.bootstrap);
            let done = out.step.termination.is_done();
            batch.dones.push(done);
            batch.terminations.push(out.step.termination);
            batch.tracking.push(out.step.tracking_reward);
            batch.valid.push(out.step.fault.is_none());

            stats.mean_reward += out.step.reward;
            stats.mean_tracking += out.step.tracking_reward;
            stats.mean_abs_yaw_momentum += out.step.abs_yaw_momentum;
            if let Some(b) = &out.step.breakdown {
                for (acc, term) in stats.term_means.iter_mut().zip(&b.terms) {
                    *acc += term.weighted;
                }
                term_count += 1;
            }
            slot.episode_tracking += out.step.tracking_reward;
            slot.episode_steps += 1;

            if let Some(msg) = out.step.fault {
                // Drop the whole episode collected so far in this pass.
                for tt in slot.episode_start..=t {
                    batch.valid[tt * n_env + n] = false;
                }
                stats.faults += 1;
                log::warn!("env {n} faulted at step {t}: {msg}");
                stats.fault_messages.push(msg);
            } else if done {
                stats.episodes += 1;
                match out.step.termination {
                    Termination::Fell => stats.falls += 1,
                    Termination::Timeout => stats.timeouts += 1,
                    Termination::Running => {}
                }
                stats.episode_tracking.push(slot.episode_tracking / slot.episode_steps as f64);
            }
            if done {
                slot.episode_tracking = 0.0;
                slot.episode_steps = 0;
                slot.episode_start = t + 1;
            }
        }
    }

    let raw_priv: Vec<Vec<f64>> = slots.iter().map(|s| s.env.privileged_observation()).collect();
    let last = normalize_rows(priv_norm.as_deref_mut(), raw_priv, false)?;
    batch.last_values = last.iter().map(|p| ac.value(p)).collect::<Result<_>>()?;

    let n = batch.len() as f64;
    stats.mean_reward /= n;
    stats.mean_tracking /= n;
    stats.mean_abs_yaw_momentum /= n;
    if term_count > 0 {
        stats.term_means.iter_mut().for_each(|v| *v /= term_count as f64);
    }
    Ok((batch, stats))
}
