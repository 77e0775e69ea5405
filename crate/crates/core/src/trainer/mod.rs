//! PPO trainer with an asymmetric actor-critic, running observation
//! normalization, a reward-gated curriculum and periodic checkpoints.

pub mod checkpoint;
pub mod gae;
pub mod metrics;
pub mod nn;
pub mod normalizer;
pub mod policy;
pub mod ppo;
pub mod rollout;

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, PolicyShape};
pub use gae::{compute_gae, normalize_advantages};
pub use metrics::{read_metrics, MetricsRow, MetricsWriter};
pub use normalizer::RunningNorm;
pub use policy::{ActorCritic, PolicyLayout};
pub use ppo::{ppo_update, Adam, UpdateBatch, UpdateStats};
pub use rollout::{collect_rollouts, derive_seed, EnvSlot, RolloutBatch, RolloutStats};

use crate::curriculum::CurriculumState;
use crate::env::{EnvDims, Environment};
use crate::error::{Error, Result};

/// Seed streams derived from the run seed.
pub mod stream {
    pub const POLICY_INIT: u64 = 0;
    pub const ENV: u64 = 1;
    pub const ACTION: u64 = 2;
    pub const UPDATE: u64 = 3;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainerConfig {
    pub num_envs: usize,
    /// Control steps collected per env per iteration.
    pub horizon: usize,
    pub minibatch_size: usize,
    pub epochs: usize,
    pub discount: f64,
    pub gae_lambda: f64,
    pub entropy_coeff: f64,
    pub value_coeff: f64,
    pub learning_rate: f64,
    pub clip_ratio: f64,
    pub max_grad_norm: f64,
    pub max_iterations: u64,
    /// Stop once this many env steps have been collected; 0 disables the limit.
    pub max_env_steps: u64,
    pub seed: u64,
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub init_log_std: f64,
    pub min_log_std: f64,
    pub normalize_advantages: bool,
    pub normalize_observations: bool,
    /// Save a checkpoint every this many iterations (and after the last one).
    pub checkpoint_interval: u64,
    /// Completed episodes averaged per curriculum gate evaluation.
    pub curriculum_window: usize,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            num_envs: 64,
            horizon: 60,
            minibatch_size: 960,
            epochs: 5,
            discount: 0.994,
            gae_lambda: 0.9,
            entropy_coeff: 0.001,
            value_coeff: 1.0,
            learning_rate: 1e-5,
            clip_ratio: 0.2,
            max_grad_norm: 1.0,
            max_iterations: 1000,
            max_env_steps: 0,
            seed: 0,
            actor_hidden: vec![512, 256, 128],
            critic_hidden: vec![512, 256, 128],
            init_log_std: 0.0,
            min_log_std: 0.05f64.ln(),
            normalize_advantages: true,
            normalize_observations: true,
            checkpoint_interval: 100,
            curriculum_window: 64,
        }
    }
}

impl TrainerConfig {
    pub fn batch_size(&self) -> usize {
        self.num_envs * self.horizon
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.num_envs == 0 || self.horizon == 0 || self.epochs == 0 {
            return bad("num_envs, horizon and epochs must be positive".into());
        }
        if self.minibatch_size == 0 || self.batch_size() % self.minibatch_size != 0 {
            return bad(format!(
                "minibatch_size {} must divide the batch of {} x {} = {}",
                self.minibatch_size,
                self.num_envs,
                self.horizon,
                self.batch_size()
            ));
        }
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return bad(format!("discount must be in (0, 1), got {}", self.discount));
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad(format!("gae_lambda must be in [0, 1], got {}", self.gae_lambda));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(self.clip_ratio > 0.0 && self.clip_ratio < 1.0) {
            return bad(format!("clip_ratio must be in (0, 1), got {}", self.clip_ratio));
        }
        for (name, v) in [
            ("entropy_coeff", self.entropy_coeff),
            ("value_coeff", self.value_coeff),
            ("max_grad_norm", self.max_grad_norm),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        if !self.init_log_std.is_finite() || !self.min_log_std.is_finite() || self.init_log_std < self.min_log_std {
            return bad("init_log_std must be finite and at least min_log_std".into());
        }
        if self.actor_hidden.contains(&0) || self.critic_hidden.contains(&0) {
            return bad("hidden layer widths must be positive".into());
        }
        if self.checkpoint_interval == 0 || self.curriculum_window == 0 {
            return bad("checkpoint_interval and curriculum_window must be positive".into());
        }
        Ok(())
    }
}

/// Where a finished run left its artifacts.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub iterations: u64,
    pub env_steps: u64,
    pub curriculum: CurriculumState,
    pub metrics_path: PathBuf,
    pub checkpoints: Vec<PathBuf>,
}

pub struct Trainer<E> {
    pub config: TrainerConfig,
    pub policy: ActorCritic,
    pub adam: Adam,
    pub obs_norm: Option<RunningNorm>,
    pub priv_norm: Option<RunningNorm>,
    pub curriculum: CurriculumState,
    pub iteration: u64,
    pub env_steps: u64,
    slots: Vec<EnvSlot<E>>,
    update_rng: ChaCha8Rng,
    tracking_max: f64,
    gate_buffer: Vec<f64>,
    dims: EnvDims,
}

impl<E: Environment> Trainer<E> {
    /// `make_env(index, seed)` builds env slot `index` with its derived seed.
    /// `tracking_max` is the supremum of the tracking reward used by the gate.
    pub fn new(
        config: TrainerConfig,
        curriculum: CurriculumState,
        tracking_max: f64,
        mut make_env: impl FnMut(usize, u64) -> Result<E>,
    ) -> Result<Self> {
        config.validate()?;
        curriculum.validate()?;
        if !(tracking_max > 0.0 && tracking_max.is_finite()) {
            return Err(Error::InvalidConfig(format!("tracking_max must be positive, got {tracking_max}")));
        }
        let seed = config.seed;
        let mut slots = Vec::with_capacity(config.num_envs);
        for i in 0..config.num_envs {
            let env = make_env(i, derive_seed(seed, stream::ENV, i as u64))?;
            slots.push(EnvSlot::new(env, derive_seed(seed, stream::ACTION, i as u64), &curriculum));
        }
        let dims = slots[0].env.dims();
        if slots.iter().any(|s| s.env.dims() != dims) {
            return Err(Error::InvalidConfig("all envs must share observation and action dims".into()));
        }
        let layout = PolicyLayout::new(dims.observation, dims.privileged, dims.action, &config.actor_hidden, &config.critic_hidden);
        let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, stream::POLICY_INIT, 0));
        let policy = ActorCritic::new(layout, config.init_log_std, &mut init_rng);
        let adam = Adam::new(policy.params.len());
        let (obs_norm, priv_norm) = if config.normalize_observations {
            (Some(RunningNorm::new(dims.observation)), Some(RunningNorm::new(dims.privileged)))
        } else {
            (None, None)
        };
        Ok(Self {
            update_rng: ChaCha8Rng::seed_from_u64(derive_seed(seed, stream::UPDATE, 0)),
            config,
            policy,
            adam,
            obs_norm,
            priv_norm,
            curriculum,
            iteration: 0,
            env_steps: 0,
            slots,
            tracking_max,
            gate_buffer: Vec::new(),
            dims,
        })
    }

    pub fn dims(&self) -> EnvDims {
        self.dims
    }

    pub fn envs(&self) -> impl Iterator<Item = &E> {
        self.slots.iter().map(|s| &s.env)
    }

    pub fn shape(&self) -> PolicyShape {
        PolicyShape {
            obs_dim: self.dims.observation,
            privileged_dim: self.dims.privileged,
            action_dim: self.dims.action,
            actor_hidden: self.config.actor_hidden.clone(),
            critic_hidden: self.config.critic_hidden.clone(),
        }
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            shape: self.shape(),
            policy: self.policy.clone(),
            obs_norm: self.obs_norm.clone(),
            priv_norm: self.priv_norm.clone(),
            curriculum: self.curriculum.clone(),
            config: self.config.clone(),
            iteration: self.iteration,
            env_steps: self.env_steps,
        }
    }

    /// One collect, GAE, update and gate pass. On error the policy, optimizer
    /// and curriculum are unchanged.
    pub fn iterate(&mut self) -> Result<MetricsRow> {
        let cfg = &self.config;
        let (batch, stats) = collect_rollouts(
            &mut self.slots,
            &self.policy,
            self.obs_norm.as_mut(),
            self.priv_norm.as_mut(),
            &self.curriculum,
            cfg.horizon,
            cfg.discount,
        )?;
        if let Some(i) = batch.rewards.iter().position(|r| !r.is_finite()) {
            return Err(Error::TrainingHalted(format!("non-finite reward at batch row {i}")));
        }
        let (mut adv, returns) = compute_gae(
            &batch.rewards,
            &batch.values,
            &batch.dones,
            &batch.last_values,
            batch.num_envs,
            cfg.discount,
            cfg.gae_lambda,
        )?;
        if cfg.normalize_advantages {
            normalize_advantages(&mut adv, &batch.valid);
        }
        let n = batch.len() as u64;
        let update = batch.into_update_batch(adv, returns);
        let up = ppo_update(&mut self.policy, &mut self.adam, &update, cfg, &mut self.update_rng)?;

        self.iteration += 1;
        self.env_steps += n;
        self.gate_buffer.extend_from_slice(&stats.episode_tracking);
        let mut gate_value = None;
        let mut gate_met = false;
        if self.gate_buffer.len() >= cfg.curriculum_window {
            let value = self.gate_buffer.iter().sum::<f64>() / self.gate_buffer.len() as f64;
            let (next, outcome) = self.curriculum.apply_gate(value, self.tracking_max)?;
            if outcome.met {
                log::info!(
                    "iteration {}: gate met ({value:.4} >= {:.4}); v_max {} -> {}, cycle {} -> {}",
                    self.iteration,
                    outcome.threshold,
                    self.curriculum.v_max,
                    next.v_max,
                    self.curriculum.cycle_time,
                    next.cycle_time
                );
            }
            self.curriculum = next;
            self.gate_buffer.clear();
            gate_value = Some(value);
            gate_met = outcome.met;
        }

        Ok(MetricsRow {
            iteration: self.iteration,
            env_steps: self.env_steps,
            mean_reward: stats.mean_reward,
            mean_tracking: stats.mean_tracking,
            episodes: stats.episodes as u64,
            falls: stats.falls as u64,
            timeouts: stats.timeouts as u64,
            faults: stats.faults as u64,
            gate_value,
            gate_met,
            v_max: self.curriculum.v_max,
            cycle_time: self.curriculum.cycle_time,
            policy_loss: up.policy_loss,
            value_loss: up.value_loss,
            entropy: up.entropy,
            approx_kl: up.approx_kl,
            clip_fraction: up.clip_fraction,
            grad_norm: up.grad_norm,
            ratio_deviation: up.fresh_max_ratio_deviation,
            mean_abs_yaw_momentum: stats.mean_abs_yaw_momentum,
            terms: stats.term_means,
        })
    }

    fn done(&self) -> bool {
        self.iteration >= self.config.max_iterations
            || (self.config.max_env_steps > 0 && self.env_steps >= self.config.max_env_steps)
    }

    /// Trains until the iteration or step budget is spent, writing
    /// `metrics.csv` and `checkpoints/iter_NNNNNN.safetensors` under `out_dir`.
    ///
    /// If training halts on a non-finite value, the last good state is saved
    /// as `checkpoints/halted.safetensors` and the error is returned.
    pub fn run(&mut self, out_dir: &Path) -> Result<TrainOutcome> {
        let ck_dir = out_dir.join("checkpoints");
        let metrics_path = out_dir.join("metrics.csv");
        let mut metrics = MetricsWriter::create(&metrics_path)?;
        let mut checkpoints = Vec::new();
        let save = |t: &Self, name: String| -> Result<PathBuf> {
            let p = ck_dir.join(name);
            save_checkpoint(&t.checkpoint(), &p)?;
            Ok(p)
        };
        checkpoints.push(save(self, format!("iter_{:06}.safetensors", self.iteration))?);
        while !self.done() {
            let row = match self.iterate() {
                Ok(row) => row,
                Err(e @ (Error::TrainingHalted(_) | Error::NonFinite(_))) => {
                    let p = save(self, "halted.safetensors".into())?;
                    log::error!("training halted at iteration {}: {e}; last good state in {}", self.iteration, p.display());
                    return Err(e);
                }
                Err(e) => return Err(e),
            };
            metrics.append(&row)?;
            log::debug!(
                "iter {} steps {} reward {:.4} tracking {:.4} v_max {}",
                row.iteration,
                row.env_steps,
                row.mean_reward,
                row.mean_tracking,
                row.v_max
            );
            if self.iteration % self.config.checkpoint_interval == 0 || self.done() {
                checkpoints.push(save(self, format!("iter_{:06}.safetensors", self.iteration))?);
            }
        }
        Ok(TrainOutcome {
            iterations: self.iteration,
            env_steps: self.env_steps,
            curriculum: self.curriculum.clone(),
            metrics_path,
            checkpoints,
        })
    }
}

impl Checkpoint {
    /// Normalizes a raw actor observation the way the policy saw it in training.
    pub fn normalize_obs(&self, raw: &[f64]) -> Vec<f64> {
        match &self.obs_norm {
            Some(n) => n.normalize(raw),
            None => raw.to_vec(),
        }
    }

    /// Deterministic action for a raw observation.
    pub fn act_deterministic(&self, raw: &[f64]) -> Result<Vec<f64>> {
        self.policy.mean(&self.normalize_obs(raw))
    }
}
