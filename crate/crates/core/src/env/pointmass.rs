//! A 1-D point mass that must track a forward velocity command. Small enough to
//! train in seconds, it exercises the same reward, curriculum and trainer paths
//! as the humanoid.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{EnvDims, EnvStep, Environment, Termination};
use crate::curriculum::{Command, CurriculumState};
use crate::error::{Error, Result};
use crate::rewards::reward_velocity_tracking;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PointMassConfig {
    pub dt: f64,
    pub episode_length_s: f64,
    /// Acceleration per unit action, m/s^2.
    pub accel_scale: f64,
    /// Linear drag coefficient, 1/s.
    pub drag: f64,
    pub action_clip: f64,
    pub sigma_tracking: f64,
    /// Half-width of the uniform initial-velocity draw, m/s.
    pub initial_velocity_noise: f64,
}

impl Default for PointMassConfig {
    fn default() -> Self {
        Self {
            dt: 0.02,
            episode_length_s: 5.0,
            accel_scale: 2.0,
            drag: 0.5,
            action_clip: 5.0,
            sigma_tracking: 4.0,
            initial_velocity_noise: 0.2,
        }
    }
}

impl PointMassConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0)
            || !(self.episode_length_s > self.dt)
            || !(self.accel_scale > 0.0)
            || !(self.drag >= 0.0)
            || !(self.action_clip > 0.0)
            || !(self.sigma_tracking > 0.0)
            || !(self.initial_velocity_noise >= 0.0)
        {
            return Err(Error::InvalidConfig("point mass: parameters out of range".into()));
        }
        Ok(())
    }
}

pub struct PointMassEnv {
    config: PointMassConfig,
    rng: ChaCha8Rng,
    velocity: f64,
    time: f64,
    command: Command,
    command_override: Option<Command>,
    last_action: f64,
}

impl PointMassEnv {
    pub const OBS_DIM: usize = 4;

    pub fn new(config: PointMassConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            rng: ChaCha8Rng::seed_from_u64(seed),
            velocity: 0.0,
            time: 0.0,
            command: Command::default(),
            command_override: None,
            last_action: 0.0,
        })
    }

    pub fn velocity(&self) -> f64 {
        self.velocity
    }
}

impl Environment for PointMassEnv {
    fn dims(&self) -> EnvDims {
        EnvDims { observation: Self::OBS_DIM, privileged: Self::OBS_DIM, action: 1 }
    }

    fn control_dt(&self) -> f64 {
        self.config.dt
    }

    fn reset(&mut self, curriculum: &CurriculumState) {
        self.time = 0.0;
        self.last_action = 0.0;
        self.command = self.command_override.unwrap_or_else(|| curriculum.sample_command(&mut self.rng));
        let n = self.config.initial_velocity_noise;
        self.velocity = if n > 0.0 { self.rng.gen_range(-n..=n) } else { 0.0 };
    }

    fn observation(&self) -> Vec<f64> {
        vec![self.command.v_x, self.velocity, self.command.v_x - self.velocity, self.last_action]
    }

    fn privileged_observation(&self) -> Vec<f64> {
        self.observation()
    }

    fn step(&mut self, action: &[f64], _curriculum: &CurriculumState) -> EnvStep {
        if action.len() != 1 {
            return EnvStep::faulted(format!("point mass expects 1 action, got {}", action.len()));
        }
        if !action[0].is_finite() {
            return EnvStep::faulted("non-finite action".into());
        }
        let c = &self.config;
        let a = action[0].clamp(-c.action_clip, c.action_clip);
        self.velocity += (c.accel_scale * a - c.drag * self.velocity) * c.dt;
        self.time += c.dt;
        self.last_action = a;
        let cmd = self.command.as_array();
        let tracking = reward_velocity_tracking(&[self.velocity, 0.0, 0.0], &[cmd[0], 0.0, 0.0], c.sigma_tracking);
        let termination = if self.time >= c.episode_length_s - 1e-9 { Termination::Timeout } else { Termination::Running };
        EnvStep {
            reward: tracking * c.dt,
            tracking_reward: tracking,
            termination,
            fault: None,
            breakdown: None,
            abs_yaw_momentum: 0.0,
            forward_velocity: self.velocity,
        }
    }

    fn set_command_override(&mut self, command: Option<Command>) {
        self.command_override = command;
        if let Some(c) = command {
            self.command = c;
        }
    }

    fn command(&self) -> Command {
        self.command
    }
}
