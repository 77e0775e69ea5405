//! Reward-gated curricula over the forward-velocity command range and the gait
//! cycle time, plus command sampling.
//!
//! Both schedules advance on the same gate: the mean tracking reward of the last
//! evaluation window must reach `lambda * r_trk_max`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Constants and initial values of the curricula.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurriculumConfig {
    pub v_min: f64,
    pub v_max_initial: f64,
    pub v_cap: f64,
    pub v_increment: f64,
    pub cycle_time_initial: f64,
    pub cycle_shrink: f64,
    pub cycle_floor: f64,
    pub lambda_threshold: f64,
    /// Half-width of the lateral velocity command range, m/s.
    pub lateral_range: f64,
    /// Half-width of the yaw-rate command range, rad/s.
    pub yaw_rate_range: f64,
    pub velocity_enabled: bool,
    pub cycle_enabled: bool,
}

impl Default for CurriculumConfig {
    fn default() -> Self {
        Self {
            v_min: 0.0,
            v_max_initial: 1.0,
            v_cap: 3.5,
            v_increment: 0.5,
            cycle_time_initial: 0.64,
            cycle_shrink: 0.95,
            cycle_floor: 0.48,
            lambda_threshold: 0.8,
            lateral_range: 0.3,
            yaw_rate_range: 0.3,
            velocity_enabled: true,
            cycle_enabled: true,
        }
    }
}

/// Live curriculum state. Owned by the training loop and updated once per iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurriculumState {
    pub v_min: f64,
    pub v_max: f64,
    pub v_cap: f64,
    pub v_increment: f64,
    pub cycle_time: f64,
    pub cycle_shrink: f64,
    pub cycle_floor: f64,
    pub lambda_threshold: f64,
    pub lateral_range: f64,
    pub yaw_rate_range: f64,
    pub velocity_enabled: bool,
    pub cycle_enabled: bool,
}

/// Velocity command `(v_x, v_y, yaw_rate)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Command {
    pub v_x: f64,
    pub v_y: f64,
    pub yaw_rate: f64,
}

impl Command {
    pub fn forward(v_x: f64) -> Self {
        Self { v_x, v_y: 0.0, yaw_rate: 0.0 }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.v_x, self.v_y, self.yaw_rate]
    }
}

/// Result of one gate evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateOutcome {
    pub tracking_reward: f64,
    pub threshold: f64,
    pub met: bool,
}

/// `r_trk >= lambda * r_trk_max`.
pub fn threshold_met(r_trk: f64, r_trk_max: f64, lambda: f64) -> Result<bool> {
    if !(r_trk_max > 0.0) {
        return Err(Error::InvalidInput(format!(
            "maximum tracking reward must be positive, got {r_trk_max}"
        )));
    }
    Ok(r_trk >= lambda * r_trk_max)
}

impl CurriculumState {
    pub fn from_config(config: &CurriculumConfig) -> Result<Self> {
        let state = Self {
            v_min: config.v_min,
            v_max: config.v_max_initial,
            v_cap: config.v_cap,
            v_increment: config.v_increment,
            cycle_time: config.cycle_time_initial,
            cycle_shrink: config.cycle_shrink,
            cycle_floor: config.cycle_floor,
            lambda_threshold: config.lambda_threshold,
            lateral_range: config.lateral_range,
            yaw_rate_range: config.yaw_rate_range,
            velocity_enabled: config.velocity_enabled,
            cycle_enabled: config.cycle_enabled,
        };
        state.validate()?;
        Ok(state)
    }

    pub fn validate(&self) -> Result<()> {
        let values = [
            self.v_min,
            self.v_max,
            self.v_cap,
            self.v_increment,
            self.cycle_time,
            self.cycle_shrink,
            self.cycle_floor,
            self.lambda_threshold,
            self.lateral_range,
            self.yaw_rate_range,
        ];
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("curriculum values must be finite".into()));
        }
        if !(self.v_min <= self.v_max && self.v_max <= self.v_cap) {
            return Err(Error::InvalidConfig(format!(
                "curriculum requires v_min <= v_max <= v_cap, got {} / {} / {}",
                self.v_min, self.v_max, self.v_cap
            )));
        }
        if !(self.v_max > 0.0) {
            return Err(Error::InvalidConfig("curriculum v_max must be positive".into()));
        }
        if !(self.cycle_floor > 0.0 && self.cycle_floor <= self.cycle_time) {
            return Err(Error::InvalidConfig(format!(
                "curriculum requires 0 < cycle_floor <= cycle_time, got {} / {}",
                self.cycle_floor, self.cycle_time
            )));
        }
        if !(self.lambda_threshold > 0.0 && self.lambda_threshold <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "lambda threshold must be in (0, 1], got {}",
                self.lambda_threshold
            )));
        }
        if !(self.cycle_shrink > 0.0 && self.cycle_shrink <= 1.0) || self.v_increment < 0.0 {
            return Err(Error::InvalidConfig(
                "cycle shrink must be in (0, 1] and the velocity increment non-negative".into(),
            ));
        }
        if self.lateral_range < 0.0 || self.yaw_rate_range < 0.0 {
            return Err(Error::InvalidConfig("command ranges must be non-negative".into()));
        }
        Ok(())
    }

    /// Widens the forward range by one increment (capped) when the gate is met.
    pub fn update_velocity_range(&self, r_trk: f64, r_trk_max: f64) -> Result<Self> {
        let mut next = self.clone();
        if threshold_met(r_trk, r_trk_max, self.lambda_threshold)? {
            next.v_max = (self.v_max + self.v_increment).min(self.v_cap);
        }
        Ok(next)
    }

    /// Shrinks the cycle time (floored) when the gate is met.
    pub fn update_cycle_time(&self, r_trk: f64, r_trk_max: f64) -> Result<Self> {
        let mut next = self.clone();
        if threshold_met(r_trk, r_trk_max, self.lambda_threshold)? {
            next.cycle_time = (self.cycle_time * self.cycle_shrink).max(self.cycle_floor);
        }
        Ok(next)
    }

    /// Evaluates the gate once and applies every enabled rule on the same outcome.
    pub fn apply_gate(&self, r_trk: f64, r_trk_max: f64) -> Result<(Self, GateOutcome)> {
        let met = threshold_met(r_trk, r_trk_max, self.lambda_threshold)?;
        let mut next = self.clone();
        if met {
            if self.velocity_enabled {
                next.v_max = (self.v_max + self.v_increment).min(self.v_cap);
            }
            if self.cycle_enabled {
                next.cycle_time = (self.cycle_time * self.cycle_shrink).max(self.cycle_floor);
            }
        }
        Ok((
            next,
            GateOutcome {
                tracking_reward: r_trk,
                threshold: self.lambda_threshold * r_trk_max,
                met,
            },
        ))
    }

    /// Forward speed uniform on `[v_min, v_max]`, lateral and yaw uniform on the
    /// configured symmetric ranges.
    pub fn sample_command<R: Rng + ?Sized>(&self, rng: &mut R) -> Command {
        Command {
            v_x: uniform(rng, self.v_min, self.v_max),
            v_y: uniform(rng, -self.lateral_range, self.lateral_range),
            yaw_rate: uniform(rng, -self.yaw_rate_range, self.yaw_rate_range),
        }
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, low: f64, high: f64) -> f64 {
    // One draw per call regardless of width keeps streams aligned across configs.
    let u: f64 = rng.gen();
    low + (high - low) * u
}
