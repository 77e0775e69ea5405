//! Simulated environments: the reduced 16-joint humanoid and a 1-D point mass,
//! behind the [`Environment`] trait consumed by the trainer.

pub mod contact;
pub mod gait;
pub mod humanoid;
pub mod model;
pub mod observation;
pub mod pointmass;
pub mod randomization;
pub mod robot;
pub mod spatial;

use serde::{Deserialize, Serialize};

use crate::curriculum::{Command, CurriculumState};
use crate::rewards::RewardBreakdown;

pub use humanoid::{EnvConfig, HumanoidEnv, SimState, StepInfo};
pub use observation::{ACTION_DIM, OBS_DIM, OBS_FRAME, PRIV_DIM, PRIV_FRAME};
pub use pointmass::{PointMassConfig, PointMassEnv};
pub use randomization::{DomainRandomizationConfig, EpisodeParams};
pub use robot::RobotSpec;

/// Flat input/output sizes of an environment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvDims {
    pub observation: usize,
    pub privileged: usize,
    pub action: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Running,
    Fell,
    Timeout,
}

impl Termination {
    pub fn is_done(self) -> bool {
        self != Termination::Running
    }
}

/// Result of one control step.
#[derive(Debug, Clone)]
pub struct EnvStep {
    /// Composed reward already scaled by the control period.
    pub reward: f64,
    /// Unscaled linear velocity tracking reward, the curriculum gate signal.
    pub tracking_reward: f64,
    pub termination: Termination,
    /// Set when the step could not be simulated (e.g. non-finite action).
    pub fault: Option<String>,
    pub breakdown: Option<RewardBreakdown>,
    pub abs_yaw_momentum: f64,
    pub forward_velocity: f64,
}

impl EnvStep {
    pub(crate) fn faulted(message: String) -> Self {
        Self {
            reward: 0.0,
            tracking_reward: 0.0,
            termination: Termination::Fell,
            fault: Some(message),
            breakdown: None,
            abs_yaw_momentum: 0.0,
            forward_velocity: 0.0,
        }
    }
}

/// A resettable control task with an asymmetric (actor/critic) observation split.
///
/// Each instance owns its random stream, so stepping is deterministic given the
/// construction seed and the action sequence.
pub trait Environment: Send {
    fn dims(&self) -> EnvDims;
    fn control_dt(&self) -> f64;
    fn reset(&mut self, curriculum: &CurriculumState);
    fn observation(&self) -> Vec<f64>;
    fn privileged_observation(&self) -> Vec<f64>;
    fn step(&mut self, action: &[f64], curriculum: &CurriculumState) -> EnvStep;
    /// Pins the command (evaluation); `None` returns to curriculum sampling.
    fn set_command_override(&mut self, command: Option<Command>);
    fn command(&self) -> Command;
}
