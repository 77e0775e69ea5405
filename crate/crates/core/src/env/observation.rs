//! Observation frames and frame stacking.

use std::collections::VecDeque;
use std::ops::Range;

use super::robot::NUM_JOINTS;
use crate::error::{ensure_len, Result};

pub const ACTION_DIM: usize = NUM_JOINTS;
pub const OBS_FRAME: usize = 59;
pub const PRIV_FRAME: usize = 89;
pub const OBS_STACK: usize = 15;
pub const PRIV_STACK: usize = 3;
pub const OBS_DIM: usize = OBS_FRAME * OBS_STACK;
pub const PRIV_DIM: usize = PRIV_FRAME * PRIV_STACK;

/// Slot layout of one actor frame.
pub mod slot {
    use std::ops::Range;

    pub const CLOCK: Range<usize> = 0..2;
    pub const COMMAND: Range<usize> = 2..5;
    pub const JOINT_POS: Range<usize> = 5..21;
    pub const JOINT_VEL: Range<usize> = 21..37;
    pub const ANG_VEL: Range<usize> = 37..40;
    pub const EULER: Range<usize> = 40..43;
    pub const LAST_ACTION: Range<usize> = 43..59;

    // Privileged extras follow the clean actor frame.
    pub const FRICTION: usize = 59;
    pub const MASS_SCALE: usize = 60;
    pub const LIN_VEL: Range<usize> = 61..64;
    pub const PUSH_FORCE: Range<usize> = 64..66;
    pub const PUSH_TORQUE: Range<usize> = 66..69;
    pub const TRACKING_DIFF: Range<usize> = 69..85;
    pub const STANCE_MASK: Range<usize> = 85..87;
    pub const CONTACT: Range<usize> = 87..89;
}

/// Inputs of one actor frame.
#[derive(Debug, Clone)]
pub struct ProprioInputs<'a> {
    pub clock: (f64, f64),
    pub command: [f64; 3],
    pub joint_positions: &'a [f64],
    pub joint_velocities: &'a [f64],
    pub angular_velocity: [f64; 3],
    pub euler: [f64; 3],
    pub last_action: &'a [f64],
}

/// Privileged-only inputs.
#[derive(Debug, Clone)]
pub struct PrivilegedInputs<'a> {
    pub friction: f64,
    pub mass_scale: f64,
    pub linear_velocity: [f64; 3],
    pub push_force: [f64; 2],
    pub push_torque: [f64; 3],
    pub tracking_difference: &'a [f64],
    pub stance_mask: [f64; 2],
    pub contact: [f64; 2],
}

fn put(frame: &mut [f64], range: Range<usize>, values: &[f64]) {
    frame[range].copy_from_slice(values);
}

pub fn actor_frame(inputs: &ProprioInputs<'_>) -> Result<Vec<f64>> {
    ensure_len("joint positions", NUM_JOINTS, inputs.joint_positions.len())?;
    ensure_len("joint velocities", NUM_JOINTS, inputs.joint_velocities.len())?;
    ensure_len("last action", ACTION_DIM, inputs.last_action.len())?;
    let mut f = vec![0.0; OBS_FRAME];
    put(&mut f, slot::CLOCK, &[inputs.clock.0, inputs.clock.1]);
    put(&mut f, slot::COMMAND, &inputs.command);
    put(&mut f, slot::JOINT_POS, inputs.joint_positions);
    put(&mut f, slot::JOINT_VEL, inputs.joint_velocities);
    put(&mut f, slot::ANG_VEL, &inputs.angular_velocity);
    put(&mut f, slot::EULER, &inputs.euler);
    put(&mut f, slot::LAST_ACTION, inputs.last_action);
    Ok(f)
}

/// The clean (noise-free) actor frame followed by the privileged extras.
pub fn privileged_frame(clean_actor: &[f64], inputs: &PrivilegedInputs<'_>) -> Result<Vec<f64>> {
    ensure_len("actor frame", OBS_FRAME, clean_actor.len())?;
    ensure_len("tracking difference", NUM_JOINTS, inputs.tracking_difference.len())?;
    let mut f = vec![0.0; PRIV_FRAME];
    f[..OBS_FRAME].copy_from_slice(clean_actor);
    f[slot::FRICTION] = inputs.friction;
    f[slot::MASS_SCALE] = inputs.mass_scale;
    put(&mut f, slot::LIN_VEL, &inputs.linear_velocity);
    put(&mut f, slot::PUSH_FORCE, &inputs.push_force);
    put(&mut f, slot::PUSH_TORQUE, &inputs.push_torque);
    put(&mut f, slot::TRACKING_DIFF, inputs.tracking_difference);
    put(&mut f, slot::STANCE_MASK, &inputs.stance_mask);
    put(&mut f, slot::CONTACT, &inputs.contact);
    Ok(f)
}

/// Fixed-depth history, newest frame first, zero-padded until full.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameStack {
    frame_len: usize,
    depth: usize,
    frames: VecDeque<Vec<f64>>,
}

impl FrameStack {
    pub fn new(frame_len: usize, depth: usize) -> Self {
        Self { frame_len, depth, frames: VecDeque::with_capacity(depth) }
    }

    pub fn frame_len(&self) -> usize {
        self.frame_len
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn clear(&mut self) {
        self.frames.clear();
    }

    pub fn push(&mut self, frame: Vec<f64>) -> Result<()> {
        ensure_len("frame", self.frame_len, frame.len())?;
        if self.frames.len() == self.depth {
            self.frames.pop_back();
        }
        self.frames.push_front(frame);
        Ok(())
    }

    /// Flattened stack of `frame_len * depth` values.
    pub fn stacked(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.frame_len * self.depth);
        for f in &self.frames {
            out.extend_from_slice(f);
        }
        out.resize(self.frame_len * self.depth, 0.0);
        out
    }
}
