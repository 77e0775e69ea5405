//! Gait clock, swing/stance masks and the periodic joint reference.
//!
//! Phase convention: the left foot swings on `[0, 0.5)` and the right foot on
//! `[0.5, 1)`.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::robot::{joint, NUM_JOINTS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaitParams {
    /// Hip pitch swing amplitude at full command ratio, rad.
    pub amplitude: f64,
    /// Shoulder swing as a fraction of the hip swing.
    pub arm_gain: f64,
    /// Width of the smooth 0/1 ramps of the swing mask, in phase units.
    pub ramp_width: f64,
}

impl Default for GaitParams {
    fn default() -> Self {
        Self { amplitude: 0.26, arm_gain: 0.9, ramp_width: 0.1 }
    }
}

impl GaitParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude >= 0.0) || !(self.arm_gain >= 0.0) {
            return Err(Error::InvalidConfig("gait amplitude and arm gain must be non-negative".into()));
        }
        if !(self.ramp_width >= 0.0 && self.ramp_width <= 0.25) {
            return Err(Error::InvalidConfig("gait ramp width must lie in [0, 0.25]".into()));
        }
        Ok(())
    }
}

fn check_cycle(cycle_time: f64) -> Result<()> {
    if !(cycle_time > 0.0) || !cycle_time.is_finite() {
        return Err(Error::InvalidInput(format!("cycle time must be positive, got {cycle_time}")));
    }
    Ok(())
}

/// `(sin, cos)` of `2 pi time / cycle_time`.
pub fn gait_clock(time: f64, cycle_time: f64) -> Result<(f64, f64)> {
    check_cycle(cycle_time)?;
    Ok((TAU * time / cycle_time).sin_cos())
}

/// `(time mod cycle_time) / cycle_time`, in `[0, 1)`.
pub fn phase(time: f64, cycle_time: f64) -> Result<f64> {
    check_cycle(cycle_time)?;
    let p = time.rem_euclid(cycle_time) / cycle_time;
    Ok(if p >= 1.0 { 0.0 } else { p })
}

fn ramp(x: f64, width: f64) -> f64 {
    if width <= 0.0 {
        return 1.0;
    }
    if x >= width {
        1.0
    } else {
        0.5 * (1.0 - (std::f64::consts::PI * x / width).cos())
    }
}

/// Swing mask of one half-cycle window, `local` in `[0, 0.5)`.
fn half_window(local: f64, width: f64) -> f64 {
    ramp(local, width).min(ramp(0.5 - local, width))
}

/// Per-foot swing mask, left first.
pub fn swing_mask(phase: f64, ramp_width: f64) -> [f64; 2] {
    let p = phase.rem_euclid(1.0);
    if p < 0.5 {
        [half_window(p, ramp_width), 0.0]
    } else {
        [0.0, half_window(p - 0.5, ramp_width)]
    }
}

/// `1 - swing_mask`.
pub fn stance_mask(phase: f64, ramp_width: f64) -> [f64; 2] {
    let s = swing_mask(phase, ramp_width);
    [1.0 - s[0], 1.0 - s[1]]
}

/// Offsets from the default pose and their time derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaitReference {
    pub offsets: [f64; NUM_JOINTS],
    pub rates: [f64; NUM_JOINTS],
}

/// Periodic reference for a command ratio in `[0, 1]`. With `arms` false the
/// shoulders stay at their defaults.
pub fn reference(phase: f64, ratio: f64, cycle_time: f64, params: &GaitParams, arms: bool) -> Result<GaitReference> {
    check_cycle(cycle_time)?;
    let a = params.amplitude * ratio.clamp(0.0, 1.0);
    let (s, c) = (TAU * phase).sin_cos();
    let omega = TAU / cycle_time;
    let (l, dl) = if s > 0.0 { (s, c * omega) } else { (0.0, 0.0) };
    let (r, dr) = if s < 0.0 { (-s, -c * omega) } else { (0.0, 0.0) };

    let mut offsets = [0.0; NUM_JOINTS];
    let mut rates = [0.0; NUM_JOINTS];
    let legs = [
        (joint::LEFT_HIP_PITCH, joint::LEFT_KNEE, joint::LEFT_ANKLE_PITCH, l, dl),
        (joint::RIGHT_HIP_PITCH, joint::RIGHT_KNEE, joint::RIGHT_ANKLE_PITCH, r, dr),
    ];
    for (hip, knee, ankle, x, dx) in legs {
        offsets[hip] = -a * x;
        offsets[knee] = 2.0 * a * x;
        offsets[ankle] = -a * x;
        rates[hip] = -a * dx;
        rates[knee] = 2.0 * a * dx;
        rates[ankle] = -a * dx;
    }
    if arms {
        let g = params.arm_gain * a;
        offsets[joint::LEFT_SHOULDER_PITCH] = g * (l - r);
        offsets[joint::RIGHT_SHOULDER_PITCH] = g * (r - l);
        rates[joint::LEFT_SHOULDER_PITCH] = g * (dl - dr);
        rates[joint::RIGHT_SHOULDER_PITCH] = g * (dr - dl);
    }
    Ok(GaitReference { offsets, rates })
}

/// Absolute joint targets: `defaults + offsets`.
pub fn reference_joint_targets(
    phase: f64,
    ratio: f64,
    cycle_time: f64,
    defaults: &[f64],
    params: &GaitParams,
) -> Result<Vec<f64>> {
    crate::error::ensure_len("default joint positions", NUM_JOINTS, defaults.len())?;
    let r = reference(phase, ratio, cycle_time, params, true)?;
    Ok(defaults.iter().zip(r.offsets).map(|(d, o)| d + o).collect())
}
