//! Reward terms and their weighted composition.
//!
//! The step reward has three categories:
//!
//! ```text
//! total = alpha_a * r_a + alpha_v * r_v + alpha_c * r_c
//! r_v   = alpha_b * r_b + alpha_f * r_f + alpha_p * r_p
//! r_c   = sum_k w_k * g_k          (general terms, including velocity tracking)
//! ```
//!
//! `r_a` penalizes centroidal angular momentum, the `r_v` terms scale their targets
//! with the commanded speed relative to the curriculum's current maximum, and the
//! general terms follow the usual legged-locomotion conventions.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};
use crate::kinodyn::MomentumReport;

/// Which components of the momentum vector the momentum reward sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MomentumAxes {
    #[default]
    Full,
    YawOnly,
}

/// Form of the feet-clearance term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ClearanceMode {
    /// `sum mask * (h - target)`, signed and unbounded.
    #[default]
    Literal,
    /// `-sum mask * |h - target|`.
    Tolerance,
}

/// Weights of the general (third-category) reward terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneralWeights {
    pub lin_vel_tracking: f64,
    pub yaw_tracking: f64,
    pub orientation: f64,
    pub action_rate: f64,
    pub torque: f64,
    pub alive: f64,
}

impl Default for GeneralWeights {
    fn default() -> Self {
        Self {
            lin_vel_tracking: 1.2,
            yaw_tracking: 1.1,
            orientation: 1.0,
            action_rate: 0.01,
            torque: 0.1,
            alive: 0.2,
        }
    }
}

impl GeneralWeights {
    pub fn zero() -> Self {
        Self {
            lin_vel_tracking: 0.0,
            yaw_tracking: 0.0,
            orientation: 0.0,
            action_rate: 0.0,
            torque: 0.0,
            alive: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardWeights {
    /// Angular-momentum category weight.
    pub alpha_a: f64,
    /// Velocity-related category weight.
    pub alpha_v: f64,
    /// General category weight.
    pub alpha_c: f64,
    pub alpha_b: f64,
    pub alpha_f: f64,
    pub alpha_p: f64,
    pub general: GeneralWeights,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            alpha_a: 0.05,
            alpha_v: 0.1,
            alpha_c: 1.0,
            alpha_b: 0.2,
            alpha_f: 1.0,
            alpha_p: 1.6,
            general: GeneralWeights::default(),
        }
    }
}

impl RewardWeights {
    pub fn zero() -> Self {
        Self {
            alpha_a: 0.0,
            alpha_v: 0.0,
            alpha_c: 0.0,
            alpha_b: 0.0,
            alpha_f: 0.0,
            alpha_p: 0.0,
            general: GeneralWeights::zero(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.general;
        let all = [
            self.alpha_a,
            self.alpha_v,
            self.alpha_c,
            self.alpha_b,
            self.alpha_f,
            self.alpha_p,
            g.lin_vel_tracking,
            g.yaw_tracking,
            g.orientation,
            g.action_rate,
            g.torque,
            g.alive,
        ];
        if all.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidConfig("reward weights must be finite".into()));
        }
        Ok(())
    }
}

/// Shape constants of the individual reward terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardParams {
    pub momentum_clip_low: f64,
    pub momentum_clip_high: f64,
    pub momentum_axes: MomentumAxes,
    pub beta_b: f64,
    pub gamma_b: f64,
    /// Target base height fed into the base-height term; the nominal standing
    /// height of the robot when unset.
    pub target_base_height: Option<f64>,
    pub target_foot_height: f64,
    pub clearance_mode: ClearanceMode,
    pub beta_p: f64,
    pub gamma_p: f64,
    pub joint_clip_low: f64,
    pub joint_clip_high: f64,
    /// Elementwise bound on the joint-velocity exponent.
    pub joint_velocity_exponent_bound: f64,
    pub sigma_tracking: f64,
    pub sigma_yaw: f64,
    /// When false the command ratio is pinned to 1, i.e. fixed reward targets.
    pub velocity_scaling: bool,
}

impl Default for RewardParams {
    fn default() -> Self {
        Self {
            momentum_clip_low: -5.0,
            momentum_clip_high: 0.0,
            momentum_axes: MomentumAxes::Full,
            beta_b: 100.0,
            gamma_b: 0.05,
            target_base_height: None,
            target_foot_height: 0.06,
            clearance_mode: ClearanceMode::Literal,
            beta_p: -2.0,
            gamma_p: 0.2,
            joint_clip_low: 0.0,
            joint_clip_high: 0.5,
            joint_velocity_exponent_bound: 5.0,
            sigma_tracking: 4.0,
            sigma_yaw: 4.0,
            velocity_scaling: true,
        }
    }
}

impl RewardParams {
    pub fn validate(&self) -> Result<()> {
        if self.momentum_clip_low > self.momentum_clip_high {
            return Err(Error::InvalidConfig(format!(
                "momentum clip bounds out of order: {} > {}",
                self.momentum_clip_low, self.momentum_clip_high
            )));
        }
        if self.joint_clip_low > self.joint_clip_high {
            return Err(Error::InvalidConfig(format!(
                "joint clip bounds out of order: {} > {}",
                self.joint_clip_low, self.joint_clip_high
            )));
        }
        if !(self.beta_b > 0.0) {
            return Err(Error::InvalidConfig("beta_b must be positive".into()));
        }
        if !(self.sigma_tracking > 0.0) || !(self.sigma_yaw > 0.0) {
            return Err(Error::InvalidConfig("tracking sharpness must be positive".into()));
        }
        if !(self.joint_velocity_exponent_bound > 0.0) {
            return Err(Error::InvalidConfig(
                "joint velocity exponent bound must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Supremum of the linear tracking reward, used by the curriculum threshold.
    pub fn tracking_reward_max(&self) -> f64 {
        1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RewardConfig {
    pub weights: RewardWeights,
    pub params: RewardParams,
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        self.params.validate()
    }
}

/// Everything the reward terms read at one control step.
#[derive(Debug, Clone)]
pub struct RewardContext {
    pub momentum: MomentumReport,
    pub base_height: f64,
    pub nominal_base_height: f64,
    pub target_height_offset: f64,
    pub foot_heights: Vec<f64>,
    pub target_foot_height: f64,
    pub swing_mask: Vec<f64>,
    pub joint_positions: Vec<f64>,
    pub joint_targets: Vec<f64>,
    pub joint_velocities: Vec<f64>,
    /// `(v_x, v_y, yaw_rate)`.
    pub commanded_velocity: [f64; 3],
    /// Base `(v_x, v_y, yaw_rate)` in the heading frame.
    pub actual_base_velocity: [f64; 3],
    pub curriculum_v_max: f64,
    pub phase: f64,
    /// Base roll, pitch, yaw.
    pub base_euler: [f64; 3],
    pub actions: Vec<f64>,
    pub last_actions: Vec<f64>,
    pub torques: Vec<f64>,
    pub torque_limits: Vec<f64>,
    pub alive: bool,
}

/// Raw values of the general terms.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GeneralTerms {
    pub lin_vel_tracking: f64,
    pub yaw_tracking: f64,
    pub orientation: f64,
    pub action_rate: f64,
    pub torque: f64,
    pub alive: f64,
}

/// Unweighted values of every term.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RawTerms {
    pub angular_momentum: f64,
    pub base_height: f64,
    pub feet_clearance: f64,
    pub joint_position: f64,
    pub general: GeneralTerms,
}

/// One named term with its raw and weighted value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardTerm {
    pub name: String,
    pub raw: f64,
    pub weighted: f64,
}

/// Names of the breakdown terms in composition order.
pub const TERM_NAMES: [&str; 10] = [
    "angular_momentum",
    "base_height",
    "feet_clearance",
    "joint_position",
    "lin_vel_tracking",
    "yaw_tracking",
    "orientation",
    "action_rate",
    "torque",
    "alive",
];

/// Per-term record of one composed reward.
///
/// `total` is `angular + velocity + general`, in that order, using the stored
/// category values, and each category value is built from its terms in
/// [`TERM_NAMES`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub total: f64,
    /// `alpha_a * r_a`.
    pub angular: f64,
    /// `alpha_v * r_v`.
    pub velocity: f64,
    /// `alpha_c * r_c`.
    pub general: f64,
    /// Terms in [`TERM_NAMES`] order. Weighted values are the in-category
    /// contributions (`alpha_b * r_b`, `w_k * g_k`); the momentum term carries
    /// `alpha_a * r_a`.
    pub terms: Vec<RewardTerm>,
}

impl RewardBreakdown {
    pub fn term(&self, name: &str) -> Option<&RewardTerm> {
        self.terms.iter().find(|t| t.name == name)
    }
}

/// `v_cmd / v_max` clamped to `[0, 1]`.
pub fn velocity_ratio(v_cmd: f64, v_max: f64) -> Result<f64> {
    if !(v_max > 0.0) || !v_max.is_finite() {
        return Err(Error::InvalidInput(format!("v_max must be positive, got {v_max}")));
    }
    if !v_cmd.is_finite() {
        return Err(Error::InvalidInput("non-finite commanded velocity".into()));
    }
    Ok((v_cmd / v_max).clamp(0.0, 1.0))
}

/// The momentum vector seen by the reward.
pub fn selected_momentum_norm(momentum: &MomentumReport, axes: MomentumAxes) -> f64 {
    match axes {
        MomentumAxes::Full => momentum.total.norm(),
        MomentumAxes::YawOnly => momentum.total.z.abs(),
    }
}

/// `clip(-exp(|L|), c1, c2)` for a precomputed momentum norm.
pub fn angular_momentum_reward_from_norm(norm: f64, c1: f64, c2: f64) -> Result<f64> {
    if c1 > c2 {
        return Err(Error::InvalidConfig(format!("clip bounds out of order: {c1} > {c2}")));
    }
    if !norm.is_finite() {
        return Err(Error::InvalidInput("non-finite angular momentum".into()));
    }
    Ok((-norm.exp()).clamp(c1, c2))
}

pub fn reward_angular_momentum(
    momentum: &MomentumReport,
    axes: MomentumAxes,
    c1: f64,
    c2: f64,
) -> Result<f64> {
    angular_momentum_reward_from_norm(selected_momentum_norm(momentum, axes), c1, c2)
}

/// `exp(-beta_b * |h_b - gamma_b * h_b_hat * ratio|)` where `h_b` is the base-height
/// deviation from nominal standing height.
pub fn reward_base_height(
    h_b: f64,
    h_b_hat: f64,
    beta_b: f64,
    gamma_b: f64,
    ratio: f64,
) -> Result<f64> {
    if !(beta_b > 0.0) {
        return Err(Error::InvalidConfig("beta_b must be positive".into()));
    }
    let r = (-beta_b * (h_b - gamma_b * h_b_hat * ratio).abs()).exp();
    if !r.is_finite() {
        return Err(Error::InvalidInput("non-finite base-height input".into()));
    }
    Ok(r)
}

pub fn reward_feet_clearance(
    foot_heights: &[f64],
    target: f64,
    ratio: f64,
    swing_mask: &[f64],
    mode: ClearanceMode,
) -> Result<f64> {
    ensure_len("swing mask", foot_heights.len(), swing_mask.len())?;
    let goal = target * ratio;
    let r = foot_heights
        .iter()
        .zip(swing_mask)
        .map(|(&h, &m)| match mode {
            ClearanceMode::Literal => m * (h - goal),
            ClearanceMode::Tolerance => -m * (h - goal).abs(),
        })
        .sum::<f64>();
    if !r.is_finite() {
        return Err(Error::InvalidInput("non-finite foot height".into()));
    }
    Ok(r)
}

/// Norm of `(theta_hat - theta) * exp(-theta_dot)` with the exponent clamped to
/// `[-bound, bound]`.
pub fn weighted_joint_error(
    theta: &[f64],
    theta_hat: &[f64],
    theta_dot: &[f64],
    bound: f64,
) -> Result<f64> {
    ensure_len("joint targets", theta.len(), theta_hat.len())?;
    ensure_len("joint velocities", theta.len(), theta_dot.len())?;
    let sq: f64 = theta
        .iter()
        .zip(theta_hat)
        .zip(theta_dot)
        .map(|((&q, &q_hat), &qd)| {
            let e = (q_hat - q) * (-qd).clamp(-bound, bound).exp();
            e * e
        })
        .sum();
    Ok(sq.sqrt())
}

/// `exp(beta_p * e) - gamma_p * clip(e, c1, c2)` for a precomputed error norm `e`.
pub fn joint_position_reward_from_error(
    error: f64,
    beta_p: f64,
    gamma_p: f64,
    c1: f64,
    c2: f64,
) -> Result<f64> {
    if c1 > c2 {
        return Err(Error::InvalidConfig(format!("clip bounds out of order: {c1} > {c2}")));
    }
    let r = (beta_p * error).exp() - gamma_p * error.clamp(c1, c2);
    if !r.is_finite() {
        return Err(Error::InvalidInput("non-finite joint-position reward".into()));
    }
    Ok(r)
}

#[allow(clippy::too_many_arguments)]
pub fn reward_joint_position(
    theta: &[f64],
    theta_hat: &[f64],
    theta_dot: &[f64],
    beta_p: f64,
    gamma_p: f64,
    c1: f64,
    c2: f64,
    exponent_bound: f64,
) -> Result<f64> {
    let e = weighted_joint_error(theta, theta_hat, theta_dot, exponent_bound)?;
    joint_position_reward_from_error(e, beta_p, gamma_p, c1, c2)
}

/// `exp(-sigma * |v_xy - v_xy_cmd|^2)`; its supremum is 1.
pub fn reward_velocity_tracking(actual: &[f64; 3], commanded: &[f64; 3], sigma: f64) -> f64 {
    let dx = actual[0] - commanded[0];
    let dy = actual[1] - commanded[1];
    (-sigma * (dx * dx + dy * dy)).exp()
}

/// Raw general terms. All are bounded: tracking terms in `(0, 1]`, orientation in
/// `[-1, 0]`, torque in `[-1, 0]`, action rate by the action bound.
pub fn general_reward_bundle(ctx: &RewardContext, params: &RewardParams) -> Result<GeneralTerms> {
    ensure_len("last actions", ctx.actions.len(), ctx.last_actions.len())?;
    ensure_len("torque limits", ctx.torques.len(), ctx.torque_limits.len())?;

    let lin_vel_tracking =
        reward_velocity_tracking(&ctx.actual_base_velocity, &ctx.commanded_velocity, params.sigma_tracking);
    let yaw_err = ctx.actual_base_velocity[2] - ctx.commanded_velocity[2];
    let yaw_tracking = (-params.sigma_yaw * yaw_err * yaw_err).exp();

    let [roll, pitch, _] = ctx.base_euler;
    let orientation = -(roll * roll + pitch * pitch).min(1.0);

    let n = ctx.actions.len().max(1) as f64;
    let action_rate = -ctx
        .actions
        .iter()
        .zip(&ctx.last_actions)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n;

    let m = ctx.torques.len().max(1) as f64;
    let torque = -ctx
        .torques
        .iter()
        .zip(&ctx.torque_limits)
        .map(|(&t, &lim)| {
            let x = if lim > 0.0 { (t / lim).clamp(-1.0, 1.0) } else { 0.0 };
            x * x
        })
        .sum::<f64>()
        / m;

    let terms = GeneralTerms {
        lin_vel_tracking,
        yaw_tracking,
        orientation,
        action_rate,
        torque,
        alive: if ctx.alive { 1.0 } else { 0.0 },
    };
    let values = [
        terms.lin_vel_tracking,
        terms.yaw_tracking,
        terms.orientation,
        terms.action_rate,
        terms.torque,
        terms.alive,
    ];
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("general reward term".into()));
    }
    Ok(terms)
}

/// Computes every raw term from a context.
pub fn raw_terms(ctx: &RewardContext, params: &RewardParams) -> Result<RawTerms> {
    let ratio = if params.velocity_scaling {
        velocity_ratio(ctx.commanded_velocity[0], ctx.curriculum_v_max)?
    } else {
        if !(ctx.curriculum_v_max > 0.0) {
            return Err(Error::InvalidInput("curriculum v_max must be positive".into()));
        }
        1.0
    };
    let angular_momentum = reward_angular_momentum(
        &ctx.momentum,
        params.momentum_axes,
        params.momentum_clip_low,
        params.momentum_clip_high,
    )?;
    let base_height = reward_base_height(
        ctx.base_height - ctx.nominal_base_height,
        ctx.target_height_offset,
        params.beta_b,
        params.gamma_b,
        ratio,
    )?;
    let feet_clearance = reward_feet_clearance(
        &ctx.foot_heights,
        ctx.target_foot_height,
        ratio,
        &ctx.swing_mask,
        params.clearance_mode,
    )?;
    let joint_position = reward_joint_position(
        &ctx.joint_positions,
        &ctx.joint_targets,
        &ctx.joint_velocities,
        params.beta_p,
        params.gamma_p,
        params.joint_clip_low,
        params.joint_clip_high,
        params.joint_velocity_exponent_bound,
    )?;
    Ok(RawTerms {
        angular_momentum,
        base_height,
        feet_clearance,
        joint_position,
        general: general_reward_bundle(ctx, params)?,
    })
}

/// Weighted composition of already computed raw terms.
pub fn compose_raw(raw: &RawTerms, weights: &RewardWeights) -> RewardBreakdown {
    let g = &raw.general;
    let gw = &weights.general;

    let w_a = weights.alpha_a * raw.angular_momentum;
    let w_b = weights.alpha_b * raw.base_height;
    let w_f = weights.alpha_f * raw.feet_clearance;
    let w_p = weights.alpha_p * raw.joint_position;
    let velocity_sum = w_b + w_f + w_p;

    let general_terms = [
        ("lin_vel_tracking", g.lin_vel_tracking, gw.lin_vel_tracking),
        ("yaw_tracking", g.yaw_tracking, gw.yaw_tracking),
        ("orientation", g.orientation, gw.orientation),
        ("action_rate", g.action_rate, gw.action_rate),
        ("torque", g.torque, gw.torque),
        ("alive", g.alive, gw.alive),
    ];
    let mut general_sum = 0.0;
    let mut terms = Vec::with_capacity(TERM_NAMES.len());
    terms.push(RewardTerm { name: "angular_momentum".into(), raw: raw.angular_momentum, weighted: w_a });
    terms.push(RewardTerm { name: "base_height".into(), raw: raw.base_height, weighted: w_b });
    terms.push(RewardTerm { name: "feet_clearance".into(), raw: raw.feet_clearance, weighted: w_f });
    terms.push(RewardTerm { name: "joint_position".into(), raw: raw.joint_position, weighted: w_p });
    for (name, value, weight) in general_terms {
        let weighted = weight * value;
        general_sum += weighted;
        terms.push(RewardTerm { name: name.into(), raw: value, weighted });
    }

    let angular = w_a;
    let velocity = weights.alpha_v * velocity_sum;
    let general = weights.alpha_c * general_sum;
    RewardBreakdown {
        total: angular + velocity + general,
        angular,
        velocity,
        general,
        terms,
    }
}

/// Computes every term from the context and composes the step reward.
pub fn compose_total(ctx: &RewardContext, config: &RewardConfig) -> Result<RewardBreakdown> {
    let raw = raw_terms(ctx, &config.params)?;
    Ok(compose_raw(&raw, &config.weights))
}
