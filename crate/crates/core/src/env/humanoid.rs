//! The reduced humanoid task: PD-controlled multibody on flat ground with a gait
//! clock, command sampling, pushes and the reward bundle.

use std::sync::Arc;

use nalgebra::{UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::contact::{compute_contacts, ContactParams, ContactState};
use super::gait::{self, GaitParams};
use super::model::{Accelerations, BaseState, Multibody};
use super::observation::{
    actor_frame, privileged_frame, slot, FrameStack, PrivilegedInputs, ProprioInputs, ACTION_DIM, OBS_FRAME,
    OBS_STACK, PRIV_FRAME, PRIV_STACK,
};
use super::randomization::{add_noise, sample_push, sample_push_interval, DomainRandomizationConfig, EpisodeParams, Push};
use super::robot::{joint, RobotSpec, NUM_JOINTS};
use super::spatial::{angular, linear, spatial};
use super::{EnvDims, EnvStep, Environment, Termination};
use crate::curriculum::{Command, CurriculumState};
use crate::error::{ensure_len, Error, Result};
use crate::kinodyn::{total_angular_momentum, BodySnapshot, MomentumReport};
use crate::rewards::{compose_total, velocity_ratio, RewardBreakdown, RewardConfig, RewardContext};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    pub sim_dt: f64,
    pub decimation: usize,
    pub action_scale: f64,
    /// Actions are clamped to `[-action_clip, action_clip]`.
    pub action_clip: f64,
    pub episode_length_s: f64,
    pub command_resample_s: f64,
    pub gravity: f64,
    /// Fall when base height drops below this fraction of the nominal height.
    pub fall_height_fraction: f64,
    /// Fall when |roll| or |pitch| exceeds this, rad.
    pub fall_tilt: f64,
    /// Minimum total normal force for a foot to count as in contact, N.
    pub contact_threshold: f64,
    pub contact: ContactParams,
    pub gait: GaitParams,
    pub randomization: DomainRandomizationConfig,
    /// Welds the shoulder and elbow joints at their defaults.
    pub lock_arms: bool,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            sim_dt: 0.001,
            decimation: 10,
            action_scale: 0.25,
            action_clip: 10.0,
            episode_length_s: 24.0,
            command_resample_s: 8.0,
            gravity: 9.81,
            fall_height_fraction: 0.4,
            fall_tilt: 1.0,
            contact_threshold: 1.0,
            contact: ContactParams::default(),
            gait: GaitParams::default(),
            randomization: DomainRandomizationConfig::default(),
            lock_arms: false,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("env: {m}")));
        if !(self.sim_dt > 0.0) || self.decimation == 0 {
            return bad("sim_dt must be positive and decimation at least 1");
        }
        if !(self.action_scale > 0.0) || !(self.action_clip > 0.0) {
            return bad("action_scale and action_clip must be positive");
        }
        if !(self.episode_length_s > 0.0) || !(self.command_resample_s > 0.0) {
            return bad("episode and command periods must be positive");
        }
        if !(self.gravity >= 0.0) || !(self.fall_height_fraction > 0.0 && self.fall_height_fraction < 1.0) {
            return bad("gravity must be non-negative and fall_height_fraction in (0, 1)");
        }
        if !(self.fall_tilt > 0.0) || !(self.contact_threshold >= 0.0) {
            return bad("fall_tilt must be positive and contact_threshold non-negative");
        }
        let c = &self.contact;
        if [c.stiffness, c.damping, c.tangential_stiffness, c.tangential_damping].iter().any(|v| !(*v >= 0.0)) {
            return bad("contact coefficients must be non-negative");
        }
        self.gait.validate()?;
        self.randomization.validate()
    }

    pub fn control_dt(&self) -> f64 {
        self.sim_dt * self.decimation as f64
    }
}

/// Full dynamic state of one environment.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub base: BaseState,
    pub q: Vec<f64>,
    pub qd: Vec<f64>,
    pub contacts: [bool; 2],
    pub time: f64,
    pub phase: f64,
}

impl SimState {
    /// Base linear velocity in world coordinates.
    pub fn base_linear_velocity_world(&self) -> Vector3<f64> {
        self.base.orientation * linear(&self.base.twist)
    }

    pub fn base_angular_velocity_world(&self) -> Vector3<f64> {
        self.base.orientation * angular(&self.base.twist)
    }

    pub fn euler(&self) -> [f64; 3] {
        let (r, p, y) = self.base.orientation.euler_angles();
        [r, p, y]
    }

    /// `(v_x, v_y, yaw_rate)` in the yaw-aligned heading frame.
    pub fn heading_velocity(&self) -> [f64; 3] {
        let v = self.base_linear_velocity_world();
        let yaw = self.euler()[2];
        let (s, c) = yaw.sin_cos();
        [c * v.x + s * v.y, -s * v.x + c * v.y, self.base_angular_velocity_world().z]
    }
}

/// Per-step quantities exposed for logging and analysis.
#[derive(Debug, Clone)]
pub struct StepInfo {
    pub time: f64,
    pub phase: f64,
    pub command: Command,
    pub contacts: [bool; 2],
    pub torques: Vec<f64>,
    pub joint_targets: Vec<f64>,
    pub reference: Vec<f64>,
    pub foot_heights: Vec<f64>,
    pub snapshot: BodySnapshot,
    pub momentum: MomentumReport,
    pub breakdown: Option<RewardBreakdown>,
    pub termination: Termination,
}

/// `tau = kp (target - q) - kd qd`, clamped to the torque limits.
pub fn pd_torques(
    targets: &[f64],
    q: &[f64],
    qd: &[f64],
    kp: &[f64],
    kd: &[f64],
    limits: &[f64],
) -> Result<Vec<f64>> {
    let n = targets.len();
    for (what, len) in [("positions", q.len()), ("velocities", qd.len()), ("kp", kp.len()), ("kd", kd.len()), ("torque limits", limits.len())] {
        ensure_len(what, n, len)?;
    }
    Ok((0..n)
        .map(|j| (kp[j] * (targets[j] - q[j]) - kd[j] * qd[j]).clamp(-limits[j], limits[j]))
        .collect())
}

/// Semi-implicit Euler: velocities first, then positions with the new velocities.
pub fn integrate(model: &Multibody, base: &mut BaseState, q: &mut [f64], qd: &mut [f64], acc: &Accelerations, dt: f64) {
    base.twist += acc.base * dt;
    let w = angular(&base.twist);
    base.position += base.orientation * linear(&base.twist) * dt;
    base.orientation = base.orientation * UnitQuaternion::from_scaled_axis(w * dt);
    base.orientation.renormalize();
    for (j, act) in model.actuators.iter().enumerate() {
        if act.locked {
            qd[j] = 0.0;
        } else {
            qd[j] += acc.joints[j] * dt;
            q[j] += qd[j] * dt;
        }
    }
}

pub fn check_termination(state: &SimState, nominal_height: f64, config: &EnvConfig) -> Termination {
    let [roll, pitch, _] = state.euler();
    if state.base.position.z < config.fall_height_fraction * nominal_height
        || roll.abs() > config.fall_tilt
        || pitch.abs() > config.fall_tilt
    {
        Termination::Fell
    } else if state.time >= config.episode_length_s - 1e-9 {
        Termination::Timeout
    } else {
        Termination::Running
    }
}

pub struct HumanoidEnv {
    nominal: Arc<Multibody>,
    model: Multibody,
    config: EnvConfig,
    rewards: RewardConfig,
    rng: ChaCha8Rng,
    state: SimState,
    contact_state: ContactState,
    params: EpisodeParams,
    params_override: Option<EpisodeParams>,
    command: Command,
    command_override: Option<Command>,
    next_command_time: f64,
    next_push_time: f64,
    last_push: Push,
    last_action: Vec<f64>,
    obs: FrameStack,
    privileged: FrameStack,
    info: Option<StepInfo>,
}

impl HumanoidEnv {
    pub fn new(spec: &RobotSpec, config: EnvConfig, rewards: RewardConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        rewards.validate()?;
        let nominal = Arc::new(Multibody::from_spec(spec, config.gravity)?);
        Ok(Self::with_model(nominal, config, rewards, seed))
    }

    /// Shares an already built model between instances.
    pub fn with_model(nominal: Arc<Multibody>, config: EnvConfig, rewards: RewardConfig, seed: u64) -> Self {
        let model = (*nominal).clone();
        let state = SimState {
            base: BaseState::at_rest(Vector3::new(0.0, 0.0, nominal.nominal_base_height)),
            q: nominal.default_positions(),
            qd: vec![0.0; NUM_JOINTS],
            contacts: [false; 2],
            time: 0.0,
            phase: 0.0,
        };
        let contact_state = ContactState::new(&model);
        Self {
            nominal,
            model,
            config,
            rewards,
            rng: ChaCha8Rng::seed_from_u64(seed),
            state,
            contact_state,
            params: EpisodeParams::nominal(),
            params_override: None,
            command: Command::default(),
            command_override: None,
            next_command_time: 0.0,
            next_push_time: f64::INFINITY,
            last_push: Push::default(),
            last_action: vec![0.0; ACTION_DIM],
            obs: FrameStack::new(OBS_FRAME, OBS_STACK),
            privileged: FrameStack::new(PRIV_FRAME, PRIV_STACK),
            info: None,
        }
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn model(&self) -> &Multibody {
        &self.model
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn episode_params(&self) -> &EpisodeParams {
        &self.params
    }

    pub fn last_push(&self) -> Push {
        self.last_push
    }

    pub fn last_action(&self) -> &[f64] {
        &self.last_action
    }

    /// Info of the latest step; `None` right after a reset.
    /// Fixes the physical parameters used from the next reset on. The random
    /// draw still happens, so the rest of the stream is unchanged.
    pub fn set_episode_params_override(&mut self, params: Option<EpisodeParams>) -> Result<()> {
        if let Some(p) = &params {
            ensure_len("gain scales", NUM_JOINTS, p.gain_scale.len())?;
            if !(p.friction >= 0.0 && p.mass_scale > 0.0) || p.gain_scale.iter().any(|g| !(*g > 0.0)) {
                return Err(Error::InvalidInput("episode parameters out of range".into()));
            }
        }
        self.params_override = params;
        Ok(())
    }

    pub fn info(&self) -> Option<&StepInfo> {
        self.info.as_ref()
    }

    pub fn nominal_base_height(&self) -> f64 {
        self.nominal.nominal_base_height
    }

    /// Overwrites the dynamic state (tests and analysis).
    pub fn set_state(&mut self, state: SimState) -> Result<()> {
        ensure_len("joint positions", NUM_JOINTS, state.q.len())?;
        ensure_len("joint velocities", NUM_JOINTS, state.qd.len())?;
        self.state = state;
        self.contact_state = ContactState::new(&self.model);
        Ok(())
    }

    /// Applies a push now and records it for the privileged observation.
    pub fn apply_push(&mut self, push: Push) {
        let rot_t = self.state.base.orientation.inverse();
        let dv = rot_t * Vector3::new(push.linear[0], push.linear[1], 0.0);
        let dw = rot_t * Vector3::from(push.angular);
        self.state.base.twist += spatial(dw, dv);
        self.last_push = push;
    }

    fn ratio(&self, v_max: f64) -> f64 {
        if self.rewards.params.velocity_scaling {
            velocity_ratio(self.command.v_x, v_max).unwrap_or(0.0)
        } else {
            1.0
        }
    }

    fn reference(&self, v_max: f64, cycle_time: f64) -> Vec<f64> {
        let r = gait::reference(self.state.phase, self.ratio(v_max), cycle_time, &self.config.gait, !self.config.lock_arms)
            .expect("cycle time validated by the curriculum");
        self.model.default_positions().iter().zip(r.offsets).map(|(d, o)| d + o).collect()
    }

    fn kp_kd(&self) -> (Vec<f64>, Vec<f64>) {
        let kp = self.model.actuators.iter().zip(&self.params.gain_scale).map(|(a, s)| a.kp * s).collect();
        let kd = self.model.actuators.iter().zip(&self.params.gain_scale).map(|(a, s)| a.kd * s).collect();
        (kp, kd)
    }

    fn refresh_command(&mut self, curriculum: &CurriculumState) {
        self.command = match self.command_override {
            Some(c) => c,
            None => curriculum.sample_command(&mut self.rng),
        };
        self.next_command_time = self.state.time + self.config.command_resample_s;
    }

    fn push_frames(&mut self, curriculum: &CurriculumState) -> Result<()> {
        let s = &self.state;
        let cycle = curriculum.cycle_time;
        let clock = gait::gait_clock(s.time, cycle)?;
        let w = angular(&s.base.twist);
        let clean = actor_frame(&ProprioInputs {
            clock,
            command: self.command.as_array(),
            joint_positions: &s.q,
            joint_velocities: &s.qd,
            angular_velocity: [w.x, w.y, w.z],
            euler: s.euler(),
            last_action: &self.last_action,
        })?;
        let mut noisy = clean.clone();
        let noise = self.config.randomization.noise;
        if noise.enabled {
            add_noise(&mut noisy[slot::JOINT_POS], noise.joint_position, &mut self.rng);
            add_noise(&mut noisy[slot::JOINT_VEL], noise.joint_velocity, &mut self.rng);
            add_noise(&mut noisy[slot::ANG_VEL], noise.angular_velocity, &mut self.rng);
            add_noise(&mut noisy[slot::EULER], noise.euler, &mut self.rng);
        }
        let reference = self.reference(curriculum.v_max, cycle);
        let diff: Vec<f64> = reference.iter().zip(&s.q).map(|(r, q)| r - q).collect();
        let v = linear(&s.base.twist);
        let flag = |b: bool| if b { 1.0 } else { 0.0 };
        let privileged = privileged_frame(
            &clean,
            &PrivilegedInputs {
                friction: self.params.friction,
                mass_scale: self.params.mass_scale,
                linear_velocity: [v.x, v.y, v.z],
                push_force: self.last_push.linear,
                push_torque: self.last_push.angular,
                tracking_difference: &diff,
                stance_mask: gait::stance_mask(s.phase, self.config.gait.ramp_width),
                contact: [flag(s.contacts[0]), flag(s.contacts[1])],
            },
        )?;
        self.obs.push(noisy)?;
        self.privileged.push(privileged)
    }

    fn simulate(&mut self, targets: &[f64]) -> Result<Vec<f64>> {
        let (kp, kd) = self.kp_kd();
        let limits = self.model.torque_limits();
        let dt = self.config.sim_dt;
        let mut tau = vec![0.0; NUM_JOINTS];
        for _ in 0..self.config.decimation {
            let s = &mut self.state;
            let kin = self.model.forward_kinematics(&s.base, &s.q, &s.qd);
            let contacts = compute_contacts(&self.model, &kin, &mut self.contact_state, &self.config.contact, self.params.friction);
            tau = pd_torques(targets, &s.q, &s.qd, &kp, &kd, &limits)?;
            let applied: Vec<f64> = tau
                .iter()
                .zip(&self.model.actuators)
                .zip(&s.qd)
                .map(|((t, a), v)| if a.locked { 0.0 } else { t - a.damping * v })
                .collect();
            let acc = self.model.forward_dynamics(&kin, &s.qd, &applied, &contacts.forces)?;
            integrate(&self.model, &mut s.base, &mut s.q, &mut s.qd, &acc, dt);
            for (f, flag) in s.contacts.iter_mut().enumerate() {
                *flag = contacts.in_contact(f, self.config.contact_threshold);
            }
        }
        for (t, a) in tau.iter_mut().zip(&self.model.actuators) {
            if a.locked {
                *t = 0.0;
            }
        }
        let s = &self.state;
        let finite = s.base.position.iter().chain(s.base.twist.iter()).chain(&s.q).chain(&s.qd).all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite("simulation state diverged".into()));
        }
        Ok(tau)
    }

    fn try_step(&mut self, action: &[f64], curriculum: &CurriculumState) -> Result<EnvStep> {
        ensure_len("action", ACTION_DIM, action.len())?;
        if let Some(bad) = action.iter().position(|a| !a.is_finite()) {
            return Err(Error::NonFinite(format!("action component {bad} is not finite")));
        }
        let clip = self.config.action_clip;
        let action: Vec<f64> = action.iter().map(|a| a.clamp(-clip, clip)).collect();
        let defaults = self.model.default_positions();
        let targets: Vec<f64> = defaults
            .iter()
            .zip(&action)
            .zip(&self.model.actuators)
            .map(|((d, a), act)| if act.locked { *d } else { d + self.config.action_scale * a })
            .collect();

        let dt = self.config.control_dt();
        let torques = self.simulate(&targets)?;
        self.state.time += dt;
        self.state.phase = gait::phase(self.state.time, curriculum.cycle_time)?;
        if self.config.randomization.push.enabled && self.state.time >= self.next_push_time {
            let push = sample_push(&self.config.randomization.push, &mut self.rng);
            self.apply_push(push);
            self.next_push_time = self.state.time + sample_push_interval(&self.config.randomization.push, &mut self.rng);
        }

        let kin = self.model.forward_kinematics(&self.state.base, &self.state.q, &self.state.qd);
        let snapshot = self.model.snapshot(&kin, self.state.time);
        let momentum = total_angular_momentum(&snapshot)?;
        let foot_heights = self.model.foot_heights(&kin);
        let reference = self.reference(curriculum.v_max, curriculum.cycle_time);
        let termination = check_termination(&self.state, self.nominal.nominal_base_height, &self.config);
        let target_height = self.rewards.params.target_base_height.unwrap_or(self.nominal.nominal_base_height);
        let ctx = RewardContext {
            momentum: momentum.clone(),
            base_height: self.state.base.position.z,
            nominal_base_height: self.nominal.nominal_base_height,
            target_height_offset: target_height,
            foot_heights: foot_heights.clone(),
            target_foot_height: self.rewards.params.target_foot_height,
            swing_mask: gait::swing_mask(self.state.phase, self.config.gait.ramp_width).to_vec(),
            joint_positions: self.state.q.clone(),
            joint_targets: reference.clone(),
            joint_velocities: self.state.qd.clone(),
            commanded_velocity: self.command.as_array(),
            actual_base_velocity: self.state.heading_velocity(),
            curriculum_v_max: curriculum.v_max,
            phase: self.state.phase,
            base_euler: self.state.euler(),
            actions: action.clone(),
            last_actions: self.last_action.clone(),
            torques: torques.clone(),
            torque_limits: self.model.torque_limits(),
            alive: termination != Termination::Fell,
        };
        let breakdown = compose_total(&ctx, &self.rewards)?;
        let tracking_reward = breakdown.term("lin_vel_tracking").map_or(0.0, |t| t.raw);
        self.last_action = action;
        if self.command_override.is_none() && self.state.time >= self.next_command_time - 1e-9 {
            self.refresh_command(curriculum);
        }
        self.push_frames(curriculum)?;

        let step = EnvStep {
            reward: breakdown.total * dt,
            tracking_reward,
            termination,
            fault: None,
            breakdown: Some(breakdown.clone()),
            abs_yaw_momentum: momentum.total.z.abs(),
            forward_velocity: ctx.actual_base_velocity[0],
        };
        self.info = Some(StepInfo {
            time: self.state.time,
            phase: self.state.phase,
            command: self.command,
            contacts: self.state.contacts,
            torques,
            joint_targets: targets,
            reference,
            foot_heights,
            snapshot,
            momentum,
            breakdown: Some(breakdown),
            termination,
        });
        Ok(step)
    }
}

impl Environment for HumanoidEnv {
    fn dims(&self) -> EnvDims {
        EnvDims { observation: OBS_FRAME * OBS_STACK, privileged: PRIV_FRAME * PRIV_STACK, action: ACTION_DIM }
    }

    fn control_dt(&self) -> f64 {
        self.config.control_dt()
    }

    fn reset(&mut self, curriculum: &CurriculumState) {
        let dr = self.config.randomization;
        self.params = EpisodeParams::sample(&dr, &mut self.rng);
        if let Some(p) = &self.params_override {
            self.params = p.clone();
        }
        self.model = (*self.nominal).clone();
        self.model.scale_base_mass(self.params.mass_scale);
        if self.config.lock_arms {
            self.model.lock_joints(&joint::ARMS);
        }
        let mut q = self.model.default_positions();
        if dr.reset_joint_noise > 0.0 {
            for (j, v) in q.iter_mut().enumerate() {
                if !self.model.actuators[j].locked {
                    *v += self.rng.gen_range(-dr.reset_joint_noise..=dr.reset_joint_noise);
                }
            }
        }
        self.state = SimState {
            base: BaseState::at_rest(Vector3::new(0.0, 0.0, self.nominal.nominal_base_height)),
            q,
            qd: vec![0.0; NUM_JOINTS],
            contacts: [true; 2],
            time: 0.0,
            phase: 0.0,
        };
        self.contact_state = ContactState::new(&self.model);
        self.last_action = vec![0.0; ACTION_DIM];
        self.last_push = Push::default();
        self.next_push_time = if dr.push.enabled {
            sample_push_interval(&dr.push, &mut self.rng)
        } else {
            f64::INFINITY
        };
        self.refresh_command(curriculum);
        self.obs.clear();
        self.privileged.clear();
        self.info = None;
        self.push_frames(curriculum).expect("reset frames have fixed sizes");
    }

    fn observation(&self) -> Vec<f64> {
        self.obs.stacked()
    }

    fn privileged_observation(&self) -> Vec<f64> {
        self.privileged.stacked()
    }

    fn step(&mut self, action: &[f64], curriculum: &CurriculumState) -> EnvStep {
        match self.try_step(action, curriculum) {
            Ok(step) => step,
            Err(e) => EnvStep::faulted(e.to_string()),
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
