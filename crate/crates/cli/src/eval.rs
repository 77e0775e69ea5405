//! Deterministic-policy evaluation over a commanded-velocity grid.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use strider_core::curriculum::{Command, CurriculumState};
use strider_core::env::model::Multibody;
use strider_core::env::{EnvConfig, Environment, EpisodeParams, Termination};
use strider_core::kinodyn::BodyGroup;
use strider_core::trainer::{derive_seed, load_checkpoint, Checkpoint};

use crate::config::{EnvKind, EvalConfig, RunConfig};
use crate::error::{CliError, CliResult};
use crate::io::{fmt_f64, write_atomic, write_csv};

pub const TRAJECTORY_SCHEMA_VERSION: u32 = 1;
pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Seed stream of evaluation episodes; offset by the checkpoint index.
const EVAL_STREAM: u64 = 100;

/// A checkpoint together with a label used in reports and logs.
#[derive(Debug, Clone)]
pub struct LoadedPolicy {
    pub label: String,
    pub checkpoint: Checkpoint,
}

impl LoadedPolicy {
    pub fn load(path: &Path) -> CliResult<Self> {
        let file = resolve_checkpoint(path)?;
        Ok(Self { label: file.display().to_string(), checkpoint: load_checkpoint(&file)? })
    }
}

/// A checkpoint file, or the newest `iter_*.safetensors` of a run directory.
pub fn resolve_checkpoint(path: &Path) -> CliResult<PathBuf> {
    if path.is_file() {
        return Ok(path.to_path_buf());
    }
    if !path.is_dir() {
        return Err(CliError::Usage(format!("checkpoint {} does not exist", path.display())));
    }
    let dir = if path.join("checkpoints").is_dir() { path.join("checkpoints") } else { path.to_path_buf() };
    let mut found: Vec<PathBuf> = std::fs::read_dir(&dir)
        .map_err(CliError::io(&dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("iter_") && n.ends_with(".safetensors"))
        })
        .collect();
    found.sort();
    found.pop().ok_or_else(|| CliError::Usage(format!("no iter_*.safetensors checkpoint in {}", dir.display())))
}

/// The `config.toml` written next to a run's checkpoints, if any.
pub fn find_run_config(checkpoint: &Path) -> Option<PathBuf> {
    checkpoint.ancestors().skip(1).take(3).map(|d| d.join("config.toml")).find(|p| p.is_file())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub checkpoint: usize,
    pub command: f64,
    pub episode: usize,
    pub seed: u64,
    pub fell: bool,
    pub steps: usize,
    /// Mean forward base velocity while the episode ran, before the fall rule.
    pub mean_velocity: f64,
    pub mean_abs_lz: f64,
    /// Mean norm of each group's angular momentum, in [`BodyGroup::ALL`] order.
    pub group_norm: [f64; 5],
    /// Mean `abs(L_z)` of each group.
    pub group_abs_lz: [f64; 5],
    /// Largest excursion of any arm joint from its reset angle, rad.
    pub arm_joint_travel: f64,
    #[serde(skip)]
    pub trajectory: Vec<String>,
}

impl EpisodeResult {
    /// Velocity credited to the episode: zero if it fell.
    pub fn credited_velocity(&self) -> f64 {
        if self.fell {
            0.0
        } else {
            self.mean_velocity
        }
    }
}

#[derive(Serialize)]
struct TrajectoryRecord<'a> {
    schema_version: u32,
    checkpoint: &'a str,
    command: f64,
    episode: usize,
    step: usize,
    time: f64,
    forward_velocity: f64,
    base_position: [f64; 3],
    base_orientation_wxyz: [f64; 4],
    base_linear_velocity: [f64; 3],
    base_angular_velocity: [f64; 3],
    joint_positions: &'a [f64],
    joint_velocities: &'a [f64],
    actions: &'a [f64],
    torques: &'a [f64],
    reward: f64,
    reward_terms: BTreeMap<&'a str, f64>,
    momentum: MomentumRecord,
    termination: Termination,
}

#[derive(Serialize)]
struct MomentumRecord {
    total: [f64; 3],
    com_position: [f64; 3],
    com_velocity: [f64; 3],
    groups: BTreeMap<&'static str, [f64; 3]>,
}

fn arr3(v: &impl std::ops::Index<usize, Output = f64>) -> [f64; 3] {
    [v[0], v[1], v[2]]
}

/// Physics and episode settings for one evaluation.
#[derive(Debug, Clone)]
pub struct EvalSetup {
    pub env: EnvConfig,
    pub rewards: strider_core::rewards::RewardConfig,
    pub model: Arc<Multibody>,
    pub episode_params: Option<EpisodeParams>,
}

impl EvalSetup {
    pub fn from_config(cfg: &RunConfig) -> CliResult<Self> {
        if cfg.environment != EnvKind::Humanoid {
            return Err(CliError::Usage("evaluation is only defined for the humanoid environment".into()));
        }
        let mut env = cfg.env.clone();
        env.episode_length_s = cfg.eval.episode_length_s;
        if !cfg.eval.domain_randomization {
            env.randomization = strider_core::env::DomainRandomizationConfig::disabled();
        }
        env.validate()?;
        Ok(Self { env, rewards: cfg.rewards.clone(), model: cfg.model()?, episode_params: None })
    }
}

/// Runs one deterministic episode at forward command `command`.
pub fn run_episode(
    setup: &EvalSetup,
    policy: &LoadedPolicy,
    checkpoint_index: usize,
    command: f64,
    episode: usize,
    seed: u64,
    record: bool,
) -> CliResult<EpisodeResult> {
    let ck = &policy.checkpoint;
    let mut env = strider_core::env::HumanoidEnv::with_model(setup.model.clone(), setup.env.clone(), setup.rewards.clone(), seed);
    env.set_episode_params_override(setup.episode_params.clone())?;
    ck.check_dims(&env.dims())?;
    let curriculum = CurriculumState { v_max: ck.curriculum.v_max.max(command), ..ck.curriculum.clone() };
    env.set_command_override(Some(Command::forward(command)));
    env.reset(&curriculum);
    let arm_start: Vec<f64> = strider_core::env::robot::joint::ARMS.iter().map(|&j| env.state().q[j]).collect();

    let mut out = EpisodeResult {
        checkpoint: checkpoint_index,
        command,
        episode,
        seed,
        fell: false,
        steps: 0,
        mean_velocity: 0.0,
        mean_abs_lz: 0.0,
        group_norm: [0.0; 5],
        group_abs_lz: [0.0; 5],
        arm_joint_travel: 0.0,
        trajectory: Vec::new(),
    };
    loop {
        let action = ck.act_deterministic(&env.observation())?;
        let step = env.step(&action, &curriculum);
        if let Some(msg) = &step.fault {
            log::warn!("{}: episode {episode} at {command} m/s faulted: {msg}", policy.label);
            out.fell = true;
            break;
        }
        out.steps += 1;
        out.mean_velocity += step.forward_velocity;
        out.mean_abs_lz += step.abs_yaw_momentum;
        let state = env.state();
        let travel = strider_core::env::robot::joint::ARMS
            .iter()
            .zip(&arm_start)
            .map(|(&j, q0)| (state.q[j] - q0).abs())
            .fold(0.0, f64::max);
        out.arm_joint_travel = out.arm_joint_travel.max(travel);
        let info = env.info().ok_or_else(|| CliError::Other("environment produced no step info".into()))?;
        for (g, l) in info.momentum.per_group() {
            out.group_norm[g.index()] += l.norm();
            out.group_abs_lz[g.index()] += l.z.abs();
        }
        if record {
            let q = state.base.orientation.quaternion();
            let rec = TrajectoryRecord {
                schema_version: TRAJECTORY_SCHEMA_VERSION,
                checkpoint: &policy.label,
                command,
                episode,
                step: out.steps - 1,
                time: info.time,
                forward_velocity: step.forward_velocity,
                base_position: arr3(&state.base.position),
                base_orientation_wxyz: [q.w, q.i, q.j, q.k],
                base_linear_velocity: arr3(&state.base_linear_velocity_world()),
                base_angular_velocity: arr3(&state.base_angular_velocity_world()),
                joint_positions: &state.q,
                joint_velocities: &state.qd,
                actions: &action,
                torques: &info.torques,
                reward: step.reward,
                reward_terms: step
                    .breakdown
                    .as_ref()
                    .map(|b| b.terms.iter().map(|t| (t.name.as_str(), t.weighted)).collect())
                    .unwrap_or_default(),
                momentum: MomentumRecord {
                    total: arr3(&info.momentum.total),
                    com_position: arr3(&info.momentum.com_position),
                    com_velocity: arr3(&info.momentum.com_velocity),
                    groups: info.momentum.per_group().map(|(g, l)| (g.name(), arr3(&l))).collect(),
                },
                termination: step.termination,
            };
            out.trajectory.push(serde_json::to_string(&rec).map_err(|e| CliError::Other(e.to_string()))?);
        }
        match step.termination {
            Termination::Running => {}
            Termination::Fell => {
                out.fell = true;
                break;
            }
            Termination::Timeout => break,
        }
    }
    if out.steps > 0 {
        let n = out.steps as f64;
        out.mean_velocity /= n;
        out.mean_abs_lz /= n;
        out.group_norm.iter_mut().chain(out.group_abs_lz.iter_mut()).for_each(|v| *v /= n);
    }
    Ok(out)
}

/// Every (checkpoint, command, episode) combination, in that nesting order.
pub fn run_grid(setup: &EvalSetup, policies: &[LoadedPolicy], eval: &EvalConfig) -> CliResult<Vec<EpisodeResult>> {
    eval.validate()?;
    let mut tasks = Vec::new();
    for c in 0..policies.len() {
        for (k, &v) in eval.grid.iter().enumerate() {
            for e in 0..eval.episodes_per_point {
                let seed = derive_seed(eval.seed, EVAL_STREAM + c as u64, (k * 10_000 + e) as u64);
                tasks.push((c, v, e, seed));
            }
        }
    }
    tasks
        .into_par_iter()
        .map(|(c, v, e, seed)| run_episode(setup, &policies[c], c, v, e, seed, eval.record_trajectories))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub command: f64,
    /// Mean over checkpoints of the per-checkpoint mean credited velocity.
    pub mean_velocity: f64,
    /// Population standard deviation of the per-checkpoint means.
    pub velocity_std: f64,
    pub fall_rate: f64,
    /// Mean `abs(v - v_cmd)` over episodes, falls counted at `v = 0`.
    pub tracking_error: f64,
    pub mean_abs_lz: f64,
    pub group_norm: [f64; 5],
    pub group_abs_lz: [f64; 5],
    pub arm_joint_travel: f64,
    pub episodes: usize,
    pub checkpoints: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub schema_version: u32,
    pub checkpoints: Vec<String>,
    pub rows: Vec<ReportRow>,
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Aggregates episodes into one row per grid point, applying the fall-as-zero rule.
pub fn aggregate(grid: &[f64], episodes: &[EpisodeResult], num_checkpoints: usize) -> Vec<ReportRow> {
    grid.iter()
        .map(|&v| {
            let at: Vec<&EpisodeResult> = episodes.iter().filter(|e| e.command == v).collect();
            let per_ck: Vec<f64> = (0..num_checkpoints)
                .filter_map(|c| {
                    let eps: Vec<&&EpisodeResult> = at.iter().filter(|e| e.checkpoint == c).collect();
                    (!eps.is_empty()).then(|| mean(eps.iter().map(|e| e.credited_velocity())))
                })
                .collect();
            let m = mean(per_ck.iter().copied());
            let std = mean(per_ck.iter().map(|x| (x - m) * (x - m))).sqrt();
            let mut group_norm = [0.0; 5];
            let mut group_abs_lz = [0.0; 5];
            for g in 0..5 {
                group_norm[g] = mean(at.iter().map(|e| e.group_norm[g]));
                group_abs_lz[g] = mean(at.iter().map(|e| e.group_abs_lz[g]));
            }
            ReportRow {
                command: v,
                mean_velocity: m,
                velocity_std: std,
                fall_rate: mean(at.iter().map(|e| if e.fell { 1.0 } else { 0.0 })),
                tracking_error: mean(at.iter().map(|e| (e.credited_velocity() - v).abs())),
                mean_abs_lz: mean(at.iter().map(|e| e.mean_abs_lz)),
                group_norm,
                group_abs_lz,
                arm_joint_travel: mean(at.iter().map(|e| e.arm_joint_travel)),
                episodes: at.len(),
                checkpoints: per_ck.len(),
            }
        })
        .collect()
}

pub fn report_header() -> Vec<String> {
    let mut h: Vec<String> = ["command", "mean_velocity", "velocity_std", "fall_rate", "tracking_error", "mean_abs_lz"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend(BodyGroup::ALL.iter().map(|g| format!("norm_{}", g.name())));
    h.extend(BodyGroup::ALL.iter().map(|g| format!("abs_lz_{}", g.name())));
    h.extend(["arm_joint_travel", "episodes", "checkpoints"].iter().map(|s| s.to_string()));
    h
}

impl ReportRow {
    pub fn values(&self) -> Vec<f64> {
        let mut v =
            vec![self.command, self.mean_velocity, self.velocity_std, self.fall_rate, self.tracking_error, self.mean_abs_lz];
        v.extend(self.group_norm);
        v.extend(self.group_abs_lz);
        v.push(self.arm_joint_travel);
        v
    }

    pub fn record(&self) -> Vec<String> {
        let mut r: Vec<String> = self.values().into_iter().map(fmt_f64).collect();
        r.push(self.episodes.to_string());
        r.push(self.checkpoints.to_string());
        r
    }
}

impl EvaluationReport {
    pub fn write(&self, dir: &Path) -> CliResult<()> {
        let rows: Vec<Vec<String>> = self.rows.iter().map(|r| r.record()).collect();
        write_csv(&dir.join("report.csv"), &report_header(), &rows)?;
        let json = serde_json::to_string_pretty(self).map_err(|e| CliError::Other(e.to_string()))?;
        write_atomic(&dir.join("report.json"), json.as_bytes())
    }

    pub fn read(dir: &Path) -> CliResult<Self> {
        let path = dir.join("report.json");
        let text = std::fs::read_to_string(&path).map_err(CliError::io(&path))?;
        serde_json::from_str(&text).map_err(|e| CliError::Other(format!("{}: {e}", path.display())))
    }
}

/// Evaluates `policies` and writes the report, trajectories and plots into `out`.
pub fn evaluate(
    setup: &EvalSetup,
    policies: &[LoadedPolicy],
    eval: &EvalConfig,
    out: &Path,
) -> CliResult<(EvaluationReport, Vec<EpisodeResult>)> {
    let episodes = run_grid(setup, policies, eval)?;
    let report = EvaluationReport {
        schema_version: REPORT_SCHEMA_VERSION,
        checkpoints: policies.iter().map(|p| p.label.clone()).collect(),
        rows: aggregate(&eval.grid, &episodes, policies.len()),
    };
    report.write(out)?;
    let summary: Vec<String> = episodes
        .iter()
        .map(|e| serde_json::to_string(e).map_err(|err| CliError::Other(err.to_string())))
        .collect::<CliResult<_>>()?;
    write_atomic(&out.join("episodes.jsonl"), (summary.join("\n") + "\n").as_bytes())?;
    if eval.record_trajectories {
        let mut text = String::new();
        for e in &episodes {
            for line in &e.trajectory {
                text.push_str(line);
                text.push('\n');
            }
        }
        write_atomic(&out.join("trajectories.jsonl"), text.as_bytes())?;
    }
    crate::plot::plot_report(&report, &out.join("plots"))?;
    Ok((report, episodes))
}

/// Overrides for an evaluation taken from the command line.
#[derive(Debug, Clone, Default)]
pub struct EvalOverrides {
    pub config: Option<PathBuf>,
    pub grid: Option<Vec<f64>>,
    pub episodes: Option<usize>,
    pub seed: Option<u64>,
}

/// Everything an evaluation command needs, plus the default output directory.
pub struct EvalContext {
    pub config: RunConfig,
    pub setup: EvalSetup,
    pub policies: Vec<LoadedPolicy>,
    pub default_out: PathBuf,
}

/// Parses `0,0.5,1` into a grid.
pub fn parse_grid(s: &str) -> CliResult<Vec<f64>> {
    let grid = s
        .split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("bad grid value `{t}`"))))
        .collect::<CliResult<Vec<_>>>()?;
    if grid.is_empty() {
        return Err(CliError::Usage("evaluation grid is empty".into()));
    }
    Ok(grid)
}

pub fn load_eval_context(checkpoints: &[PathBuf], overrides: &EvalOverrides) -> CliResult<EvalContext> {
    if checkpoints.is_empty() {
        return Err(CliError::Usage("at least one --checkpoint is required".into()));
    }
    let files = checkpoints.iter().map(|p| resolve_checkpoint(p)).collect::<CliResult<Vec<_>>>()?;
    let config_path = overrides.config.clone().or_else(|| find_run_config(&files[0]));
    let mut config = match &config_path {
        Some(p) => RunConfig::load(p)?,
        None => {
            log::warn!("no run config found next to {}; using defaults", files[0].display());
            RunConfig::default()
        }
    };
    if let Some(g) = &overrides.grid {
        config.eval.grid = g.clone();
    }
    if let Some(n) = overrides.episodes {
        config.eval.episodes_per_point = n;
    }
    if let Some(s) = overrides.seed {
        config.eval.seed = s;
    }
    config.eval.validate()?;
    let setup = EvalSetup::from_config(&config)?;
    let policies = files
        .iter()
        .map(|f| Ok(LoadedPolicy { label: f.display().to_string(), checkpoint: load_checkpoint(f)? }))
        .collect::<CliResult<Vec<_>>>()?;
    let default_out = match &config_path {
        Some(p) if overrides.config.is_none() => p.parent().unwrap_or(Path::new(".")).join("eval"),
        _ => PathBuf::from("eval"),
    };
    Ok(EvalContext { config, setup, policies, default_out })
}

pub fn cmd_eval(checkpoints: &[PathBuf], overrides: &EvalOverrides, out: Option<&Path>) -> CliResult<EvaluationReport> {
    let ctx = load_eval_context(checkpoints, overrides)?;
    let out = out.map(Path::to_path_buf).unwrap_or(ctx.default_out);
    let (report, _) = evaluate(&ctx.setup, &ctx.policies, &ctx.config.eval, &out)?;
    Ok(report)
}
