//! Declarative run configuration, read from TOML.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use strider_core::curriculum::{CurriculumConfig, CurriculumState};
use strider_core::env::model::Multibody;
use strider_core::env::{EnvConfig, HumanoidEnv, PointMassConfig, PointMassEnv, RobotSpec};
use strider_core::rewards::RewardConfig;
use strider_core::trainer::TrainerConfig;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    #[default]
    Humanoid,
    PointMass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    /// Commanded forward velocities, m/s.
    pub grid: Vec<f64>,
    pub episodes_per_point: usize,
    pub episode_length_s: f64,
    pub seed: u64,
    /// Keep training-time randomization (friction, mass, gains, pushes, noise) on.
    pub domain_randomization: bool,
    /// Write per-step trajectory logs.
    pub record_trajectories: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            grid: (0..8).map(|i| i as f64 * 0.5).collect(),
            episodes_per_point: 2,
            episode_length_s: 10.0,
            seed: 0,
            domain_randomization: false,
            record_trajectories: true,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> CliResult<()> {
        if self.grid.is_empty() {
            return Err(CliError::Usage("evaluation grid is empty".into()));
        }
        if self.grid.iter().any(|v| !v.is_finite()) {
            return Err(CliError::Usage("evaluation grid values must be finite".into()));
        }
        if self.episodes_per_point == 0 || !(self.episode_length_s > 0.0) {
            return Err(CliError::Usage("episodes_per_point and episode_length_s must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Robot description (TOML or JSON); the built-in humanoid when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub robot_spec: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub seeds: Vec<u64>,
    pub environment: EnvKind,
    pub env: EnvConfig,
    pub point_mass: PointMassConfig,
    pub rewards: RewardConfig,
    pub curriculum: CurriculumConfig,
    pub trainer: TrainerConfig,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            robot_spec: None,
            output_dir: PathBuf::from("runs/default"),
            seeds: vec![0, 1, 2, 3, 4],
            environment: EnvKind::Humanoid,
            env: EnvConfig::default(),
            point_mass: PointMassConfig::default(),
            rewards: RewardConfig::default(),
            curriculum: CurriculumConfig::default(),
            trainer: TrainerConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str, origin: &Path) -> CliResult<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| CliError::Config { path: origin.to_path_buf(), message: e.to_string() })?;
        cfg.validate().map_err(|e| match e {
            CliError::Core(c) => CliError::Config { path: origin.to_path_buf(), message: c.to_string() },
            other => other,
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        Self::from_toml_str(&text, path)
    }

    pub fn to_toml_string(&self) -> CliResult<String> {
        toml::to_string(self).map_err(|e| CliError::Other(format!("serializing config: {e}")))
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.seeds.is_empty() {
            return Err(CliError::Config { path: PathBuf::new(), message: "`seeds` must list at least one seed".into() });
        }
        self.env.validate()?;
        self.point_mass.validate()?;
        self.rewards.validate()?;
        self.trainer.validate()?;
        CurriculumState::from_config(&self.curriculum)?;
        self.eval.validate()?;
        Ok(())
    }

    pub fn robot(&self) -> CliResult<RobotSpec> {
        match &self.robot_spec {
            None => Ok(RobotSpec::default_humanoid()),
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
                let parsed = if path.extension().is_some_and(|e| e == "json") {
                    serde_json::from_str(&text).map_err(|e| e.to_string())
                } else {
                    toml::from_str(&text).map_err(|e| e.to_string())
                };
                parsed.map_err(|message| CliError::Config { path: path.clone(), message })
            }
        }
    }

    /// Shared nominal model for every humanoid built from this config.
    pub fn model(&self) -> CliResult<Arc<Multibody>> {
        Ok(Arc::new(Multibody::from_spec(&self.robot()?, self.env.gravity)?))
    }

    pub fn curriculum_state(&self) -> CliResult<CurriculumState> {
        Ok(CurriculumState::from_config(&self.curriculum)?)
    }

    pub fn humanoid(&self, model: &Arc<Multibody>, seed: u64) -> HumanoidEnv {
        HumanoidEnv::with_model(model.clone(), self.env.clone(), self.rewards.clone(), seed)
    }

    pub fn point_mass_env(&self, seed: u64) -> CliResult<PointMassEnv> {
        Ok(PointMassEnv::new(self.point_mass, seed)?)
    }
}
