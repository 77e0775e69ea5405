//! Multi-seed training orchestration.

use std::path::{Path, PathBuf};

use strider_core::trainer::{TrainOutcome, Trainer};

use crate::config::{EnvKind, RunConfig};
use crate::error::CliResult;
use crate::io::{resolve_output, write_atomic};

#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub dir: PathBuf,
    pub outcome: TrainOutcome,
}

impl SeedRun {
    pub fn final_checkpoint(&self) -> &Path {
        self.outcome.checkpoints.last().expect("a run always writes its initial checkpoint")
    }
}

pub fn seed_dir(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("seed_{seed}"))
}

/// Trains one seed into `dir`: `config.toml`, `metrics.csv` and `checkpoints/`.
pub fn train_seed(cfg: &RunConfig, seed: u64, dir: &Path) -> CliResult<TrainOutcome> {
    let mut cfg = cfg.clone();
    cfg.trainer.seed = seed;
    cfg.seeds = vec![seed];
    write_atomic(&dir.join("config.toml"), cfg.to_toml_string()?.as_bytes())?;
    let curriculum = cfg.curriculum_state()?;
    let tracking_max = cfg.rewards.params.tracking_reward_max();
    log::info!("training seed {seed} into {}", dir.display());
    let outcome = match cfg.environment {
        EnvKind::Humanoid => {
            let model = cfg.model()?;
            Trainer::new(cfg.trainer.clone(), curriculum, tracking_max, |_, s| Ok(cfg.humanoid(&model, s)))?.run(dir)?
        }
        EnvKind::PointMass => Trainer::new(cfg.trainer.clone(), curriculum, tracking_max, |_, s| {
            strider_core::env::PointMassEnv::new(cfg.point_mass, s)
        })?
        .run(dir)?,
    };
    log::info!(
        "seed {seed}: {} iterations, {} env steps, v_max {}, cycle time {}",
        outcome.iterations,
        outcome.env_steps,
        outcome.curriculum.v_max,
        outcome.curriculum.cycle_time
    );
    Ok(outcome)
}

/// Trains every seed into `out/seed_<n>` after writing `out/config.toml`.
pub fn train_all(cfg: &RunConfig, seeds: &[u64], out: &Path) -> CliResult<Vec<SeedRun>> {
    let mut snapshot = cfg.clone();
    snapshot.seeds = seeds.to_vec();
    write_atomic(&out.join("config.toml"), snapshot.to_toml_string()?.as_bytes())?;
    seeds
        .iter()
        .map(|&seed| {
            let dir = seed_dir(out, seed);
            Ok(SeedRun { seed, outcome: train_seed(cfg, seed, &dir)?, dir })
        })
        .collect()
}

pub fn cmd_train(config_path: &Path, seed: Option<u64>, out: Option<&Path>) -> CliResult<Vec<SeedRun>> {
    let cfg = RunConfig::load(config_path)?;
    let seeds = match seed {
        Some(s) => vec![s],
        None => cfg.seeds.clone(),
    };
    let out = resolve_output(out, &cfg.output_dir);
    train_all(&cfg, &seeds, &out)
}
