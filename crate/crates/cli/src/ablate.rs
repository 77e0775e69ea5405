//! Ablation studies: train and evaluate the baseline and toggled variants on
//! shared seeds, then compare them side by side.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use strider_core::kinodyn::BodyGroup;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::eval::{evaluate, EpisodeResult, EvalSetup, EvaluationReport, LoadedPolicy};
use crate::io::{fmt_f64, resolve_output, write_atomic, write_csv};
use crate::train::{train_all, SeedRun};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Toggle {
    /// Angular-momentum reward weight set to zero.
    NoAngularMomentum,
    /// Reward targets no longer scale with the commanded velocity.
    NoVelocityScaling,
    /// Shoulder and elbow joints welded at their defaults.
    ArmsLocked,
    /// Gait cycle time held at its initial value.
    FixedCycleTime,
}

impl Toggle {
    pub const ALL: [Toggle; 4] = [Toggle::NoAngularMomentum, Toggle::NoVelocityScaling, Toggle::ArmsLocked, Toggle::FixedCycleTime];

    pub fn name(self) -> &'static str {
        match self {
            Toggle::NoAngularMomentum => "no_angular_momentum",
            Toggle::NoVelocityScaling => "no_velocity_scaling",
            Toggle::ArmsLocked => "arms_locked",
            Toggle::FixedCycleTime => "fixed_cycle_time",
        }
    }

    pub fn parse(s: &str) -> CliResult<Self> {
        Self::ALL.into_iter().find(|t| t.name() == s).ok_or_else(|| {
            let valid: Vec<&str> = Self::ALL.iter().map(|t| t.name()).collect();
            CliError::Usage(format!("unknown toggle `{s}`; valid toggles: {}", valid.join(", ")))
        })
    }

    pub fn apply(self, cfg: &mut RunConfig) {
        match self {
            Toggle::NoAngularMomentum => cfg.rewards.weights.alpha_a = 0.0,
            Toggle::NoVelocityScaling => cfg.rewards.params.velocity_scaling = false,
            Toggle::ArmsLocked => cfg.env.lock_arms = true,
            Toggle::FixedCycleTime => cfg.curriculum.cycle_enabled = false,
        }
    }
}

/// Parses `a,b,c`; an empty string or `baseline` is the empty set.
pub fn parse_toggle_set(s: &str) -> CliResult<Vec<Toggle>> {
    let s = s.trim();
    if s.is_empty() || s == "baseline" {
        return Ok(Vec::new());
    }
    let mut set = s.split(',').map(|t| Toggle::parse(t.trim())).collect::<CliResult<Vec<_>>>()?;
    set.sort();
    set.dedup();
    Ok(set)
}

pub fn variant_name(toggles: &[Toggle]) -> String {
    if toggles.is_empty() {
        "baseline".into()
    } else {
        toggles.iter().map(|t| t.name()).collect::<Vec<_>>().join("+")
    }
}

pub fn apply_toggles(cfg: &RunConfig, toggles: &[Toggle]) -> RunConfig {
    let mut c = cfg.clone();
    for t in toggles {
        t.apply(&mut c);
    }
    c
}

#[derive(Debug, Clone)]
pub struct VariantResult {
    pub name: String,
    pub toggles: Vec<Toggle>,
    pub dir: PathBuf,
    pub runs: Vec<SeedRun>,
    pub report: EvaluationReport,
    pub episodes: Vec<EpisodeResult>,
}

impl VariantResult {
    /// Mean `abs(L_z)` of checkpoint `index` (seed order) at `command`.
    pub fn seed_abs_lz(&self, index: usize, command: f64) -> Option<f64> {
        let v: Vec<f64> = self
            .episodes
            .iter()
            .filter(|e| e.checkpoint == index && e.command == command)
            .map(|e| e.mean_abs_lz)
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }
}

/// Paired comparison of one variant against the baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedComparison {
    pub variant: String,
    /// Highest grid velocity not above the smallest final `v_max` of any run.
    pub command: Option<f64>,
    pub seeds: Vec<u64>,
    pub baseline_abs_lz: Vec<f64>,
    pub variant_abs_lz: Vec<f64>,
    /// Seeds where the baseline has strictly lower mean `abs(L_z)`.
    pub baseline_lower: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationSummary {
    pub seeds: Vec<u64>,
    pub min_final_v_max: f64,
    pub comparisons: Vec<PairedComparison>,
}

pub fn summarize(variants: &[VariantResult], grid: &[f64], seeds: &[u64]) -> AblationSummary {
    let min_v = variants
        .iter()
        .flat_map(|v| v.runs.iter().map(|r| r.outcome.curriculum.v_max))
        .fold(f64::INFINITY, f64::min);
    let command = grid.iter().copied().filter(|g| *g <= min_v + 1e-12).fold(None, |acc: Option<f64>, g| {
        Some(acc.map_or(g, |a| a.max(g)))
    });
    let base = &variants[0];
    let comparisons = variants[1..]
        .iter()
        .map(|v| {
            let (mut b, mut o, mut wins) = (Vec::new(), Vec::new(), 0);
            if let Some(c) = command {
                for i in 0..seeds.len() {
                    let (Some(x), Some(y)) = (base.seed_abs_lz(i, c), v.seed_abs_lz(i, c)) else { continue };
                    if x < y {
                        wins += 1;
                    }
                    b.push(x);
                    o.push(y);
                }
            }
            PairedComparison {
                variant: v.name.clone(),
                command,
                seeds: seeds.to_vec(),
                baseline_abs_lz: b,
                variant_abs_lz: o,
                baseline_lower: wins,
            }
        })
        .collect();
    AblationSummary { seeds: seeds.to_vec(), min_final_v_max: min_v, comparisons }
}

fn side_by_side(variants: &[VariantResult], path: &Path) -> CliResult<()> {
    let mut header: Vec<String> = ["variant", "command", "mean_velocity", "velocity_std", "fall_rate", "tracking_error", "mean_abs_lz"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(BodyGroup::ALL.iter().map(|g| format!("abs_lz_{}", g.name())));
    header.push("arm_joint_travel".into());
    let mut rows = Vec::new();
    for v in variants {
        for r in &v.report.rows {
            let mut row = vec![v.name.clone()];
            row.extend(
                [r.command, r.mean_velocity, r.velocity_std, r.fall_rate, r.tracking_error, r.mean_abs_lz]
                    .into_iter()
                    .chain(r.group_abs_lz)
                    .chain([r.arm_joint_travel])
                    .map(fmt_f64),
            );
            rows.push(row);
        }
    }
    write_csv(path, &header, &rows)
}

/// Trains and evaluates the baseline plus every toggle set into `out/<variant>`.
pub fn run_ablation(cfg: &RunConfig, toggle_sets: &[Vec<Toggle>], seeds: &[u64], out: &Path) -> CliResult<(Vec<VariantResult>, AblationSummary)> {
    let mut sets: Vec<Vec<Toggle>> = vec![Vec::new()];
    for s in toggle_sets {
        if !sets.contains(s) {
            sets.push(s.clone());
        }
    }
    let mut variants = Vec::new();
    for toggles in sets {
        let name = variant_name(&toggles);
        let vcfg = apply_toggles(cfg, &toggles);
        let dir = out.join(&name);
        log::info!("ablation variant {name}");
        let runs = train_all(&vcfg, seeds, &dir)?;
        let policies = runs
            .iter()
            .map(|r| LoadedPolicy::load(r.final_checkpoint()))
            .collect::<CliResult<Vec<_>>>()?;
        let setup = EvalSetup::from_config(&vcfg)?;
        let (report, episodes) = evaluate(&setup, &policies, &vcfg.eval, &dir.join("eval"))?;
        variants.push(VariantResult { name, toggles, dir, runs, report, episodes });
    }
    side_by_side(&variants, &out.join("ablation.csv"))?;
    let summary = summarize(&variants, &cfg.eval.grid, seeds);
    let json = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Other(e.to_string()))?;
    write_atomic(&out.join("ablation_summary.json"), json.as_bytes())?;
    Ok((variants, summary))
}

pub fn cmd_ablate(config_path: &Path, toggles: &[String], seed: Option<u64>, out: Option<&Path>) -> CliResult<(Vec<VariantResult>, AblationSummary)> {
    let sets = toggles.iter().map(|s| parse_toggle_set(s)).collect::<CliResult<Vec<_>>>()?;
    let cfg = RunConfig::load(config_path)?;
    let seeds = seed.map(|s| vec![s]).unwrap_or_else(|| cfg.seeds.clone());
    let out = resolve_output(out, &cfg.output_dir);
    run_ablation(&cfg, &sets, &seeds, &out)
}
