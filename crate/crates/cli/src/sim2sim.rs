//! Evaluation of one checkpoint under nominal and perturbed physics.

use std::path::Path;

use serde::{Deserialize, Serialize};
use strider_core::env::robot::NUM_JOINTS;
use strider_core::env::EpisodeParams;

use crate::config::EvalConfig;
use crate::error::{CliError, CliResult};
use crate::eval::{evaluate, report_header, EvalSetup, EvaluationReport, LoadedPolicy};
use crate::io::{fmt_f64, write_atomic, write_csv};

/// Multiplicative changes to the evaluation physics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerturbationProfile {
    pub name: String,
    pub contact_stiffness_scale: f64,
    pub contact_damping_scale: f64,
    pub tangential_scale: f64,
    /// Ground friction coefficient.
    pub friction: f64,
    pub base_mass_scale: f64,
    pub gain_scale: f64,
    /// Physics substeps are this many times shorter (and more numerous).
    pub timestep_divisor: usize,
}

impl Default for PerturbationProfile {
    fn default() -> Self {
        Self {
            name: "identity".into(),
            contact_stiffness_scale: 1.0,
            contact_damping_scale: 1.0,
            tangential_scale: 1.0,
            friction: 1.0,
            base_mass_scale: 1.0,
            gain_scale: 1.0,
            timestep_divisor: 1,
        }
    }
}

impl PerturbationProfile {
    pub const BUILTIN: [&'static str; 6] = ["identity", "stiff_contact", "low_friction", "heavy_base", "half_timestep", "high_fidelity"];

    pub fn builtin(name: &str) -> Option<Self> {
        let base = Self { name: name.to_string(), ..Self::default() };
        Some(match name {
            "identity" => base,
            "stiff_contact" => Self { contact_stiffness_scale: 3.0, contact_damping_scale: 1.7, tangential_scale: 2.0, ..base },
            "low_friction" => Self { friction: 0.5, ..base },
            "heavy_base" => Self { base_mass_scale: 1.15, ..base },
            "half_timestep" => Self { timestep_divisor: 2, ..base },
            "high_fidelity" => Self {
                contact_stiffness_scale: 2.0,
                contact_damping_scale: 1.4,
                tangential_scale: 1.5,
                friction: 0.8,
                base_mass_scale: 1.05,
                gain_scale: 0.95,
                timestep_divisor: 2,
                ..base
            },
            _ => return None,
        })
    }

    /// A built-in name or a TOML file.
    pub fn resolve(arg: &str) -> CliResult<Self> {
        if let Some(p) = Self::builtin(arg) {
            return Ok(p);
        }
        let path = Path::new(arg);
        if !path.is_file() {
            return Err(CliError::Usage(format!(
                "unknown profile `{arg}`: not a file and not one of {}",
                Self::BUILTIN.join(", ")
            )));
        }
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        let p: Self = toml::from_str(&text).map_err(|e| CliError::Config { path: path.to_path_buf(), message: e.to_string() })?;
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> CliResult<()> {
        let scales = [
            self.contact_stiffness_scale,
            self.contact_damping_scale,
            self.tangential_scale,
            self.base_mass_scale,
            self.gain_scale,
        ];
        if scales.iter().any(|s| !(*s > 0.0 && s.is_finite())) || !(self.friction >= 0.0 && self.friction.is_finite()) {
            return Err(CliError::Usage(format!("profile `{}`: scales must be positive and friction non-negative", self.name)));
        }
        if self.timestep_divisor == 0 {
            return Err(CliError::Usage(format!("profile `{}`: timestep_divisor must be at least 1", self.name)));
        }
        Ok(())
    }

    pub fn is_identity(&self) -> bool {
        let d = Self::default();
        Self { name: d.name.clone(), ..self.clone() } == d
    }

    /// The setup with this profile's physics. The control period is unchanged.
    pub fn apply(&self, setup: &EvalSetup) -> CliResult<EvalSetup> {
        self.validate()?;
        if self.is_identity() {
            return Ok(setup.clone());
        }
        let mut s = setup.clone();
        let c = &mut s.env.contact;
        c.stiffness *= self.contact_stiffness_scale;
        c.damping *= self.contact_damping_scale;
        c.tangential_stiffness *= self.tangential_scale;
        c.tangential_damping *= self.tangential_scale;
        s.env.sim_dt /= self.timestep_divisor as f64;
        s.env.decimation *= self.timestep_divisor;
        s.env.validate()?;
        s.episode_params = Some(EpisodeParams {
            friction: self.friction,
            mass_scale: self.base_mass_scale,
            gain_scale: vec![self.gain_scale; NUM_JOINTS],
        });
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sim2SimReport {
    pub profile: PerturbationProfile,
    pub nominal: EvaluationReport,
    pub perturbed: EvaluationReport,
}

impl Sim2SimReport {
    /// Paired table: for every report column, nominal, perturbed and delta.
    pub fn write_paired(&self, path: &Path) -> CliResult<()> {
        let cols = report_header();
        let numeric = self.nominal.rows.first().map(|r| r.values().len()).unwrap_or(0);
        let mut header = vec!["command".to_string()];
        for c in &cols[1..numeric] {
            header.extend([format!("{c}_nominal"), format!("{c}_perturbed"), format!("{c}_delta")]);
        }
        let rows: Vec<Vec<String>> = self
            .nominal
            .rows
            .iter()
            .zip(&self.perturbed.rows)
            .map(|(a, b)| {
                let (va, vb) = (a.values(), b.values());
                let mut row = vec![fmt_f64(a.command)];
                for i in 1..numeric {
                    row.extend([fmt_f64(va[i]), fmt_f64(vb[i]), fmt_f64(vb[i] - va[i])]);
                }
                row
            })
            .collect();
        write_csv(path, &header, &rows)
    }
}

pub fn run_sim2sim(
    setup: &EvalSetup,
    policies: &[LoadedPolicy],
    eval: &EvalConfig,
    profile: &PerturbationProfile,
    out: &Path,
) -> CliResult<Sim2SimReport> {
    let perturbed_setup = profile.apply(setup)?;
    let (nominal, _) = evaluate(setup, policies, eval, &out.join("nominal"))?;
    let (perturbed, _) = evaluate(&perturbed_setup, policies, eval, &out.join("perturbed"))?;
    let report = Sim2SimReport { profile: profile.clone(), nominal, perturbed };
    report.write_paired(&out.join("sim2sim.csv"))?;
    let json = serde_json::to_string_pretty(&report).map_err(|e| CliError::Other(e.to_string()))?;
    write_atomic(&out.join("sim2sim.json"), json.as_bytes())?;
    Ok(report)
}

pub fn cmd_sim2sim(
    checkpoints: &[std::path::PathBuf],
    overrides: &crate::eval::EvalOverrides,
    profile: &str,
    out: Option<&Path>,
) -> CliResult<Sim2SimReport> {
    let profile = PerturbationProfile::resolve(profile)?;
    let ctx = crate::eval::load_eval_context(checkpoints, overrides)?;
    let out = out.map(Path::to_path_buf).unwrap_or_else(|| ctx.default_out.with_file_name(format!("sim2sim_{}", profile.name)));
    run_sim2sim(&ctx.setup, &ctx.policies, &ctx.config.eval, &profile, &out)
}
