use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use strider_cli::ablate::cmd_ablate;
use strider_cli::eval::{cmd_eval, parse_grid, EvalOverrides};
use strider_cli::plot::cmd_plot;
use strider_cli::sim2sim::cmd_sim2sim;
use strider_cli::train::cmd_train;
use strider_cli::CliResult;

/// Train, evaluate and compare humanoid locomotion policies.
#[derive(Parser)]
#[command(name = "strider", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(clap::Args)]
struct EvalArgs {
    /// Checkpoint file or run directory; repeat to pool several seeds.
    #[arg(long = "checkpoint", required = true)]
    checkpoints: Vec<PathBuf>,
    /// Run config; defaults to the config.toml saved with the checkpoint.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated commanded velocities, m/s.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl EvalArgs {
    fn overrides(&self) -> CliResult<EvalOverrides> {
        Ok(EvalOverrides {
            config: self.config.clone(),
            grid: self.grid.as_deref().map(parse_grid).transpose()?,
            episodes: self.episodes,
            seed: self.seed,
        })
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Train every configured seed (or only --seed).
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; defaults to the config's output_dir under $STRIDER_OUTPUT_ROOT.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate checkpoints on a commanded-velocity grid.
    Eval(EvalArgs),
    /// Train and evaluate the baseline and toggled variants.
    Ablate {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated toggle set; repeat for several variants.
        #[arg(long)]
        toggles: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate checkpoints under nominal and perturbed physics.
    Sim2sim {
        #[command(flatten)]
        eval: EvalArgs,
        /// Built-in profile name or a profile TOML file.
        #[arg(long)]
        profile: String,
    },
    /// Render plots and data tables for a run or evaluation directory.
    Plot {
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Cmd::Train { config, seed, out } => {
            for r in cmd_train(&config, seed, out.as_deref())? {
                println!("seed {}: {} ({} iterations, v_max {})", r.seed, r.dir.display(), r.outcome.iterations, r.outcome.curriculum.v_max);
            }
        }
        Cmd::Eval(args) => {
            let report = cmd_eval(&args.checkpoints, &args.overrides()?, args.out.as_deref())?;
            println!("command  mean_velocity  fall_rate  mean_abs_lz");
            for r in &report.rows {
                println!("{:7.2}  {:13.4}  {:9.3}  {:11.4}", r.command, r.mean_velocity, r.fall_rate, r.mean_abs_lz);
            }
        }
        Cmd::Ablate { config, toggles, seed, out } => {
            let (variants, summary) = cmd_ablate(&config, &toggles, seed, out.as_deref())?;
            for v in &variants {
                println!("{}: {}", v.name, v.dir.display());
            }
            for c in &summary.comparisons {
                println!(
                    "{} vs baseline at {:?} m/s: baseline lower |L_z| in {}/{} seeds",
                    c.variant,
                    c.command,
                    c.baseline_lower,
                    c.baseline_abs_lz.len()
                );
            }
        }
        Cmd::Sim2sim { eval, profile } => {
            let report = cmd_sim2sim(&eval.checkpoints, &eval.overrides()?, &profile, eval.out.as_deref())?;
            println!("command  nominal_velocity  perturbed_velocity  fall_rate_delta");
            for (a, b) in report.nominal.rows.iter().zip(&report.perturbed.rows) {
                println!("{:7.2}  {:16.4}  {:18.4}  {:15.3}", a.command, a.mean_velocity, b.mean_velocity, b.fall_rate - a.fall_rate);
            }
        }
        Cmd::Plot { out } => {
            for p in cmd_plot(&out)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
