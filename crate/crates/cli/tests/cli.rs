use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use strider_cli::ablate::{apply_toggles, parse_toggle_set, Toggle};
use strider_cli::config::EnvKind;
use strider_cli::eval::{evaluate, EvalSetup, EvaluationReport, LoadedPolicy};
use strider_cli::plot::cmd_plot;
use strider_cli::sim2sim::{run_sim2sim, PerturbationProfile};
use strider_cli::train::train_seed;
use strider_cli::{CliError, RunConfig};
use strider_core::env::Environment;
use strider_core::trainer::{read_metrics, TrainerConfig};

fn strider(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_strider")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn write(path: &Path, text: &str) {
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    std::fs::write(path, text).unwrap();
}

fn tiny(environment: EnvKind, iterations: u64) -> RunConfig {
    let mut cfg = RunConfig { environment, ..RunConfig::default() };
    cfg.trainer = TrainerConfig {
        num_envs: 2,
        horizon: 16,
        minibatch_size: 16,
        epochs: 1,
        max_iterations: iterations,
        actor_hidden: vec![8],
        critic_hidden: vec![8],
        checkpoint_interval: 1,
        curriculum_window: 2,
        ..TrainerConfig::default()
    };
    cfg.eval.grid = vec![0.0, 0.5];
    cfg.eval.episodes_per_point = 1;
    cfg.eval.episode_length_s = 0.5;
    cfg
}

/// A humanoid checkpoint from a zero-iteration run, with its eval setup.
fn humanoid_policy(cfg: &RunConfig, dir: &Path) -> (EvalSetup, Vec<LoadedPolicy>) {
    let out = train_seed(cfg, 5, dir).unwrap();
    let policy = LoadedPolicy::load(&out.checkpoints[0]).unwrap();
    (EvalSetup::from_config(cfg).unwrap(), vec![policy])
}

#[test]
fn default_config_round_trips_through_toml() {
    let cfg = RunConfig::default();
    let text = cfg.to_toml_string().unwrap();
    assert_eq!(RunConfig::from_toml_str(&text, Path::new("mem")).unwrap(), cfg);
}

#[test]
fn shipped_configs_load() {
    let mut n = 0;
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_some_and(|e| e == "toml") {
            let cfg = RunConfig::load(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            assert_eq!(RunConfig::from_toml_str(&cfg.to_toml_string().unwrap(), &p).unwrap(), cfg);
            n += 1;
        }
    }
    assert!(n >= 2);
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    write(&path, "seeds = [0]\n[trainer]\nnum_envz = 4\n");
    let err = RunConfig::load(&path).unwrap_err();
    assert!(matches!(err, CliError::Config { .. }));
    assert_eq!(err.exit_code(), 2);

    let out = strider(&["train", "--config", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("num_envz"), "{stderr}");
    assert!(stderr.contains("bad.toml"), "{stderr}");
}

#[test]
fn out_of_range_value_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    write(&path, "[trainer]\ndiscount = 1.5\n");
    let out = strider(&["train", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("discount"));
}

#[test]
fn zero_iteration_train_writes_one_directory_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny(EnvKind::PointMass, 0);
    cfg.seeds = vec![3, 7];
    let path = dir.path().join("run.toml");
    write(&path, &cfg.to_toml_string().unwrap());
    let out_dir = dir.path().join("out");
    let out = strider(&["train", "--config", path.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let saved = RunConfig::load(&out_dir.join("config.toml")).unwrap();
    assert_eq!(saved.seeds, vec![3, 7]);
    for seed in [3, 7] {
        let d = out_dir.join(format!("seed_{seed}"));
        assert_eq!(RunConfig::load(&d.join("config.toml")).unwrap().trainer.seed, seed);
        assert!(d.join("checkpoints/iter_000000.safetensors").is_file());
        let ck_count = std::fs::read_dir(d.join("checkpoints")).unwrap().count();
        assert_eq!(ck_count, 1);
        let metrics = std::fs::read_to_string(d.join("metrics.csv")).unwrap();
        assert_eq!(metrics.lines().count(), 1);
    }

    let single = dir.path().join("single");
    let out = strider(&["train", "--config", path.to_str().unwrap(), "--seed", "9", "--out", single.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(single.join("seed_9").is_dir() && !single.join("seed_3").exists());
}

#[test]
fn unknown_toggle_is_rejected() {
    let err = parse_toggle_set("no_angular_momentum,flying").unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("flying") && err.to_string().contains("arms_locked"));
    assert_eq!(
        parse_toggle_set("arms_locked, no_angular_momentum,arms_locked").unwrap(),
        vec![Toggle::NoAngularMomentum, Toggle::ArmsLocked]
    );
    assert!(parse_toggle_set("baseline").unwrap().is_empty());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    write(&path, &tiny(EnvKind::Humanoid, 0).to_toml_string().unwrap());
    let out = strider(&["ablate", "--config", path.to_str().unwrap(), "--toggles", "bogus", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
}

#[test]
fn disabling_momentum_zeroes_its_contribution() {
    let cfg = apply_toggles(&tiny(EnvKind::Humanoid, 0), &[Toggle::NoAngularMomentum]);
    assert_eq!(cfg.rewards.weights.alpha_a, 0.0);
    let model = cfg.model().unwrap();
    let mut env = cfg.humanoid(&model, 1);
    let curriculum = cfg.curriculum_state().unwrap();
    env.reset(&curriculum);
    for _ in 0..20 {
        let step = env.step(&[0.3; 16], &curriculum);
        let b = step.breakdown.unwrap();
        assert_eq!(b.angular, 0.0);
        let term = b.term("angular_momentum").unwrap();
        assert_eq!(term.weighted, 0.0);
        assert!(term.raw <= -1.0);
    }
}

#[test]
fn locked_arms_do_not_move_during_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = apply_toggles(&tiny(EnvKind::Humanoid, 0), &[Toggle::ArmsLocked]);
    let (setup, policies) = humanoid_policy(&cfg, &dir.path().join("run"));
    let (report, episodes) = evaluate(&setup, &policies, &cfg.eval, &dir.path().join("eval")).unwrap();
    assert!(episodes.iter().all(|e| e.arm_joint_travel == 0.0));
    assert!(report.rows.iter().all(|r| r.arm_joint_travel == 0.0));
}

#[test]
fn identity_profile_reproduces_the_nominal_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(EnvKind::Humanoid, 0);
    let (setup, policies) = humanoid_policy(&cfg, &dir.path().join("run"));
    let profile = PerturbationProfile::builtin("identity").unwrap();
    let out = dir.path().join("s2s");
    let report = run_sim2sim(&setup, &policies, &cfg.eval, &profile, &out).unwrap();
    assert_eq!(report.nominal, report.perturbed);

    let mut rdr = csv::Reader::from_path(out.join("sim2sim.csv")).unwrap();
    let header = rdr.headers().unwrap().clone();
    assert!(header.iter().any(|h| h == "mean_velocity_delta"));
    assert!(header.iter().any(|h| h == "fall_rate_delta"));
    for rec in rdr.records() {
        let rec = rec.unwrap();
        for (h, v) in header.iter().zip(rec.iter()) {
            if h.ends_with("_delta") {
                assert_eq!(v.parse::<f64>().unwrap(), 0.0, "{h}");
            }
        }
    }
    assert!(PerturbationProfile::resolve("no_such_profile").is_err());
}

#[test]
fn plot_without_inputs_names_the_expected_files() {
    let dir = tempfile::tempdir().unwrap();
    let err = cmd_plot(dir.path()).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("metrics.csv") && err.to_string().contains("report.json"));
    let out = strider(&["plot", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn plot_tables_match_metrics_and_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    train_seed(&tiny(EnvKind::PointMass, 4), 0, &run).unwrap();
    let rows = read_metrics(&run.join("metrics.csv")).unwrap();
    let written = cmd_plot(&run).unwrap();
    assert!(written.iter().any(|p| p.ends_with("plots/learning_curve.svg")));

    let table = run.join("plots/learning_curve.csv");
    let mut rdr = csv::Reader::from_path(&table).unwrap();
    let parsed: Vec<Vec<f64>> = rdr.records().map(|r| r.unwrap().iter().map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(parsed.len(), rows.len());
    for (p, r) in parsed.iter().zip(&rows) {
        assert_eq!(p, &vec![r.iteration as f64, r.mean_reward, r.mean_tracking]);
    }
    let curriculum = std::fs::read_to_string(run.join("plots/curriculum.csv")).unwrap();
    assert!(curriculum.starts_with("iteration,v_max,cycle_time"));

    let before: BTreeMap<PathBuf, Vec<u8>> = written.iter().map(|p| (p.clone(), std::fs::read(p).unwrap())).collect();
    cmd_plot(&run).unwrap();
    for (p, bytes) in before {
        assert_eq!(std::fs::read(&p).unwrap(), bytes, "{}", p.display());
    }
}

#[test]
fn report_velocity_is_recomputable_from_trajectories() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny(EnvKind::Humanoid, 0);
    cfg.eval.episodes_per_point = 2;
    let (setup, policies) = humanoid_policy(&cfg, &dir.path().join("run"));
    let out = dir.path().join("eval");
    let (report, _) = evaluate(&setup, &policies, &cfg.eval, &out).unwrap();

    #[derive(Default)]
    struct Acc {
        sum: f64,
        n: usize,
        fell: bool,
    }
    let mut episodes: BTreeMap<(String, u64, usize), Acc> = BTreeMap::new();
    for line in std::fs::read_to_string(out.join("trajectories.jsonl")).unwrap().lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        let key = (
            v["checkpoint"].as_str().unwrap().to_string(),
            v["command"].as_f64().unwrap().to_bits(),
            v["episode"].as_u64().unwrap() as usize,
        );
        let acc = episodes.entry(key).or_default();
        acc.sum += v["forward_velocity"].as_f64().unwrap();
        acc.n += 1;
        acc.fell |= v["termination"] == "fell";
    }
    assert_eq!(episodes.len(), cfg.eval.grid.len() * cfg.eval.episodes_per_point);
    for row in &report.rows {
        let credited: Vec<f64> = episodes
            .iter()
            .filter(|((_, c, _), _)| f64::from_bits(*c) == row.command)
            .map(|(_, a)| if a.fell { 0.0 } else { a.sum / a.n as f64 })
            .collect();
        let want = credited.iter().sum::<f64>() / credited.len() as f64;
        assert!((row.mean_velocity - want).abs() <= 1e-12, "{} vs {want}", row.mean_velocity);
    }

    let out2 = dir.path().join("eval2");
    evaluate(&setup, &policies, &cfg.eval, &out2).unwrap();
    for f in ["report.json", "report.csv", "episodes.jsonl", "trajectories.jsonl"] {
        assert_eq!(std::fs::read(out.join(f)).unwrap(), std::fs::read(out2.join(f)).unwrap(), "{f}");
    }
    assert_eq!(EvaluationReport::read(&out).unwrap(), report);
}
