//! Acceptance suite. Each test checks one acceptance criterion and prints a
//! single `criterion N ...: PASS|FAIL` line before asserting.
//!
//! Criterion 7 trains ten humanoid policies and is `#[ignore]`d; run it with
//! `cargo test -p strider-cli --test acceptance -- --ignored --nocapture`.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use nalgebra::{Matrix3, Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use strider_cli::config::RunConfig;
use strider_cli::eval::{aggregate, run_grid, EvalSetup, LoadedPolicy};
use strider_core::curriculum::{CurriculumConfig, CurriculumState};
use strider_core::env::{Environment, ACTION_DIM, OBS_DIM, OBS_FRAME, PRIV_DIM, PRIV_FRAME};
use strider_core::kinodyn::{total_angular_momentum, BodyGroup, BodySnapshot, LinkState};
use strider_core::rewards::{
    angular_momentum_reward_from_norm, compose_raw, reward_base_height, reward_feet_clearance,
    reward_joint_position, reward_velocity_tracking, ClearanceMode, GeneralTerms, RawTerms, RewardWeights,
};
use strider_core::trainer::checkpoint::{from_bytes, to_bytes};
use strider_core::trainer::ppo::{loss_and_grad, LossCoefficients};
use strider_core::trainer::{
    compute_gae, load_checkpoint, ppo_update, read_metrics, ActorCritic, Adam, Checkpoint, PolicyLayout,
    PolicyShape, TrainerConfig, UpdateBatch,
};

fn report(n: u32, name: &str, pass: bool, elapsed: Duration, detail: &str) {
    let status = if pass { "PASS" } else { "FAIL" };
    // Written to the process stdout directly so the line survives libtest's output capture.
    let line = format!("criterion {n} ({name}): {status} in {:.2?}; {detail}\n", elapsed);
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

// ---------------------------------------------------------------------------
// 1. Dimensions

#[test]
fn criterion_1_dimensions() {
    let start = Instant::now();
    let cfg = RunConfig::default();
    let model = cfg.model().unwrap();
    let mut env = cfg.humanoid(&model, 0);
    let curriculum = cfg.curriculum_state().unwrap();
    env.reset(&curriculum);
    let dims = env.dims();
    let obs = env.observation();
    let privileged = env.privileged_observation();
    let step = env.step(&vec![0.0; dims.action], &curriculum);
    let checks = [
        ("actor frame", OBS_FRAME, 59),
        ("critic frame", PRIV_FRAME, 89),
        ("stacked actor", OBS_DIM, 885),
        ("stacked critic", PRIV_DIM, 267),
        ("action", ACTION_DIM, 16),
        ("env observation", dims.observation, 885),
        ("env privileged", dims.privileged, 267),
        ("env action", dims.action, 16),
        ("observation vector", obs.len(), 885),
        ("privileged vector", privileged.len(), 267),
        ("observation after step", env.observation().len(), 885),
    ];
    let bad: Vec<String> =
        checks.iter().filter(|c| c.1 != c.2).map(|c| format!("{} = {} (want {})", c.0, c.1, c.2)).collect();
    let elapsed = start.elapsed();
    let pass = bad.is_empty() && step.fault.is_none() && elapsed < Duration::from_secs(1);
    report(1, "dimensions", pass, elapsed, &format!("{} checks, mismatches {:?}", checks.len(), bad));
    assert!(bad.is_empty(), "{bad:?}");
    assert!(step.fault.is_none());
    assert!(elapsed < Duration::from_secs(1));
}

// ---------------------------------------------------------------------------
// 2. Centroidal momentum against a brute-force pairwise oracle

fn random_link<R: Rng>(rng: &mut R) -> LinkState {
    let mass = rng.gen_range(0.2..12.0);
    // Solid box with random edge lengths, rotated randomly.
    let (a, b, c): (f64, f64, f64) = (rng.gen_range(0.02..0.5), rng.gen_range(0.02..0.5), rng.gen_range(0.02..0.5));
    let principal = Matrix3::from_diagonal(&Vector3::new(
        mass * (b * b + c * c) / 12.0,
        mass * (a * a + c * c) / 12.0,
        mass * (a * a + b * b) / 12.0,
    ));
    let axis = Vector3::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
    let r = Rotation3::from_scaled_axis(axis).into_inner();
    let v3 = |rng: &mut R, s: f64| Vector3::new(rng.gen_range(-s..s), rng.gen_range(-s..s), rng.gen_range(-s..s));
    LinkState {
        mass,
        inertia: r * principal * r.transpose(),
        com_position: v3(rng, 1.0),
        com_velocity: v3(rng, 2.0),
        angular_velocity: v3(rng, 5.0),
        group: BodyGroup::ALL[rng.gen_range(0..BodyGroup::ALL.len())],
    }
}

/// `sum_i I_i w_i + 1/(2M) sum_i sum_j m_i m_j (p_i - p_j) x (v_i - v_j)`, written
/// out component by component without the CoM.
fn pairwise_oracle(links: &[LinkState]) -> [f64; 3] {
    let total_mass: f64 = links.iter().map(|l| l.mass).sum();
    let mut out = [0.0; 3];
    for l in links {
        for (r, o) in out.iter_mut().enumerate() {
            for c in 0..3 {
                *o += l.inertia[(r, c)] * l.angular_velocity[c];
            }
        }
    }
    for a in links {
        for b in links {
            let dp = [
                a.com_position[0] - b.com_position[0],
                a.com_position[1] - b.com_position[1],
                a.com_position[2] - b.com_position[2],
            ];
            let dv = [
                a.com_velocity[0] - b.com_velocity[0],
                a.com_velocity[1] - b.com_velocity[1],
                a.com_velocity[2] - b.com_velocity[2],
            ];
            let w = a.mass * b.mass / (2.0 * total_mass);
            out[0] += w * (dp[1] * dv[2] - dp[2] * dv[1]);
            out[1] += w * (dp[2] * dv[0] - dp[0] * dv[2]);
            out[2] += w * (dp[0] * dv[1] - dp[1] * dv[0]);
        }
    }
    out
}

fn rel_err(a: &Vector3<f64>, b: &[f64; 3]) -> f64 {
    let b = Vector3::new(b[0], b[1], b[2]);
    (a - b).norm() / b.norm().max(1e-12)
}

#[test]
fn criterion_2_momentum_oracle() {
    const TOL: f64 = 1e-9;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst_oracle, mut worst_shift, mut worst_boost, mut worst_groups) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..1000 {
        let n = rng.gen_range(3..=10);
        let links: Vec<LinkState> = (0..n).map(|_| random_link(&mut rng)).collect();
        let snap = BodySnapshot::new(links.clone(), 0.0);
        let report = total_angular_momentum(&snap).unwrap();
        let oracle = pairwise_oracle(&links);
        worst_oracle = worst_oracle.max(rel_err(&report.total, &oracle));

        let group_sum = BodyGroup::ALL.iter().fold(Vector3::zeros(), |acc, g| acc + report.group(*g));
        worst_groups = worst_groups.max((group_sum - report.total).norm());

        let d = Vector3::new(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0));
        let shifted: Vec<LinkState> =
            links.iter().map(|l| LinkState { com_position: l.com_position + d, ..l.clone() }).collect();
        let l_shift = total_angular_momentum(&BodySnapshot::new(shifted, 0.0)).unwrap().total;
        worst_shift = worst_shift.max(rel_err(&l_shift, &oracle));

        let u = Vector3::new(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0));
        let boosted: Vec<LinkState> =
            links.iter().map(|l| LinkState { com_velocity: l.com_velocity + u, ..l.clone() }).collect();
        let l_boost = total_angular_momentum(&BodySnapshot::new(boosted, 0.0)).unwrap().total;
        worst_boost = worst_boost.max(rel_err(&l_boost, &oracle));
    }
    let elapsed = start.elapsed();
    let pass = worst_oracle <= TOL
        && worst_shift <= TOL
        && worst_boost <= TOL
        && worst_groups == 0.0
        && elapsed < Duration::from_secs(5);
    report(
        2,
        "momentum oracle",
        pass,
        elapsed,
        &format!(
            "1000 snapshots, max rel err vs oracle {worst_oracle:.2e}, translated {worst_shift:.2e}, boosted {worst_boost:.2e} (tol {TOL:e})"
        ),
    );
    assert!(worst_oracle <= TOL, "oracle mismatch {worst_oracle}");
    assert!(worst_shift <= TOL, "translation changed momentum by {worst_shift}");
    assert!(worst_boost <= TOL, "boost changed momentum by {worst_boost}");
    assert_eq!(worst_groups, 0.0, "per-group momenta must sum to the total exactly");
    assert!(elapsed < Duration::from_secs(5));
}

// ---------------------------------------------------------------------------
// 3. Reward unit values and composition

const EXP_M1: f64 = 0.367_879_441_171_442_33;
const EXP_M4: f64 = 0.018_315_638_888_734_18;

fn raw_only(f: impl FnOnce(&mut RawTerms)) -> RawTerms {
    let mut raw = RawTerms::default();
    f(&mut raw);
    raw
}

#[test]
fn criterion_3_reward_values() {
    const TOL: f64 = 1e-12;
    let start = Instant::now();
    let defaults = RewardWeights::default();
    let cases: Vec<(&str, f64, f64)> = vec![
        ("momentum |L| = ln 5", angular_momentum_reward_from_norm(5f64.ln(), -5.0, 0.0).unwrap(), -5.0),
        ("momentum |L| = 10", angular_momentum_reward_from_norm(10.0, -5.0, 0.0).unwrap(), -5.0),
        ("base height 0.01 m off target, beta 100", reward_base_height(0.03, 0.8, 100.0, 0.05, 0.5).unwrap(), EXP_M1),
        (
            "feet clearance h 0.10, target 0.06",
            reward_feet_clearance(&[0.10, 0.0], 0.06, 1.0, &[1.0, 0.0], ClearanceMode::Literal).unwrap(),
            0.04,
        ),
        (
            "joint position error 0.5",
            reward_joint_position(&[0.0, 0.0], &[0.3, 0.4], &[0.0, 0.0], -2.0, 0.2, 0.0, 0.5, 5.0).unwrap(),
            0.267_879_441_171_442_33,
        ),
        (
            "joint position error 2.0",
            reward_joint_position(&[0.0, 0.0], &[1.2, 1.6], &[0.0, 0.0], -2.0, 0.2, 0.0, 0.5, 5.0).unwrap(),
            EXP_M4 - 0.1,
        ),
        ("velocity tracking error 0.5, sigma 4", reward_velocity_tracking(&[1.3, 0.4, 0.0], &[1.0, 0.0, 0.0], 4.0), EXP_M1),
        ("compose r_b = 1 only", compose_raw(&raw_only(|r| r.base_height = 1.0), &defaults).total, 0.02),
        ("compose r_a = -1 only", compose_raw(&raw_only(|r| r.angular_momentum = -1.0), &defaults).total, -0.05),
    ];
    let worst = cases.iter().map(|c| (c.1 - c.2).abs()).fold(0.0, f64::max);
    let failures: Vec<String> = cases
        .iter()
        .filter(|c| (c.1 - c.2).abs() > TOL)
        .map(|c| format!("{}: got {} want {}", c.0, c.1, c.2))
        .collect();

    // Composition identity, bit for bit, on random raw terms and weights.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut identity_failures = 0;
    for _ in 0..10_000 {
        let mut x = || rng.gen_range(-5.0..5.0);
        let raw = RawTerms {
            angular_momentum: x(),
            base_height: x(),
            feet_clearance: x(),
            joint_position: x(),
            general: GeneralTerms {
                lin_vel_tracking: x(),
                yaw_tracking: x(),
                orientation: x(),
                action_rate: x(),
                torque: x(),
                alive: x(),
            },
        };
        let mut w = RewardWeights::default();
        for v in [&mut w.alpha_a, &mut w.alpha_v, &mut w.alpha_c, &mut w.alpha_b, &mut w.alpha_f, &mut w.alpha_p] {
            *v = rng.gen_range(-2.0..2.0);
        }
        let b = compose_raw(&raw, &w);
        let g = &raw.general;
        let gw = &w.general;
        let general = gw.lin_vel_tracking * g.lin_vel_tracking
            + gw.yaw_tracking * g.yaw_tracking
            + gw.orientation * g.orientation
            + gw.action_rate * g.action_rate
            + gw.torque * g.torque
            + gw.alive * g.alive;
        let expected = w.alpha_a * raw.angular_momentum
            + w.alpha_v * (w.alpha_b * raw.base_height + w.alpha_f * raw.feet_clearance + w.alpha_p * raw.joint_position)
            + w.alpha_c * general;
        let parts = b.angular + b.velocity + b.general;
        if b.total.to_bits() != expected.to_bits() || b.total.to_bits() != parts.to_bits() {
            identity_failures += 1;
        }
    }
    let elapsed = start.elapsed();
    let pass = failures.is_empty() && identity_failures == 0 && elapsed < Duration::from_secs(1);
    report(
        3,
        "reward values",
        pass,
        elapsed,
        &format!(
            "{} unit values, max abs err {worst:.1e} (tol {TOL:e}); composition identity mismatches {identity_failures}/10000",
            cases.len()
        ),
    );
    assert!(failures.is_empty(), "{failures:?}");
    assert_eq!(identity_failures, 0);
    assert!(elapsed < Duration::from_secs(1));
}

// ---------------------------------------------------------------------------
// 4. Curriculum state machine

#[test]
fn criterion_4_curriculum() {
    let start = Instant::now();
    let config = CurriculumConfig::default();
    let inputs = [0.5, 0.8, 0.799_99, 0.9, 1.0, 0.85, 0.95, 0.81, 0.99, 0.3, 0.9];
    // Hand-derived: +0.5 m/s capped at 3.5, x0.95 floored at 0.48, on r >= 0.8.
    let expected = [
        (1.0, 0.64),
        (1.5, 0.608),
        (1.5, 0.608),
        (2.0, 0.5776),
        (2.5, 0.548_72),
        (3.0, 0.521_284),
        (3.5, 0.495_219_8),
        (3.5, 0.48),
        (3.5, 0.48),
        (3.5, 0.48),
        (3.5, 0.48),
    ];
    let mut state = CurriculumState::from_config(&config).unwrap();
    let mut script_ok = state.v_max == 1.0 && state.cycle_time == 0.64;
    let mut trace = Vec::new();
    for (r, (v, c)) in inputs.iter().zip(expected) {
        state = state.apply_gate(*r, 1.0).unwrap().0;
        trace.push((state.v_max, state.cycle_time));
        script_ok &= state.v_max == v && (state.cycle_time - c).abs() <= 1e-12;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut violations = 0usize;
    for _ in 0..100_000 {
        let mut s = CurriculumState::from_config(&config).unwrap();
        for _ in 0..rng.gen_range(1..=20) {
            let r: f64 = rng.gen_range(0.0..1.0);
            let (next, outcome) = s.apply_gate(r, 1.0).unwrap();
            let ok = next.v_max >= s.v_max
                && next.cycle_time <= s.cycle_time
                && next.v_max <= 3.5
                && next.cycle_time >= 0.48
                && outcome.met == (r >= 0.8)
                && (next.v_max - s.v_max == 0.0 || next.v_max - s.v_max == 0.5 || next.v_max == 3.5)
                && (outcome.met || next == s);
            if !ok {
                violations += 1;
            }
            s = next;
        }
    }
    let elapsed = start.elapsed();
    let pass = script_ok && violations == 0 && elapsed < Duration::from_secs(5);
    report(
        4,
        "curriculum",
        pass,
        elapsed,
        &format!("scripted replay {}, monotonicity violations {violations} over 1e5 random sequences", if script_ok { "exact" } else { "differs" }),
    );
    assert!(script_ok, "trace {trace:?}");
    assert_eq!(violations, 0);
    assert!(elapsed < Duration::from_secs(5));
}

// ---------------------------------------------------------------------------
// 5. PPO and GAE

fn tiny_batch(ac: &ActorCritic, rows: usize, rng: &mut ChaCha8Rng) -> UpdateBatch {
    let layout = &ac.layout;
    let (od, pd, ad) = (layout.obs_dim(), layout.privileged_dim(), layout.action_dim);
    let mut b = UpdateBatch { obs_dim: od, privileged_dim: pd, action_dim: ad, ..Default::default() };
    for _ in 0..rows {
        let obs: Vec<f64> = (0..od).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let (action, logp) = ac.act(&obs, Some(&mut *rng)).unwrap();
        b.obs.extend(obs);
        b.privileged.extend((0..pd).map(|_| rng.gen_range(-1.5..1.5)));
        b.actions.extend(action);
        b.old_log_probs.push(logp);
        b.advantages.push(rng.gen_range(-1.0..1.0));
        b.returns.push(rng.gen_range(-1.0..1.0));
        b.valid.push(true);
    }
    b
}

fn gae_cases() -> Vec<(&'static str, f64, f64)> {
    let g = 0.994;
    let mut out = Vec::new();
    let (a, r) = compute_gae(&[1.0], &[0.5], &[false], &[1.0], 1, g, 0.9).unwrap();
    out.push(("one step, bootstrap", a[0], 1.494));
    out.push(("one step, return", r[0], 1.994));
    let (a, _) = compute_gae(&[1.0], &[0.5], &[true], &[1.0], 1, g, 0.9).unwrap();
    out.push(("one step, terminal", a[0], 0.5));
    let (a, _) = compute_gae(&[1.0, 2.0], &[0.5, 1.0], &[false, false], &[2.0], 1, g, 0.9).unwrap();
    out.push(("two steps, t=1", a[1], 2.988));
    out.push(("two steps, t=0", a[0], 4.167_064_8));
    // Two envs, time-major; env 0 terminates at t=0.
    let (a, _) = compute_gae(&[1.0, 0.0, 1.0, 0.0], &[0.0; 4], &[true, false, false, false], &[10.0, 0.0], 2, g, 0.9)
        .unwrap();
    out.push(("two envs, done cuts bootstrap", a[0], 1.0));
    out.push(("two envs, t=1 bootstrap", a[2], 10.94));
    let (a, _) = compute_gae(&[1.0, 2.0], &[0.5, 1.0], &[false, false], &[2.0], 1, g, 0.0).unwrap();
    out.push(("lambda 0 is one-step TD", a[0], 1.494));
    out
}

#[test]
fn criterion_5_ppo() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let layout = PolicyLayout::new(5, 4, 3, &[6, 5], &[6]);
    let ac = ActorCritic::new(layout, -0.3, &mut rng);
    let batch = tiny_batch(&ac, 16, &mut rng);
    let all: Vec<usize> = (0..batch.len()).collect();
    let coeffs = LossCoefficients { clip_ratio: 0.2, entropy_coeff: 0.01, value_coeff: 0.5 };

    // Ratio on fresh data, both in the loss and inside the update loop.
    let (fresh, _) = loss_and_grad(&ac, &batch, &all, &coeffs).unwrap();
    let config = TrainerConfig {
        minibatch_size: 8,
        epochs: 2,
        learning_rate: 1e-3,
        entropy_coeff: 0.0,
        ..TrainerConfig::default()
    };
    let mut work = ac.clone();
    let stats = ppo_update(&mut work, &mut Adam::new(ac.params.len()), &batch, &config, &mut rng).unwrap();
    let ratio_ok = fresh.max_ratio_deviation == 0.0 && stats.fresh_max_ratio_deviation == 0.0;

    // Zero advantages and no entropy bonus leave the actor untouched.
    let mut zero = batch.clone();
    zero.advantages.iter_mut().for_each(|a| *a = 0.0);
    let mut still = ac.clone();
    ppo_update(&mut still, &mut Adam::new(ac.params.len()), &zero, &config, &mut rng).unwrap();
    let actor_end = ac.layout.log_std_range().end;
    let stationary = still.params[..actor_end].iter().zip(&ac.params[..actor_end]).all(|(a, b)| a.to_bits() == b.to_bits());

    // Analytic gradient against central differences, off the ratio = 1 point
    // but inside the clip range.
    let mut shifted = batch.clone();
    shifted.old_log_probs.iter_mut().for_each(|lp| *lp += rng.gen_range(-0.05..0.05));
    let (_, analytic) = loss_and_grad(&ac, &shifted, &all, &coeffs).unwrap();
    let h = 1e-6;
    let mut numeric = vec![0.0; ac.params.len()];
    for (i, g) in numeric.iter_mut().enumerate() {
        let mut p = ac.clone();
        p.params[i] += h;
        let up = loss_and_grad(&p, &shifted, &all, &coeffs).unwrap().0.total;
        p.params[i] -= 2.0 * h;
        let down = loss_and_grad(&p, &shifted, &all, &coeffs).unwrap().0.total;
        *g = (up - down) / (2.0 * h);
    }
    let diff: f64 = analytic.iter().zip(&numeric).map(|(a, n)| (a - n) * (a - n)).sum::<f64>().sqrt();
    let norm: f64 = numeric.iter().map(|n| n * n).sum::<f64>().sqrt();
    let grad_rel = diff / norm;
    let worst_component = analytic
        .iter()
        .zip(&numeric)
        .map(|(a, n)| (a - n).abs() / (n.abs().max(a.abs()).max(1e-6)))
        .fold(0.0, f64::max);
    let grad_ok = grad_rel <= 1e-4 && worst_component <= 1e-4;

    let gae = gae_cases();
    let gae_bad: Vec<String> =
        gae.iter().filter(|c| (c.1 - c.2).abs() > 1e-12).map(|c| format!("{}: {} vs {}", c.0, c.1, c.2)).collect();

    let elapsed = start.elapsed();
    let pass = ratio_ok && stationary && grad_ok && gae_bad.is_empty() && elapsed < Duration::from_secs(60);
    report(
        5,
        "ppo",
        pass,
        elapsed,
        &format!(
            "fresh ratio dev {:e}/{:e}, zero-adv actor unchanged {stationary}, grad rel err {grad_rel:.2e} (worst comp {worst_component:.2e}) over {} params, GAE cases {}/{}",
            fresh.max_ratio_deviation,
            stats.fresh_max_ratio_deviation,
            numeric.len(),
            gae.len() - gae_bad.len(),
            gae.len()
        ),
    );
    assert!(ratio_ok);
    assert!(stationary);
    assert!(grad_ok, "gradient mismatch: rel {grad_rel}, component {worst_component}");
    assert!(gae_bad.is_empty(), "{gae_bad:?}");
    assert!(elapsed < Duration::from_secs(60));
}

// ---------------------------------------------------------------------------
// 6. Point-mass smoke training

#[test]
fn criterion_6_point_mass_smoke() {
    const BUDGET: u64 = 200_000;
    let start = Instant::now();
    let cfg = RunConfig::load(&configs_dir().join("smoke_pointmass.toml")).unwrap();
    let target = 0.8 * cfg.rewards.params.tracking_reward_max();
    let tmp = tempfile::tempdir().unwrap();
    let mut reached = Vec::new();
    for seed in [0u64, 1, 2] {
        let dir = tmp.path().join(format!("seed_{seed}"));
        strider_cli::train::train_seed(&cfg, seed, &dir).unwrap();
        let rows = read_metrics(&dir.join("metrics.csv")).unwrap();
        let hit = rows.iter().find(|r| r.env_steps <= BUDGET && r.mean_tracking >= target).map(|r| r.env_steps);
        reached.push((seed, hit, rows.iter().map(|r| r.mean_tracking).fold(0.0, f64::max)));
    }
    let passes = reached.iter().filter(|r| r.1.is_some()).count();
    let elapsed = start.elapsed();
    let pass = passes >= 2 && elapsed < Duration::from_secs(600);
    let detail: Vec<String> = reached
        .iter()
        .map(|(s, hit, best)| match hit {
            Some(steps) => format!("seed {s} reached {target} at {steps} steps"),
            None => format!("seed {s} missed (best {best:.3})"),
        })
        .collect();
    report(6, "point-mass smoke", pass, elapsed, &format!("{passes}/3 seeds; {}", detail.join(", ")));
    assert!(passes >= 2, "{detail:?}");
    assert!(elapsed < Duration::from_secs(600));
}

// ---------------------------------------------------------------------------
// 7. Directional momentum ablation at desk scale

#[test]
#[ignore = "hours-scale: trains 2 x 5 humanoid policies"]
fn criterion_7_directional_ablation() {
    use strider_cli::ablate::{run_ablation, Toggle};
    let start = Instant::now();
    let cfg = RunConfig::load(&configs_dir().join("ablation_desk.toml")).unwrap();
    let out = std::env::var_os("STRIDER_ACCEPTANCE_OUT")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_TARGET_TMPDIR")).join("criterion_7"));
    let (_, summary) = run_ablation(&cfg, &[vec![Toggle::NoAngularMomentum]], &cfg.seeds, &out).unwrap();
    let cmp = &summary.comparisons[0];
    let advanced = summary.min_final_v_max >= cfg.curriculum.v_max_initial + cfg.curriculum.v_increment;
    let pass = cmp.baseline_lower >= 4 && advanced;
    report(
        7,
        "directional ablation",
        pass,
        start.elapsed(),
        &format!(
            "baseline lower |L_z| in {}/{} seed pairs at {:?} m/s; smallest final v_max {} (needs >= {}); output {}",
            cmp.baseline_lower,
            cmp.baseline_abs_lz.len(),
            cmp.command,
            summary.min_final_v_max,
            cfg.curriculum.v_max_initial + cfg.curriculum.v_increment,
            out.display()
        ),
    );
    assert!(advanced, "the velocity curriculum did not advance in every run");
    assert!(cmp.baseline_lower >= 4, "{cmp:?}");
}

// ---------------------------------------------------------------------------
// 8. Fall-as-zero evaluation rule

/// A policy whose constant output drives every joint target far from the
/// standing pose.
fn collapsing_policy(cfg: &RunConfig, dims: strider_core::env::EnvDims) -> LoadedPolicy {
    let shape = PolicyShape {
        obs_dim: dims.observation,
        privileged_dim: dims.privileged,
        action_dim: dims.action,
        actor_hidden: vec![4],
        critic_hidden: vec![4],
    };
    let layout = shape.layout();
    let mut params = vec![0.0; layout.num_params()];
    let (_, bias, _, n_out) = layout.actor.layer(layout.actor.num_layers() - 1);
    params[bias..bias + n_out].fill(4.0);
    LoadedPolicy {
        label: "collapse".into(),
        checkpoint: Checkpoint {
            policy: ActorCritic::from_params(layout, params).unwrap(),
            shape,
            obs_norm: None,
            priv_norm: None,
            curriculum: cfg.curriculum_state().unwrap(),
            config: cfg.trainer.clone(),
            iteration: 0,
            env_steps: 0,
        },
    }
}

#[test]
fn criterion_8_fall_as_zero() {
    let start = Instant::now();
    let mut cfg = RunConfig::default();
    cfg.eval.grid = vec![0.0, 1.0];
    cfg.eval.episodes_per_point = 2;
    cfg.eval.episode_length_s = 4.0;
    cfg.eval.record_trajectories = false;
    let setup = EvalSetup::from_config(&cfg).unwrap();
    let dims = cfg.humanoid(&setup.model, 0).dims();
    let policies = [collapsing_policy(&cfg, dims)];
    let episodes = run_grid(&setup, &policies, &cfg.eval).unwrap();
    let rows = aggregate(&cfg.eval.grid, &episodes, policies.len());
    let mut checked = 0;
    let mut ok = true;
    for row in &rows {
        let at: Vec<_> = episodes.iter().filter(|e| e.command == row.command).collect();
        if at.iter().all(|e| e.fell) {
            checked += 1;
            // The raw mean velocity of a collapsing robot is not zero, so an
            // exact zero shows the rule was applied rather than coincidence.
            ok &= row.mean_velocity == 0.0 && row.fall_rate == 1.0 && at.iter().any(|e| e.mean_velocity != 0.0);
        }
    }
    let elapsed = start.elapsed();
    let pass = checked == rows.len() && ok && elapsed < Duration::from_secs(60);
    let means: Vec<(f64, f64, f64)> = rows.iter().map(|r| (r.command, r.mean_velocity, r.fall_rate)).collect();
    report(
        8,
        "fall-as-zero",
        pass,
        elapsed,
        &format!("{checked}/{} grid points fell in every episode; (command, mean velocity, fall rate) = {means:?}", rows.len()),
    );
    assert_eq!(checked, rows.len(), "the collapsing policy did not fall in every episode: {means:?}");
    assert!(ok, "{means:?}");
    assert!(elapsed < Duration::from_secs(60));
}

// ---------------------------------------------------------------------------
// 9. Determinism and persistence

fn tiny_humanoid_config() -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.trainer = TrainerConfig {
        num_envs: 4,
        horizon: 16,
        minibatch_size: 32,
        epochs: 2,
        max_iterations: 3,
        actor_hidden: vec![16],
        critic_hidden: vec![16],
        checkpoint_interval: 1,
        curriculum_window: 2,
        learning_rate: 1e-3,
        ..TrainerConfig::default()
    };
    cfg
}

#[test]
fn criterion_9_determinism_and_persistence() {
    let start = Instant::now();
    let cfg = tiny_humanoid_config();
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let out_a = strider_cli::train::train_seed(&cfg, 11, &a).unwrap();
    strider_cli::train::train_seed(&cfg, 11, &b).unwrap();
    let log_a = std::fs::read(a.join("metrics.csv")).unwrap();
    let log_b = std::fs::read(b.join("metrics.csv")).unwrap();
    let logs_identical = log_a == log_b && !log_a.is_empty();

    let path = out_a.checkpoints.last().unwrap();
    let loaded = load_checkpoint(path).unwrap();
    let reloaded = from_bytes(&to_bytes(&loaded).unwrap()).unwrap();
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    let params_exact = bits(&loaded.policy.params) == bits(&reloaded.policy.params);
    let norms_exact = match (&loaded.obs_norm, &reloaded.obs_norm) {
        (Some(x), Some(y)) => bits(&x.mean) == bits(&y.mean) && bits(&x.var) == bits(&y.var) && x.count == y.count,
        (None, None) => true,
        _ => false,
    };
    let bytes_stable = to_bytes(&loaded).unwrap() == std::fs::read(path).unwrap();
    let state_equal = loaded == reloaded;
    let elapsed = start.elapsed();
    let pass = logs_identical && params_exact && norms_exact && bytes_stable && state_equal && elapsed < Duration::from_secs(60);
    report(
        9,
        "determinism and persistence",
        pass,
        elapsed,
        &format!(
            "metrics logs identical {logs_identical} ({} bytes), {} parameters bit-exact {params_exact}, normalizer exact {norms_exact}, re-serialized bytes identical {bytes_stable}",
            log_a.len(),
            loaded.policy.params.len()
        ),
    );
    assert!(logs_identical);
    assert!(params_exact && norms_exact && state_equal);
    assert!(bytes_stable);
    assert!(elapsed < Duration::from_secs(60));
}
