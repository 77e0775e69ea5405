use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use strider_core::curriculum::{CurriculumConfig, CurriculumState};
use strider_core::env::gait::{gait_clock, phase, reference, stance_mask, swing_mask, GaitParams};
use strider_core::env::observation::FrameStack;
use strider_core::env::robot::joint;
use strider_core::kinodyn::{total_angular_momentum, whole_body_com, BodyGroup, BodySnapshot, LinkState};
use strider_core::rewards::{
    angular_momentum_reward_from_norm, compose_raw, joint_position_reward_from_error, reward_base_height,
    reward_velocity_tracking, velocity_ratio, GeneralTerms, RawTerms, RewardWeights,
};
use strider_core::trainer::gae::compute_gae;
use strider_core::trainer::policy::{gaussian_entropy, gaussian_log_prob};
use strider_core::trainer::ppo::clipped_surrogate;
use strider_core::trainer::{ActorCritic, PolicyLayout, RunningNorm};

fn vec3(range: f64) -> impl Strategy<Value = Vector3<f64>> {
    prop::array::uniform3(-range..range).prop_map(Vector3::from)
}

fn link() -> impl Strategy<Value = LinkState> {
    (0.1..10.0f64, prop::array::uniform3(0.01..0.3f64), vec3(1.0), vec3(2.0), vec3(5.0), 0usize..5).prop_map(
        |(mass, d, p, v, w, g)| LinkState {
            mass,
            inertia: Matrix3::from_diagonal(&Vector3::new(
                mass * (d[1] * d[1] + d[2] * d[2]) / 12.0,
                mass * (d[0] * d[0] + d[2] * d[2]) / 12.0,
                mass * (d[0] * d[0] + d[1] * d[1]) / 12.0,
            )),
            com_position: p,
            com_velocity: v,
            angular_velocity: w,
            group: BodyGroup::ALL[g],
        },
    )
}

fn links(max: usize) -> impl Strategy<Value = Vec<LinkState>> {
    prop::collection::vec(link(), 1..=max)
}

proptest! {
    #[test]
    fn com_matches_term_by_term_mass_average(ls in links(5)) {
        let (p, v) = whole_body_com(&BodySnapshot::new(ls.clone(), 0.0)).unwrap();
        let m: f64 = ls.iter().map(|l| l.mass).sum();
        for k in 0..3 {
            let want_p = ls.iter().map(|l| l.mass * l.com_position[k]).sum::<f64>() / m;
            let want_v = ls.iter().map(|l| l.mass * l.com_velocity[k]).sum::<f64>() / m;
            prop_assert!((p[k] - want_p).abs() <= 1e-12 * (1.0 + want_p.abs()));
            prop_assert!((v[k] - want_v).abs() <= 1e-12 * (1.0 + want_v.abs()));
        }
    }

    #[test]
    fn momentum_is_translation_and_boost_invariant(ls in links(10), d in vec3(20.0), u in vec3(20.0)) {
        let base = total_angular_momentum(&BodySnapshot::new(ls.clone(), 0.0)).unwrap().total;
        let moved: Vec<LinkState> = ls
            .iter()
            .map(|l| LinkState { com_position: l.com_position + d, com_velocity: l.com_velocity + u, ..l.clone() })
            .collect();
        let other = total_angular_momentum(&BodySnapshot::new(moved, 0.0)).unwrap().total;
        let scale = ls.iter().map(|l| l.mass * 30.0 * 30.0 + l.inertia.norm() * 5.0).sum::<f64>();
        prop_assert!((base - other).norm() <= 1e-12 * scale);
    }

    #[test]
    fn single_link_momentum_is_spin_only(l in link()) {
        let report = total_angular_momentum(&BodySnapshot::new(vec![l.clone()], 0.0)).unwrap();
        prop_assert!((report.total - l.inertia * l.angular_velocity).norm() <= 1e-12 * (1.0 + report.total.norm()));
    }

    #[test]
    fn momentum_groups_sum_to_total(ls in links(10)) {
        let r = total_angular_momentum(&BodySnapshot::new(ls, 0.0)).unwrap();
        let sum = BodyGroup::ALL.iter().fold(Vector3::zeros(), |acc, g| acc + r.group(*g));
        prop_assert_eq!(sum, r.total);
    }

    #[test]
    fn momentum_reward_within_default_bounds(norm in 0.0..50.0f64) {
        let r = angular_momentum_reward_from_norm(norm, -5.0, 0.0).unwrap();
        prop_assert!((-5.0..=-1.0).contains(&r));
    }

    #[test]
    fn base_height_reward_in_unit_interval(h in -0.5..0.5f64, hat in 0.5..1.2f64, ratio in 0.0..1.0f64) {
        let r = reward_base_height(h, hat, 100.0, 0.05, ratio).unwrap();
        prop_assert!(r > 0.0 && r <= 1.0);
        let target = 0.05 * hat * ratio;
        prop_assert_eq!(reward_base_height(target, hat, 100.0, 0.05, ratio).unwrap(), 1.0);
    }

    #[test]
    fn joint_position_reward_strictly_decreasing(a in 0.0..5.0f64, b in 0.0..5.0f64) {
        prop_assume!((a - b).abs() > 1e-9);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let f = |e| joint_position_reward_from_error(e, -2.0, 0.2, 0.0, 0.5).unwrap();
        prop_assert!(f(lo) > f(hi));
    }

    #[test]
    fn tracking_reward_bounded(v in prop::array::uniform3(-4.0..4.0f64), c in prop::array::uniform3(-4.0..4.0f64)) {
        let r = reward_velocity_tracking(&v, &c, 4.0);
        prop_assert!((0.0..=1.0).contains(&r));
        prop_assert_eq!(reward_velocity_tracking(&c, &c, 4.0), 1.0);
    }

    #[test]
    fn velocity_ratio_monotone(a in -5.0..5.0f64, b in -5.0..5.0f64, vmax in 0.1..3.5f64) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(velocity_ratio(lo, vmax).unwrap() <= velocity_ratio(hi, vmax).unwrap());
    }

    #[test]
    fn doubling_a_raw_term_doubles_its_weighted_value(x in prop::array::uniform10(-3.0..3.0f64), k in 0usize..10) {
        let raw = |x: [f64; 10]| RawTerms {
            angular_momentum: x[0],
            base_height: x[1],
            feet_clearance: x[2],
            joint_position: x[3],
            general: GeneralTerms {
                lin_vel_tracking: x[4],
                yaw_tracking: x[5],
                orientation: x[6],
                action_rate: x[7],
                torque: x[8],
                alive: x[9],
            },
        };
        let w = RewardWeights::default();
        let mut doubled = x;
        doubled[k] *= 2.0;
        let a = compose_raw(&raw(x), &w);
        let b = compose_raw(&raw(doubled), &w);
        prop_assert_eq!(b.terms[k].weighted, 2.0 * a.terms[k].weighted);
        for (j, (ta, tb)) in a.terms.iter().zip(&b.terms).enumerate() {
            if j != k {
                prop_assert_eq!(ta.weighted, tb.weighted);
            }
        }
        let sum_cat = b.angular + b.velocity + b.general;
        prop_assert_eq!(b.total, sum_cat);
    }

    #[test]
    fn curriculum_monotone_and_bounded(gates in prop::collection::vec(0.0..1.0f64, 0..40)) {
        let mut s = CurriculumState::from_config(&CurriculumConfig::default()).unwrap();
        for r in gates {
            let (next, outcome) = s.apply_gate(r, 1.0).unwrap();
            prop_assert!(next.v_max >= s.v_max && next.v_max <= 3.5);
            prop_assert!(next.cycle_time <= s.cycle_time && next.cycle_time >= 0.48);
            if outcome.met {
                prop_assert_eq!(next.v_max, (s.v_max + s.v_increment).min(s.v_cap));
            } else {
                prop_assert_eq!(&next, &s);
            }
            prop_assert_eq!(next.v_min, 0.0);
            s = next;
        }
    }

    #[test]
    fn commands_inside_the_current_range(seed in any::<u64>(), v_max in 0.0..3.5f64) {
        let mut s = CurriculumState::from_config(&CurriculumConfig::default()).unwrap();
        s.v_max = v_max;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..32 {
            let c = s.sample_command(&mut rng);
            prop_assert!(c.v_x >= 0.0 && c.v_x <= v_max);
            prop_assert!(c.v_y.abs() <= 0.3 && c.yaw_rate.abs() <= 0.3);
        }
    }

    #[test]
    fn clock_on_unit_circle_and_phase_in_range(t in 0.0..100.0f64, cycle in 0.48..0.64f64) {
        let (s, c) = gait_clock(t, cycle).unwrap();
        prop_assert!((s * s + c * c - 1.0).abs() < 1e-12);
        let p = phase(t, cycle).unwrap();
        prop_assert!((0.0..1.0).contains(&p));
    }

    #[test]
    fn swing_and_stance_masks_complement(p in 0.0..1.0f64, width in 0.0..0.2f64) {
        let s = swing_mask(p, width);
        let st = stance_mask(p, width);
        prop_assert!((s[0] + st[0] - 1.0).abs() < 1e-15 && (s[1] + st[1] - 1.0).abs() < 1e-15);
        prop_assert!(s[0] == 0.0 || s[1] == 0.0);
    }

    #[test]
    fn arms_counter_swing_the_same_side_leg(p in 0.0..1.0f64, ratio in 0.0..1.0f64) {
        let r = reference(p, ratio, 0.64, &GaitParams::default(), true).unwrap().offsets;
        prop_assert!(r[joint::LEFT_SHOULDER_PITCH] * r[joint::LEFT_HIP_PITCH] <= 0.0);
        prop_assert!(r[joint::RIGHT_SHOULDER_PITCH] * r[joint::RIGHT_HIP_PITCH] <= 0.0);
        let half = reference((p + 0.5) % 1.0, ratio, 0.64, &GaitParams::default(), true).unwrap().offsets;
        prop_assert!((half[joint::LEFT_HIP_PITCH] - r[joint::RIGHT_HIP_PITCH]).abs() < 1e-12);
        prop_assert!((half[joint::LEFT_SHOULDER_PITCH] - r[joint::RIGHT_SHOULDER_PITCH]).abs() < 1e-12);
    }

    #[test]
    fn gae_is_linear_in_rewards_and_values(
        r1 in prop::collection::vec(-1.0..1.0f64, 12),
        r2 in prop::collection::vec(-1.0..1.0f64, 12),
        v in prop::collection::vec(-1.0..1.0f64, 12),
        dones in prop::collection::vec(any::<bool>(), 12),
        a in -2.0..2.0f64,
    ) {
        let last = [0.3, -0.2, 0.5];
        let gae = |r: &[f64], v: &[f64], last: &[f64]| compute_gae(r, v, &dones, last, 3, 0.994, 0.9).unwrap().0;
        let mixed: Vec<f64> = r1.iter().zip(&r2).map(|(x, y)| x + a * y).collect();
        let zeros = vec![0.0; 12];
        let lhs = gae(&mixed, &v, &last);
        let rhs1 = gae(&r1, &v, &last);
        let rhs2 = gae(&r2, &zeros, &[0.0; 3]);
        for i in 0..12 {
            prop_assert!((lhs[i] - (rhs1[i] + a * rhs2[i])).abs() < 1e-9);
        }
    }

    #[test]
    fn gae_with_zero_discount_is_one_step(r in prop::collection::vec(-1.0..1.0f64, 8), v in prop::collection::vec(-1.0..1.0f64, 8)) {
        let (adv, ret) = compute_gae(&r, &v, &[false; 8], &[1.0, 2.0], 2, 0.0, 0.9).unwrap();
        for i in 0..8 {
            prop_assert_eq!(adv[i], r[i] - v[i]);
            prop_assert!((ret[i] - r[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn log_prob_matches_gaussian_density(x in prop::collection::vec(-3.0..3.0f64, 4), mu in prop::collection::vec(-1.0..1.0f64, 4), ls in prop::collection::vec(-2.0..1.0f64, 4)) {
        let mut density = 1.0;
        for i in 0..4 {
            let s = ls[i].exp();
            density *= (-(x[i] - mu[i]).powi(2) / (2.0 * s * s)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt());
        }
        let lp = gaussian_log_prob(&x, &mu, &ls);
        prop_assert!((lp - density.ln()).abs() < 1e-10);
    }

    #[test]
    fn entropy_closed_form(ls in prop::collection::vec(-3.0..1.0f64, 1..20)) {
        let want: f64 = ls.iter().map(|l| 0.5 + 0.5 * (2.0 * std::f64::consts::PI).ln() + l).sum();
        prop_assert!((gaussian_entropy(&ls) - want).abs() < 1e-12);
    }

    #[test]
    fn surrogate_clips_the_ratio(ratio in 0.0..3.0f64, adv in -2.0..2.0f64) {
        let s = clipped_surrogate(ratio, adv, 0.2);
        prop_assert!(s <= ratio * adv + 1e-15);
        prop_assert!(s <= ratio.clamp(0.8, 1.2) * adv + 1e-15);
    }

    #[test]
    fn normalizer_matches_batch_statistics(rows in prop::collection::vec(prop::collection::vec(-5.0..5.0f64, 3), 2..40), split in 1usize..39) {
        let split = split.min(rows.len() - 1);
        let mut norm = RunningNorm::new(3);
        norm.update(&rows[..split]).unwrap();
        norm.update(&rows[split..]).unwrap();
        let n = rows.len() as f64;
        for k in 0..3 {
            let mean = rows.iter().map(|r| r[k]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r[k] - mean).powi(2)).sum::<f64>() / n;
            prop_assert!((norm.mean[k] - mean).abs() < 1e-9);
            prop_assert!((norm.var[k] - var).abs() < 1e-9);
        }
    }
}

#[test]
fn mid_swing_masks_are_one_hot() {
    assert_eq!(swing_mask(0.25, 0.1), [1.0, 0.0]);
    assert_eq!(swing_mask(0.75, 0.1), [0.0, 1.0]);
    assert_eq!(stance_mask(0.25, 0.1), [0.0, 1.0]);
}

#[test]
fn zero_command_ratio_gives_zero_offsets() {
    for p in [0.0, 0.1, 0.3, 0.6, 0.9] {
        let r = reference(p, 0.0, 0.64, &GaitParams::default(), true).unwrap();
        assert!(r.offsets.iter().chain(&r.rates).all(|x| *x == 0.0));
    }
}

#[test]
fn uniform_command_mean() {
    let mut s = CurriculumState::from_config(&CurriculumConfig::default()).unwrap();
    s.v_max = 2.0;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 100_000;
    let mean = (0..n).map(|_| s.sample_command(&mut rng).v_x).sum::<f64>() / n as f64;
    assert!((mean - 1.0).abs() < 0.02, "mean {mean}");
    let a: Vec<_> = (0..10).map(|_| s.sample_command(&mut ChaCha8Rng::seed_from_u64(9))).collect();
    assert!(a.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn surrogate_uses_clipped_value_when_ratio_is_two() {
    assert_eq!(clipped_surrogate(2.0, 1.5, 0.2), 1.2 * 1.5);
}

#[test]
fn frame_stack_is_newest_first_and_zero_padded() {
    let mut s = FrameStack::new(2, 3);
    s.push(vec![1.0, 1.0]).unwrap();
    assert_eq!(s.stacked(), vec![1.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    s.push(vec![2.0, 2.0]).unwrap();
    s.push(vec![3.0, 3.0]).unwrap();
    s.push(vec![4.0, 4.0]).unwrap();
    assert_eq!(s.stacked(), vec![4.0, 4.0, 3.0, 3.0, 2.0, 2.0]);
    assert!(s.push(vec![1.0]).is_err());
}

#[test]
fn zero_weight_actor_outputs_its_bias() {
    let layout = PolicyLayout::new(4, 3, 2, &[5], &[5]);
    let mut params = vec![0.0; layout.num_params()];
    let (_, bias, _, n) = layout.actor.layer(1);
    params[bias..bias + n].copy_from_slice(&[0.25, -0.5]);
    let ac = ActorCritic::from_params(layout, params).unwrap();
    assert_eq!(ac.mean(&[1.0, 2.0, 3.0, 4.0]).unwrap(), vec![0.25, -0.5]);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (a, _) = ac.act(&[0.0; 4], None::<&mut ChaCha8Rng>).unwrap();
    let (b, _) = ac.act(&[0.0; 4], None::<&mut ChaCha8Rng>).unwrap();
    assert_eq!(a, b);
    assert!(ac.mean(&[0.0; 3]).is_err());
    let (sampled, _) = ac.act(&[0.0; 4], Some(&mut rng)).unwrap();
    assert_ne!(sampled, a);
}
