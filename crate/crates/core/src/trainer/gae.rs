//! Generalized advantage estimation over time-major `[horizon][num_envs]` arrays.

use crate::error::{ensure_len, Error, Result};

/// Returns `(advantages, returns)`.
///
/// `delta_t = r_t + gamma V_{t+1} (1 - done_t) - V_t` and
/// `A_t = delta_t + gamma lambda (1 - done_t) A_{t+1}`, with `V_T` taken from
/// `last_values`.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    last_values: &[f64],
    num_envs: usize,
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if num_envs == 0 || rewards.len() % num_envs != 0 {
        return Err(Error::InvalidInput(format!(
            "batch of {} transitions is not rectangular over {num_envs} envs",
            rewards.len()
        )));
    }
    ensure_len("values", rewards.len(), values.len())?;
    ensure_len("done flags", rewards.len(), dones.len())?;
    ensure_len("bootstrap values", num_envs, last_values.len())?;
    let horizon = rewards.len() / num_envs;
    let mut adv = vec![0.0; rewards.len()];
    for n in 0..num_envs {
        let mut next_adv = 0.0;
        let mut next_value = last_values[n];
        for t in (0..horizon).rev() {
            let i = t * num_envs + n;
            let live = if dones[i] { 0.0 } else { 1.0 };
            let delta = rewards[i] + gamma * next_value * live - values[i];
            next_adv = delta + gamma * lambda * live * next_adv;
            adv[i] = next_adv;
            next_value = values[i];
        }
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, returns))
}

/// Shifts and scales the masked-in entries to mean 0 and std 1.
pub fn normalize_advantages(adv: &mut [f64], mask: &[bool]) {
    let n = mask.iter().filter(|m| **m).count();
    if n < 2 {
        return;
    }
    let mean = adv.iter().zip(mask).filter(|(_, m)| **m).map(|(a, _)| a).sum::<f64>() / n as f64;
    let var = adv
        .iter()
        .zip(mask)
        .filter(|(_, m)| **m)
        .map(|(a, _)| (a - mean) * (a - mean))
        .sum::<f64>()
        / (n - 1) as f64;
    let std = var.sqrt() + 1e-8;
    for (a, m) in adv.iter_mut().zip(mask) {
        if *m {
            *a = (*a - mean) / std;
        }
    }
}
