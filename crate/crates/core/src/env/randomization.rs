//! Domain randomization: per-episode physical parameters, pushes and
//! observation noise.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::robot::NUM_JOINTS;
use crate::error::{Error, Result};

/// Closed sampling interval that can be switched off, in which case `nominal` is used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomRange {
    pub enabled: bool,
    pub low: f64,
    pub high: f64,
}

impl RandomRange {
    pub const fn new(low: f64, high: f64) -> Self {
        Self { enabled: true, low, high }
    }

    pub fn validate(&self, what: &str) -> Result<()> {
        if !self.low.is_finite() || !self.high.is_finite() {
            return Err(Error::InvalidConfig(format!("{what}: bounds must be finite")));
        }
        if self.enabled && !(self.low < self.high) {
            return Err(Error::InvalidConfig(format!(
                "{what}: enabled range must satisfy low < high, got [{}, {}]",
                self.low, self.high
            )));
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, nominal: f64) -> f64 {
        if self.enabled {
            rng.gen_range(self.low..=self.high)
        } else {
            nominal
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PushConfig {
    pub enabled: bool,
    /// Seconds between pushes, drawn uniformly.
    pub interval_low: f64,
    pub interval_high: f64,
    /// Bound on the horizontal velocity impulse, m/s.
    pub max_linear: f64,
    /// Bound on the angular velocity impulse, rad/s.
    pub max_angular: f64,
}

impl Default for PushConfig {
    fn default() -> Self {
        Self { enabled: true, interval_low: 4.0, interval_high: 8.0, max_linear: 0.5, max_angular: 0.4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    pub enabled: bool,
    pub joint_position: f64,
    pub joint_velocity: f64,
    pub angular_velocity: f64,
    pub euler: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self { enabled: true, joint_position: 0.02, joint_velocity: 0.3, angular_velocity: 0.1, euler: 0.03 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DomainRandomizationConfig {
    pub friction: RandomRange,
    /// Scale on the base link mass.
    pub mass_scale: RandomRange,
    /// Per-joint scale on both PD gains.
    pub gain_scale: RandomRange,
    pub push: PushConfig,
    pub noise: NoiseConfig,
    /// Half-width of the uniform joint-angle perturbation at reset, rad.
    pub reset_joint_noise: f64,
}

impl Default for DomainRandomizationConfig {
    fn default() -> Self {
        Self {
            friction: RandomRange::new(0.2, 1.3),
            mass_scale: RandomRange::new(0.8, 1.2),
            gain_scale: RandomRange::new(0.9, 1.1),
            push: PushConfig::default(),
            noise: NoiseConfig::default(),
            reset_joint_noise: 0.03,
        }
    }
}

impl DomainRandomizationConfig {
    /// Everything off: nominal physics, no pushes, no noise.
    pub fn disabled() -> Self {
        let off = |r: RandomRange| RandomRange { enabled: false, ..r };
        let d = Self::default();
        Self {
            friction: off(d.friction),
            mass_scale: off(d.mass_scale),
            gain_scale: off(d.gain_scale),
            push: PushConfig { enabled: false, ..d.push },
            noise: NoiseConfig { enabled: false, ..d.noise },
            reset_joint_noise: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.friction.validate("friction")?;
        self.mass_scale.validate("mass_scale")?;
        self.gain_scale.validate("gain_scale")?;
        if self.friction.enabled && self.friction.low < 0.0 {
            return Err(Error::InvalidConfig("friction must be non-negative".into()));
        }
        if self.mass_scale.enabled && !(self.mass_scale.low > 0.0) {
            return Err(Error::InvalidConfig("mass scale must be positive".into()));
        }
        if self.gain_scale.enabled && !(self.gain_scale.low > 0.0) {
            return Err(Error::InvalidConfig("gain scale must be positive".into()));
        }
        let p = &self.push;
        if p.enabled
            && (!(p.interval_low > 0.0 && p.interval_low < p.interval_high)
                || !(p.max_linear > 0.0)
                || !(p.max_angular >= 0.0))
        {
            return Err(Error::InvalidConfig("push: need 0 < interval_low < interval_high and positive bounds".into()));
        }
        let n = &self.noise;
        if [n.joint_position, n.joint_velocity, n.angular_velocity, n.euler].iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidConfig("noise scales must be non-negative".into()));
        }
        if !(self.reset_joint_noise >= 0.0) {
            return Err(Error::InvalidConfig("reset joint noise must be non-negative".into()));
        }
        Ok(())
    }
}

/// Parameters drawn once per episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeParams {
    pub friction: f64,
    pub mass_scale: f64,
    pub gain_scale: Vec<f64>,
}

impl EpisodeParams {
    pub fn nominal() -> Self {
        Self { friction: 1.0, mass_scale: 1.0, gain_scale: vec![1.0; NUM_JOINTS] }
    }

    pub fn sample<R: Rng + ?Sized>(config: &DomainRandomizationConfig, rng: &mut R) -> Self {
        Self {
            friction: config.friction.sample(rng, 1.0),
            mass_scale: config.mass_scale.sample(rng, 1.0),
            gain_scale: (0..NUM_JOINTS).map(|_| config.gain_scale.sample(rng, 1.0)).collect(),
        }
    }
}

/// A velocity impulse on the base, in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Push {
    pub linear: [f64; 2],
    pub angular: [f64; 3],
}

/// Random direction scaled by a uniform magnitude in `[0, bound]`.
fn bounded_vector<const N: usize, R: Rng + ?Sized>(rng: &mut R, bound: f64) -> [f64; N] {
    let mut v = [0.0; N];
    let mut norm2: f64 = 0.0;
    while !(norm2 > 1e-24) {
        for x in v.iter_mut() {
            *x = StandardNormal.sample(rng);
        }
        norm2 = v.iter().map(|x| x * x).sum();
    }
    let scale = rng.gen_range(0.0..=bound) / norm2.sqrt();
    v.map(|x| x * scale)
}

pub fn sample_push<R: Rng + ?Sized>(config: &PushConfig, rng: &mut R) -> Push {
    Push { linear: bounded_vector(rng, config.max_linear), angular: bounded_vector(rng, config.max_angular) }
}

pub fn sample_push_interval<R: Rng + ?Sized>(config: &PushConfig, rng: &mut R) -> f64 {
    rng.gen_range(config.interval_low..=config.interval_high)
}

/// Adds zero-mean uniform noise of half-width `scale` to each value.
pub fn add_noise<R: Rng + ?Sized>(values: &mut [f64], scale: f64, rng: &mut R) {
    if scale > 0.0 {
        for v in values {
            *v += rng.gen_range(-scale..=scale);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn defaults_validate_and_disabled_is_nominal() {
        DomainRandomizationConfig::default().validate().unwrap();
        let off = DomainRandomizationConfig::disabled();
        off.validate().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(EpisodeParams::sample(&off, &mut rng), EpisodeParams::nominal());
    }

    #[test]
    fn degenerate_range_rejected() {
        let mut c = DomainRandomizationConfig::default();
        c.friction = RandomRange::new(0.5, 0.5);
        assert!(c.validate().is_err());
        c.friction.enabled = false;
        c.validate().unwrap();
    }

    #[test]
    fn pushes_are_bounded() {
        let cfg = PushConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let p = sample_push(&cfg, &mut rng);
            assert!(p.linear[0].hypot(p.linear[1]) <= cfg.max_linear + 1e-12);
            let a = p.angular.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!(a <= cfg.max_angular + 1e-12);
        }
    }
}
