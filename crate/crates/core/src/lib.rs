//! Humanoid locomotion learning with centroidal angular-momentum regularization.
//!
//! The crate is organised bottom-up:
//!
//! - [`kinodyn`]: whole-body CoM and centroidal angular momentum of a link snapshot.
//! - [`rewards`]: momentum, velocity-scaled and general reward terms and their composition.
//! - [`curriculum`]: reward-gated velocity-range and gait cycle-time schedules.
//! - [`env`]: a reduced-order floating-base humanoid simulator with PD actuation,
//!   gait clock, stacked observations and domain randomization.
//! - [`trainer`]: PPO with GAE and an asymmetric (privileged) critic.

pub mod curriculum;
pub mod env;
pub mod error;
pub mod kinodyn;
pub mod rewards;
pub mod trainer;

pub use error::{Error, Result};
