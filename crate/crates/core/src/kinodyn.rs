//! Whole-body centre of mass and centroidal angular momentum.
//!
//! Every quantity here is a pure function of a [`BodySnapshot`]: link inertias are
//! expected in world-frame orientation, and no frame conversion is performed.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Body part a link belongs to, used to split the momentum into per-limb contributions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BodyGroup {
    LeftArm,
    RightArm,
    LeftLeg,
    RightLeg,
    Torso,
}

impl BodyGroup {
    pub const ALL: [BodyGroup; 5] = [
        BodyGroup::LeftArm,
        BodyGroup::RightArm,
        BodyGroup::LeftLeg,
        BodyGroup::RightLeg,
        BodyGroup::Torso,
    ];

    pub fn index(self) -> usize {
        match self {
            BodyGroup::LeftArm => 0,
            BodyGroup::RightArm => 1,
            BodyGroup::LeftLeg => 2,
            BodyGroup::RightLeg => 3,
            BodyGroup::Torso => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BodyGroup::LeftArm => "left_arm",
            BodyGroup::RightArm => "right_arm",
            BodyGroup::LeftLeg => "left_leg",
            BodyGroup::RightLeg => "right_leg",
            BodyGroup::Torso => "torso",
        }
    }

    /// The group on the opposite side of the sagittal plane.
    pub fn mirrored(self) -> BodyGroup {
        match self {
            BodyGroup::LeftArm => BodyGroup::RightArm,
            BodyGroup::RightArm => BodyGroup::LeftArm,
            BodyGroup::LeftLeg => BodyGroup::RightLeg,
            BodyGroup::RightLeg => BodyGroup::LeftLeg,
            BodyGroup::Torso => BodyGroup::Torso,
        }
    }

    pub fn is_arm(self) -> bool {
        matches!(self, BodyGroup::LeftArm | BodyGroup::RightArm)
    }
}

impl fmt::Display for BodyGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BodyGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BodyGroup::ALL
            .into_iter()
            .find(|g| g.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown body group tag `{s}`")))
    }
}

/// Mass properties and motion of one rigid link, all in world coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkState {
    pub mass: f64,
    /// Rotational inertia about the link's own CoM, rotated into the world frame.
    pub inertia: Matrix3<f64>,
    pub com_position: Vector3<f64>,
    pub com_velocity: Vector3<f64>,
    pub angular_velocity: Vector3<f64>,
    pub group: BodyGroup,
}

impl LinkState {
    /// Checks the mass/inertia invariants. Inertia must be symmetric and positive
    /// semidefinite up to rounding.
    pub fn validate(&self, index: usize) -> Result<()> {
        if !self.mass.is_finite() || self.mass <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "link {index}: mass must be positive and finite, got {}",
                self.mass
            )));
        }
        let finite = self.inertia.iter().all(|v| v.is_finite())
            && self.com_position.iter().all(|v| v.is_finite())
            && self.com_velocity.iter().all(|v| v.is_finite())
            && self.angular_velocity.iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidInput(format!("link {index}: non-finite state")));
        }
        let scale = self.inertia.amax().max(1.0);
        if (self.inertia - self.inertia.transpose()).amax() > 1e-9 * scale {
            return Err(Error::InvalidInput(format!(
                "link {index}: inertia tensor is not symmetric"
            )));
        }
        let eigen = self.inertia.symmetric_eigenvalues();
        if eigen.iter().any(|&e| e < -1e-12 * scale) {
            return Err(Error::InvalidInput(format!(
                "link {index}: inertia tensor is not positive semidefinite (eigenvalues {:?})",
                eigen.as_slice()
            )));
        }
        Ok(())
    }
}

/// Instantaneous state of every link of the robot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodySnapshot {
    pub links: Vec<LinkState>,
    pub timestamp: f64,
}

impl BodySnapshot {
    pub fn new(links: Vec<LinkState>, timestamp: f64) -> Self {
        Self { links, timestamp }
    }

    pub fn validate(&self) -> Result<()> {
        if self.links.is_empty() {
            return Err(Error::InvalidInput("snapshot has no links".into()));
        }
        for (i, link) in self.links.iter().enumerate() {
            link.validate(i)?;
        }
        Ok(())
    }
}

/// Angular momentum about the whole-body CoM, total and split by [`BodyGroup`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentumReport {
    pub total: Vector3<f64>,
    per_group: [Vector3<f64>; 5],
    pub com_position: Vector3<f64>,
    pub com_velocity: Vector3<f64>,
}

impl MomentumReport {
    pub fn zero() -> Self {
        Self {
            total: Vector3::zeros(),
            per_group: [Vector3::zeros(); 5],
            com_position: Vector3::zeros(),
            com_velocity: Vector3::zeros(),
        }
    }

    /// Builds a report whose per-group contributions are given explicitly. The total
    /// is the sum of the groups.
    pub fn from_groups(
        per_group: [Vector3<f64>; 5],
        com_position: Vector3<f64>,
        com_velocity: Vector3<f64>,
    ) -> Self {
        let total = sum_groups(&per_group);
        Self {
            total,
            per_group,
            com_position,
            com_velocity,
        }
    }

    pub fn group(&self, group: BodyGroup) -> Vector3<f64> {
        self.per_group[group.index()]
    }

    pub fn per_group(&self) -> impl Iterator<Item = (BodyGroup, Vector3<f64>)> + '_ {
        BodyGroup::ALL.into_iter().map(|g| (g, self.per_group[g.index()]))
    }
}

fn sum_groups(per_group: &[Vector3<f64>; 5]) -> Vector3<f64> {
    per_group.iter().fold(Vector3::zeros(), |acc, v| acc + v)
}

/// Mass-weighted mean of link CoM positions and velocities.
pub fn whole_body_com(snapshot: &BodySnapshot) -> Result<(Vector3<f64>, Vector3<f64>)> {
    if snapshot.links.is_empty() {
        return Err(Error::InvalidInput("snapshot has no links".into()));
    }
    let mut mass = 0.0;
    let mut moment = Vector3::zeros();
    let mut momentum = Vector3::zeros();
    for (i, link) in snapshot.links.iter().enumerate() {
        if !link.mass.is_finite() || link.mass <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "link {i}: mass must be positive and finite, got {}",
                link.mass
            )));
        }
        mass += link.mass;
        moment += link.mass * link.com_position;
        momentum += link.mass * link.com_velocity;
    }
    let position = moment / mass;
    let velocity = momentum / mass;
    if !(position.iter().all(|v| v.is_finite()) && velocity.iter().all(|v| v.is_finite())) {
        return Err(Error::InvalidInput("non-finite link position or velocity".into()));
    }
    Ok((position, velocity))
}

/// Contribution of one link to the angular momentum about the given CoM:
/// `(p - p_com) x m (v - v_com) + I w`.
pub fn link_momentum_term(
    link: &LinkState,
    com_position: &Vector3<f64>,
    com_velocity: &Vector3<f64>,
) -> Result<Vector3<f64>> {
    let finite = link.mass.is_finite()
        && link.inertia.iter().all(|v| v.is_finite())
        && link.com_position.iter().all(|v| v.is_finite())
        && link.com_velocity.iter().all(|v| v.is_finite())
        && link.angular_velocity.iter().all(|v| v.is_finite())
        && com_position.iter().all(|v| v.is_finite())
        && com_velocity.iter().all(|v| v.is_finite());
    if !finite {
        return Err(Error::InvalidInput("non-finite input to momentum term".into()));
    }
    let offset = link.com_position - com_position;
    let relative_velocity = link.com_velocity - com_velocity;
    Ok(offset.cross(&(link.mass * relative_velocity)) + link.inertia * link.angular_velocity)
}

/// Centroidal angular momentum of the snapshot. The total is accumulated group by
/// group, so it equals the sum of the per-group vectors exactly.
pub fn total_angular_momentum(snapshot: &BodySnapshot) -> Result<MomentumReport> {
    let (com_position, com_velocity) = whole_body_com(snapshot)?;
    let mut per_group = [Vector3::zeros(); 5];
    for link in &snapshot.links {
        per_group[link.group.index()] += link_momentum_term(link, &com_position, &com_velocity)?;
    }
    Ok(MomentumReport::from_groups(per_group, com_position, com_velocity))
}
