//! Declarative description of the reduced-order humanoid.
//!
//! A spec lists the floating base and 16 actuated links in topological order.
//! Each link hangs off its parent through one revolute joint; the joint frame sits
//! at `origin` in the parent frame, aligned with it at zero angle. Link inertia is
//! derived from its capsule or box geometry. The joint names and their order are
//! fixed by [`JOINT_NAMES`]; everything else is data.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinodyn::BodyGroup;

pub const NUM_JOINTS: usize = 16;

/// Canonical actuated-joint order: six per leg, then shoulder and elbow pitch per arm.
pub const JOINT_NAMES: [&str; NUM_JOINTS] = [
    "left_hip_roll",
    "left_hip_yaw",
    "left_hip_pitch",
    "left_knee",
    "left_ankle_pitch",
    "left_ankle_roll",
    "right_hip_roll",
    "right_hip_yaw",
    "right_hip_pitch",
    "right_knee",
    "right_ankle_pitch",
    "right_ankle_roll",
    "left_shoulder_pitch",
    "left_elbow",
    "right_shoulder_pitch",
    "right_elbow",
];

pub mod joint {
    pub const LEFT_HIP_ROLL: usize = 0;
    pub const LEFT_HIP_YAW: usize = 1;
    pub const LEFT_HIP_PITCH: usize = 2;
    pub const LEFT_KNEE: usize = 3;
    pub const LEFT_ANKLE_PITCH: usize = 4;
    pub const LEFT_ANKLE_ROLL: usize = 5;
    pub const RIGHT_HIP_ROLL: usize = 6;
    pub const RIGHT_HIP_YAW: usize = 7;
    pub const RIGHT_HIP_PITCH: usize = 8;
    pub const RIGHT_KNEE: usize = 9;
    pub const RIGHT_ANKLE_PITCH: usize = 10;
    pub const RIGHT_ANKLE_ROLL: usize = 11;
    pub const LEFT_SHOULDER_PITCH: usize = 12;
    pub const LEFT_ELBOW: usize = 13;
    pub const RIGHT_SHOULDER_PITCH: usize = 14;
    pub const RIGHT_ELBOW: usize = 15;

    pub const ARMS: [usize; 4] = [LEFT_SHOULDER_PITCH, LEFT_ELBOW, RIGHT_SHOULDER_PITCH, RIGHT_ELBOW];
}

/// Left/right mirror partner of every joint and whether its angle flips sign under
/// reflection through the sagittal plane (roll and yaw joints do).
pub fn mirror_map() -> [(usize, f64); NUM_JOINTS] {
    let mut map = [(0, 1.0); NUM_JOINTS];
    let sign = |j: usize| match j % 6 {
        0 | 1 | 5 if j < 12 => -1.0,
        _ => 1.0,
    };
    for (j, slot) in map.iter_mut().enumerate() {
        let partner = match j {
            0..=5 => j + 6,
            6..=11 => j - 6,
            12 | 13 => j + 2,
            _ => j - 2,
        };
        *slot = (partner, sign(j));
    }
    map
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum Geometry {
    /// Solid cylinder approximation of a capsule, centred on the link CoM.
    Capsule { length: f64, radius: f64, axis: Axis },
    /// Solid box centred on the link CoM.
    Box { size: [f64; 3] },
}

impl Geometry {
    /// Rotational inertia about the CoM, in the link frame.
    pub fn inertia(&self, mass: f64) -> Matrix3<f64> {
        match *self {
            Geometry::Capsule { length, radius, axis } => {
                let along = 0.5 * mass * radius * radius;
                let across = mass * (3.0 * radius * radius + length * length) / 12.0;
                let d = match axis {
                    Axis::X => Vector3::new(along, across, across),
                    Axis::Y => Vector3::new(across, along, across),
                    Axis::Z => Vector3::new(across, across, along),
                };
                Matrix3::from_diagonal(&d)
            }
            Geometry::Box { size: [x, y, z] } => Matrix3::from_diagonal(&Vector3::new(
                mass * (y * y + z * z) / 12.0,
                mass * (x * x + z * z) / 12.0,
                mass * (x * x + y * y) / 12.0,
            )),
        }
    }

    fn is_valid(&self) -> bool {
        match *self {
            Geometry::Capsule { length, radius, .. } => length >= 0.0 && radius > 0.0,
            Geometry::Box { size } => size.iter().all(|&s| s > 0.0),
        }
    }

    fn mirrored(&self) -> Geometry {
        self.clone()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseSpec {
    pub mass: f64,
    pub com: [f64; 3],
    pub geometry: Geometry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointSpec {
    pub name: String,
    pub axis: [f64; 3],
    /// Joint frame origin in the parent link frame.
    pub origin: [f64; 3],
    pub default_position: f64,
    pub torque_limit: f64,
    pub kp: f64,
    pub kd: f64,
    /// Reflected rotor inertia added on the joint axis.
    pub armature: f64,
    /// Viscous joint friction, N m s/rad.
    pub damping: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    pub name: String,
    /// Parent link name; `base` for the floating base.
    pub parent: String,
    pub group: BodyGroup,
    pub joint: JointSpec,
    pub mass: f64,
    /// CoM in the link (joint) frame.
    pub com: [f64; 3],
    pub geometry: Geometry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FootSpec {
    pub link: String,
    /// Sole contact points in the foot link frame.
    pub contacts: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotSpec {
    pub name: String,
    pub base: BaseSpec,
    pub links: Vec<LinkSpec>,
    /// Left foot first.
    pub feet: Vec<FootSpec>,
}

pub const BASE_NAME: &str = "base";

struct LinkTemplate {
    name: &'static str,
    parent: &'static str,
    joint: &'static str,
    axis: [f64; 3],
    origin: [f64; 3],
    default: f64,
    limit: f64,
    kp: f64,
    kd: f64,
    armature: f64,
    mass: f64,
    com: [f64; 3],
    geometry: Geometry,
}

fn capsule_z(length: f64, radius: f64) -> Geometry {
    Geometry::Capsule { length, radius, axis: Axis::Z }
}

fn left_leg() -> Vec<LinkTemplate> {
    vec![
        LinkTemplate {
            name: "left_hip_roll_link",
            parent: BASE_NAME,
            joint: "left_hip_roll",
            axis: [1.0, 0.0, 0.0],
            origin: [0.0, 0.09, -0.06],
            default: 0.0,
            limit: 100.0,
            kp: 200.0,
            kd: 5.0,
            armature: 0.03,
            mass: 1.0,
            com: [0.0, 0.0, -0.03],
            geometry: capsule_z(0.06, 0.04),
        },
        LinkTemplate {
            name: "left_hip_yaw_link",
            parent: "left_hip_roll_link",
            joint: "left_hip_yaw",
            axis: [0.0, 0.0, 1.0],
            origin: [0.0, 0.0, -0.06],
            default: 0.0,
            limit: 60.0,
            kp: 150.0,
            kd: 4.0,
            armature: 0.03,
            mass: 1.0,
            com: [0.0, 0.0, -0.04],
            geometry: capsule_z(0.06, 0.04),
        },
        LinkTemplate {
            name: "left_thigh",
            parent: "left_hip_yaw_link",
            joint: "left_hip_pitch",
            axis: [0.0, 1.0, 0.0],
            origin: [0.0, 0.0, -0.08],
            default: -0.25,
            limit: 150.0,
            kp: 300.0,
            kd: 6.0,
            armature: 0.03,
            mass: 4.0,
            com: [0.0, 0.0, -0.17],
            geometry: capsule_z(0.34, 0.06),
        },
        LinkTemplate {
            name: "left_shank",
            parent: "left_thigh",
            joint: "left_knee",
            axis: [0.0, 1.0, 0.0],
            origin: [0.0, 0.0, -0.34],
            default: 0.5,
            limit: 200.0,
            kp: 400.0,
            kd: 8.0,
            armature: 0.03,
            mass: 2.5,
            com: [0.0, 0.0, -0.16],
            geometry: capsule_z(0.32, 0.045),
        },
        LinkTemplate {
            name: "left_ankle_link",
            parent: "left_shank",
            joint: "left_ankle_pitch",
            axis: [0.0, 1.0, 0.0],
            origin: [0.0, 0.0, -0.34],
            default: -0.25,
            limit: 150.0,
            kp: 400.0,
            kd: 8.0,
            armature: 0.02,
            mass: 0.3,
            com: [0.0, 0.0, 0.0],
            geometry: capsule_z(0.03, 0.03),
        },
        LinkTemplate {
            name: "left_foot",
            parent: "left_ankle_link",
            joint: "left_ankle_roll",
            axis: [1.0, 0.0, 0.0],
            origin: [0.0, 0.0, 0.0],
            default: 0.0,
            limit: 60.0,
            kp: 80.0,
            kd: 3.0,
            armature: 0.02,
            mass: 1.0,
            com: [0.03, 0.0, -0.04],
            geometry: Geometry::Box { size: [0.22, 0.09, 0.04] },
        },
    ]
}

fn left_arm() -> Vec<LinkTemplate> {
    vec![
        LinkTemplate {
            name: "left_upper_arm",
            parent: BASE_NAME,
            joint: "left_shoulder_pitch",
            axis: [0.0, 1.0, 0.0],
            origin: [0.0, 0.2, 0.33],
            default: 0.0,
            limit: 40.0,
            kp: 60.0,
            kd: 2.0,
            armature: 0.01,
            mass: 1.4,
            com: [0.0, 0.0, -0.13],
            geometry: capsule_z(0.26, 0.04),
        },
        LinkTemplate {
            name: "left_forearm",
            parent: "left_upper_arm",
            joint: "left_elbow",
            axis: [0.0, 1.0, 0.0],
            origin: [0.0, 0.0, -0.26],
            default: -0.4,
            limit: 30.0,
            kp: 40.0,
            kd: 1.5,
            armature: 0.01,
            mass: 0.9,
            com: [0.0, 0.0, -0.12],
            geometry: capsule_z(0.24, 0.035),
        },
    ]
}

fn to_spec(t: &LinkTemplate, group: BodyGroup) -> LinkSpec {
    LinkSpec {
        name: t.name.to_string(),
        parent: t.parent.to_string(),
        group,
        joint: JointSpec {
            name: t.joint.to_string(),
            axis: t.axis,
            origin: t.origin,
            default_position: t.default,
            torque_limit: t.limit,
            kp: t.kp,
            kd: t.kd,
            armature: t.armature,
            damping: 0.1,
        },
        mass: t.mass,
        com: t.com,
        geometry: t.geometry.clone(),
    }
}

fn mirror_name(name: &str) -> String {
    if let Some(rest) = name.strip_prefix("left_") {
        format!("right_{rest}")
    } else if let Some(rest) = name.strip_prefix("right_") {
        format!("left_{rest}")
    } else {
        name.to_string()
    }
}

fn flip_y(v: [f64; 3]) -> [f64; 3] {
    [v[0], -v[1], v[2]]
}

/// Expected right-side counterpart of a left-side link.
fn mirrored_link(link: &LinkSpec) -> LinkSpec {
    let mut m = link.clone();
    m.name = mirror_name(&link.name);
    m.parent = mirror_name(&link.parent);
    m.group = link.group.mirrored();
    m.joint.name = mirror_name(&link.joint.name);
    m.joint.origin = flip_y(link.joint.origin);
    // Roll and yaw angles flip under reflection; with shared axes the default flips too.
    if link.joint.axis[1] == 0.0 {
        m.joint.default_position = -link.joint.default_position;
    }
    m.com = flip_y(link.com);
    m.geometry = link.geometry.mirrored();
    m
}

impl RobotSpec {
    /// The bundled surrogate: about 40 kg, hips 0.94 m high with straight legs.
    pub fn default_humanoid() -> Self {
        let mut links = Vec::new();
        let left: Vec<LinkSpec> = left_leg().iter().map(|t| to_spec(t, BodyGroup::LeftLeg)).collect();
        links.extend(left.iter().cloned());
        links.extend(left.iter().map(mirrored_link));
        let left: Vec<LinkSpec> = left_arm().iter().map(|t| to_spec(t, BodyGroup::LeftArm)).collect();
        links.extend(left.iter().cloned());
        links.extend(left.iter().map(mirrored_link));
        // Arm pairs are interleaved left, left, right, right in the joint order.
        let sole = |y: f64| [[-0.07, y, -0.06], [0.13, y, -0.06]];
        let contacts: Vec<[f64; 3]> = sole(0.045).into_iter().chain(sole(-0.045)).collect();
        RobotSpec {
            name: "reduced_humanoid".into(),
            base: BaseSpec {
                mass: 16.0,
                com: [0.0, 0.0, 0.18],
                geometry: capsule_z(0.4, 0.12),
            },
            links,
            feet: vec![
                FootSpec { link: "left_foot".into(), contacts: contacts.clone() },
                FootSpec { link: "right_foot".into(), contacts },
            ],
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.base.mass + self.links.iter().map(|l| l.mass).sum::<f64>()
    }

    pub fn default_positions(&self) -> Vec<f64> {
        self.links.iter().map(|l| l.joint.default_position).collect()
    }

    pub fn torque_limits(&self) -> Vec<f64> {
        self.links.iter().map(|l| l.joint.torque_limit).collect()
    }

    pub fn link_index(&self, name: &str) -> Option<usize> {
        if name == BASE_NAME {
            return Some(0);
        }
        self.links.iter().position(|l| l.name == name).map(|i| i + 1)
    }

    /// Checks topology, physical plausibility and left/right symmetry.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(format!("robot spec: {msg}")));
        if self.links.len() != NUM_JOINTS {
            return bad(format!("expected {NUM_JOINTS} actuated links, got {}", self.links.len()));
        }
        if !(self.base.mass > 0.0) || !self.base.geometry.is_valid() {
            return bad("base mass and geometry must be positive".into());
        }
        for (i, link) in self.links.iter().enumerate() {
            if link.joint.name != JOINT_NAMES[i] {
                return bad(format!(
                    "joint {i} must be `{}`, found `{}`",
                    JOINT_NAMES[i], link.joint.name
                ));
            }
            match self.link_index(&link.parent) {
                Some(p) if p <= i => {}
                _ => return bad(format!("link `{}` must follow its parent `{}`", link.name, link.parent)),
            }
            if !(link.mass > 0.0) || !link.geometry.is_valid() {
                return bad(format!("link `{}` needs positive mass and geometry", link.name));
            }
            let axis = Vector3::from(link.joint.axis);
            if (axis.norm() - 1.0).abs() > 1e-9 {
                return bad(format!("joint `{}` axis must be a unit vector", link.joint.name));
            }
            let j = &link.joint;
            if !(j.torque_limit > 0.0) || j.kp < 0.0 || j.kd < 0.0 || j.armature < 0.0 || j.damping < 0.0 {
                return bad(format!("joint `{}` has invalid actuator parameters", j.name));
            }
            let expected_group = if i < 6 {
                BodyGroup::LeftLeg
            } else if i < 12 {
                BodyGroup::RightLeg
            } else if i < 14 {
                BodyGroup::LeftArm
            } else {
                BodyGroup::RightArm
            };
            if link.group != expected_group {
                return bad(format!("link `{}` must be tagged {expected_group}", link.name));
            }
        }
        for (j, (partner, _)) in mirror_map().iter().enumerate() {
            if j >= *partner {
                continue;
            }
            let expected = mirrored_link(&self.links[j]);
            let actual = &self.links[*partner];
            let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;
            let same = expected.name == actual.name
                && expected.parent == actual.parent
                && expected.joint.name == actual.joint.name
                && close(expected.mass, actual.mass)
                && expected.joint.axis == actual.joint.axis
                && (0..3).all(|k| close(expected.joint.origin[k], actual.joint.origin[k]))
                && (0..3).all(|k| close(expected.com[k], actual.com[k]))
                && close(expected.joint.default_position, actual.joint.default_position)
                && close(expected.joint.torque_limit, actual.joint.torque_limit)
                && close(expected.joint.kp, actual.joint.kp)
                && close(expected.joint.kd, actual.joint.kd)
                && close(expected.joint.armature, actual.joint.armature)
                && close(expected.joint.damping, actual.joint.damping)
                && expected.geometry == actual.geometry;
            if !same {
                return bad(format!(
                    "`{}` is not the mirror image of `{}`",
                    actual.name, self.links[j].name
                ));
            }
        }
        if self.feet.len() != 2 {
            return bad("exactly two feet (left, right) are required".into());
        }
        for (foot, side) in self.feet.iter().zip(["left_", "right_"]) {
            if !foot.link.starts_with(side) || self.link_index(&foot.link).is_none() {
                return bad(format!("foot link `{}` is unknown or on the wrong side", foot.link));
            }
            if foot.contacts.is_empty() {
                return bad(format!("foot `{}` has no contact points", foot.link));
            }
        }
        let left: Vec<[f64; 3]> = self.feet[0].contacts.iter().map(|&c| flip_y(c)).collect();
        let mirrored_ok = left.len() == self.feet[1].contacts.len()
            && left.iter().all(|c| self.feet[1].contacts.iter().any(|d| c == d));
        if !mirrored_ok {
            return bad("right foot contacts must mirror the left foot".into());
        }
        Ok(())
    }
}
