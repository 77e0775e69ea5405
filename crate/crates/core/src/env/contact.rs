//! Compliant point contact between sole points and a flat ground plane.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::model::{BodyKinematics, Multibody, PointForce};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContactParams {
    pub stiffness: f64,
    pub damping: f64,
    pub tangential_stiffness: f64,
    pub tangential_damping: f64,
}

impl Default for ContactParams {
    fn default() -> Self {
        Self { stiffness: 3.0e4, damping: 300.0, tangential_stiffness: 2.0e4, tangential_damping: 150.0 }
    }
}

/// Per sole point stick anchor; `None` while the point is airborne.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ContactState {
    pub anchors: Vec<Vec<Option<Vector2<f64>>>>,
}

impl ContactState {
    pub fn new(model: &Multibody) -> Self {
        Self { anchors: model.feet.iter().map(|f| vec![None; f.contacts.len()]).collect() }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ContactResult {
    pub forces: Vec<PointForce>,
    /// Total normal force per foot.
    pub normal_per_foot: Vec<f64>,
}

impl ContactResult {
    pub fn in_contact(&self, foot: usize, threshold: f64) -> bool {
        self.normal_per_foot.get(foot).is_some_and(|&f| f > threshold)
    }
}

/// Evaluates ground forces and updates the stick anchors.
pub fn compute_contacts(
    model: &Multibody,
    kin: &[BodyKinematics],
    state: &mut ContactState,
    params: &ContactParams,
    friction: f64,
) -> ContactResult {
    let mut result = ContactResult { forces: Vec::new(), normal_per_foot: vec![0.0; model.feet.len()] };
    for (fi, foot) in model.feet.iter().enumerate() {
        let k = &kin[foot.body];
        for (ci, local) in foot.contacts.iter().enumerate() {
            let p = k.point_world(local);
            let anchor = &mut state.anchors[fi][ci];
            if p.z >= 0.0 {
                *anchor = None;
                continue;
            }
            let v = k.point_velocity_world(local);
            let depth = -p.z;
            let normal = (params.stiffness * depth - params.damping * v.z).max(0.0);
            let a = anchor.get_or_insert(Vector2::new(p.x, p.y));
            let slip = Vector2::new(p.x, p.y) - *a;
            let vt = Vector2::new(v.x, v.y);
            let mut ft = -params.tangential_stiffness * slip - params.tangential_damping * vt;
            let limit = friction * normal;
            let mag = ft.norm();
            if mag > limit {
                ft *= if mag > 0.0 { limit / mag } else { 0.0 };
                // Sliding: drag the anchor so the spring alone sits on the friction cone.
                if params.tangential_stiffness > 0.0 {
                    let spring = -params.tangential_stiffness * slip;
                    let target = if spring.norm() > limit && spring.norm() > 0.0 { spring * (limit / spring.norm()) } else { spring };
                    *a = Vector2::new(p.x, p.y) + target / params.tangential_stiffness;
                }
            }
            result.normal_per_foot[fi] += normal;
            result.forces.push(PointForce { body: foot.body, point: p, force: Vector3::new(ft.x, ft.y, normal) });
        }
    }
    result
}
