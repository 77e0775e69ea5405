//! Floating-base rigid multibody built from a [`RobotSpec`]: forward kinematics,
//! articulated-body forward dynamics and the link snapshot consumed by
//! [`crate::kinodyn`].

use nalgebra::{Matrix3, UnitQuaternion, Vector3};

use super::robot::{RobotSpec, NUM_JOINTS};
use super::spatial::{cross_force, cross_motion, rigid_inertia, spatial, SpatialMat, SpatialVec, Xform};
use crate::error::{Error, Result};
use crate::kinodyn::{BodyGroup, BodySnapshot, LinkState};

#[derive(Debug, Clone)]
pub struct Body {
    pub name: String,
    pub group: BodyGroup,
    /// Parent body index; `None` for the floating base.
    pub parent: Option<usize>,
    /// Parent frame to joint frame at zero joint angle.
    pub tree: Xform,
    pub axis: Vector3<f64>,
    pub mass: f64,
    pub com: Vector3<f64>,
    pub inertia_com: Matrix3<f64>,
    pub spatial_inertia: SpatialMat,
}

#[derive(Debug, Clone)]
pub struct Actuator {
    pub default_position: f64,
    pub torque_limit: f64,
    pub kp: f64,
    pub kd: f64,
    pub armature: f64,
    pub damping: f64,
    /// Locked joints are welded at their current angle.
    pub locked: bool,
}

#[derive(Debug, Clone)]
pub struct Foot {
    pub body: usize,
    pub contacts: Vec<Vector3<f64>>,
}

/// Floating-base pose and body-frame twist.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseState {
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
    /// `[angular; linear]` velocity of the base frame in base coordinates.
    pub twist: SpatialVec,
}

impl BaseState {
    pub fn at_rest(position: Vector3<f64>) -> Self {
        Self { position, orientation: UnitQuaternion::identity(), twist: SpatialVec::zeros() }
    }
}

/// Pose and velocity of one body after forward kinematics.
#[derive(Debug, Clone)]
pub struct BodyKinematics {
    /// Parent frame to this body's frame.
    pub x_parent: Xform,
    /// Body frame to world rotation.
    pub rotation: Matrix3<f64>,
    pub position: Vector3<f64>,
    /// Spatial velocity in body coordinates.
    pub velocity: SpatialVec,
}

impl BodyKinematics {
    pub fn point_world(&self, local: &Vector3<f64>) -> Vector3<f64> {
        self.position + self.rotation * local
    }

    pub fn point_velocity_world(&self, local: &Vector3<f64>) -> Vector3<f64> {
        let w = Vector3::new(self.velocity[0], self.velocity[1], self.velocity[2]);
        let v = Vector3::new(self.velocity[3], self.velocity[4], self.velocity[5]);
        self.rotation * (v + w.cross(local))
    }

    pub fn angular_velocity_world(&self) -> Vector3<f64> {
        self.rotation * Vector3::new(self.velocity[0], self.velocity[1], self.velocity[2])
    }
}

/// An external force applied at a world point on a body.
#[derive(Debug, Clone, Copy)]
pub struct PointForce {
    pub body: usize,
    pub point: Vector3<f64>,
    pub force: Vector3<f64>,
}

/// Output of forward dynamics.
#[derive(Debug, Clone)]
pub struct Accelerations {
    /// Spatial acceleration of the base in base coordinates.
    pub base: SpatialVec,
    pub joints: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Multibody {
    pub bodies: Vec<Body>,
    pub actuators: Vec<Actuator>,
    pub feet: Vec<Foot>,
    pub gravity: Vector3<f64>,
    /// Base height with joints at their defaults and the soles on the ground.
    pub nominal_base_height: f64,
}

impl Multibody {
    pub fn from_spec(spec: &RobotSpec, gravity: f64) -> Result<Self> {
        spec.validate()?;
        let base_inertia = spec.base.geometry.inertia(spec.base.mass);
        let base_com = Vector3::from(spec.base.com);
        let mut bodies = vec![Body {
            name: super::robot::BASE_NAME.to_string(),
            group: BodyGroup::Torso,
            parent: None,
            tree: Xform::identity(),
            axis: Vector3::zeros(),
            mass: spec.base.mass,
            com: base_com,
            inertia_com: base_inertia,
            spatial_inertia: rigid_inertia(spec.base.mass, &base_com, &base_inertia),
        }];
        let mut actuators = Vec::with_capacity(NUM_JOINTS);
        for link in &spec.links {
            let parent = spec.link_index(&link.parent).expect("validated parent");
            let com = Vector3::from(link.com);
            let inertia_com = link.geometry.inertia(link.mass);
            bodies.push(Body {
                name: link.name.clone(),
                group: link.group,
                parent: Some(parent),
                tree: Xform::translation(Vector3::from(link.joint.origin)),
                axis: Vector3::from(link.joint.axis),
                mass: link.mass,
                com,
                inertia_com,
                spatial_inertia: rigid_inertia(link.mass, &com, &inertia_com),
            });
            actuators.push(Actuator {
                default_position: link.joint.default_position,
                torque_limit: link.joint.torque_limit,
                kp: link.joint.kp,
                kd: link.joint.kd,
                armature: link.joint.armature,
                damping: link.joint.damping,
                locked: false,
            });
        }
        let feet = spec
            .feet
            .iter()
            .map(|f| Foot {
                body: spec.link_index(&f.link).expect("validated foot"),
                contacts: f.contacts.iter().map(|&c| Vector3::from(c)).collect(),
            })
            .collect();
        let mut model = Multibody {
            bodies,
            actuators,
            feet,
            gravity: Vector3::new(0.0, 0.0, -gravity),
            nominal_base_height: 0.0,
        };
        let q = model.default_positions();
        let kin = model.forward_kinematics(&BaseState::at_rest(Vector3::zeros()), &q, &vec![0.0; NUM_JOINTS]);
        let lowest = model
            .feet
            .iter()
            .flat_map(|f| f.contacts.iter().map(|c| kin[f.body].point_world(c).z))
            .fold(f64::INFINITY, f64::min);
        model.nominal_base_height = -lowest;
        Ok(model)
    }

    pub fn num_joints(&self) -> usize {
        self.actuators.len()
    }

    pub fn default_positions(&self) -> Vec<f64> {
        self.actuators.iter().map(|a| a.default_position).collect()
    }

    pub fn torque_limits(&self) -> Vec<f64> {
        self.actuators.iter().map(|a| a.torque_limit).collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.bodies.iter().map(|b| b.mass).sum()
    }

    /// Scales the base mass and inertia; used for mass randomization.
    pub fn scale_base_mass(&mut self, scale: f64) {
        let base = &mut self.bodies[0];
        base.mass *= scale;
        base.inertia_com *= scale;
        base.spatial_inertia = rigid_inertia(base.mass, &base.com, &base.inertia_com);
    }

    pub fn lock_joints(&mut self, joints: &[usize]) {
        for &j in joints {
            self.actuators[j].locked = true;
        }
    }

    pub fn forward_kinematics(&self, base: &BaseState, q: &[f64], qd: &[f64]) -> Vec<BodyKinematics> {
        let base_rot = *base.orientation.to_rotation_matrix().matrix();
        let mut out: Vec<BodyKinematics> = Vec::with_capacity(self.bodies.len());
        out.push(BodyKinematics {
            x_parent: Xform::new(base_rot.transpose(), base.position),
            rotation: base_rot,
            position: base.position,
            velocity: base.twist,
        });
        for (i, body) in self.bodies.iter().enumerate().skip(1) {
            let j = i - 1;
            let parent = &out[body.parent.expect("non-base body")];
            let x = Xform::rotation(&body.axis, q[j]).after(&body.tree);
            let rotation = parent.rotation * x.rot.transpose();
            let position = parent.position + parent.rotation * x.trans;
            let velocity = x.apply_motion(&parent.velocity) + spatial(body.axis * qd[j], Vector3::zeros());
            out.push(BodyKinematics { x_parent: x, rotation, position, velocity });
        }
        out
    }

    /// Articulated-body algorithm for the floating base. Gravity and the given
    /// point forces are applied as external forces.
    pub fn forward_dynamics(
        &self,
        kin: &[BodyKinematics],
        qd: &[f64],
        tau: &[f64],
        forces: &[PointForce],
    ) -> Result<Accelerations> {
        let n = self.bodies.len();
        let mut external = vec![SpatialVec::zeros(); n];
        for (i, body) in self.bodies.iter().enumerate() {
            let f_local = kin[i].rotation.transpose() * (body.mass * self.gravity);
            external[i] = spatial(body.com.cross(&f_local), f_local);
        }
        for pf in forces {
            let k = &kin[pf.body];
            let f_local = k.rotation.transpose() * pf.force;
            let r_local = k.rotation.transpose() * (pf.point - k.position);
            external[pf.body] += spatial(r_local.cross(&f_local), f_local);
        }

        let mut art_inertia: Vec<SpatialMat> = self.bodies.iter().map(|b| b.spatial_inertia).collect();
        let mut bias: Vec<SpatialVec> = (0..n)
            .map(|i| {
                let v = &kin[i].velocity;
                cross_force(v, &(self.bodies[i].spatial_inertia * v)) - external[i]
            })
            .collect();
        let mut coriolis = vec![SpatialVec::zeros(); n];
        let mut u_vec = vec![SpatialVec::zeros(); n];
        let mut d_inv = vec![0.0; n];
        let mut u_scalar = vec![0.0; n];

        for i in (1..n).rev() {
            let j = i - 1;
            let body = &self.bodies[i];
            let act = &self.actuators[j];
            let s = spatial(body.axis, Vector3::zeros());
            let parent = body.parent.expect("non-base body");
            let (ia, pa) = if act.locked {
                (art_inertia[i], bias[i])
            } else {
                coriolis[i] = cross_motion(&kin[i].velocity, &(s * qd[j]));
                let u = art_inertia[i] * s;
                let d = s.dot(&u) + act.armature;
                if !(d > 0.0) {
                    return Err(Error::NonFinite(format!("degenerate joint inertia at `{}`", body.name)));
                }
                let ui = tau[j] - s.dot(&bias[i]);
                u_vec[i] = u;
                d_inv[i] = 1.0 / d;
                u_scalar[i] = ui;
                let ia = art_inertia[i] - u * u.transpose() * d_inv[i];
                let pa = bias[i] + ia * coriolis[i] + u * (ui * d_inv[i]);
                (ia, pa)
            };
            let x = &kin[i].x_parent;
            art_inertia[parent] += x.inertia_to_parent(&ia);
            bias[parent] += x.inv_apply_force(&pa);
        }

        let base_acc = match art_inertia[0].cholesky() {
            Some(chol) => -chol.solve(&bias[0]),
            None => return Err(Error::NonFinite("base articulated inertia is not positive definite".into())),
        };
        let mut acc = vec![SpatialVec::zeros(); n];
        acc[0] = base_acc;
        let mut qdd = vec![0.0; n - 1];
        for i in 1..n {
            let j = i - 1;
            let body = &self.bodies[i];
            let parent = body.parent.expect("non-base body");
            let a = kin[i].x_parent.apply_motion(&acc[parent]) + coriolis[i];
            if self.actuators[j].locked {
                acc[i] = a;
            } else {
                let s = spatial(body.axis, Vector3::zeros());
                qdd[j] = (u_scalar[i] - u_vec[i].dot(&a)) * d_inv[i];
                acc[i] = a + s * qdd[j];
            }
        }
        if !base_acc.iter().all(|v| v.is_finite()) || !qdd.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("forward dynamics produced non-finite accelerations".into()));
        }
        Ok(Accelerations { base: base_acc, joints: qdd })
    }

    /// Kinetic energy including rotor (armature) energy.
    pub fn kinetic_energy(&self, kin: &[BodyKinematics], qd: &[f64]) -> f64 {
        let links: f64 = self
            .bodies
            .iter()
            .zip(kin)
            .map(|(b, k)| 0.5 * k.velocity.dot(&(b.spatial_inertia * k.velocity)))
            .sum();
        let rotors: f64 = self.actuators.iter().zip(qd).map(|(a, &v)| 0.5 * a.armature * v * v).sum();
        links + rotors
    }

    pub fn potential_energy(&self, kin: &[BodyKinematics]) -> f64 {
        self.bodies
            .iter()
            .zip(kin)
            .map(|(b, k)| -b.mass * self.gravity.dot(&k.point_world(&b.com)))
            .sum()
    }

    /// World-frame link states for momentum analysis.
    pub fn snapshot(&self, kin: &[BodyKinematics], timestamp: f64) -> BodySnapshot {
        let links = self
            .bodies
            .iter()
            .zip(kin)
            .map(|(b, k)| LinkState {
                mass: b.mass,
                inertia: k.rotation * b.inertia_com * k.rotation.transpose(),
                com_position: k.point_world(&b.com),
                com_velocity: k.point_velocity_world(&b.com),
                angular_velocity: k.angular_velocity_world(),
                group: b.group,
            })
            .collect();
        BodySnapshot::new(links, timestamp)
    }

    /// Lowest sole point height of each foot.
    pub fn foot_heights(&self, kin: &[BodyKinematics]) -> Vec<f64> {
        self.feet
            .iter()
            .map(|f| {
                f.contacts
                    .iter()
                    .map(|c| kin[f.body].point_world(c).z)
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }
}
