//! Minimal 6D spatial vector algebra. Vectors are stored `[angular; linear]`.

use nalgebra::{Matrix3, Matrix6, Vector3, Vector6};

pub type SpatialVec = Vector6<f64>;
pub type SpatialMat = Matrix6<f64>;

#[inline]
pub fn angular(v: &SpatialVec) -> Vector3<f64> {
    Vector3::new(v[0], v[1], v[2])
}

#[inline]
pub fn linear(v: &SpatialVec) -> Vector3<f64> {
    Vector3::new(v[3], v[4], v[5])
}

#[inline]
pub fn spatial(angular: Vector3<f64>, linear: Vector3<f64>) -> SpatialVec {
    SpatialVec::new(angular.x, angular.y, angular.z, linear.x, linear.y, linear.z)
}

#[inline]
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// `v x m` for motion vectors.
#[inline]
pub fn cross_motion(v: &SpatialVec, m: &SpatialVec) -> SpatialVec {
    let (w, vl) = (angular(v), linear(v));
    let (mw, ml) = (angular(m), linear(m));
    spatial(w.cross(&mw), w.cross(&ml) + vl.cross(&mw))
}

/// `v x* f` for force vectors.
#[inline]
pub fn cross_force(v: &SpatialVec, f: &SpatialVec) -> SpatialVec {
    let (w, vl) = (angular(v), linear(v));
    let (n, fl) = (angular(f), linear(f));
    spatial(w.cross(&n) + vl.cross(&fl), w.cross(&fl))
}

/// Plücker coordinate transform from frame A to frame B, where `rot` maps A
/// coordinates to B coordinates and `trans` is B's origin expressed in A.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Xform {
    pub rot: Matrix3<f64>,
    pub trans: Vector3<f64>,
}

impl Xform {
    pub fn identity() -> Self {
        Self { rot: Matrix3::identity(), trans: Vector3::zeros() }
    }

    pub fn new(rot: Matrix3<f64>, trans: Vector3<f64>) -> Self {
        Self { rot, trans }
    }

    pub fn translation(trans: Vector3<f64>) -> Self {
        Self { rot: Matrix3::identity(), trans }
    }

    /// Transform into a frame rotated by `angle` about `axis` (unit) relative to A.
    pub fn rotation(axis: &Vector3<f64>, angle: f64) -> Self {
        let r = nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_unchecked(*axis), angle);
        Self { rot: r.matrix().transpose(), trans: Vector3::zeros() }
    }

    #[inline]
    pub fn apply_motion(&self, v: &SpatialVec) -> SpatialVec {
        let w = angular(v);
        spatial(self.rot * w, self.rot * (linear(v) - self.trans.cross(&w)))
    }

    #[inline]
    pub fn apply_force(&self, f: &SpatialVec) -> SpatialVec {
        let fl = linear(f);
        spatial(self.rot * (angular(f) - self.trans.cross(&fl)), self.rot * fl)
    }

    #[inline]
    pub fn inv_apply_motion(&self, v: &SpatialVec) -> SpatialVec {
        let w = self.rot.transpose() * angular(v);
        spatial(w, self.rot.transpose() * linear(v) + self.trans.cross(&w))
    }

    #[inline]
    pub fn inv_apply_force(&self, f: &SpatialVec) -> SpatialVec {
        let fl = self.rot.transpose() * linear(f);
        spatial(self.rot.transpose() * angular(f) + self.trans.cross(&fl), fl)
    }

    /// `self` applied after `first`: maps `first`'s source frame to `self`'s target.
    pub fn after(&self, first: &Xform) -> Xform {
        Xform {
            rot: self.rot * first.rot,
            trans: first.trans + first.rot.transpose() * self.trans,
        }
    }

    /// 6x6 motion transform matrix.
    pub fn motion_matrix(&self) -> SpatialMat {
        let mut m = SpatialMat::zeros();
        let lower = -self.rot * skew(&self.trans);
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rot);
        m.fixed_view_mut::<3, 3>(3, 3).copy_from(&self.rot);
        m.fixed_view_mut::<3, 3>(3, 0).copy_from(&lower);
        m
    }

    /// `X^T I X`: brings an inertia in B coordinates back to A coordinates.
    pub fn inertia_to_parent(&self, inertia: &SpatialMat) -> SpatialMat {
        let x = self.motion_matrix();
        x.transpose() * inertia * x
    }
}

/// Spatial inertia of a rigid body about its frame origin.
pub fn rigid_inertia(mass: f64, com: &Vector3<f64>, inertia_com: &Matrix3<f64>) -> SpatialMat {
    let c = skew(com);
    let mut m = SpatialMat::zeros();
    let upper = inertia_com + mass * c * c.transpose();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&upper);
    m.fixed_view_mut::<3, 3>(0, 3).copy_from(&(mass * c));
    m.fixed_view_mut::<3, 3>(3, 0).copy_from(&(mass * c.transpose()));
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(&(mass * Matrix3::identity()));
    m
}
