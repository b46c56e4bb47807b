//! Parallel-jaw grasp analysis on meshes: antipodal sampling, contact wrenches, force
//! closure, epsilon quality, Monte-Carlo robust quality and gripper collision checks.

mod collision;
mod contacts;
mod hull_nd;
mod quality;
mod robust;
mod sampling;
mod wrench;

pub use collision::{box_intersects_triangle, collision_free, GripperModel, OrientedBox};
pub use contacts::{find_contacts, is_antipodal};
pub use quality::{epsilon_quality, force_closure, min_norm_point, support, EpsilonSearch};
pub use robust::{grasp_epsilon, robust_epsilon_quality, PerturbationConfig, RobustEstimate};
pub use sampling::{sample_antipodal_grasps_3d, AntipodalSamplerConfig};
pub use wrench::{friction_cone_wrenches, planar_contact_wrenches, torque_scaling, ContactModel, WrenchSet};

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Binary-label threshold on robust epsilon quality.
pub const DEFAULT_SUCCESS_THRESHOLD: f64 = 0.002;
/// Friction coefficient used when sampling antipodal grasps on meshes.
pub const SAMPLING_FRICTION: f64 = 0.6;

/// A parallel-jaw grasp: jaw-closing axis through `center`, opened to `max_width`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grasp3D {
    center: Point3<f64>,
    axis: Vector3<f64>,
    max_width: f64,
}

impl Grasp3D {
    pub fn new(center: Point3<f64>, axis: Vector3<f64>, max_width: f64) -> Result<Self> {
        let n = axis.norm();
        if !(n > 1e-12) || !n.is_finite() {
            return Err(Error::InvalidArgument("grasp axis must be non-zero".into()));
        }
        if !(max_width > 0.0) {
            return Err(Error::InvalidArgument(format!("grasp width must be positive, got {max_width}")));
        }
        Ok(Self {
            center,
            axis: axis / n,
            max_width,
        })
    }

    pub fn center(&self) -> Point3<f64> {
        self.center
    }

    pub fn axis(&self) -> Vector3<f64> {
        self.axis
    }

    pub fn max_width(&self) -> f64 {
        self.max_width
    }

    pub fn transformed(&self, iso: &nalgebra::Isometry3<f64>) -> Self {
        Self {
            center: iso * self.center,
            axis: iso * self.axis,
            max_width: self.max_width,
        }
    }

    /// Jaw start points `center ∓ axis * max_width / 2`.
    pub fn endpoints(&self) -> (Point3<f64>, Point3<f64>) {
        let h = self.axis * (self.max_width / 2.0);
        (self.center - h, self.center + h)
    }
}

/// A point contact with an inward-pointing unit normal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contact {
    pub point: Point3<f64>,
    pub normal: Vector3<f64>,
    pub friction: f64,
}

impl Contact {
    pub fn new(point: Point3<f64>, normal: Vector3<f64>, friction: f64) -> Result<Self> {
        let n = normal.norm();
        if !(n > 1e-12) {
            return Err(Error::DegenerateContact("zero contact normal".into()));
        }
        if !(friction >= 0.0) {
            return Err(Error::InvalidArgument(format!("friction must be >= 0, got {friction}")));
        }
        Ok(Self {
            point,
            normal: normal / n,
            friction,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraspLabel {
    pub epsilon: f64,
    pub robust_epsilon: f64,
    pub collision_free: bool,
    pub success: bool,
}

impl GraspLabel {
    pub fn new(epsilon: f64, robust_epsilon: f64, collision_free: bool, threshold: f64) -> Self {
        Self {
            epsilon,
            robust_epsilon,
            collision_free,
            success: success_label(robust_epsilon, collision_free, threshold),
        }
    }
}

/// `true` iff the robust quality clears `threshold` and the gripper is collision-free.
pub fn success_label(robust_epsilon: f64, collision_free: bool, threshold: f64) -> bool {
    robust_epsilon > threshold && collision_free
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn label_cases() {
        assert!(!success_label(0.0, true, DEFAULT_SUCCESS_THRESHOLD));
        assert!(!success_label(0.01, false, DEFAULT_SUCCESS_THRESHOLD));
        assert!(success_label(0.01, true, DEFAULT_SUCCESS_THRESHOLD));
        assert!(!success_label(0.002, true, DEFAULT_SUCCESS_THRESHOLD));
    }

    #[test]
    fn grasp_validation() {
        assert!(Grasp3D::new(Point3::origin(), Vector3::zeros(), 0.05).is_err());
        assert!(Grasp3D::new(Point3::origin(), Vector3::x(), 0.0).is_err());
        let g = Grasp3D::new(Point3::origin(), Vector3::new(0.0, 3.0, 4.0), 0.05).unwrap();
        assert!((g.axis().norm() - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn label_monotone_in_quality(a in 0.0f64..0.02, b in 0.0f64..0.02, free: bool) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(success_label(hi, free, 0.002) >= success_label(lo, free, 0.002));
        }
    }
}
