use nalgebra::{Isometry3, Matrix3, Point3, Rotation3, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl Default for CameraIntrinsics {
    fn default() -> Self {
        Self {
            fx: 525.0,
            fy: 525.0,
            cx: 319.5,
            cy: 239.5,
            width: 640,
            height: 480,
        }
    }
}

impl CameraIntrinsics {
    pub fn validate(&self) -> Result<()> {
        let ok = self.fx > 0.0
            && self.fy > 0.0
            && self.width > 0
            && self.height > 0
            && (0.0..self.width as f64).contains(&self.cx)
            && (0.0..self.height as f64).contains(&self.cy);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid camera intrinsics {self:?}")))
        }
    }
}

/// Camera position on a sphere around the table origin, looking at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphericalPose {
    pub radius: f64,
    pub azimuth: f64,
    pub polar: f64,
}

impl SphericalPose {
    /// `world <- camera` transform: optical axis through the origin, image x-axis horizontal.
    pub fn world_from_camera(&self) -> Isometry3<f64> {
        let (st, ct) = self.azimuth.sin_cos();
        let (sp, cp) = self.polar.sin_cos();
        let position = Vector3::new(sp * ct, sp * st, cp) * self.radius;
        let z = -position / self.radius;
        let x = Vector3::new(-st, ct, 0.0);
        let y = z.cross(&x);
        let rot = Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[x, y, z]));
        Isometry3::from_parts(Translation3::from(position), UnitQuaternion::from_rotation_matrix(&rot))
    }
}

/// Pinhole camera; `camera_from_world` maps world points into the camera frame, whose
/// `z` axis is the optical axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub intrinsics: CameraIntrinsics,
    pub camera_from_world: Isometry3<f64>,
}

impl CameraModel {
    pub fn new(intrinsics: CameraIntrinsics, camera_from_world: Isometry3<f64>) -> Result<Self> {
        intrinsics.validate()?;
        Ok(Self {
            intrinsics,
            camera_from_world,
        })
    }

    pub fn looking_at_origin(intrinsics: CameraIntrinsics, pose: &SphericalPose) -> Result<Self> {
        Self::new(intrinsics, pose.world_from_camera().inverse())
    }

    pub fn width(&self) -> usize {
        self.intrinsics.width
    }

    pub fn height(&self) -> usize {
        self.intrinsics.height
    }

    pub fn position(&self) -> Point3<f64> {
        self.camera_from_world.inverse() * Point3::origin()
    }

    /// Pixel coordinates `(u, v)` (column, row) and depth along the optical axis.
    pub fn project(&self, p: &Point3<f64>) -> Result<(f64, f64, f64)> {
        let pc = self.camera_from_world * p;
        if !(pc.z > 0.0) {
            return Err(Error::BehindCamera(pc.z));
        }
        let k = &self.intrinsics;
        Ok((k.fx * pc.x / pc.z + k.cx, k.fy * pc.y / pc.z + k.cy, pc.z))
    }

    pub fn deproject(&self, u: f64, v: f64, depth: f64) -> Point3<f64> {
        self.camera_from_world.inverse() * self.deproject_camera(u, v, depth)
    }

    /// Deprojection into the camera frame.
    pub fn deproject_camera(&self, u: f64, v: f64, depth: f64) -> Point3<f64> {
        let k = &self.intrinsics;
        Point3::new((u - k.cx) * depth / k.fx, (v - k.cy) * depth / k.fy, depth)
    }

    /// Same pose and focal lengths with the principal point moved by `(du, dv)` pixels.
    pub fn shifted(&self, du: f64, dv: f64) -> Self {
        let mut c = *self;
        c.intrinsics.cx += du;
        c.intrinsics.cy += dv;
        c
    }
}
