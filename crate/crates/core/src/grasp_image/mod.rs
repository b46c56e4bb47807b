//! Grasps in image space: projection of 3-D grasps, aligned grasp crops, the symmetry
//! augmentations, normalisation statistics and the chunked on-disk dataset.

mod dataset;

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::grasp_analysis::Grasp3D;
use crate::render::{CameraModel, DepthImage};
use crate::{Error, Result};

pub use dataset::{
    read_dataset, read_manifest, read_record_file, split_image_wise, write_dataset, write_record_file, ChunkInfo, DatasetInfo,
    DatasetManifest, GraspDataset,
};

pub const CROP_SIZE: usize = 32;

/// A grasp as seen by the camera: pixel center `(row, col)`, in-image axis angle and the
/// camera-frame depth of the gripper center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanarGrasp {
    pub row: f64,
    pub col: f64,
    /// Angle of the jaw axis from the image x-axis toward +row, in `(-pi/2, pi/2]`.
    pub angle: f64,
    pub depth: f64,
}

impl PlanarGrasp {
    pub fn new(row: f64, col: f64, angle: f64, depth: f64) -> Result<Self> {
        if !(row.is_finite() && col.is_finite() && angle.is_finite() && depth > 0.0 && depth.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "invalid planar grasp ({row}, {col}, {angle}, {depth})"
            )));
        }
        Ok(Self {
            row,
            col,
            angle: wrap_axis_angle(angle),
            depth,
        })
    }

    pub fn in_image(&self, height: usize, width: usize) -> bool {
        (0.0..height as f64).contains(&self.row) && (0.0..width as f64).contains(&self.col)
    }

    /// Jaw axis as a unit `(d_col, d_row)` pixel direction.
    pub fn direction(&self) -> (f64, f64) {
        let (s, c) = self.angle.sin_cos();
        (c, s)
    }
}

/// Maps an axis angle onto `(-pi/2, pi/2]`; a parallel-jaw axis has period pi.
pub fn wrap_axis_angle(a: f64) -> f64 {
    let mut a = a.rem_euclid(PI);
    if a > FRAC_PI_2 {
        a -= PI;
    }
    a
}

/// Projects a world-frame grasp into the image of `camera`.
pub fn project_grasp(grasp: &Grasp3D, camera: &CameraModel) -> Result<PlanarGrasp> {
    let (u, v, z) = camera.project(&grasp.center())?;
    let pg = PlanarGrasp::new(v, u, 0.0, z)?;
    if !pg.in_image(camera.height(), camera.width()) {
        return Err(Error::OffFrame(format!("grasp center projects to ({v:.1}, {u:.1})")));
    }
    let tip = grasp.center() + grasp.axis() * (0.5 * grasp.max_width());
    let (u1, v1, _) = camera.project(&tip)?;
    PlanarGrasp::new(v, u, (v1 - v).atan2(u1 - u), z)
}

/// The 3-D grasp whose center lies on the ray through the grasp pixel at the grasp depth and
/// whose axis is parallel to the table plane `z = 0` and projects onto the image angle.
pub fn deproject_grasp(grasp: &PlanarGrasp, camera: &CameraModel, max_width: f64) -> Result<Grasp3D> {
    let center = camera.deproject(grasp.col, grasp.row, grasp.depth);
    let pc = camera.camera_from_world * center;
    let r = camera.camera_from_world.rotation.to_rotation_matrix();
    let k = &camera.intrinsics;
    // image Jacobian of the projection with respect to world x and y
    let du = r.matrix().row(0) * (k.fx / pc.z) - r.matrix().row(2) * (k.fx * pc.x / (pc.z * pc.z));
    let dv = r.matrix().row(1) * (k.fy / pc.z) - r.matrix().row(2) * (k.fy * pc.y / (pc.z * pc.z));
    let j = nalgebra::Matrix2::new(du[0], du[1], dv[0], dv[1]);
    let (dc, dr) = grasp.direction();
    let a = j
        .try_inverse()
        .map(|inv| inv * nalgebra::Vector2::new(dc, dr))
        .filter(|a| a.norm() > 0.0)
        .ok_or_else(|| Error::DegenerateGeometry("the table plane is seen edge-on".into()))?;
    Grasp3D::new(center, nalgebra::Vector3::new(a.x, a.y, 0.0), max_width)
}

/// Size and metric extent of aligned grasp crops.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CropConfig {
    pub size: usize,
    /// Side of the square world-space window at the grasp depth, meters.
    pub window: f64,
}

impl Default for CropConfig {
    fn default() -> Self {
        Self {
            size: CROP_SIZE,
            window: 0.09,
        }
    }
}

impl CropConfig {
    /// Source pixels per crop pixel for a grasp at `depth` seen with focal length `focal`.
    pub fn scale(&self, focal: f64, depth: f64) -> f64 {
        focal * self.window / depth / self.size as f64
    }

    /// Source-image `(row, col)` of crop coordinates `(a, b)`.
    pub fn source_point(&self, grasp: &PlanarGrasp, focal: f64, a: f64, b: f64) -> (f64, f64) {
        let s = self.scale(focal, grasp.depth);
        let c = (self.size as f64 - 1.0) / 2.0;
        let (x, y) = ((b - c) * s, (a - c) * s);
        let (sn, cs) = grasp.angle.sin_cos();
        (grasp.row + x * sn + y * cs, grasp.col + x * cs - y * sn)
    }

    /// Crop coordinates `(a, b)` of a source-image point.
    pub fn crop_point(&self, grasp: &PlanarGrasp, focal: f64, row: f64, col: f64) -> (f64, f64) {
        let s = self.scale(focal, grasp.depth);
        let c = (self.size as f64 - 1.0) / 2.0;
        let (dr, dc) = (row - grasp.row, col - grasp.col);
        let (sn, cs) = grasp.angle.sin_cos();
        let x = dc * cs + dr * sn;
        let y = -dc * sn + dr * cs;
        (c + y / s, c + x / s)
    }
}

/// Rotated, translated and scaled crop with the grasp center at the crop center and the jaw
/// axis along the middle row. Each output pixel averages a `k x k` grid of bilinear samples
/// covering its footprint in the source image; samples beyond the border take the nearest
/// edge value.
pub fn extract_grasp_image(image: &DepthImage, grasp: &PlanarGrasp, focal: f64, cfg: &CropConfig) -> Vec<f32> {
    let s = cfg.scale(focal, grasp.depth);
    let k = ((s - 1e-9).ceil() as usize).max(1);
    let mut out = Vec::with_capacity(cfg.size * cfg.size);
    for a in 0..cfg.size {
        for b in 0..cfg.size {
            let mut acc = 0.0;
            for t in 0..k {
                for q in 0..k {
                    let da = (t as f64 + 0.5) / k as f64 - 0.5;
                    let db = (q as f64 + 0.5) / k as f64 - 0.5;
                    let (r, c) = cfg.source_point(grasp, focal, a as f64 + da, b as f64 + db);
                    acc += bilinear(image, r, c);
                }
            }
            out.push((acc / (k * k) as f64) as f32);
        }
    }
    out
}

pub fn bilinear(image: &DepthImage, row: f64, col: f64) -> f64 {
    let r0 = row.floor();
    let c0 = col.floor();
    let (fr, fc) = (row - r0, col - c0);
    let (r0, c0) = (r0 as isize, c0 as isize);
    let g = |r: isize, c: isize| image.get_clamped(r, c) as f64;
    let top = g(r0, c0) * (1.0 - fc) + g(r0, c0 + 1) * fc;
    let bottom = g(r0 + 1, c0) * (1.0 - fc) + g(r0 + 1, c0 + 1) * fc;
    if fr == 0.0 {
        top
    } else {
        top * (1.0 - fr) + bottom * fr
    }
}

/// Object, stable pose, rendered image and grasp that a record came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Provenance {
    pub object: u32,
    pub stable_pose: u32,
    pub image: u32,
    pub grasp: u32,
}

impl Provenance {
    /// Key of the rendered image this record was cropped from.
    pub fn image_key(&self) -> (u32, u32, u32) {
        (self.object, self.stable_pose, self.image)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspImageRecord {
    /// Row-major `size x size` aligned crop, meters.
    pub image: Vec<f32>,
    /// Gripper depth from the camera, meters.
    pub depth: f32,
    pub label: bool,
    pub metric: f32,
    pub provenance: Provenance,
}

/// Horizontal flip, vertical flip and 180-degree rotation of a square crop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symmetry {
    Identity,
    FlipHorizontal,
    FlipVertical,
    Rotate180,
}

impl Symmetry {
    pub const ALL: [Symmetry; 4] = [Self::Identity, Self::FlipHorizontal, Self::FlipVertical, Self::Rotate180];

    pub fn apply(self, image: &[f32], size: usize) -> Vec<f32> {
        let mut out = vec![0.0; image.len()];
        for a in 0..size {
            for b in 0..size {
                let (sa, sb) = match self {
                    Self::Identity => (a, b),
                    Self::FlipHorizontal => (a, size - 1 - b),
                    Self::FlipVertical => (size - 1 - a, b),
                    Self::Rotate180 => (size - 1 - a, size - 1 - b),
                };
                out[a * size + b] = image[sa * size + sb];
            }
        }
        out
    }
}

/// The record and its three symmetric variants, sharing label, metric and depth.
pub fn augment(record: &GraspImageRecord, size: usize) -> Vec<GraspImageRecord> {
    Symmetry::ALL
        .iter()
        .map(|s| GraspImageRecord {
            image: s.apply(&record.image, size),
            ..record.clone()
        })
        .collect()
}

/// Normalisation statistics of a training split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub pixel_mean: f64,
    pub pixel_std: f64,
    pub depth_mean: f64,
    pub depth_std: f64,
    pub positive_fraction: f64,
}

pub fn compute_stats<'a>(records: impl IntoIterator<Item = &'a GraspImageRecord> + Clone) -> Result<DatasetStats> {
    let mut n = 0usize;
    let mut px_n = 0usize;
    let (mut px_sum, mut z_sum, mut pos) = (0.0, 0.0, 0usize);
    for r in records.clone() {
        n += 1;
        px_n += r.image.len();
        px_sum += r.image.iter().map(|&p| p as f64).sum::<f64>();
        z_sum += r.depth as f64;
        pos += r.label as usize;
    }
    if n == 0 || px_n == 0 {
        return Err(Error::InvalidArgument("statistics of an empty dataset".into()));
    }
    let pixel_mean = px_sum / px_n as f64;
    let depth_mean = z_sum / n as f64;
    let (mut px_sq, mut z_sq) = (0.0, 0.0);
    for r in records {
        px_sq += r.image.iter().map(|&p| (p as f64 - pixel_mean).powi(2)).sum::<f64>();
        z_sq += (r.depth as f64 - depth_mean).powi(2);
    }
    let pixel_std = (px_sq / px_n as f64).sqrt();
    let depth_std = (z_sq / n as f64).sqrt();
    if pixel_std < 1e-12 {
        return Err(Error::ZeroStd("pixel"));
    }
    if depth_std < 1e-12 {
        return Err(Error::ZeroStd("depth"));
    }
    Ok(DatasetStats {
        pixel_mean,
        pixel_std,
        depth_mean,
        depth_std,
        positive_fraction: pos as f64 / n as f64,
    })
}

impl DatasetStats {
    pub fn normalize_image(&self, image: &[f32]) -> Vec<f64> {
        image.iter().map(|&p| (p as f64 - self.pixel_mean) / self.pixel_std).collect()
    }

    pub fn normalize_depth(&self, depth: f64) -> f64 {
        (depth - self.depth_mean) / self.depth_std
    }

    pub fn denormalize_image(&self, image: &[f64]) -> Vec<f64> {
        image.iter().map(|&p| p * self.pixel_std + self.pixel_mean).collect()
    }

    pub fn denormalize_depth(&self, z: f64) -> f64 {
        z * self.depth_std + self.depth_mean
    }
}
