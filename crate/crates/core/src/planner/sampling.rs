use rand::Rng as _;

use super::edges::{antipodal_pixels, detect_depth_edges, EdgePixel};
use super::PlannerConfig;
use crate::grasp_image::{bilinear, PlanarGrasp};
use crate::render::{CameraModel, DepthImage};
use crate::rng::Rng;

/// A grasp from image-space antipodal sampling with the edge pair that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AntipodalCandidate {
    pub grasp: PlanarGrasp,
    /// Friction coefficient in force when the pair was accepted.
    pub friction: f64,
    pub endpoints: (EdgePixel, EdgePixel),
}

/// Draws random edge-pixel pairs, keeps antipodal ones and emits one grasp per height level
/// from the deprojected pair center down to the table. Friction is relaxed by
/// `friction_step` every `samples_per_friction` rejections; sampling stops after `max_grasps`
/// grasps or once friction exceeds 1.
pub fn sample_antipodal_image(
    image: &DepthImage,
    camera: &CameraModel,
    table_height: f64,
    config: &PlannerConfig,
    rng: &mut Rng,
) -> Vec<AntipodalCandidate> {
    let edges = detect_depth_edges(image, config.gradient_threshold);
    sample_from_edges(&edges, image, camera, table_height, config, rng)
}

pub(crate) fn sample_from_edges(
    edges: &[EdgePixel],
    image: &DepthImage,
    camera: &CameraModel,
    table_height: f64,
    config: &PlannerConfig,
    rng: &mut Rng,
) -> Vec<AntipodalCandidate> {
    let mut out = Vec::new();
    if edges.len() < 2 {
        return out;
    }
    let origin = camera.position();
    let fx = camera.intrinsics.fx;
    let mut friction = config.min_friction;
    let mut rejections = 0;
    while out.len() < config.max_grasps && friction <= 1.0 + 1e-12 {
        let i = rng.random_range(0..edges.len());
        let mut j = rng.random_range(0..edges.len() - 1);
        if j >= i {
            j += 1;
        }
        let (u, v) = (edges[i], edges[j]);
        let before = out.len();
        if antipodal_pixels(&u, &v, friction) {
            let (dc, dr) = (v.col as f64 - u.col as f64, v.row as f64 - u.row as f64);
            let far = image.get(u.row, u.col).max(image.get(v.row, v.col)) as f64;
            if dc.hypot(dr) * far / fx <= config.gripper_width {
                let (row, col) = ((u.row + v.row) as f64 / 2.0, (u.col + v.col) as f64 / 2.0);
                let top = camera.deproject(col, row, bilinear(image, row, col));
                let ray = camera.deproject(col, row, 1.0);
                let angle = dr.atan2(dc);
                let mut h = top.z;
                while h > table_height && out.len() < config.max_grasps {
                    // depth of the point on the pixel ray at world height h
                    let depth = (h - origin.z) / (ray.z - origin.z);
                    if let Ok(grasp) = PlanarGrasp::new(row, col, angle, depth) {
                        out.push(AntipodalCandidate {
                            grasp,
                            friction,
                            endpoints: (u, v),
                        });
                    }
                    h -= config.height_step;
                }
            }
        }
        if out.len() == before {
            rejections += 1;
            if rejections >= config.samples_per_friction {
                friction += config.friction_step;
                rejections = 0;
            }
        }
    }
    out
}

/// Number of height levels `h, h - step, ...` strictly above `table`.
pub fn height_levels(top: f64, table: f64, step: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut h = top;
    while h > table {
        out.push(h);
        h -= step;
    }
    out
}
