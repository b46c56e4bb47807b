use nalgebra::{Point3, Vector3};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{find_contacts, is_antipodal, Grasp3D, SAMPLING_FRICTION};
use crate::mesh::{TriangleMesh, DEFAULT_GRIPPER_WIDTH};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AntipodalSamplerConfig {
    pub max_grasps: usize,
    pub friction: f64,
    pub max_width: f64,
    /// Candidates closer than this to an accepted center with a similar axis are rejected.
    pub min_center_distance: f64,
    pub min_axis_angle_deg: f64,
    pub max_samples: usize,
}

impl Default for AntipodalSamplerConfig {
    fn default() -> Self {
        Self {
            max_grasps: 100,
            friction: SAMPLING_FRICTION,
            max_width: DEFAULT_GRIPPER_WIDTH,
            min_center_distance: 0.0025,
            min_axis_angle_deg: 10.0,
            max_samples: 20_000,
        }
    }
}

/// Rejection sampling of antipodal point pairs: a surface point is drawn by area, an axis
/// is drawn uniformly from its friction cone, and the opposite contact is found by ray
/// casting. The pair is kept if the closing jaws meet it antipodally.
pub fn sample_antipodal_grasps_3d(mesh: &TriangleMesh, cfg: &AntipodalSamplerConfig, rng: &mut Rng) -> Vec<Grasp3D> {
    let mut cumulative = Vec::with_capacity(mesh.faces().len());
    let mut total = 0.0;
    for f in 0..mesh.faces().len() {
        total += mesh.face_area(f);
        cumulative.push(total);
    }
    let half_angle = cfg.friction.atan();
    let cos_cover = cfg.min_axis_angle_deg.to_radians().cos();
    let mut out: Vec<Grasp3D> = Vec::new();
    for _ in 0..cfg.max_samples {
        if out.len() >= cfg.max_grasps {
            break;
        }
        let r = rng.random::<f64>() * total;
        let face = cumulative.partition_point(|&c| c < r).min(cumulative.len() - 1);
        let [a, b, c] = mesh.triangle(face);
        let (mut s, mut t) = (rng.random::<f64>(), rng.random::<f64>());
        if s + t > 1.0 {
            s = 1.0 - s;
            t = 1.0 - t;
        }
        let p1 = a + (b - a) * s + (c - a) * t;
        let inward = -mesh.face_normals()[face];
        let axis = sample_cone(&inward, half_angle, rng);

        let start = p1 + axis * 1e-9;
        let Some(exit) = mesh.raycast_all(&start, &axis, cfg.max_width).into_iter().find(|h| h.t > 1e-9) else {
            continue;
        };
        if exit.normal.dot(&axis) <= 0.0 {
            continue;
        }
        let center = Point3::from((p1.coords + exit.point.coords) * 0.5);
        let Ok(grasp) = Grasp3D::new(center, axis, cfg.max_width) else {
            continue;
        };
        let Some((c1, c2)) = find_contacts(&grasp, mesh, cfg.friction) else {
            continue;
        };
        if !is_antipodal(&c1, &c2, cfg.friction) {
            continue;
        }
        let crowded = out.iter().any(|g| {
            (g.center() - grasp.center()).norm() < cfg.min_center_distance && g.axis().dot(&grasp.axis()).abs() > cos_cover
        });
        if !crowded {
            out.push(grasp);
        }
    }
    if out.is_empty() {
        log::warn!("no antipodal grasps found after {} samples", cfg.max_samples);
    }
    out
}

/// Uniform direction (by solid angle) within `half_angle` of `axis`.
fn sample_cone(axis: &Vector3<f64>, half_angle: f64, rng: &mut Rng) -> Vector3<f64> {
    let cos_t = 1.0 - rng.random::<f64>() * (1.0 - half_angle.cos());
    let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
    let phi = rng.random::<f64>() * std::f64::consts::TAU;
    let helper = if axis.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let u = axis.cross(&helper).normalize();
    let v = axis.cross(&u);
    (axis * cos_t + (u * phi.cos() + v * phi.sin()) * sin_t).normalize()
}
