use std::f64::consts::PI;

use nalgebra::{Isometry3, Rotation3, Translation3, UnitQuaternion, Vector3};
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::SphericalPose;
use crate::mesh::{StablePose, TriangleMesh};
use crate::rng::Rng;
use crate::{Error, Result};

/// An object available to the scene sampler.
#[derive(Debug, Clone, Copy)]
pub struct SceneObject<'a> {
    pub id: usize,
    pub poses: &'a [StablePose],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneState {
    pub object: usize,
    pub friction: f64,
    /// Index into the object's stable-pose list.
    pub stable_pose: usize,
    /// Planar offset `(x, y, theta)` of the object on the table.
    pub planar: (f64, f64, f64),
    pub camera: SphericalPose,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateDistribution {
    pub radius: (f64, f64),
    pub polar: (f64, f64),
    pub planar_extent: f64,
    pub friction_mean: f64,
    pub friction_std: f64,
}

impl Default for StateDistribution {
    fn default() -> Self {
        Self {
            radius: (0.65, 0.75),
            polar: (0.05 * PI, 0.1 * PI),
            planar_extent: 0.1,
            friction_mean: 0.5,
            friction_std: 0.1,
        }
    }
}

/// Draws an object uniformly, one of its stable poses by probability, a planar offset, a
/// friction coefficient and a camera pose.
pub fn sample_state(objects: &[SceneObject<'_>], dist: &StateDistribution, rng: &mut Rng) -> Result<SceneState> {
    let usable: Vec<&SceneObject> = objects
        .iter()
        .filter(|o| {
            let ok = o.poses.iter().any(|p| p.probability > 0.0);
            if !ok {
                log::warn!("object {} has no stable poses; skipped", o.id);
            }
            ok
        })
        .collect();
    if usable.is_empty() {
        return Err(Error::NoObject);
    }
    let obj = usable[rng.random_range(0..usable.len())];
    let total: f64 = obj.poses.iter().map(|p| p.probability).sum();
    let mut pick = rng.random::<f64>() * total;
    let mut stable_pose = obj.poses.len() - 1;
    for (i, p) in obj.poses.iter().enumerate() {
        if pick < p.probability {
            stable_pose = i;
            break;
        }
        pick -= p.probability;
    }
    let e = dist.planar_extent;
    let planar = (rng.random_range(-e..=e), rng.random_range(-e..=e), rng.random::<f64>() * 2.0 * PI);
    let friction = truncated_normal(dist.friction_mean, dist.friction_std, rng);
    let camera = SphericalPose {
        radius: uniform(dist.radius, rng),
        azimuth: rng.random::<f64>() * 2.0 * PI,
        polar: uniform(dist.polar, rng),
    };
    Ok(SceneState {
        object: obj.id,
        friction,
        stable_pose,
        planar,
        camera,
    })
}

fn uniform(range: (f64, f64), rng: &mut Rng) -> f64 {
    range.0 + (range.1 - range.0) * rng.random::<f64>()
}

fn truncated_normal(mean: f64, std: f64, rng: &mut Rng) -> f64 {
    if !(std > 0.0) {
        return mean.clamp(0.0, 1.0);
    }
    let n = Normal::new(mean, std).expect("positive std");
    loop {
        let g: f64 = n.sample(rng);
        if (0.0..=1.0).contains(&g) {
            return g;
        }
    }
}

/// `world <- object`: the stable-pose rotation, lowered onto the table, then the planar offset.
pub fn object_pose(mesh: &TriangleMesh, pose: &StablePose, planar: (f64, f64, f64)) -> Isometry3<f64> {
    let rs = Rotation3::from_matrix(&pose.rotation);
    let min_z = mesh.vertices().iter().map(|v| (rs * v).z).fold(f64::INFINITY, f64::min);
    let rz = Rotation3::from_axis_angle(&Vector3::z_axis(), planar.2);
    let rotation = UnitQuaternion::from_rotation_matrix(&(rz * rs));
    Isometry3::from_parts(Translation3::new(planar.0, planar.1, -min_z), rotation)
}
