use nalgebra::{Isometry3, Point3, Translation3, UnitQuaternion, Vector3};
use rand::Rng as _;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{find_contacts, friction_cone_wrenches, torque_scaling, ContactModel, EpsilonSearch, Grasp3D, WrenchSet};
use crate::mesh::TriangleMesh;
use crate::rng::Rng;

/// Uncertainty model for the Monte-Carlo robust quality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationConfig {
    pub num_samples: usize,
    pub friction_mean: f64,
    pub friction_std: f64,
    pub gripper_translation_std: f64,
    pub gripper_rotation_std: f64,
    pub object_translation_std: f64,
    pub object_rotation_std: f64,
    pub contact_model: ContactModel,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        Self {
            num_samples: 25,
            friction_mean: 0.5,
            friction_std: 0.1,
            gripper_translation_std: 0.005,
            gripper_rotation_std: 0.02,
            object_translation_std: 0.005,
            object_rotation_std: 0.02,
            contact_model: ContactModel::default(),
        }
    }
}

impl PerturbationConfig {
    /// Friction draws only; the grasp and object are held fixed.
    pub fn friction_only(mut self) -> Self {
        self.gripper_translation_std = 0.0;
        self.gripper_rotation_std = 0.0;
        self.object_translation_std = 0.0;
        self.object_rotation_std = 0.0;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub max: f64,
}

/// Epsilon quality of the grasp's contacts at the given friction; zero if a jaw misses.
pub fn grasp_epsilon(grasp: &Grasp3D, mesh: &TriangleMesh, com: &Point3<f64>, friction: f64, model: &ContactModel) -> f64 {
    grasp_epsilon_scaled(grasp, mesh, com, friction, model, torque_scaling(mesh, com), &EpsilonSearch::default())
}

fn grasp_epsilon_scaled(
    grasp: &Grasp3D,
    mesh: &TriangleMesh,
    com: &Point3<f64>,
    friction: f64,
    model: &ContactModel,
    lambda: f64,
    search: &EpsilonSearch,
) -> f64 {
    let Some((c1, c2)) = find_contacts(grasp, mesh, friction) else {
        return 0.0;
    };
    let mut w = WrenchSet::new(6);
    for c in [c1, c2] {
        match friction_cone_wrenches(&c, model, com, lambda) {
            Ok(set) => w.extend(&set).expect("6-d wrench sets"),
            Err(_) => return 0.0,
        }
    }
    search.epsilon(&w)
}

fn truncated_friction(cfg: &PerturbationConfig, rng: &mut Rng) -> f64 {
    if cfg.friction_std <= 0.0 {
        return cfg.friction_mean.clamp(0.0, 1.0);
    }
    let normal = Normal::new(cfg.friction_mean, cfg.friction_std).expect("positive std");
    for _ in 0..10_000 {
        let g: f64 = normal.sample(rng);
        if (0.0..=1.0).contains(&g) {
            return g;
        }
    }
    rng.random::<f64>()
}

fn random_rotation(std: f64, rng: &mut Rng) -> UnitQuaternion<f64> {
    if std <= 0.0 {
        return UnitQuaternion::identity();
    }
    let axis = loop {
        let v = Vector3::new(StandardNormal.sample(rng), StandardNormal.sample(rng), StandardNormal.sample(rng));
        if let Some(a) = nalgebra::Unit::try_new(v, 1e-9) {
            break a;
        }
    };
    let angle: f64 = StandardNormal.sample(rng);
    UnitQuaternion::from_axis_angle(&axis, angle * std)
}

fn gaussian_vec(std: f64, rng: &mut Rng) -> Vector3<f64> {
    if std <= 0.0 {
        return Vector3::zeros();
    }
    let v: Vector3<f64> = Vector3::new(StandardNormal.sample(rng), StandardNormal.sample(rng), StandardNormal.sample(rng));
    v * std
}

/// Mean epsilon quality under friction, gripper-pose and object-pose uncertainty.
///
/// `up` is the table normal in the object frame; object perturbations are planar with
/// respect to it. The object is perturbed about `com`.
pub fn robust_epsilon_quality(
    grasp: &Grasp3D,
    mesh: &TriangleMesh,
    com: &Point3<f64>,
    up: &Vector3<f64>,
    cfg: &PerturbationConfig,
    rng: &mut Rng,
) -> RobustEstimate {
    let n = cfg.num_samples.max(1);
    let lambda = torque_scaling(mesh, com);
    let search = EpsilonSearch::default();
    let up = up.try_normalize(1e-12).unwrap_or_else(Vector3::z);
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        let friction = truncated_friction(cfg, rng);

        let rg = random_rotation(cfg.gripper_rotation_std, rng);
        let tg = gaussian_vec(cfg.gripper_translation_std, rng);
        let center = grasp.center() + tg;
        let axis = rg * grasp.axis();

        let mut planar = gaussian_vec(cfg.object_translation_std, rng);
        planar -= up * planar.dot(&up);
        let theta: f64 = if cfg.object_rotation_std > 0.0 {
            let z: f64 = StandardNormal.sample(rng);
            z * cfg.object_rotation_std
        } else {
            0.0
        };
        // object moved by T about its COM; the grasp seen from the object frame moves by T^-1
        let about_com = Isometry3::from_parts(Translation3::from(com.coords), UnitQuaternion::identity());
        let rot = Isometry3::from_parts(Translation3::identity(), UnitQuaternion::from_axis_angle(&nalgebra::Unit::new_unchecked(up), theta));
        let object = Isometry3::from_parts(Translation3::from(planar), UnitQuaternion::identity()) * about_com * rot * about_com.inverse();
        let inv = object.inverse();
        let perturbed = match Grasp3D::new(inv * center, inv * axis, grasp.max_width()) {
            Ok(g) => g,
            Err(_) => {
                values.push(0.0);
                continue;
            }
        };
        values.push(grasp_epsilon_scaled(&perturbed, mesh, com, friction, &cfg.contact_model, lambda, &search));
    }
    let (mut mean, mut m2) = (0.0, 0.0);
    for (k, v) in values.iter().enumerate() {
        let delta = v - mean;
        mean += delta / (k + 1) as f64;
        m2 += delta * (v - mean);
    }
    let var = if n > 1 { m2 / (n - 1) as f64 } else { 0.0 };
    RobustEstimate {
        mean,
        std_error: (var / n as f64).sqrt(),
        max: values.iter().copied().fold(0.0, f64::max),
    }
}
