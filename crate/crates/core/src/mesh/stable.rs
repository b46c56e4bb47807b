//! Quasi-static stable poses.
//!
//! A drop from a uniformly random orientation is simulated on the convex hull: the body
//! first rests on its lowest vertex, pivots about it until a second vertex touches, rolls
//! about that edge onto a facet, and keeps toppling across facet edges until the center of
//! mass projects strictly inside the supporting facet. The probability of a pose is the
//! fraction of drops that end on its facet.

use std::collections::HashMap;

use nalgebra::{Matrix3, Point3, Rotation3, Vector3};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{convex_hull_3d, ConvexHull, MassProperties, TriangleMesh};
use crate::rng;
use crate::Result;

pub const DEFAULT_STABLE_POSE_THRESHOLD: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StablePose {
    /// Maps object coordinates to table coordinates; the resting facet faces `-z`.
    pub rotation: Matrix3<f64>,
    pub probability: f64,
    /// Index of the resting facet in the object's convex hull.
    pub facet: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StablePoseConfig {
    pub num_samples: usize,
    pub threshold: f64,
    pub seed: u64,
}

impl Default for StablePoseConfig {
    fn default() -> Self {
        Self {
            num_samples: 10_000,
            threshold: DEFAULT_STABLE_POSE_THRESHOLD,
            seed: 0,
        }
    }
}

pub fn compute_stable_poses(mesh: &TriangleMesh, props: &MassProperties, threshold: f64) -> Result<Vec<StablePose>> {
    compute_stable_poses_with(
        mesh,
        props,
        &StablePoseConfig {
            threshold,
            ..Default::default()
        },
    )
}

pub fn compute_stable_poses_with(
    mesh: &TriangleMesh,
    props: &MassProperties,
    config: &StablePoseConfig,
) -> Result<Vec<StablePose>> {
    let hull = convex_hull_3d(mesh.vertices())?;
    let probs = facet_probabilities(&hull, &props.center_of_mass, config.num_samples, config.seed);
    let mut poses: Vec<StablePose> = probs
        .iter()
        .enumerate()
        .filter(|&(_, &p)| p > config.threshold)
        .map(|(facet, &probability)| StablePose {
            rotation: resting_rotation(&hull.facets()[facet].normal),
            probability,
            facet,
        })
        .collect();
    poses.sort_by(|a, b| b.probability.total_cmp(&a.probability).then(a.facet.cmp(&b.facet)));
    Ok(poses)
}

/// Rotation taking the outward facet normal onto `-z`.
pub(crate) fn resting_rotation(normal: &Vector3<f64>) -> Matrix3<f64> {
    let down = -Vector3::z();
    let r = Rotation3::rotation_between(normal, &down)
        .unwrap_or_else(|| Rotation3::from_axis_angle(&Vector3::x_axis(), std::f64::consts::PI));
    // re-orthonormalise the image of the normal exactly
    let mut m = r.into_inner();
    let err = m * normal - down;
    if err.norm() > 1e-12 {
        m = Rotation3::from_matrix(&m).into_inner();
    }
    m
}

/// Whether the center of mass projects strictly inside the facet.
pub(crate) fn facet_is_stable(hull: &ConvexHull, facet: usize, com: &Point3<f64>) -> bool {
    worst_edge(hull, facet, com).1 > hull.tolerance()
}

/// The facet edge with the smallest in-plane clearance from the projected COM, and that clearance.
fn worst_edge(hull: &ConvexHull, facet: usize, com: &Point3<f64>) -> (usize, f64) {
    let f = &hull.facets()[facet];
    let pts = hull.points();
    let n = f.vertices.len();
    (0..n)
        .map(|k| {
            let a = pts[f.vertices[k]];
            let b = pts[f.vertices[(k + 1) % n]];
            let outward = (b - a).cross(&f.normal).normalize();
            (k, (a - com).dot(&outward))
        })
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .unwrap_or((0, f64::NEG_INFINITY))
}

/// Fraction of random drops that come to rest on each facet.
pub(crate) fn facet_probabilities(hull: &ConvexHull, com: &Point3<f64>, samples: usize, seed: u64) -> Vec<f64> {
    let tumbler = Tumbler::new(hull, com);
    let mut counts = vec![0usize; hull.facets().len()];
    let mut rng = rng::stream(seed, &[0x57AB1E]);
    for _ in 0..samples {
        let d = random_unit(&mut rng);
        if let Some(f) = tumbler.drop(d, &mut rng) {
            counts[f] += 1;
        }
    }
    counts.iter().map(|&c| c as f64 / samples.max(1) as f64).collect()
}

fn random_unit(rng: &mut rng::Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        );
        let n: f64 = v.norm();
        if n > 1e-9 {
            return v / n;
        }
    }
}

struct Tumbler<'a> {
    hull: &'a ConvexHull,
    com: Point3<f64>,
    verts: Vec<usize>,
    /// Facets that contain a given unordered vertex pair on their boundary or inside.
    pair_facets: HashMap<(usize, usize), Vec<usize>>,
    stable: Vec<bool>,
}

impl<'a> Tumbler<'a> {
    fn new(hull: &'a ConvexHull, com: &Point3<f64>) -> Self {
        let mut pair_facets: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (fi, f) in hull.facets().iter().enumerate() {
            for (i, &a) in f.vertices.iter().enumerate() {
                for &b in &f.vertices[i + 1..] {
                    pair_facets.entry((a.min(b), a.max(b))).or_default().push(fi);
                }
            }
        }
        let stable = (0..hull.facets().len()).map(|f| facet_is_stable(hull, f, com)).collect();
        Self {
            hull,
            com: *com,
            verts: hull.vertex_indices(),
            pair_facets,
            stable,
        }
    }

    /// `d` is the downward direction expressed in the object frame.
    fn drop(&self, mut d: Vector3<f64>, rng: &mut rng::Rng) -> Option<usize> {
        let pts = self.hull.points();
        for _ in 0..64 {
            let v = *self
                .verts
                .iter()
                .max_by(|&&a, &&b| pts[a].coords.dot(&d).total_cmp(&pts[b].coords.dot(&d)))?;
            let r = pts[v] - self.com;
            let t = -(r - d * r.dot(&d));
            if t.norm() < 1e-12 {
                // COM directly above a vertex: unstable equilibrium, nudge
                d = (d + random_unit(rng) * 1e-6).normalize();
                continue;
            }
            let t = t.normalize();
            // pivot about v until another vertex reaches the table
            let mut best = (f64::INFINITY, v);
            for &w in &self.verts {
                if w == v {
                    continue;
                }
                let e = pts[w] - pts[v];
                let a = e.dot(&d);
                let b = e.dot(&t);
                if b <= 0.0 {
                    continue;
                }
                let theta = (-a).max(0.0).atan2(b);
                if theta < best.0 {
                    best = (theta, w);
                }
            }
            let (theta, w) = best;
            if !theta.is_finite() {
                return None;
            }
            d = (d * theta.cos() + t * theta.sin()).normalize();
            let facet = self.roll_about_edge(v, w, &d, rng)?;
            return self.topple(facet);
        }
        None
    }

    fn roll_about_edge(&self, v: usize, w: usize, d: &Vector3<f64>, rng: &mut rng::Rng) -> Option<usize> {
        let pts = self.hull.points();
        let candidates = self.pair_facets.get(&(v.min(w), v.max(w)))?;
        if candidates.len() == 1 {
            return Some(candidates[0]);
        }
        let e = (pts[w] - pts[v]).normalize();
        let r = pts[v] - self.com;
        let r_perp = r - e * r.dot(&e);
        let mut t = -(r_perp - d * r_perp.dot(d));
        t -= e * t.dot(&e);
        if t.norm() < 1e-12 {
            // COM directly above the edge: fall to either side
            t = e.cross(d) * if rng.random::<bool>() { 1.0 } else { -1.0 };
        }
        candidates
            .iter()
            .copied()
            .max_by(|&a, &b| {
                let fa = &self.hull.facets()[a];
                let fb = &self.hull.facets()[b];
                fa.normal.dot(&t).total_cmp(&fb.normal.dot(&t))
            })
    }

    fn topple(&self, mut facet: usize) -> Option<usize> {
        for _ in 0..self.hull.facets().len() + 1 {
            if self.stable[facet] {
                return Some(facet);
            }
            let (edge, _) = worst_edge(self.hull, facet, &self.com);
            facet = self.hull.facets()[facet].neighbors[edge];
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;

    fn props() -> MassProperties {
        MassProperties {
            mass: 1.0,
            center_of_mass: Point3::origin(),
        }
    }

    #[test]
    fn cube_has_six_equiprobable_poses() {
        let cube = shapes::box_mesh(0.05, 0.05, 0.05);
        let poses = compute_stable_poses(&cube, &props(), 0.05).unwrap();
        assert_eq!(poses.len(), 6);
        for p in &poses {
            assert!((p.probability - 1.0 / 6.0).abs() < 0.02, "{}", p.probability);
        }
    }

    #[test]
    fn resting_facet_points_down() {
        let m = shapes::prism(0.03, 0.05, 7);
        let hull = convex_hull_3d(m.vertices()).unwrap();
        let poses = compute_stable_poses(&m, &props(), 0.0).unwrap();
        assert!(!poses.is_empty());
        for p in &poses {
            let n = p.rotation * hull.facets()[p.facet].normal;
            assert!((n - Vector3::new(0.0, 0.0, -1.0)).norm() < 1e-9);
            assert!((p.rotation.determinant() - 1.0).abs() < 1e-9);
            assert!((p.rotation * p.rotation.transpose() - Matrix3::identity()).norm() < 1e-9);
        }
        let total: f64 = poses.iter().map(|p| p.probability).sum();
        assert!(total <= 1.0 + 1e-9);
    }

    #[test]
    fn tall_box_prefers_lying_down() {
        let b = shapes::box_mesh(0.01, 0.01, 0.1);
        let all = compute_stable_poses(&b, &props(), 0.0).unwrap();
        let hull = convex_hull_3d(b.vertices()).unwrap();
        let lying: f64 = all
            .iter()
            .filter(|p| hull.facets()[p.facet].normal.z.abs() < 0.5)
            .map(|p| p.probability)
            .sum();
        assert!(lying > 0.9, "lying probability {lying}");
        assert!(compute_stable_poses(&b, &props(), 0.3).unwrap().len() < 6);
    }

    #[test]
    fn impossible_threshold_gives_nothing() {
        let cube = shapes::box_mesh(0.05, 0.05, 0.05);
        assert!(compute_stable_poses(&cube, &props(), 1.1).unwrap().is_empty());
    }

    #[test]
    fn only_stable_facets_receive_mass() {
        // off-center COM makes some facets unstable
        let b = shapes::box_mesh(0.05, 0.03, 0.02);
        let com = Point3::new(0.02, 0.0, 0.0);
        let hull = convex_hull_3d(b.vertices()).unwrap();
        let probs = facet_probabilities(&hull, &com, 2000, 1);
        for (f, p) in probs.iter().enumerate() {
            if *p > 0.0 {
                assert!(facet_is_stable(&hull, f, &com));
            }
        }
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
