//! Triangle meshes: loading, validation, preprocessing, convex hulls and stable poses.

mod hull;
mod obj;
mod preprocess;
mod stable;

pub use hull::{convex_hull_3d, ConvexHull, HullFacet};
pub use obj::{load_mesh, parse_obj, write_obj};
pub use preprocess::{preprocess_mesh, MassProperties, DEFAULT_GRIPPER_WIDTH};
pub use stable::{
    compute_stable_poses, compute_stable_poses_with, StablePose, StablePoseConfig,
    DEFAULT_STABLE_POSE_THRESHOLD,
};

use nalgebra::{Isometry3, Point3, Vector3};

use crate::{Error, Result};

/// Faces with area below this (m²) are dropped during validation.
pub const MIN_FACE_AREA: f64 = 1e-12;

/// An indexed triangle mesh with per-face outward normals derived from the winding order.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Point3<f64>>,
    faces: Vec<[usize; 3]>,
    normals: Vec<Vector3<f64>>,
}

/// A ray-triangle intersection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub t: f64,
    pub face: usize,
    pub point: Point3<f64>,
    /// Outward unit normal of the hit face.
    pub normal: Vector3<f64>,
}

impl TriangleMesh {
    /// Validates indices and coordinates and drops zero-area faces.
    pub fn new(vertices: Vec<Point3<f64>>, faces: Vec<[usize; 3]>) -> Result<Self> {
        if let Some(v) = vertices.iter().find(|v| !v.coords.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidArgument(format!("non-finite vertex {v:?}")));
        }
        let n = vertices.len();
        if let Some(f) = faces.iter().find(|f| f.iter().any(|&i| i >= n)) {
            return Err(Error::InvalidArgument(format!(
                "face {f:?} references a vertex out of range (have {n})"
            )));
        }
        let mut kept = Vec::with_capacity(faces.len());
        let mut normals = Vec::with_capacity(faces.len());
        for f in faces {
            let [a, b, c] = f.map(|i| vertices[i]);
            let cross = (b - a).cross(&(c - a));
            if 0.5 * cross.norm() < MIN_FACE_AREA {
                continue;
            }
            kept.push(f);
            normals.push(cross.normalize());
        }
        if kept.is_empty() {
            return Err(Error::EmptyGeometry("mesh has no non-degenerate faces".into()));
        }
        Ok(Self {
            vertices,
            faces: kept,
            normals,
        })
    }

    pub fn vertices(&self) -> &[Point3<f64>] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn face_normals(&self) -> &[Vector3<f64>] {
        &self.normals
    }

    pub fn triangle(&self, face: usize) -> [Point3<f64>; 3] {
        self.faces[face].map(|i| self.vertices[i])
    }

    pub fn face_area(&self, face: usize) -> f64 {
        let [a, b, c] = self.triangle(face);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    /// Axis-aligned bounds `(min, max)`.
    pub fn bounds(&self) -> (Point3<f64>, Point3<f64>) {
        let mut lo = Point3::from([f64::INFINITY; 3]);
        let mut hi = Point3::from([f64::NEG_INFINITY; 3]);
        for v in &self.vertices {
            for k in 0..3 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        (lo, hi)
    }

    /// Applies a rigid transform to every vertex.
    pub fn transformed(&self, iso: &Isometry3<f64>) -> Self {
        Self {
            vertices: self.vertices.iter().map(|v| iso * v).collect(),
            faces: self.faces.clone(),
            normals: self.normals.iter().map(|n| iso * n).collect(),
        }
    }

    /// Applies an arbitrary per-vertex map; faces are revalidated.
    pub fn map_vertices(&self, f: impl Fn(&Point3<f64>) -> Point3<f64>) -> Result<Self> {
        Self::new(self.vertices.iter().map(f).collect(), self.faces.clone())
    }

    /// All intersections of the ray `origin + t * dir`, `t` in `[0, t_max]`, sorted by `t`.
    pub fn raycast_all(&self, origin: &Point3<f64>, dir: &Vector3<f64>, t_max: f64) -> Vec<RayHit> {
        let mut hits: Vec<RayHit> = (0..self.faces.len())
            .filter_map(|f| {
                let [a, b, c] = self.triangle(f);
                ray_triangle(origin, dir, &a, &b, &c)
                    .filter(|&t| (0.0..=t_max).contains(&t))
                    .map(|t| RayHit {
                        t,
                        face: f,
                        point: origin + dir * t,
                        normal: self.normals[f],
                    })
            })
            .collect();
        hits.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.face.cmp(&b.face)));
        hits
    }

    pub fn raycast_first(&self, origin: &Point3<f64>, dir: &Vector3<f64>, t_max: f64) -> Option<RayHit> {
        self.raycast_all(origin, dir, t_max).into_iter().next()
    }

    /// Point-in-solid by ray parity along a fixed, non-axis-aligned direction.
    /// Only meaningful for closed meshes.
    pub fn contains(&self, p: &Point3<f64>) -> bool {
        let dir = Vector3::new(0.5773, 0.5774, 0.5775).normalize();
        let hits = self.raycast_all(p, &dir, f64::INFINITY);
        // coincident hits on shared edges count once
        let mut count = 0;
        let mut last = f64::NEG_INFINITY;
        for h in hits {
            if h.t - last > 1e-12 {
                count += 1;
            }
            last = h.t;
        }
        count % 2 == 1
    }
}

/// Möller–Trumbore intersection; returns the ray parameter of the hit.
pub fn ray_triangle(
    origin: &Point3<f64>,
    dir: &Vector3<f64>,
    a: &Point3<f64>,
    b: &Point3<f64>,
    c: &Point3<f64>,
) -> Option<f64> {
    let e1 = b - a;
    let e2 = c - a;
    let p = dir.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-18 {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - a;
    let u = s.dot(&p) * inv;
    if !(-1e-12..=1.0 + 1e-12).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = dir.dot(&q) * inv;
    if v < -1e-12 || u + v > 1.0 + 1e-12 {
        return None;
    }
    Some(e2.dot(&q) * inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;

    #[test]
    fn degenerate_faces_are_dropped() {
        let v = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(2.0, 0.0, 0.0),
        ];
        let m = TriangleMesh::new(v, vec![[0, 1, 2], [0, 1, 3]]).unwrap();
        assert_eq!(m.faces().len(), 1);
    }

    #[test]
    fn all_degenerate_is_empty_geometry() {
        let v = vec![Point3::origin(), Point3::new(1.0, 0.0, 0.0), Point3::new(2.0, 0.0, 0.0)];
        assert!(matches!(TriangleMesh::new(v, vec![[0, 1, 2]]), Err(Error::EmptyGeometry(_))));
    }

    #[test]
    fn out_of_range_index_rejected() {
        let v = vec![Point3::origin(); 3];
        assert!(TriangleMesh::new(v, vec![[0, 1, 3]]).is_err());
    }

    #[test]
    fn box_raycast_and_containment() {
        let m = shapes::box_mesh(1.0, 2.0, 3.0);
        let hits = m.raycast_all(&Point3::new(-5.0, 0.1, 0.2), &Vector3::x(), 100.0);
        assert_eq!(hits.len(), 2);
        assert!((hits[0].t - 4.5).abs() < 1e-12);
        assert!((hits[1].t - 5.5).abs() < 1e-12);
        assert!(hits[0].normal.dot(&Vector3::x()) < 0.0);
        assert!(m.contains(&Point3::new(0.1, 0.2, 0.3)));
        assert!(!m.contains(&Point3::new(0.6, 0.0, 0.0)));
        assert!((m.surface_area() - 22.0).abs() < 1e-12);
    }
}
