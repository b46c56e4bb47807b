use std::collections::HashMap;

use nalgebra::{Point3, Vector3};

use crate::{Error, Result};

/// A polygonal facet of a convex hull.
#[derive(Debug, Clone, PartialEq)]
pub struct HullFacet {
    /// Outward unit normal.
    pub normal: Vector3<f64>,
    /// Plane offset: `normal · x = offset` for points on the facet.
    pub offset: f64,
    /// Indices into [`ConvexHull::points`], counter-clockwise seen from outside.
    pub vertices: Vec<usize>,
    /// `neighbors[k]` is the facet across the edge `vertices[k] -> vertices[k + 1]`.
    pub neighbors: Vec<usize>,
}

/// Convex hull of a point set with outward triangles and merged polygonal facets.
#[derive(Debug, Clone)]
pub struct ConvexHull {
    points: Vec<Point3<f64>>,
    triangles: Vec<[usize; 3]>,
    facets: Vec<HullFacet>,
    tolerance: f64,
}

impl ConvexHull {
    /// The input points (hull vertices are a subset, see [`ConvexHull::vertex_indices`]).
    pub fn points(&self) -> &[Point3<f64>] {
        &self.points
    }

    /// Outward-oriented triangulation of the hull surface.
    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn facets(&self) -> &[HullFacet] {
        &self.facets
    }

    /// Sorted indices of input points that are hull vertices.
    pub fn vertex_indices(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.triangles.iter().flatten().copied().collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    /// Largest signed distance of `p` outside any facet plane (negative inside).
    pub fn signed_distance(&self, p: &Point3<f64>) -> f64 {
        self.facets
            .iter()
            .map(|f| f.normal.dot(&p.coords) - f.offset)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, p: &Point3<f64>, tol: f64) -> bool {
        self.signed_distance(p) <= tol
    }
}

struct Face {
    v: [usize; 3],
    normal: Vector3<f64>,
    offset: f64,
    alive: bool,
}

impl Face {
    fn new(points: &[Point3<f64>], v: [usize; 3]) -> Self {
        let [a, b, c] = v.map(|i| points[i]);
        let normal = (b - a).cross(&(c - a)).normalize();
        Face {
            v,
            normal,
            offset: normal.dot(&a.coords),
            alive: true,
        }
    }

    fn distance(&self, p: &Point3<f64>) -> f64 {
        self.normal.dot(&p.coords) - self.offset
    }
}

/// Incremental 3D convex hull. Requires at least four affinely independent points.
pub fn convex_hull_3d(points: &[Point3<f64>]) -> Result<ConvexHull> {
    if points.len() < 4 {
        return Err(Error::DegenerateGeometry(format!(
            "convex hull needs at least 4 points, got {}",
            points.len()
        )));
    }
    if points.iter().any(|p| !p.coords.iter().all(|c| c.is_finite())) {
        return Err(Error::InvalidArgument("non-finite point in hull input".into()));
    }
    let scale = {
        let mut lo = Vector3::repeat(f64::INFINITY);
        let mut hi = Vector3::repeat(f64::NEG_INFINITY);
        for p in points {
            lo = lo.inf(&p.coords);
            hi = hi.sup(&p.coords);
        }
        (hi - lo).norm().max(f64::MIN_POSITIVE)
    };
    let eps = 1e-11 * scale;

    let [i0, i1, i2, i3] = initial_simplex(points, eps)?;
    let mut faces: Vec<Face> = Vec::new();
    let centroid = Point3::from((points[i0].coords + points[i1].coords + points[i2].coords + points[i3].coords) / 4.0);
    for tri in [[i0, i1, i2], [i0, i1, i3], [i0, i2, i3], [i1, i2, i3]] {
        let mut f = Face::new(points, tri);
        if f.distance(&centroid) > 0.0 {
            f = Face::new(points, [tri[0], tri[2], tri[1]]);
        }
        faces.push(f);
    }

    let mut edge_owner: HashMap<(usize, usize), usize> = HashMap::new();
    for (fi, f) in faces.iter().enumerate() {
        for k in 0..3 {
            edge_owner.insert((f.v[k], f.v[(k + 1) % 3]), fi);
        }
    }

    for (pi, p) in points.iter().enumerate() {
        if [i0, i1, i2, i3].contains(&pi) {
            continue;
        }
        let visible: Vec<usize> = faces
            .iter()
            .enumerate()
            .filter(|(_, f)| f.alive && f.distance(p) > eps)
            .map(|(i, _)| i)
            .collect();
        if visible.is_empty() {
            continue;
        }
        let mut is_visible = vec![false; faces.len()];
        for &fi in &visible {
            is_visible[fi] = true;
        }
        let mut horizon = Vec::new();
        for &fi in &visible {
            let v = faces[fi].v;
            for k in 0..3 {
                let (a, b) = (v[k], v[(k + 1) % 3]);
                let across = edge_owner.get(&(b, a)).copied();
                if across.is_none_or(|o| !is_visible[o]) {
                    horizon.push((a, b));
                }
            }
        }
        for &fi in &visible {
            faces[fi].alive = false;
            let v = faces[fi].v;
            for k in 0..3 {
                let key = (v[k], v[(k + 1) % 3]);
                if edge_owner.get(&key) == Some(&fi) {
                    edge_owner.remove(&key);
                }
            }
        }
        for (a, b) in horizon {
            let f = Face::new(points, [a, b, pi]);
            let idx = faces.len();
            for k in 0..3 {
                edge_owner.insert((f.v[k], f.v[(k + 1) % 3]), idx);
            }
            faces.push(f);
        }
    }

    let alive: Vec<&Face> = faces.iter().filter(|f| f.alive).collect();
    let triangles: Vec<[usize; 3]> = alive.iter().map(|f| f.v).collect();
    let facets = merge_coplanar(points, &triangles, 1e-9, eps * 10.0)?;
    Ok(ConvexHull {
        points: points.to_vec(),
        triangles,
        facets,
        tolerance: eps,
    })
}

fn initial_simplex(points: &[Point3<f64>], eps: f64) -> Result<[usize; 4]> {
    let i0 = (0..points.len())
        .min_by(|&a, &b| points[a].x.total_cmp(&points[b].x))
        .unwrap_or(0);
    let far = |f: &dyn Fn(&Point3<f64>) -> f64| {
        (0..points.len())
            .max_by(|&a, &b| f(&points[a]).total_cmp(&f(&points[b])))
            .unwrap_or(0)
    };
    let i1 = far(&|p| (p - points[i0]).norm());
    let d01 = points[i1] - points[i0];
    if d01.norm() <= eps {
        return Err(Error::DegenerateGeometry("all points coincide".into()));
    }
    let line_dist = |p: &Point3<f64>| (p - points[i0]).cross(&d01).norm() / d01.norm();
    let i2 = far(&line_dist);
    if line_dist(&points[i2]) <= eps {
        return Err(Error::DegenerateGeometry("points are collinear".into()));
    }
    let n = d01.cross(&(points[i2] - points[i0])).normalize();
    let plane_dist = |p: &Point3<f64>| n.dot(&(p - points[i0])).abs();
    let i3 = far(&plane_dist);
    if plane_dist(&points[i3]) <= eps {
        return Err(Error::DegenerateGeometry("points are coplanar".into()));
    }
    Ok([i0, i1, i2, i3])
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Groups adjacent coplanar triangles into polygons and records facet adjacency.
fn merge_coplanar(
    points: &[Point3<f64>],
    triangles: &[[usize; 3]],
    angle_tol: f64,
    offset_tol: f64,
) -> Result<Vec<HullFacet>> {
    let faces: Vec<Face> = triangles.iter().map(|&t| Face::new(points, t)).collect();
    let mut owner: HashMap<(usize, usize), usize> = HashMap::new();
    for (i, t) in triangles.iter().enumerate() {
        for k in 0..3 {
            owner.insert((t[k], t[(k + 1) % 3]), i);
        }
    }
    let mut parent: Vec<usize> = (0..triangles.len()).collect();
    for (i, t) in triangles.iter().enumerate() {
        for k in 0..3 {
            if let Some(&j) = owner.get(&(t[(k + 1) % 3], t[k])) {
                let coplanar = faces[i].normal.dot(&faces[j].normal) > 1.0 - angle_tol
                    && (faces[i].offset - faces[j].offset).abs() < offset_tol;
                if coplanar {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                    }
                }
            }
        }
    }
    let mut group_of = vec![0usize; triangles.len()];
    let mut roots: Vec<usize> = Vec::new();
    let mut root_index: HashMap<usize, usize> = HashMap::new();
    for i in 0..triangles.len() {
        let r = find(&mut parent, i);
        let g = *root_index.entry(r).or_insert_with(|| {
            roots.push(r);
            roots.len() - 1
        });
        group_of[i] = g;
    }
    let n_groups = roots.len();
    let mut boundary: Vec<HashMap<usize, usize>> = vec![HashMap::new(); n_groups];
    let mut area_normal = vec![Vector3::zeros(); n_groups];
    for (i, t) in triangles.iter().enumerate() {
        let g = group_of[i];
        let [a, b, c] = t.map(|k| points[k]);
        area_normal[g] += (b - a).cross(&(c - a));
        for k in 0..3 {
            let (u, v) = (t[k], t[(k + 1) % 3]);
            let interior = owner.get(&(v, u)).is_some_and(|&j| group_of[j] == g);
            if !interior {
                boundary[g].insert(u, v);
            }
        }
    }
    let mut facets = Vec::with_capacity(n_groups);
    for g in 0..n_groups {
        let next = &boundary[g];
        let start = *next.keys().min().ok_or_else(|| {
            Error::DegenerateGeometry("hull facet without boundary".into())
        })?;
        let mut loop_ = vec![start];
        let mut cur = next[&start];
        while cur != start {
            if loop_.len() > next.len() {
                return Err(Error::DegenerateGeometry("non-manifold hull facet".into()));
            }
            loop_.push(cur);
            cur = *next
                .get(&cur)
                .ok_or_else(|| Error::DegenerateGeometry("open hull facet boundary".into()))?;
        }
        let normal = area_normal[g].normalize();
        let offset = loop_.iter().map(|&i| normal.dot(&points[i].coords)).sum::<f64>() / loop_.len() as f64;
        facets.push(HullFacet {
            normal,
            offset,
            vertices: loop_,
            neighbors: Vec::new(),
        });
    }
    for g in 0..n_groups {
        let verts = facets[g].vertices.clone();
        let neighbors = (0..verts.len())
            .map(|k| {
                let (a, b) = (verts[k], verts[(k + 1) % verts.len()]);
                owner
                    .get(&(b, a))
                    .map(|&j| group_of[j])
                    .ok_or_else(|| Error::DegenerateGeometry("hull edge without neighbor".into()))
            })
            .collect::<Result<Vec<_>>>()?;
        facets[g].neighbors = neighbors;
    }
    Ok(facets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn cube_corners() -> Vec<Point3<f64>> {
        let mut v = Vec::new();
        for x in [-1.0, 1.0] {
            for y in [-1.0, 1.0] {
                for z in [-1.0, 1.0] {
                    v.push(Point3::new(x, y, z));
                }
            }
        }
        v
    }

    #[test]
    fn cube_has_eight_vertices_six_square_facets() {
        let h = convex_hull_3d(&cube_corners()).unwrap();
        assert_eq!(h.vertex_indices().len(), 8);
        assert_eq!(h.facets().len(), 6);
        for f in h.facets() {
            assert_eq!(f.vertices.len(), 4);
            assert!((f.offset - 1.0).abs() < 1e-12);
            assert_eq!(f.neighbors.len(), 4);
        }
    }

    #[test]
    fn interior_point_excluded() {
        let mut pts = cube_corners();
        pts.push(Point3::new(0.1, -0.2, 0.3));
        pts.push(Point3::new(0.0, 0.0, 1.0)); // on a facet
        let h = convex_hull_3d(&pts).unwrap();
        assert_eq!(h.vertex_indices(), (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn tetrahedron_is_its_own_hull() {
        let pts = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(0.0, 0.0, 1.0),
        ];
        let h = convex_hull_3d(&pts).unwrap();
        assert_eq!(h.vertex_indices(), vec![0, 1, 2, 3]);
        assert_eq!(h.facets().len(), 4);
    }

    #[test]
    fn coplanar_and_collinear_rejected() {
        let flat: Vec<_> = (0..10).map(|i| Point3::new(i as f64, (i * i) as f64, 0.0)).collect();
        assert!(matches!(convex_hull_3d(&flat), Err(Error::DegenerateGeometry(_))));
        let line: Vec<_> = (0..10).map(|i| Point3::new(i as f64, 0.0, 0.0)).collect();
        assert!(matches!(convex_hull_3d(&line), Err(Error::DegenerateGeometry(_))));
    }

    #[test]
    fn facets_are_outward_and_adjacency_symmetric() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<_> = (0..200)
            .map(|_| Point3::new(rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()))
            .collect();
        let h = convex_hull_3d(&pts).unwrap();
        let c = Point3::from(pts.iter().map(|p| p.coords).sum::<Vector3<f64>>() / pts.len() as f64);
        for (fi, f) in h.facets().iter().enumerate() {
            assert!(f.normal.dot(&c.coords) < f.offset);
            for &n in &f.neighbors {
                assert!(h.facets()[n].neighbors.contains(&fi));
            }
        }
        // Euler characteristic of the triangulated surface
        let v = h.vertex_indices().len() as i64;
        let t = h.triangles().len() as i64;
        assert_eq!(v - 3 * t / 2 + t, 2);
    }
}
