//! Procedural closed meshes: boxes, prisms, extruded outlines and icospheres.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::{Point3, Vector3};

use crate::mesh::TriangleMesh;

/// Axis-aligned box centered at the origin (8 vertices, 12 faces).
pub fn box_mesh(sx: f64, sy: f64, sz: f64) -> TriangleMesh {
    let (x, y) = (sx / 2.0, sy / 2.0);
    extrude(&[(-x, -y), (x, -y), (x, y), (-x, y)], sz)
}

/// Regular n-gon prism of circumradius `radius`, axis along z, centered at the origin.
pub fn prism(radius: f64, height: f64, sides: usize) -> TriangleMesh {
    let outline: Vec<(f64, f64)> = (0..sides.max(3))
        .map(|k| {
            let a = 2.0 * PI * k as f64 / sides.max(3) as f64;
            (radius * a.cos(), radius * a.sin())
        })
        .collect();
    extrude(&outline, height)
}

/// U-shaped block: outer footprint `width` x `depth`, walls of thickness `wall`, opening toward +y.
pub fn u_shape(width: f64, depth: f64, height: f64, wall: f64) -> TriangleMesh {
    let (x, y) = (width / 2.0, depth / 2.0);
    let outline = [
        (-x, -y),
        (x, -y),
        (x, y),
        (x - wall, y),
        (x - wall, -y + wall),
        (-x + wall, -y + wall),
        (-x + wall, y),
        (-x, y),
    ];
    extrude(&outline, height)
}

/// L-shaped block with legs of length `a` (along x) and `b` (along y), thickness `t`.
pub fn l_shape(a: f64, b: f64, t: f64, height: f64) -> TriangleMesh {
    let (cx, cy) = (a / 2.0, b / 2.0);
    let outline = [
        (0.0 - cx, 0.0 - cy),
        (a - cx, 0.0 - cy),
        (a - cx, t - cy),
        (t - cx, t - cy),
        (t - cx, b - cy),
        (0.0 - cx, b - cy),
    ];
    extrude(&outline, height)
}

/// Tetrahedron with the given corners (outward winding fixed automatically).
pub fn tetrahedron(p: [Point3<f64>; 4]) -> TriangleMesh {
    let c = Point3::from((p[0].coords + p[1].coords + p[2].coords + p[3].coords) / 4.0);
    let mut faces = Vec::new();
    for tri in [[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]] {
        let [a, b, d] = tri.map(|i| p[i]);
        let n = (b - a).cross(&(d - a));
        if n.dot(&(a - c)) < 0.0 {
            faces.push([tri[0], tri[2], tri[1]]);
        } else {
            faces.push(tri);
        }
    }
    TriangleMesh::new(p.to_vec(), faces).expect("non-degenerate tetrahedron")
}

/// Icosphere of the given radius; `subdivisions` refinement rounds of an icosahedron.
pub fn icosphere(radius: f64, subdivisions: usize) -> TriangleMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vector3<f64>> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vector3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, verts: &mut Vec<Vector3<f64>>| {
            *midpoint.entry((a.min(b), a.max(b))).or_insert_with(|| {
                verts.push(((verts[a] + verts[b]) * 0.5).normalize());
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = mid(a, b, &mut verts);
            let bc = mid(b, c, &mut verts);
            let ca = mid(c, a, &mut verts);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let points = verts.iter().map(|v| Point3::from(v * radius)).collect();
    TriangleMesh::new(points, faces).expect("valid icosphere")
}

/// Extrudes a simple counter-clockwise outline along z, centered on `z = 0`.
pub fn extrude(outline: &[(f64, f64)], height: f64) -> TriangleMesh {
    let n = outline.len();
    let h = height / 2.0;
    let mut verts = Vec::with_capacity(2 * n);
    for &(x, y) in outline {
        verts.push(Point3::new(x, y, -h));
    }
    for &(x, y) in outline {
        verts.push(Point3::new(x, y, h));
    }
    let mut faces = Vec::new();
    for [a, b, c] in ear_clip(outline) {
        faces.push([c, b, a]);
        faces.push([a + n, b + n, c + n]);
    }
    for k in 0..n {
        let j = (k + 1) % n;
        faces.push([k, j, j + n]);
        faces.push([k, j + n, k + n]);
    }
    TriangleMesh::new(verts, faces).expect("valid extrusion")
}

/// Ear-clipping triangulation of a simple counter-clockwise polygon.
fn ear_clip(poly: &[(f64, f64)]) -> Vec<[usize; 3]> {
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
    let mut idx: Vec<usize> = (0..poly.len()).collect();
    let mut tris = Vec::new();
    let mut guard = 0;
    while idx.len() > 3 && guard < 10_000 {
        guard += 1;
        let m = idx.len();
        let mut clipped = false;
        for k in 0..m {
            let (ia, ib, ic) = (idx[(k + m - 1) % m], idx[k], idx[(k + 1) % m]);
            let (a, b, c) = (poly[ia], poly[ib], poly[ic]);
            if cross(a, b, c) <= 1e-15 {
                continue;
            }
            let contains_other = idx.iter().any(|&p| {
                if p == ia || p == ib || p == ic {
                    return false;
                }
                let q = poly[p];
                cross(a, b, q) >= 0.0 && cross(b, c, q) >= 0.0 && cross(c, a, q) >= 0.0
            });
            if !contains_other {
                tris.push([ia, ib, ic]);
                idx.remove(k);
                clipped = true;
                break;
            }
        }
        if !clipped {
            break;
        }
    }
    if idx.len() == 3 {
        tris.push([idx[0], idx[1], idx[2]]);
    }
    tris
}
