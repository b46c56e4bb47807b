use std::fs;
use std::path::{Path, PathBuf};

use grasp_core::mesh::{convex_hull_3d, write_obj, TriangleMesh};
use grasp_core::rng::{self, Rng};
use grasp_core::shapes;
use nalgebra::Point3;
use rand::Rng as _;

use crate::CliResult;

const IRREGULAR_SEED: u64 = 2017;
const IRREGULAR_COUNT: usize = 12;

/// Convex hull of points drawn in an ellipsoidal shell, compacted to its hull vertices.
pub fn random_polytope(points: usize, radii: [f64; 3], r: &mut Rng) -> TriangleMesh {
    let pts: Vec<Point3<f64>> = (0..points)
        .map(|_| {
            let v = nalgebra::Vector3::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-1.0..1.0));
            let v = v.normalize() * r.random_range(0.7..1.0);
            Point3::new(v.x * radii[0], v.y * radii[1], v.z * radii[2])
        })
        .collect();
    let hull = convex_hull_3d(&pts).expect("random shell points span 3-D");
    let keep = hull.vertex_indices();
    let mut map = vec![usize::MAX; pts.len()];
    for (new, &old) in keep.iter().enumerate() {
        map[old] = new;
    }
    let verts = keep.iter().map(|&i| pts[i]).collect();
    let faces = hull.triangles().iter().map(|t| t.map(|i| map[i])).collect();
    TriangleMesh::new(verts, faces).expect("hull triangulation is valid")
}

/// Extruded star-shaped outline with random radii at evenly spaced angles.
pub fn random_star_extrusion(corners: usize, radius: (f64, f64), height: f64, r: &mut Rng) -> TriangleMesh {
    let outline: Vec<(f64, f64)> = (0..corners)
        .map(|k| {
            let a = 2.0 * std::f64::consts::PI * (k as f64 + r.random_range(-0.3..0.3)) / corners as f64;
            let d = r.random_range(radius.0..radius.1);
            (d * a.cos(), d * a.sin())
        })
        .collect();
    shapes::extrude(&outline, height)
}

/// Seeded irregular objects: alternating random polytopes and star extrusions.
pub fn irregular_objects() -> Vec<(String, TriangleMesh)> {
    (0..IRREGULAR_COUNT)
        .map(|i| {
            let mut r = rng::stream(IRREGULAR_SEED, &[i as u64]);
            if i % 2 == 0 {
                let radii = [r.random_range(0.04..0.08), r.random_range(0.025..0.05), r.random_range(0.015..0.035)];
                (format!("polytope_{i:02}"), random_polytope(r.random_range(8..30), radii, &mut r))
            } else {
                let corners = r.random_range(5..10);
                let h = r.random_range(0.02..0.045);
                (format!("star_{i:02}"), random_star_extrusion(corners, (0.02, 0.07), h, &mut r))
            }
        })
        .collect()
}

/// A set of closed procedural meshes at household-object dimensions: boxes, prisms, tool-like
/// extruded outlines and seeded irregular solids.
pub fn builtin_objects() -> Vec<(String, TriangleMesh)> {
    let regular: Vec<(&str, TriangleMesh)> = vec![
        ("block_cube", shapes::box_mesh(0.045, 0.045, 0.045)),
        ("carton", shapes::box_mesh(0.045, 0.09, 0.16)),
        ("tray", shapes::box_mesh(0.14, 0.09, 0.03)),
        ("prism_hex", shapes::prism(0.025, 0.11, 6)),
        ("prism_tri", shapes::prism(0.055, 0.04, 3)),
        ("prism_oct", shapes::prism(0.025, 0.15, 8)),
        ("can", shapes::prism(0.033, 0.12, 16)),
        ("bracket_l", shapes::l_shape(0.13, 0.09, 0.03, 0.04)),
        ("channel_u", shapes::u_shape(0.12, 0.10, 0.05, 0.02)),
        (
            "bar_t",
            shapes::extrude(
                &[(-0.07, 0.02), (-0.07, 0.05), (0.07, 0.05), (0.07, 0.02), (0.015, 0.02), (0.015, -0.08), (-0.015, -0.08), (-0.015, 0.02)],
                0.035,
            ),
        ),
        ("wedge", shapes::extrude(&[(-0.06, -0.035), (0.06, -0.035), (-0.06, 0.04)], 0.045)),
        (
            "plus",
            shapes::extrude(
                &[
                    (-0.015, -0.06),
                    (0.015, -0.06),
                    (0.015, -0.015),
                    (0.06, -0.015),
                    (0.06, 0.015),
                    (0.015, 0.015),
                    (0.015, 0.06),
                    (-0.015, 0.06),
                    (-0.015, 0.015),
                    (-0.06, 0.015),
                    (-0.06, -0.015),
                    (-0.015, -0.015),
                ],
                0.03,
            ),
        ),
        (
            "hammer",
            shapes::extrude(
                &[(-0.0125, -0.12), (0.0125, -0.12), (0.0125, 0.06), (0.05, 0.06), (0.05, 0.09), (-0.05, 0.09), (-0.05, 0.06), (-0.0125, 0.06)],
                0.03,
            ),
        ),
        ("screwdriver", shapes::prism(0.015, 0.2, 6)),
        (
            "spatula",
            shapes::extrude(
                &[(-0.01, -0.12), (0.01, -0.12), (0.01, 0.04), (0.035, 0.04), (0.035, 0.12), (-0.035, 0.12), (-0.035, 0.04), (-0.01, 0.04)],
                0.012,
            ),
        ),
        (
            "wrench",
            shapes::extrude(
                &[
                    (-0.01, -0.09),
                    (0.01, -0.09),
                    (0.01, 0.07),
                    (0.03, 0.07),
                    (0.03, 0.11),
                    (0.012, 0.11),
                    (0.012, 0.09),
                    (-0.012, 0.09),
                    (-0.012, 0.11),
                    (-0.03, 0.11),
                    (-0.03, 0.07),
                    (-0.01, 0.07),
                ],
                0.008,
            ),
        ),
    ];
    regular
        .into_iter()
        .map(|(n, m)| (n.to_string(), m))
        .chain(irregular_objects())
        .collect()
}

/// Writes the built-in set as numbered `.obj` files and returns their paths.
pub fn write_builtin_objects(dir: &Path) -> CliResult<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut out = Vec::new();
    for (i, (name, mesh)) in builtin_objects().iter().enumerate() {
        let p = dir.join(format!("{i:02}_{name}.obj"));
        fs::write(&p, write_obj(mesh))?;
        out.push(p);
    }
    Ok(out)
}
