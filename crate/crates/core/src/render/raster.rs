use nalgebra::{Isometry3, Point3};
use serde::{Deserialize, Serialize};

use super::{object_pose, CameraIntrinsics, CameraModel, DepthImage, SceneState};
use crate::mesh::{StablePose, TriangleMesh};
use crate::{Error, Result};

const NEAR: f64 = 1e-4;
const FAR: f64 = 100.0;

/// A rendered depth image with its object mask and the camera it was rendered with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderedImage {
    pub depth: DepthImage,
    pub mask: Vec<bool>,
    pub camera: CameraModel,
}

/// Depth of the table plane `z = 0` along the ray through pixel `(u, v)`.
pub fn table_depth(camera: &CameraModel, u: f64, v: f64) -> f64 {
    let world_from_camera = camera.camera_from_world.inverse();
    let origin = world_from_camera.translation.vector;
    let dir = world_from_camera.rotation * camera.deproject_camera(u, v, 1.0).coords;
    if dir.z < 0.0 {
        (-origin.z / dir.z).clamp(NEAR, FAR)
    } else {
        FAR
    }
}

/// Renders the object of `state` in its stable pose over the table, centered on the object.
pub fn render_scene(mesh: &TriangleMesh, pose: &StablePose, state: &SceneState, intrinsics: &CameraIntrinsics) -> Result<RenderedImage> {
    let camera = CameraModel::looking_at_origin(*intrinsics, &state.camera)?;
    let world_from_object = object_pose(mesh, pose, state.planar);
    render_depth(mesh, &world_from_object, &camera, true)
}

/// Z-buffer rendering of `mesh` placed by `world_from_object` over the table plane. With
/// `center`, the principal point is shifted so the object origin lands on the image center;
/// the returned camera reflects the shift.
pub fn render_depth(mesh: &TriangleMesh, world_from_object: &Isometry3<f64>, camera: &CameraModel, center: bool) -> Result<RenderedImage> {
    let (w, h) = (camera.width(), camera.height());
    let world: Vec<Point3<f64>> = mesh.vertices().iter().map(|v| world_from_object * v).collect();
    let in_frame = world.iter().any(|p| {
        camera
            .project(p)
            .map(|(u, v, _)| (0.0..w as f64).contains(&u) && (0.0..h as f64).contains(&v))
            .unwrap_or(false)
    });
    if !in_frame {
        return Err(Error::OffFrame("no mesh vertex projects into the image".into()));
    }
    let camera = if center {
        let (u0, v0, _) = camera.project(&(world_from_object * Point3::origin()))?;
        camera.shifted((w as f64 - 1.0) / 2.0 - u0, (h as f64 - 1.0) / 2.0 - v0)
    } else {
        *camera
    };

    let mut zbuf = vec![0.0f64; w * h];
    for v in 0..h {
        for u in 0..w {
            zbuf[v * w + u] = table_depth(&camera, u as f64, v as f64);
        }
    }
    let mut mask = vec![false; w * h];
    let k = camera.intrinsics;
    let cam_pts: Vec<Point3<f64>> = world.iter().map(|p| camera.camera_from_world * p).collect();
    let mut clipped = 0usize;
    for face in mesh.faces() {
        let p = face.map(|i| cam_pts[i]);
        if p.iter().any(|q| q.z <= NEAR) {
            clipped += 1;
            continue;
        }
        let s = p.map(|q| (k.fx * q.x / q.z + k.cx, k.fy * q.y / q.z + k.cy, 1.0 / q.z));
        let area = edge(s[0], s[1], (s[2].0, s[2].1));
        if area.abs() < 1e-12 {
            continue;
        }
        let umin = s.iter().map(|q| q.0).fold(f64::INFINITY, f64::min).ceil().max(0.0);
        let umax = s.iter().map(|q| q.0).fold(f64::NEG_INFINITY, f64::max).floor().min(w as f64 - 1.0);
        let vmin = s.iter().map(|q| q.1).fold(f64::INFINITY, f64::min).ceil().max(0.0);
        let vmax = s.iter().map(|q| q.1).fold(f64::NEG_INFINITY, f64::max).floor().min(h as f64 - 1.0);
        if umin > umax || vmin > vmax {
            continue;
        }
        for v in vmin as usize..=vmax as usize {
            for u in umin as usize..=umax as usize {
                let q = (u as f64, v as f64);
                let b0 = edge(s[1], s[2], q) / area;
                let b1 = edge(s[2], s[0], q) / area;
                let b2 = 1.0 - b0 - b1;
                if b0 < -1e-12 || b1 < -1e-12 || b2 < -1e-12 {
                    continue;
                }
                let inv_z = b0 * s[0].2 + b1 * s[1].2 + b2 * s[2].2;
                let z = 1.0 / inv_z;
                let idx = v * w + u;
                if z < zbuf[idx] {
                    zbuf[idx] = z;
                    mask[idx] = true;
                }
            }
        }
    }
    if clipped > 0 {
        log::warn!("{clipped} triangles behind the near plane were skipped");
    }
    let depth = DepthImage::new(h, w, zbuf.iter().map(|&z| z as f32).collect())?;
    Ok(RenderedImage { depth, mask, camera })
}

fn edge(a: (f64, f64, f64), b: (f64, f64, f64), p: (f64, f64)) -> f64 {
    (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::render::SphericalPose;
    use crate::shapes;
    use nalgebra::{Translation3, UnitQuaternion, Vector3};

    fn camera(az: f64, polar: f64) -> CameraModel {
        CameraModel::looking_at_origin(
            CameraIntrinsics::default(),
            &SphericalPose {
                radius: 0.7,
                azimuth: az,
                polar,
            },
        )
        .unwrap()
    }

    #[test]
    fn background_is_table_plane() {
        let cam = camera(1.1, 0.28);
        let cube = shapes::box_mesh(0.01, 0.01, 0.01);
        let pose = Isometry3::from_parts(Translation3::new(0.0, 0.0, 0.005), UnitQuaternion::identity());
        let r = render_depth(&cube, &pose, &cam, false).unwrap();
        let origin = cam.position();
        let mut worst = 0.0f64;
        for v in (0..480).step_by(7) {
            for u in (0..640).step_by(7) {
                if r.mask[v * 640 + u] {
                    continue;
                }
                // intersect the pixel ray with z = 0 and project the hit back for its depth
                let far = cam.deproject(u as f64, v as f64, 1.0);
                let s = origin.z / (origin.z - far.z);
                let hit = origin + (far - origin) * s;
                let (_, _, d) = cam.project(&hit).unwrap();
                worst = worst.max((r.depth.get(v, u) as f64 - d).abs());
            }
        }
        assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn cube_center_pixel_hits_top_face() {
        let cam = camera(0.0, 0.0);
        let cube = shapes::box_mesh(0.05, 0.05, 0.05);
        let pose = Isometry3::from_parts(Translation3::new(0.0, 0.0, 0.025), UnitQuaternion::identity());
        let r = render_depth(&cube, &pose, &cam, false).unwrap();
        // straight down: the top face is at 0.7 - 0.05
        let d = r.depth.get(239, 319) as f64;
        let expected = 0.65;
        assert!((d - expected).abs() < 1e-6, "{d}");
        assert!(r.mask[239 * 640 + 319]);
        assert!(!r.mask[0]);
    }

    #[test]
    fn oblique_ray_face_intersection() {
        let cam = camera(0.7, 0.25);
        let cube = shapes::box_mesh(0.05, 0.05, 0.05);
        let pose = Isometry3::from_parts(Translation3::new(0.01, -0.02, 0.025), UnitQuaternion::from_euler_angles(0.0, 0.0, 0.3));
        let r = render_depth(&cube, &pose, &cam, false).unwrap();
        let world = cube.transformed(&pose);
        let origin = cam.position();
        let mut checked = 0;
        for (v, u) in [(239, 319), (230, 330), (250, 300), (245, 325)] {
            let pc = cam.deproject_camera(u as f64, v as f64, 1.0);
            let dir = cam.camera_from_world.inverse().rotation * pc.coords;
            if let Some(hit) = world.raycast_first(&origin, &dir, 10.0) {
                // dir has unit optical-axis component, so t is the depth
                assert!((r.depth.get(v, u) as f64 - hit.t).abs() < 1e-6);
                checked += 1;
            }
        }
        assert!(checked >= 2);
    }

    #[test]
    fn sphere_silhouette_area() {
        let cam = camera(0.0, 0.0);
        let radius = 0.03;
        let sphere = shapes::icosphere(radius, 5);
        let pose = Isometry3::from_parts(Translation3::new(0.0, 0.0, radius), UnitQuaternion::identity());
        let r = render_depth(&sphere, &pose, &cam, false).unwrap();
        let area = r.mask.iter().filter(|&&m| m).count() as f64;
        // silhouette of a sphere seen from distance D is a disc of angular radius asin(R / D)
        let dist = 0.7 - radius;
        let tan = (radius / dist).asin().tan();
        let expected = std::f64::consts::PI * (525.0 * tan).powi(2);
        assert!((area - expected).abs() / expected < 0.02, "{area} vs {expected}");
    }

    #[test]
    fn off_frame_and_centering() {
        let cam = camera(0.0, 0.2);
        let cube = shapes::box_mesh(0.05, 0.05, 0.05);
        let far = Isometry3::from_parts(Translation3::new(5.0, 0.0, 0.025), UnitQuaternion::identity());
        assert!(matches!(render_depth(&cube, &far, &cam, false), Err(Error::OffFrame(_))));
        let near = Isometry3::from_parts(Translation3::new(0.08, -0.05, 0.025), UnitQuaternion::identity());
        let r = render_depth(&cube, &near, &cam, true).unwrap();
        let (u, v, _) = r.camera.project(&(near * Point3::origin())).unwrap();
        assert!((u - 319.5).abs() < 1e-9 && (v - 239.5).abs() < 1e-9);
        assert!(r.mask[240 * 640 + 320]);
    }

    #[test]
    fn object_never_deeper_than_table() {
        let cam = camera(2.0, 0.3);
        let m = shapes::u_shape(0.09, 0.06, 0.04, 0.015);
        let pose = Isometry3::from_parts(Translation3::new(0.0, 0.03, 0.02), UnitQuaternion::from_axis_angle(&Vector3::z_axis(), 0.4));
        let r = render_depth(&m, &pose, &cam, true).unwrap();
        for v in 0..480 {
            for u in 0..640 {
                assert!(r.depth.get(v, u) as f64 <= table_depth(&r.camera, u as f64, v as f64) + 1e-6);
            }
        }
    }
}
