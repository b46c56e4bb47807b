use nalgebra::{Matrix3, Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::Grasp3D;
use crate::mesh::{TriangleMesh, DEFAULT_GRIPPER_WIDTH};
use crate::{Error, Result};

/// Parallel-jaw gripper: two jaw boxes at the opening width and a base box above them.
/// In the grasp frame `x` is the closing axis and `z` points away from the table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GripperModel {
    pub opening_width: f64,
    pub jaw_thickness: f64,
    pub jaw_width: f64,
    pub jaw_length: f64,
    /// How far the fingertips reach below the grasp center.
    pub tip_depth: f64,
    pub base_height: f64,
}

impl Default for GripperModel {
    fn default() -> Self {
        Self {
            opening_width: DEFAULT_GRIPPER_WIDTH,
            jaw_thickness: 0.01,
            jaw_width: 0.02,
            jaw_length: 0.06,
            tip_depth: 0.005,
            base_height: 0.02,
        }
    }
}

impl GripperModel {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.opening_width,
            self.jaw_thickness,
            self.jaw_width,
            self.jaw_length,
            self.base_height,
        ];
        if dims.iter().any(|d| !(*d > 0.0)) || !(self.tip_depth >= 0.0) || self.tip_depth >= self.jaw_length {
            return Err(Error::InvalidArgument(format!("invalid gripper geometry {self:?}")));
        }
        Ok(())
    }

    /// World-frame boxes of the open gripper at `grasp`, given the table normal `up`.
    pub fn boxes(&self, grasp: &Grasp3D, up: &Vector3<f64>) -> Vec<OrientedBox> {
        let x = grasp.axis();
        let mut z = up - x * x.dot(up);
        if z.norm() < 1e-9 {
            z = if x.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
            z -= x * x.dot(&z);
        }
        let z = z.normalize();
        let y = z.cross(&x);
        let axes = Matrix3::from_columns(&[x, y, z]);
        let c = grasp.center();
        let at = |lx: f64, lz: f64| c + x * lx + z * lz;
        let w = self.opening_width / 2.0;
        let t = self.jaw_thickness;
        let jaw_z = -self.tip_depth + self.jaw_length / 2.0;
        let jaw_half = Vector3::new(t / 2.0, self.jaw_width / 2.0, self.jaw_length / 2.0);
        vec![
            OrientedBox::new(at(-(w + t / 2.0), jaw_z), axes, jaw_half),
            OrientedBox::new(at(w + t / 2.0, jaw_z), axes, jaw_half),
            OrientedBox::new(
                at(0.0, -self.tip_depth + self.jaw_length + self.base_height / 2.0),
                axes,
                Vector3::new(w + t, self.jaw_width / 2.0, self.base_height / 2.0),
            ),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedBox {
    pub center: Point3<f64>,
    /// Columns are the box's unit axes.
    pub axes: Matrix3<f64>,
    pub half_extents: Vector3<f64>,
}

impl OrientedBox {
    pub fn new(center: Point3<f64>, axes: Matrix3<f64>, half_extents: Vector3<f64>) -> Self {
        Self {
            center,
            axes,
            half_extents,
        }
    }

    pub fn contains(&self, p: &Point3<f64>) -> bool {
        let local = self.axes.transpose() * (p - self.center);
        (0..3).all(|k| local[k].abs() <= self.half_extents[k])
    }

    /// Half-length of the box's projection onto `dir`.
    fn radius_along(&self, dir: &Vector3<f64>) -> f64 {
        (0..3).map(|k| self.half_extents[k] * self.axes.column(k).dot(dir).abs()).sum()
    }

    pub fn lowest_along(&self, up: &Vector3<f64>) -> f64 {
        self.center.coords.dot(up) - self.radius_along(up)
    }
}

/// Separating-axis test between an oriented box and a triangle.
pub fn box_intersects_triangle(b: &OrientedBox, tri: &[Point3<f64>; 3]) -> bool {
    let rt = b.axes.transpose();
    let v = tri.map(|p| rt * (p - b.center));
    let h = b.half_extents;
    let e = [v[1] - v[0], v[2] - v[1], v[0] - v[2]];
    let separated = |axis: &Vector3<f64>| {
        if axis.norm_squared() < 1e-24 {
            return false;
        }
        let p = v.map(|q| q.dot(axis));
        let lo = p[0].min(p[1]).min(p[2]);
        let hi = p[0].max(p[1]).max(p[2]);
        let r = h.x * axis.x.abs() + h.y * axis.y.abs() + h.z * axis.z.abs();
        lo > r || hi < -r
    };
    for k in 0..3 {
        let mut a = Vector3::zeros();
        a[k] = 1.0;
        if separated(&a) {
            return false;
        }
    }
    if separated(&e[0].cross(&e[1])) {
        return false;
    }
    for k in 0..3 {
        let mut a = Vector3::zeros();
        a[k] = 1.0;
        for edge in &e {
            if separated(&a.cross(edge)) {
                return false;
            }
        }
    }
    true
}

/// `true` iff no gripper box intersects the mesh or reaches below the table plane
/// `z = table_height`. Mesh and grasp are in the table frame.
pub fn collision_free(grasp: &Grasp3D, mesh: &TriangleMesh, gripper: &GripperModel, table_height: f64) -> bool {
    let up = Vector3::z();
    let boxes = gripper.boxes(grasp, &up);
    if boxes.iter().any(|b| b.lowest_along(&up) < table_height - 1e-12) {
        return false;
    }
    for b in &boxes {
        let r = Vector3::new(b.radius_along(&Vector3::x()), b.radius_along(&Vector3::y()), b.radius_along(&Vector3::z()));
        let (lo, hi) = (b.center - r, b.center + r);
        for f in 0..mesh.faces().len() {
            let tri = mesh.triangle(f);
            let tlo = tri[0].coords.inf(&tri[1].coords).inf(&tri[2].coords);
            let thi = tri[0].coords.sup(&tri[1].coords).sup(&tri[2].coords);
            if (0..3).any(|k| tlo[k] > hi[k] || thi[k] < lo[k]) {
                continue;
            }
            if box_intersects_triangle(b, &tri) {
                return false;
            }
        }
    }
    true
}
