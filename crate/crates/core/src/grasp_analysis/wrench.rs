use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::Contact;
use crate::mesh::TriangleMesh;
use crate::{Error, Result};

/// A finite set of wrenches of a common dimension (6 for spatial, 3 for planar grasps).
#[derive(Debug, Clone, PartialEq)]
pub struct WrenchSet {
    dim: usize,
    data: Vec<f64>,
}

impl WrenchSet {
    pub fn new(dim: usize) -> Self {
        Self { dim, data: Vec::new() }
    }

    pub fn from_rows(dim: usize, rows: &[Vec<f64>]) -> Result<Self> {
        let mut w = Self::new(dim);
        for r in rows {
            w.push(r)?;
        }
        Ok(w)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn push(&mut self, w: &[f64]) -> Result<()> {
        if w.len() != self.dim {
            return Err(Error::InvalidArgument(format!("wrench of length {} in a {}-d set", w.len(), self.dim)));
        }
        if !w.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidArgument("non-finite wrench".into()));
        }
        self.data.extend_from_slice(w);
        Ok(())
    }

    pub fn extend(&mut self, other: &WrenchSet) -> Result<()> {
        if other.dim != self.dim {
            return Err(Error::InvalidArgument("wrench set dimension mismatch".into()));
        }
        self.data.extend_from_slice(&other.data);
        Ok(())
    }

    /// Applies a linear map to every wrench.
    pub fn map(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> Self {
        let mut out = Self::new(self.dim);
        for w in self.iter() {
            out.data.extend(f(w));
        }
        out
    }
}

/// Discretised soft-finger contact model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactModel {
    pub num_cone_edges: usize,
    /// Torsional moment bound per unit normal force and unit friction (m).
    pub torsion_coefficient: f64,
    pub soft_finger: bool,
}

impl Default for ContactModel {
    fn default() -> Self {
        Self {
            num_cone_edges: 8,
            torsion_coefficient: 0.005,
            soft_finger: true,
        }
    }
}

/// `1 / max |v - com|` over mesh vertices.
pub fn torque_scaling(mesh: &TriangleMesh, com: &Point3<f64>) -> f64 {
    let r = mesh.vertices().iter().map(|v| (v - com).norm()).fold(0.0, f64::max);
    if r > 0.0 {
        1.0 / r
    } else {
        1.0
    }
}

/// Tangent frame anchored to the in-plane moment arm, so the discretised cone moves with
/// the object under rigid transforms; a fixed axis is used when the arm is along `n`.
fn tangent_basis(n: &Vector3<f64>, arm: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let in_plane = arm - n * arm.dot(n);
    if in_plane.norm() > 1e-9 {
        let t1 = in_plane.normalize();
        return (t1, n.cross(&t1));
    }
    let helper = if n.x.abs() <= n.y.abs() && n.x.abs() <= n.z.abs() {
        Vector3::x()
    } else if n.y.abs() <= n.z.abs() {
        Vector3::y()
    } else {
        Vector3::z()
    };
    let t1 = n.cross(&helper).normalize();
    (t1, n.cross(&t1))
}

/// Wrenches spanning the contact's friction cone: `num_cone_edges` edge forces with unit
/// normal component, plus (soft finger) the normal force with ± maximal torsion. Torques
/// are taken about `com` and multiplied by `torque_scaling`. A frictionless contact gives
/// the single normal wrench.
pub fn friction_cone_wrenches(
    contact: &Contact,
    model: &ContactModel,
    com: &Point3<f64>,
    torque_scaling: f64,
) -> Result<WrenchSet> {
    if model.num_cone_edges < 3 {
        return Err(Error::InvalidArgument("friction cone needs at least 3 edges".into()));
    }
    let n_norm = contact.normal.norm();
    if !(n_norm > 1e-12) {
        return Err(Error::DegenerateContact("zero contact normal".into()));
    }
    let n = contact.normal / n_norm;
    let arm = contact.point - com;
    let mut set = WrenchSet::new(6);
    let mut push = |f: Vector3<f64>, extra_torque: Vector3<f64>| {
        let tau = (arm.cross(&f) + extra_torque) * torque_scaling;
        set.push(&[f.x, f.y, f.z, tau.x, tau.y, tau.z])
    };
    let mu = contact.friction;
    if mu == 0.0 {
        push(n, Vector3::zeros())?;
        return Ok(set);
    }
    let (t1, t2) = tangent_basis(&n, &arm);
    for k in 0..model.num_cone_edges {
        let a = 2.0 * std::f64::consts::PI * k as f64 / model.num_cone_edges as f64;
        push(n + (t1 * a.cos() + t2 * a.sin()) * mu, Vector3::zeros())?;
    }
    if model.soft_finger {
        let torsion = n * (model.torsion_coefficient * mu);
        push(n, torsion)?;
        push(n, -torsion)?;
    }
    Ok(set)
}

/// Planar (fx, fy, τ) wrenches of a 2D contact: the two friction-cone edges.
pub fn planar_contact_wrenches(point: [f64; 2], normal: [f64; 2], friction: f64, com: [f64; 2], torque_scaling: f64) -> Result<WrenchSet> {
    let len = (normal[0] * normal[0] + normal[1] * normal[1]).sqrt();
    if !(len > 1e-12) {
        return Err(Error::DegenerateContact("zero contact normal".into()));
    }
    let n = [normal[0] / len, normal[1] / len];
    let t = [-n[1], n[0]];
    let r = [point[0] - com[0], point[1] - com[1]];
    let mut set = WrenchSet::new(3);
    let signs: &[f64] = if friction == 0.0 { &[0.0] } else { &[1.0, -1.0] };
    for &s in signs {
        let f = [n[0] + s * friction * t[0], n[1] + s * friction * t[1]];
        let tau = (r[0] * f[1] - r[1] * f[0]) * torque_scaling;
        set.push(&[f[0], f[1], tau])?;
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn contact(p: [f64; 3], n: [f64; 3], mu: f64) -> Contact {
        Contact::new(Point3::from(p), Vector3::from(n), mu).unwrap()
    }

    #[test]
    fn frictionless_cone_collapses() {
        let c = contact([0.0, 0.0, 0.1], [0.0, 0.0, -1.0], 0.0);
        let w = friction_cone_wrenches(&c, &ContactModel::default(), &Point3::origin(), 1.0).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(&w.get(0)[..3], &[0.0, 0.0, -1.0]);
    }

    #[test]
    fn cone_edges_at_friction_angle() {
        let c = contact([0.01, 0.02, 0.03], [0.3, -0.5, 0.8], 0.5);
        let w = friction_cone_wrenches(&c, &ContactModel::default(), &Point3::origin(), 1.0).unwrap();
        assert_eq!(w.len(), 10);
        let n = c.normal;
        for i in 0..8 {
            let f = Vector3::from_column_slice(&w.get(i)[..3]);
            let angle = (f.dot(&n) / f.norm()).acos();
            assert!((angle - 0.5f64.atan()).abs() < 1e-9);
            assert!((f.dot(&n) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn contact_at_com_has_no_moment_arm() {
        let c = contact([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], 0.6);
        let w = friction_cone_wrenches(&c, &ContactModel::default(), &Point3::origin(), 20.0).unwrap();
        for i in 0..8 {
            assert!(w.get(i)[3..].iter().all(|t| *t == 0.0));
        }
        // torsional wrenches carry only the torsion about the normal
        let tau = &w.get(8)[3..];
        assert!((tau[0] - 20.0 * 0.005 * 0.6).abs() < 1e-15 && tau[1] == 0.0 && tau[2] == 0.0);
    }

    #[test]
    fn too_few_edges_and_zero_normal() {
        let c = contact([0.0; 3], [1.0, 0.0, 0.0], 0.5);
        let model = ContactModel {
            num_cone_edges: 2,
            ..Default::default()
        };
        assert!(friction_cone_wrenches(&c, &model, &Point3::origin(), 1.0).is_err());
        let bad = Contact {
            point: Point3::origin(),
            normal: Vector3::zeros(),
            friction: 0.5,
        };
        assert!(matches!(
            friction_cone_wrenches(&bad, &ContactModel::default(), &Point3::origin(), 1.0),
            Err(Error::DegenerateContact(_))
        ));
    }
}
