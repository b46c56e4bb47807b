use nalgebra::{Point3, Vector3};

use super::{Contact, Grasp3D};
use crate::mesh::TriangleMesh;

/// Closes both jaws from the grasp endpoints toward each other and returns the first
/// surface contact of each, or `None` if a jaw misses the object or starts inside it.
pub fn find_contacts(grasp: &Grasp3D, mesh: &TriangleMesh, friction: f64) -> Option<(Contact, Contact)> {
    let (p1, p2) = grasp.endpoints();
    let a = grasp.axis();
    let c1 = jaw_contact(mesh, &p1, &a, grasp.max_width(), friction)?;
    let c2 = jaw_contact(mesh, &p2, &-a, grasp.max_width(), friction)?;
    Some((c1, c2))
}

fn jaw_contact(mesh: &TriangleMesh, start: &Point3<f64>, dir: &Vector3<f64>, travel: f64, friction: f64) -> Option<Contact> {
    let hits = mesh.raycast_all(start, dir, travel);
    let first = hits.first()?;
    // hits on a shared edge or vertex arrive as a group with equal t
    let mut normal = Vector3::zeros();
    for h in hits.iter().take_while(|h| h.t - first.t <= 1e-12) {
        if h.normal.dot(dir) < 0.0 {
            normal += h.normal;
        }
    }
    let n = normal.norm();
    if n < 1e-12 || (normal / n).dot(dir) > -1e-9 {
        return None;
    }
    Contact::new(first.point, -normal / n, friction).ok()
}

/// Whether the segment between the contacts lies inside both friction cones.
pub fn is_antipodal(c1: &Contact, c2: &Contact, friction: f64) -> bool {
    let v = c2.point - c1.point;
    let len = v.norm();
    if len < 1e-12 {
        return false;
    }
    let v = v / len;
    let cos_limit = friction.atan().cos();
    v.dot(&c1.normal) >= cos_limit - 1e-12 && (-v).dot(&c2.normal) >= cos_limit - 1e-12
}
