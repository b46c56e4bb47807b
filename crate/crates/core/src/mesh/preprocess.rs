use nalgebra::{Matrix3, Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::TriangleMesh;
use crate::{Error, Result};

/// Opening width of the reference parallel-jaw gripper (m).
pub const DEFAULT_GRIPPER_WIDTH: f64 = 0.05;

/// Mass assigned to every object (kg).
pub const OBJECT_MASS: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassProperties {
    pub mass: f64,
    pub center_of_mass: Point3<f64>,
}

/// Aligns the mesh to the principal axes of its vertex covariance, rescales it so the
/// smallest bounding-box extent fits the gripper, and places the bounding-box center at
/// the origin. Mass is 1 kg at the bounding-box center, which also handles open meshes.
pub fn preprocess_mesh(mesh: &TriangleMesh, gripper_width: f64) -> Result<(TriangleMesh, MassProperties)> {
    if !(gripper_width > 0.0) {
        return Err(Error::InvalidArgument(format!("gripper width must be positive, got {gripper_width}")));
    }
    let verts = mesh.vertices();
    let n = verts.len() as f64;
    let mean = verts.iter().map(|v| v.coords).sum::<Vector3<f64>>() / n;
    let mut cov = Matrix3::zeros();
    for v in verts {
        let d = v.coords - mean;
        cov += d * d.transpose();
    }
    cov /= n;

    let rotation = principal_axes(&cov, verts, &mean)?;
    let aligned: Vec<Vector3<f64>> = verts.iter().map(|v| rotation * (v.coords - mean)).collect();

    let mut lo = Vector3::repeat(f64::INFINITY);
    let mut hi = Vector3::repeat(f64::NEG_INFINITY);
    for v in &aligned {
        lo = lo.inf(v);
        hi = hi.sup(v);
    }
    let extent = hi - lo;
    let min_extent = extent.min();
    let scale = if min_extent > gripper_width { gripper_width / min_extent } else { 1.0 };
    let center = (lo + hi) * 0.5;

    let out: Vec<Point3<f64>> = aligned.iter().map(|v| Point3::from((v - center) * scale)).collect();
    let processed = TriangleMesh::new(out, mesh.faces().to_vec())?;
    log::debug!("preprocessed mesh scale={scale} extent={:?}", (extent * scale).as_slice());
    Ok((
        processed,
        MassProperties {
            mass: OBJECT_MASS,
            center_of_mass: Point3::origin(),
        },
    ))
}

/// Rows of the returned matrix are the principal axes, largest variance first.
/// Axis signs follow the third moment so repeated application is a fixed point.
fn principal_axes(cov: &Matrix3<f64>, verts: &[Point3<f64>], mean: &Vector3<f64>) -> Result<Matrix3<f64>> {
    let scale = cov.trace();
    if !(scale > 0.0) {
        return Err(Error::DegenerateGeometry("all vertices coincide".into()));
    }
    let off = cov[(0, 1)].abs() + cov[(0, 2)].abs() + cov[(1, 2)].abs();
    let (values, vectors) = if off <= 1e-12 * scale {
        (cov.diagonal(), Matrix3::identity())
    } else {
        let eig = cov.symmetric_eigen();
        (eig.eigenvalues, eig.eigenvectors)
    };
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    if values[order[1]] <= 1e-12 * scale {
        return Err(Error::DegenerateGeometry("vertex covariance is rank deficient (collinear points)".into()));
    }
    let mut axes: Vec<Vector3<f64>> = order.iter().map(|&k| vectors.column(k).into_owned()).collect();
    for axis in axes.iter_mut() {
        let skew: f64 = verts.iter().map(|v| axis.dot(&(v.coords - mean)).powi(3)).sum();
        let first = axis.iter().copied().find(|c| c.abs() > 1e-12).unwrap_or(1.0);
        let flip = if skew.abs() > 1e-12 * scale.powf(1.5) * verts.len() as f64 { skew < 0.0 } else { first < 0.0 };
        if flip {
            *axis = -*axis;
        }
    }
    if axes[0].cross(&axes[1]).dot(&axes[2]) < 0.0 {
        axes[2] = -axes[2];
    }
    Ok(Matrix3::from_rows(&[axes[0].transpose(), axes[1].transpose(), axes[2].transpose()]))
}
