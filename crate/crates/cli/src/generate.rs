use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use grasp_core::grasp_analysis::{
    collision_free, robust_epsilon_quality, sample_antipodal_grasps_3d, success_label, AntipodalSamplerConfig, Grasp3D,
};
use grasp_core::grasp_image::{
    extract_grasp_image, project_grasp, read_record_file, write_dataset, write_record_file, DatasetInfo, DatasetManifest,
    GraspDataset, GraspImageRecord, Provenance,
};
use grasp_core::mesh::{compute_stable_poses_with, load_mesh, preprocess_mesh, StablePose, StablePoseConfig, TriangleMesh};
use grasp_core::render::{object_pose, render_scene, SceneState, SphericalPose};
use grasp_core::rng::{self, Rng};
use nalgebra::{Point3, Vector3};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::{CliError, CliResult, PipelineConfig};

/// Per-object generation counts, also the completion marker of a resumable run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSummary {
    pub id: usize,
    pub name: String,
    pub config_hash: String,
    pub stable_poses: usize,
    pub grasps: usize,
    /// Grasp-pose pairs whose axis was within the alignment tolerance of the table plane.
    pub labelled: usize,
    pub positive_labels: usize,
    pub records: usize,
    pub dropped_off_frame: usize,
}

#[derive(Debug, Clone)]
pub struct GenerateOutput {
    pub manifest: DatasetManifest,
    pub objects: Vec<ObjectSummary>,
    pub failed: Vec<(String, String)>,
}

/// `.obj` files of the mesh directory in name order, truncated to `object_count`.
pub fn list_meshes(cfg: &PipelineConfig) -> CliResult<Vec<PathBuf>> {
    let dir = &cfg.mesh_dir;
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::Missing(format!("mesh directory {}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("obj")))
        .collect();
    paths.sort();
    if let Some(n) = cfg.object_count {
        paths.truncate(n);
    }
    if paths.is_empty() {
        return Err(CliError::Missing(format!("no .obj meshes in {}", dir.display())));
    }
    Ok(paths)
}

/// A prepared object: centered mesh, its retained stable poses and sampled grasps.
pub struct PreparedObject {
    pub mesh: TriangleMesh,
    pub center_of_mass: Point3<f64>,
    pub poses: Vec<StablePose>,
    pub grasps: Vec<Grasp3D>,
}

pub fn prepare_object(id: usize, path: &Path, cfg: &PipelineConfig) -> CliResult<PreparedObject> {
    let raw = load_mesh(path)?;
    let (mesh, props) = preprocess_mesh(&raw, cfg.gripper.opening_width)?;
    let mut poses = compute_stable_poses_with(
        &mesh,
        &props,
        &StablePoseConfig {
            threshold: cfg.stable_pose_threshold,
            seed: rng::derive_seed(cfg.seed, &[0x57, id as u64]),
            ..Default::default()
        },
    )?;
    poses.sort_by(|a, b| b.probability.total_cmp(&a.probability));
    poses.truncate(cfg.max_stable_poses);
    let sampler = AntipodalSamplerConfig {
        max_grasps: cfg.grasps_per_object,
        max_width: cfg.gripper.opening_width,
        ..cfg.sampler
    };
    let grasps = sample_antipodal_grasps_3d(&mesh, &sampler, &mut rng::stream(cfg.seed, &[0x9a, id as u64]));
    Ok(PreparedObject {
        mesh,
        center_of_mass: props.center_of_mass,
        poses,
        grasps,
    })
}

/// A grasp rotated parallel to the table in one stable pose, with its labels.
#[derive(Debug, Clone, Copy)]
pub struct PoseGrasp {
    pub index: usize,
    pub grasp: Grasp3D,
    pub robust_epsilon: f64,
    pub collision_free: bool,
    pub success: bool,
}

/// Grasps whose axis is within the tolerance of the table plane in `pose`, projected onto
/// it and labelled by robust quality and collision.
pub fn label_pose(obj: &PreparedObject, id: usize, pose_index: usize, cfg: &PipelineConfig) -> Vec<PoseGrasp> {
    let pose = &obj.poses[pose_index];
    let up: Vector3<f64> = pose.rotation.transpose() * Vector3::z();
    let posed = object_pose(&obj.mesh, pose, (0.0, 0.0, 0.0));
    let world = obj.mesh.transformed(&posed);
    let max_tilt = cfg.alignment_tolerance_deg.to_radians().sin();
    let labelled: Vec<Option<PoseGrasp>> = par_map(obj.grasps.len(), |gi| {
        let g = &obj.grasps[gi];
        let s = g.axis().dot(&up);
        if s.abs() > max_tilt {
            return None;
        }
        let aligned = Grasp3D::new(g.center(), g.axis() - up * s, g.max_width()).ok()?;
        let mut r = rng::stream(cfg.seed, &[0xe9, id as u64, pose_index as u64, gi as u64]);
        let q = robust_epsilon_quality(&aligned, &obj.mesh, &obj.center_of_mass, &up, &cfg.perturbation, &mut r).mean;
        let free = collision_free(&aligned.transformed(&posed), &world, &cfg.gripper, 0.0);
        Some(PoseGrasp {
            index: gi,
            grasp: aligned,
            robust_epsilon: q,
            collision_free: free,
            success: success_label(q, free, cfg.success_threshold),
        })
    });
    labelled.into_iter().flatten().collect()
}

/// Planar placement and camera for one image of an object resting in a fixed pose.
pub fn sample_view(cfg: &PipelineConfig, object: usize, stable_pose: usize, r: &mut Rng) -> SceneState {
    let d = &cfg.scene;
    let e = d.planar_extent;
    let planar = (r.random_range(-e..=e), r.random_range(-e..=e), r.random::<f64>() * 2.0 * PI);
    let camera = SphericalPose {
        radius: d.radius.0 + (d.radius.1 - d.radius.0) * r.random::<f64>(),
        azimuth: r.random::<f64>() * 2.0 * PI,
        polar: d.polar.0 + (d.polar.1 - d.polar.0) * r.random::<f64>(),
    };
    SceneState {
        object,
        friction: d.friction_mean,
        stable_pose,
        planar,
        camera,
    }
}

/// Renders every image of every pose of one object and crops each labelled grasp.
pub fn object_records(id: usize, name: &str, obj: &PreparedObject, cfg: &PipelineConfig) -> (ObjectSummary, Vec<GraspImageRecord>) {
    let mut summary = ObjectSummary {
        id,
        name: name.to_string(),
        config_hash: cfg.hash(),
        stable_poses: obj.poses.len(),
        grasps: obj.grasps.len(),
        labelled: 0,
        positive_labels: 0,
        records: 0,
        dropped_off_frame: 0,
    };
    let mut records = Vec::new();
    for (pi, pose) in obj.poses.iter().enumerate() {
        let labels = label_pose(obj, id, pi, cfg);
        summary.labelled += labels.len();
        summary.positive_labels += labels.iter().filter(|l| l.success).count();
        if labels.is_empty() {
            continue;
        }
        let per_image = par_map(cfg.images_per_pose, |k| {
            let mut r = rng::stream(cfg.seed, &[0x71, id as u64, pi as u64, k as u64]);
            let state = sample_view(cfg, id, pi, &mut r);
            let rendered = match render_scene(&obj.mesh, pose, &state, &cfg.camera) {
                Ok(x) => x,
                Err(e) => {
                    log::warn!("object={id} pose={pi} image={k} skipped: {e}");
                    return (Vec::new(), labels.len());
                }
            };
            let world_from_object = object_pose(&obj.mesh, pose, state.planar);
            let mut out = Vec::with_capacity(labels.len());
            let mut dropped = 0;
            for l in &labels {
                let Ok(pg) = project_grasp(&l.grasp.transformed(&world_from_object), &rendered.camera) else {
                    dropped += 1;
                    continue;
                };
                out.push(GraspImageRecord {
                    image: extract_grasp_image(&rendered.depth, &pg, rendered.camera.intrinsics.fx, &cfg.crop),
                    depth: pg.depth as f32,
                    label: l.success,
                    metric: l.robust_epsilon as f32,
                    provenance: Provenance {
                        object: id as u32,
                        stable_pose: pi as u32,
                        image: k as u32,
                        grasp: l.index as u32,
                    },
                });
            }
            (out, dropped)
        });
        for (recs, dropped) in per_image {
            summary.dropped_off_frame += dropped;
            records.extend(recs);
        }
    }
    summary.records = records.len();
    (summary, records)
}

fn par_map<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

fn object_paths(dir: &Path, id: usize) -> (PathBuf, PathBuf) {
    (dir.join(format!("obj_{id:04}.rec")), dir.join(format!("obj_{id:04}.json")))
}

/// Cached records of an object finished by an earlier run with the same config.
fn resume(dir: &Path, id: usize, hash: &str) -> Option<(ObjectSummary, Vec<GraspImageRecord>)> {
    let (rec, marker) = object_paths(dir, id);
    let summary: ObjectSummary = serde_json::from_str(&fs::read_to_string(marker).ok()?).ok()?;
    if summary.config_hash != hash {
        return None;
    }
    let (_, records) = read_record_file(&rec).ok()?;
    (records.len() == summary.records).then_some((summary, records))
}

fn run_object(id: usize, path: &Path, cfg: &PipelineConfig, dir: &Path) -> CliResult<(ObjectSummary, Vec<GraspImageRecord>)> {
    let hash = cfg.hash();
    if let Some(done) = resume(dir, id, &hash) {
        log::info!("object={id} resumed records={}", done.1.len());
        return Ok(done);
    }
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let obj = prepare_object(id, path, cfg)?;
    if obj.poses.is_empty() {
        return Err(CliError::Pipeline(format!("{name}: no stable pose above the threshold")));
    }
    let (summary, records) = object_records(id, &name, &obj, cfg);
    let (rec, marker) = object_paths(dir, id);
    write_record_file(&rec, cfg.crop.size, &records)?;
    let tmp = marker.with_extension("json.tmp");
    fs::write(&tmp, serde_json::to_string_pretty(&summary)?)?;
    fs::rename(&tmp, &marker)?;
    log::info!(
        "object={id} name={name} poses={} grasps={} labelled={} positive={} records={}",
        summary.stable_poses,
        summary.grasps,
        summary.labelled,
        summary.positive_labels,
        summary.records
    );
    Ok((summary, records))
}

/// Generates the dataset into `out/dataset`, keeping per-object results in `out/objects`
/// so an interrupted run resumes where it stopped.
pub fn generate(cfg: &PipelineConfig, out: &Path) -> CliResult<GenerateOutput> {
    cfg.validate(true)?;
    let paths = list_meshes(cfg)?;
    let objects_dir = out.join("objects");
    fs::create_dir_all(&objects_dir)?;
    let results = crate::with_workers(cfg.workers, || par_map(paths.len(), |id| run_object(id, &paths[id], cfg, &objects_dir)));
    let mut records = Vec::new();
    let mut objects = Vec::new();
    let mut failed = Vec::new();
    for (path, r) in paths.iter().zip(results) {
        match r {
            Ok((s, recs)) => {
                objects.push(s);
                records.extend(recs);
            }
            Err(e) => {
                log::warn!("object {} failed: {e}", path.display());
                failed.push((path.display().to_string(), e.to_string()));
            }
        }
    }
    if objects.is_empty() {
        return Err(CliError::Pipeline(format!("none of {} objects could be processed", paths.len())));
    }
    let dataset = GraspDataset {
        crop_size: cfg.crop.size,
        records,
    };
    let info = DatasetInfo {
        chunk_size: cfg.chunk_size,
        split_seed: cfg.seed,
        validation_fraction: cfg.validation_fraction,
        config_hash: cfg.hash(),
        dropped_off_frame: objects.iter().map(|o| o.dropped_off_frame).sum(),
    };
    let manifest = write_dataset(&out.join("dataset"), &dataset, &info)?;
    Ok(GenerateOutput {
        manifest,
        objects,
        failed,
    })
}
