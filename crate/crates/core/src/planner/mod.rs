//! Grasp planning on depth images: image-space antipodal candidate sampling, the argmax
//! policy over a learned robustness score, cross-entropy refinement and a centroid heuristic.

mod cem;
mod edges;
mod igq;
mod overlay;
mod sampling;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};
use web_time::Instant;

use crate::gqcnn::{predict, NetworkParams};
use crate::grasp_analysis::GripperModel;
use crate::grasp_image::{deproject_grasp, extract_grasp_image, CropConfig, DatasetStats, PlanarGrasp};
use crate::render::{CameraModel, DepthImage};
use crate::rng::{self, Rng};
use crate::{Error, Result};

pub use cem::{cem_plan, fit_gmm, CemConfig, Gmm};
pub use edges::{antipodal_pixels, depth_gradient, detect_depth_edges, EdgePixel};
pub use igq::{igq_baseline, mask_centroid};
pub use overlay::{grasp_overlay, GrayImage};
pub use sampling::{height_levels, sample_antipodal_image, AntipodalCandidate};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannerConfig {
    pub max_grasps: usize,
    /// Depth-gradient magnitude marking an edge, meters per pixel.
    pub gradient_threshold: f64,
    pub min_friction: f64,
    pub friction_step: f64,
    /// Rejections tolerated before friction is relaxed.
    pub samples_per_friction: usize,
    pub height_step: f64,
    /// Widest metric jaw separation an edge pair may have.
    pub gripper_width: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            max_grasps: 1000,
            gradient_threshold: 0.0025,
            min_friction: 0.4,
            friction_step: 0.2,
            samples_per_friction: 1000,
            height_step: 0.01,
            gripper_width: crate::mesh::DEFAULT_GRIPPER_WIDTH,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.max_grasps > 0
            && self.gradient_threshold > 0.0
            && self.min_friction > 0.0
            && self.min_friction <= 1.0
            && self.friction_step > 0.0
            && self.samples_per_friction > 0
            && self.height_step > 0.0
            && self.gripper_width > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid planner config {self:?}")))
        }
    }
}

/// Feasibility filter applied to candidates before scoring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Constraints {
    pub workspace_min: [f64; 3],
    pub workspace_max: [f64; 3],
    pub table_height: f64,
    pub gripper: GripperModel,
    /// Slack of the jaw free-space test against the depth image, meters.
    pub clearance_tolerance: f64,
}

impl Default for Constraints {
    fn default() -> Self {
        Self {
            workspace_min: [-0.25, -0.25, 0.0],
            workspace_max: [0.25, 0.25, 0.3],
            table_height: 0.0,
            gripper: GripperModel::default(),
            clearance_tolerance: 0.002,
        }
    }
}

impl Constraints {
    /// In-workspace center, fingertips above the table and jaw and base undersides in free
    /// space according to the depth image.
    pub fn feasible(&self, grasp: &PlanarGrasp, image: &DepthImage, camera: &CameraModel) -> bool {
        let Ok(g) = deproject_grasp(grasp, camera, self.gripper.opening_width) else {
            return false;
        };
        let c = g.center();
        let inside = (0..3).all(|i| c[i] >= self.workspace_min[i] && c[i] <= self.workspace_max[i]);
        if !inside || c.z - self.gripper.tip_depth < self.table_height - 1e-9 {
            return false;
        }
        let up = Vector3::z();
        const STEPS: usize = 5;
        for b in self.gripper.boxes(&g, &up) {
            for i in 0..STEPS {
                for j in 0..STEPS {
                    let s = 2.0 * i as f64 / (STEPS - 1) as f64 - 1.0;
                    let t = 2.0 * j as f64 / (STEPS - 1) as f64 - 1.0;
                    let local = Vector3::new(s * b.half_extents.x, t * b.half_extents.y, -b.half_extents.z);
                    let p: Point3<f64> = b.center + b.axes * local;
                    if !self.free(&p, image, camera) {
                        return false;
                    }
                }
            }
        }
        true
    }

    fn free(&self, p: &Point3<f64>, image: &DepthImage, camera: &CameraModel) -> bool {
        let Ok((u, v, d)) = camera.project(p) else {
            return false;
        };
        if !(u > -0.5 && v > -0.5 && u < image.width() as f64 - 0.5 && v < image.height() as f64 - 0.5) {
            return true;
        }
        let (r0, c0) = (v.floor() as isize, u.floor() as isize);
        let surface = [(0, 0), (0, 1), (1, 0), (1, 1)]
            .iter()
            .map(|(dr, dc)| image.get_clamped(r0 + dr, c0 + dc) as f64)
            .fold(f64::INFINITY, f64::min);
        surface >= d - self.clearance_tolerance
    }
}

/// Scores planar grasps on a depth image; higher is more robust.
pub trait GraspScorer {
    fn score(&self, image: &DepthImage, camera: &CameraModel, grasps: &[PlanarGrasp]) -> Result<Vec<f64>>;
}

impl<F: Fn(&PlanarGrasp) -> f64> GraspScorer for F {
    fn score(&self, _: &DepthImage, _: &CameraModel, grasps: &[PlanarGrasp]) -> Result<Vec<f64>> {
        Ok(grasps.iter().map(self).collect())
    }
}

/// Robustness predicted by a trained network on aligned grasp crops.
#[derive(Debug, Clone, Copy)]
pub struct GqcnnScorer<'a> {
    pub params: &'a NetworkParams<f32>,
    pub stats: &'a DatasetStats,
    pub crop: CropConfig,
}

impl GraspScorer for GqcnnScorer<'_> {
    fn score(&self, image: &DepthImage, camera: &CameraModel, grasps: &[PlanarGrasp]) -> Result<Vec<f64>> {
        let mut images = Vec::with_capacity(grasps.len() * self.crop.size * self.crop.size);
        let mut depths = Vec::with_capacity(grasps.len());
        for g in grasps {
            let crop = extract_grasp_image(image, g, camera.intrinsics.fx, &self.crop);
            images.extend(self.stats.normalize_image(&crop).into_iter().map(|x| x as f32));
            depths.push(self.stats.normalize_depth(g.depth) as f32);
        }
        predict(self.params, &images, &depths)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredGrasp {
    pub grasp: PlanarGrasp,
    pub q: f64,
    /// Friction coefficient at which the grasp was sampled as antipodal, if it was.
    pub friction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    pub grasp: PlanarGrasp,
    pub q: f64,
    /// Every scored candidate in evaluation order.
    pub candidates: Vec<ScoredGrasp>,
    /// Best score in the pool after the seeds and after each refinement round.
    pub best_by_round: Vec<f64>,
    pub seconds: f64,
}

/// Index of the highest score; ties go to the larger depth, then the earlier candidate.
pub fn select_best(candidates: &[ScoredGrasp]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, c) in candidates.iter().enumerate() {
        best = match best {
            Some(b) if !better(c, &candidates[b]) => Some(b),
            _ => Some(i),
        };
    }
    best
}

fn better(a: &ScoredGrasp, b: &ScoredGrasp) -> bool {
    a.q > b.q || (a.q == b.q && a.grasp.depth > b.grasp.depth)
}

pub(crate) fn sampling_stream(seed: u64) -> Rng {
    rng::stream(seed, &[0xa1])
}

/// Algorithm-1 candidates with the bounded fallback: the gradient threshold is doubled once,
/// then the starting friction halved once.
pub fn sample_with_fallback(
    image: &DepthImage,
    camera: &CameraModel,
    table_height: f64,
    config: &PlannerConfig,
    seed: u64,
) -> Vec<AntipodalCandidate> {
    let mut cfg = *config;
    let mut out = sample_antipodal_image(image, camera, table_height, &cfg, &mut sampling_stream(seed));
    if out.is_empty() {
        cfg.gradient_threshold *= 2.0;
        log::info!("no antipodal candidates; retrying with gradient threshold {}", cfg.gradient_threshold);
        out = sample_antipodal_image(image, camera, table_height, &cfg, &mut sampling_stream(seed));
    }
    if out.is_empty() {
        cfg.min_friction /= 2.0;
        log::info!("no antipodal candidates; retrying with friction {}", cfg.min_friction);
        out = sample_antipodal_image(image, camera, table_height, &cfg, &mut sampling_stream(seed));
    }
    out
}

pub(crate) fn score_feasible(
    candidates: &[AntipodalCandidate],
    image: &DepthImage,
    camera: &CameraModel,
    scorer: &dyn GraspScorer,
    constraints: &Constraints,
) -> Result<Vec<ScoredGrasp>> {
    let feasible: Vec<&AntipodalCandidate> = candidates.iter().filter(|c| constraints.feasible(&c.grasp, image, camera)).collect();
    let grasps: Vec<PlanarGrasp> = feasible.iter().map(|c| c.grasp).collect();
    let q = scorer.score(image, camera, &grasps)?;
    if q.len() != grasps.len() {
        return Err(Error::InvalidArgument(format!("scorer returned {} scores for {} grasps", q.len(), grasps.len())));
    }
    Ok(feasible
        .into_iter()
        .zip(q)
        .map(|(c, q)| ScoredGrasp {
            grasp: c.grasp,
            q,
            friction: Some(c.friction),
        })
        .collect())
}

/// The feasible candidate with the highest predicted robustness.
pub fn plan_grasp(
    image: &DepthImage,
    camera: &CameraModel,
    scorer: &dyn GraspScorer,
    config: &PlannerConfig,
    constraints: &Constraints,
    seed: u64,
) -> Result<PlanResult> {
    config.validate()?;
    let start = Instant::now();
    let candidates = sample_with_fallback(image, camera, constraints.table_height, config, seed);
    let total = candidates.len();
    let scored = score_feasible(&candidates, image, camera, scorer, constraints)?;
    finish(scored, total, start)
}

pub(crate) fn finish(candidates: Vec<ScoredGrasp>, total: usize, start: Instant) -> Result<PlanResult> {
    let best = select_best(&candidates).ok_or(Error::NoFeasibleGrasp(total))?;
    Ok(PlanResult {
        grasp: candidates[best].grasp,
        q: candidates[best].q,
        best_by_round: vec![candidates[best].q],
        candidates,
        seconds: start.elapsed().as_secs_f64(),
    })
}
