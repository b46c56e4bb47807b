//! WebAssembly bindings for a single-page demo: render an object on the table, sample
//! antipodal grasps from depth edges, and plan a grasp that is then scored in 3-D.

use grasp_core::grasp_analysis::{collision_free, robust_epsilon_quality, success_label, PerturbationConfig};
use grasp_core::grasp_image::deproject_grasp;
use grasp_core::mesh::{compute_stable_poses_with, preprocess_mesh, StablePoseConfig, TriangleMesh};
use grasp_core::planner::{detect_depth_edges, igq_baseline, sample_antipodal_image, AntipodalCandidate, Constraints, PlannerConfig};
use grasp_core::render::{object_pose, render_scene, sample_state, CameraIntrinsics, RenderedImage, SceneObject, StateDistribution};
use grasp_core::{rng, shapes};
use nalgebra::{Point3, Vector3};
use serde::Serialize;
use wasm_bindgen::prelude::*;

const SUCCESS_THRESHOLD: f64 = 0.002;
const IGQ_DEPTH_OFFSET: f64 = 0.01;

pub fn catalogue() -> Vec<(&'static str, TriangleMesh)> {
    vec![
        ("cube", shapes::box_mesh(0.045, 0.045, 0.045)),
        ("carton", shapes::box_mesh(0.045, 0.09, 0.16)),
        ("hex prism", shapes::prism(0.025, 0.11, 6)),
        ("can", shapes::prism(0.033, 0.12, 16)),
        ("L bracket", shapes::l_shape(0.13, 0.09, 0.03, 0.04)),
        ("U channel", shapes::u_shape(0.12, 0.10, 0.05, 0.02)),
    ]
}

#[derive(Debug, Clone, Serialize)]
pub struct SceneInfo {
    pub object: String,
    pub stable_pose: usize,
    pub pose_probability: f64,
    pub camera_radius: f64,
    pub camera_polar: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PlanInfo {
    pub row: f64,
    pub col: f64,
    pub angle: f64,
    pub depth: f64,
    pub width_px: f64,
    pub robust_epsilon: f64,
    pub collision_free: bool,
    pub success: bool,
    pub seconds: f64,
}

struct Scene {
    world: TriangleMesh,
    com: Point3<f64>,
    rendered: RenderedImage,
}

/// Demo state without any JavaScript types, so it can be exercised natively.
#[derive(Default)]
pub struct Session {
    scene: Option<Scene>,
    candidates: Vec<AntipodalCandidate>,
    pub planner: PlannerConfig,
    pub constraints: Constraints,
}

impl Session {
    pub fn render(&mut self, object: usize, seed: u64) -> Result<SceneInfo, String> {
        let objects = catalogue();
        let (name, raw) = objects.get(object).ok_or_else(|| format!("no object {object}"))?;
        let (mesh, props) = preprocess_mesh(raw, self.constraints.gripper.opening_width).map_err(|e| e.to_string())?;
        let poses = compute_stable_poses_with(
            &mesh,
            &props,
            &StablePoseConfig {
                num_samples: 2000,
                seed,
                ..Default::default()
            },
        )
        .map_err(|e| e.to_string())?;
        let mut r = rng::stream(seed, &[0xde]);
        let state = sample_state(&[SceneObject { id: object, poses: &poses }], &StateDistribution::default(), &mut r).map_err(|e| e.to_string())?;
        let pose = &poses[state.stable_pose];
        let rendered = render_scene(&mesh, pose, &state, &CameraIntrinsics::default()).map_err(|e| e.to_string())?;
        let iso = object_pose(&mesh, pose, state.planar);
        self.scene = Some(Scene {
            world: mesh.transformed(&iso),
            com: iso * props.center_of_mass,
            rendered,
        });
        self.candidates.clear();
        Ok(SceneInfo {
            object: name.to_string(),
            stable_pose: state.stable_pose,
            pose_probability: pose.probability,
            camera_radius: state.camera.radius,
            camera_polar: state.camera.polar,
        })
    }

    fn scene(&self) -> Result<&Scene, String> {
        self.scene.as_ref().ok_or_else(|| "render a scene first".to_string())
    }

    pub fn width(&self) -> usize {
        self.scene.as_ref().map_or(0, |s| s.rendered.depth.width())
    }

    pub fn height(&self) -> usize {
        self.scene.as_ref().map_or(0, |s| s.rendered.depth.height())
    }

    /// RGBA bytes of the depth image, near surfaces bright.
    pub fn depth_rgba(&self) -> Vec<u8> {
        let Some(s) = &self.scene else { return Vec::new() };
        let data = s.rendered.depth.data();
        let (lo, hi) = data.iter().fold((f32::INFINITY, f32::NEG_INFINITY), |(a, b), &d| (a.min(d), b.max(d)));
        let span = (hi - lo).max(1e-6);
        data.iter()
            .flat_map(|&d| {
                let g = (255.0 * (hi - d) / span).round() as u8;
                [g, g, g, 255]
            })
            .collect()
    }

    /// Flattened `(row, col)` of every depth-edge pixel.
    pub fn edges(&self) -> Result<Vec<u32>, String> {
        let s = self.scene()?;
        Ok(detect_depth_edges(&s.rendered.depth, self.planner.gradient_threshold)
            .iter()
            .flat_map(|e| [e.row as u32, e.col as u32])
            .collect())
    }

    /// Samples antipodal candidates; returns how many were found.
    pub fn sample_grasps(&mut self, seed: u64) -> Result<usize, String> {
        let s = self.scene()?;
        let mut r = rng::stream(seed, &[0xa1]);
        let c = sample_antipodal_image(&s.rendered.depth, &s.rendered.camera, self.constraints.table_height, &self.planner, &mut r);
        self.candidates = c;
        Ok(self.candidates.len())
    }

    /// Flattened `(row, col, angle, width_px, friction)` per sampled candidate.
    pub fn candidates(&self) -> Vec<f64> {
        let fx = self.scene.as_ref().map_or(1.0, |s| s.rendered.camera.intrinsics.fx);
        self.candidates
            .iter()
            .flat_map(|c| {
                let g = c.grasp;
                [g.row, g.col, g.angle, self.constraints.gripper.opening_width * fx / g.depth, c.friction]
            })
            .collect()
    }

    /// Centroid-heuristic grasp, then its robust quality and collision status on the true mesh.
    pub fn plan(&self, seed: u64) -> Result<PlanInfo, String> {
        let s = self.scene()?;
        let cam = &s.rendered.camera;
        let plan = igq_baseline(&s.rendered.depth, &s.rendered.mask, cam, &self.planner, &self.constraints, IGQ_DEPTH_OFFSET, seed)
            .map_err(|e| e.to_string())?;
        let g = plan.grasp;
        let g3 = deproject_grasp(&g, cam, self.constraints.gripper.opening_width).map_err(|e| e.to_string())?;
        let mut r = rng::stream(seed, &[0xe9]);
        let eq = robust_epsilon_quality(&g3, &s.world, &s.com, &Vector3::z(), &PerturbationConfig::default(), &mut r).mean;
        let free = collision_free(&g3, &s.world, &self.constraints.gripper, self.constraints.table_height);
        Ok(PlanInfo {
            row: g.row,
            col: g.col,
            angle: g.angle,
            depth: g.depth,
            width_px: self.constraints.gripper.opening_width * cam.intrinsics.fx / g.depth,
            robust_epsilon: eq,
            collision_free: free,
            success: success_label(eq, free, SUCCESS_THRESHOLD),
            seconds: plan.seconds,
        })
    }
}

fn js<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e)).and_then(|v| serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string())))
}

/// Object names, one per line.
#[wasm_bindgen(js_name = objectNames)]
pub fn object_names() -> String {
    catalogue().iter().map(|(n, _)| *n).collect::<Vec<_>>().join("\n")
}

#[wasm_bindgen]
pub struct Demo {
    inner: Session,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new() -> Demo {
        Demo { inner: Session::default() }
    }

    /// Renders object `object` in a random stable pose and view; returns scene JSON.
    pub fn render(&mut self, object: usize, seed: u32) -> Result<String, JsError> {
        js(self.inner.render(object, seed as u64))
    }

    pub fn width(&self) -> usize {
        self.inner.width()
    }

    pub fn height(&self) -> usize {
        self.inner.height()
    }

    #[wasm_bindgen(js_name = depthRgba)]
    pub fn depth_rgba(&self) -> Vec<u8> {
        self.inner.depth_rgba()
    }

    pub fn edges(&self) -> Result<Vec<u32>, JsError> {
        self.inner.edges().map_err(|e| JsError::new(&e))
    }

    #[wasm_bindgen(js_name = sampleGrasps)]
    pub fn sample_grasps(&mut self, seed: u32, min_friction: f64) -> Result<usize, JsError> {
        self.inner.planner.min_friction = min_friction.clamp(0.05, 1.0);
        self.inner.sample_grasps(seed as u64).map_err(|e| JsError::new(&e))
    }

    pub fn candidates(&self) -> Vec<f64> {
        self.inner.candidates()
    }

    /// Plans with the centroid heuristic; returns plan JSON including the 3-D label.
    pub fn plan(&self, seed: u32) -> Result<String, JsError> {
        js(self.inner.plan(seed as u64))
    }
}

impl Default for Demo {
    fn default() -> Self {
        Self::new()
    }
}
