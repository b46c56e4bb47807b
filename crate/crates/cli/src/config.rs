use std::path::{Path, PathBuf};

use grasp_core::gqcnn::{NetworkSpec, TrainConfig};
use grasp_core::grasp_analysis::{AntipodalSamplerConfig, GripperModel, PerturbationConfig, DEFAULT_SUCCESS_THRESHOLD};
use grasp_core::grasp_image::CropConfig;
use grasp_core::mesh::DEFAULT_STABLE_POSE_THRESHOLD;
use grasp_core::planner::{CemConfig, Constraints, PlannerConfig};
use grasp_core::render::{CameraIntrinsics, NoiseModel, StateDistribution};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Everything that determines the pipeline's artifacts, plus the worker count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub schema_version: u32,
    /// Directory of `.obj` meshes; relative paths resolve against the config file.
    pub mesh_dir: PathBuf,
    /// Use the first `n` meshes in name order; all when absent.
    pub object_count: Option<usize>,
    pub images_per_pose: usize,
    pub grasps_per_object: usize,
    pub max_stable_poses: usize,
    pub stable_pose_threshold: f64,
    /// Largest angle between a grasp axis and the table plane for it to be labelled in a pose.
    pub alignment_tolerance_deg: f64,
    pub success_threshold: f64,
    pub sampler: AntipodalSamplerConfig,
    pub perturbation: PerturbationConfig,
    pub gripper: GripperModel,
    pub noise: NoiseModel,
    pub camera: CameraIntrinsics,
    pub scene: StateDistribution,
    pub crop: CropConfig,
    pub network: String,
    pub train: TrainConfig,
    pub validation_fraction: f64,
    pub chunk_size: usize,
    pub planner: PlannerConfig,
    pub cem: CemConfig,
    pub constraints: Constraints,
    /// Offset below the center-pixel surface for the centroid baseline, meters.
    pub igq_depth_offset: f64,
    pub seed: u64,
    /// Worker threads; defaults to the available cores. Does not affect outputs.
    pub workers: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            mesh_dir: PathBuf::from("meshes"),
            object_count: None,
            images_per_pose: 10,
            grasps_per_object: 100,
            max_stable_poses: 5,
            stable_pose_threshold: DEFAULT_STABLE_POSE_THRESHOLD,
            alignment_tolerance_deg: 10.0,
            success_threshold: DEFAULT_SUCCESS_THRESHOLD,
            sampler: AntipodalSamplerConfig::default(),
            perturbation: PerturbationConfig::default(),
            gripper: GripperModel::default(),
            noise: NoiseModel::default(),
            camera: CameraIntrinsics::default(),
            scene: StateDistribution::default(),
            crop: CropConfig::default(),
            network: "standard".into(),
            train: TrainConfig::default(),
            validation_fraction: 0.2,
            chunk_size: 1000,
            planner: PlannerConfig::default(),
            cem: CemConfig::default(),
            constraints: Constraints::default(),
            igq_depth_offset: 0.01,
            seed: 0,
            workers: None,
        }
    }
}

/// Dotted paths of keys in `value` that the schema of `reference` does not have.
fn unknown_keys(value: &Value, reference: &Value, prefix: &str, out: &mut Vec<String>) {
    let (Value::Object(v), Value::Object(r)) = (value, reference) else {
        return;
    };
    for (k, sub) in v {
        let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match r.get(k) {
            Some(rsub) => unknown_keys(sub, rsub, &path, out),
            None if !is_optional(k) => out.push(path),
            None => {}
        }
    }
}

fn is_optional(key: &str) -> bool {
    matches!(key, "object_count" | "workers")
}

impl PipelineConfig {
    pub fn from_json(text: &str, base: Option<&Path>) -> Result<Self, CliError> {
        let value: Value = serde_json::from_str(text).map_err(|e| CliError::Config(format!("not valid JSON: {e}")))?;
        let mut bad = Vec::new();
        let reference = serde_json::to_value(Self::default()).expect("default config serialises");
        unknown_keys(&value, &reference, "", &mut bad);
        if !bad.is_empty() {
            return Err(CliError::Config(format!("unknown keys: {}", bad.join(", "))));
        }
        let mut cfg: Self = serde_json::from_value(value).map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(base) = base {
            if cfg.mesh_dir.is_relative() {
                cfg.mesh_dir = base.join(&cfg.mesh_dir);
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Missing(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text, path.parent())
    }

    /// Range checks; with `need_meshes` the mesh directory must exist.
    pub fn validate(&self, need_meshes: bool) -> Result<(), CliError> {
        let mut bad = Vec::new();
        let mut check = |ok: bool, key: &str| {
            if !ok {
                bad.push(key.to_string());
            }
        };
        check(self.schema_version == SCHEMA_VERSION, "schema_version");
        check(self.images_per_pose >= 1, "images_per_pose");
        check(self.grasps_per_object >= 1, "grasps_per_object");
        check(self.max_stable_poses >= 1, "max_stable_poses");
        check((0.0..1.0).contains(&self.stable_pose_threshold), "stable_pose_threshold");
        check((0.0..=90.0).contains(&self.alignment_tolerance_deg), "alignment_tolerance_deg");
        check(self.success_threshold >= 0.0, "success_threshold");
        check(self.perturbation.num_samples >= 1, "perturbation.num_samples");
        check(self.gripper.validate().is_ok(), "gripper");
        check(self.noise.validate().is_ok(), "noise");
        check(self.camera.validate().is_ok(), "camera");
        check(self.scene.radius.0 > 0.0 && self.scene.radius.0 <= self.scene.radius.1, "scene.radius");
        check(self.scene.polar.0 >= 0.0 && self.scene.polar.0 <= self.scene.polar.1, "scene.polar");
        check(self.crop.size >= 4 && self.crop.window > 0.0, "crop");
        check(NetworkSpec::by_name(&self.network).is_ok(), "network");
        check(self.train.validate().is_ok(), "train");
        check(self.validation_fraction > 0.0 && self.validation_fraction < 1.0, "validation_fraction");
        check(self.chunk_size >= 1, "chunk_size");
        check(self.planner.validate().is_ok(), "planner");
        check(self.cem.validate().is_ok(), "cem");
        check(self.igq_depth_offset >= 0.0, "igq_depth_offset");
        check(self.workers != Some(0), "workers");
        if need_meshes {
            check(self.mesh_dir.is_dir(), "mesh_dir");
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(format!("invalid values for: {}", bad.join(", "))))
        }
    }

    pub fn network_spec(&self) -> Result<NetworkSpec, CliError> {
        let spec = NetworkSpec::by_name(&self.network)?;
        if spec.input_size != self.crop.size {
            return Err(CliError::Config(format!(
                "network `{}` takes {}-pixel crops but crop.size is {}",
                self.network, spec.input_size, self.crop.size
            )));
        }
        Ok(spec)
    }

    /// Hash of every output-affecting field.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.workers = None;
        let bytes = serde_json::to_vec(&c).expect("config serialises");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = PipelineConfig::default();
        let text = serde_json::to_string_pretty(&c).unwrap();
        assert_eq!(PipelineConfig::from_json(&text, None).unwrap(), c);
        assert_eq!(c.success_threshold, 0.002);
        c.validate(false).unwrap();
    }

    #[test]
    fn unknown_keys_are_listed() {
        let e = PipelineConfig::from_json(r#"{"images_per_pose": 3, "bogus": 1, "noise": {"sigma": 0.1, "typo": 2}}"#, None).unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("bogus") && msg.contains("noise.typo"), "{msg}");
        let ok = PipelineConfig::from_json(r#"{"images_per_pose": 3, "workers": 2, "object_count": 4}"#, None).unwrap();
        assert_eq!(ok.images_per_pose, 3);
    }

    #[test]
    fn ranges_and_paths() {
        let mut c = PipelineConfig::default();
        c.validation_fraction = 1.5;
        c.network = "huge".into();
        let msg = c.validate(false).unwrap_err().to_string();
        assert!(msg.contains("validation_fraction") && msg.contains("network"));
        let d = PipelineConfig {
            mesh_dir: "/nonexistent/meshes".into(),
            ..Default::default()
        };
        assert!(d.validate(true).unwrap_err().to_string().contains("mesh_dir"));
    }

    #[test]
    fn hash_ignores_workers() {
        let a = PipelineConfig::default();
        let b = PipelineConfig {
            workers: Some(3),
            ..Default::default()
        };
        let c = PipelineConfig { seed: 1, ..Default::default() };
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
    }
}
