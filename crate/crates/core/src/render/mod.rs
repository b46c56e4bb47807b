//! Pinhole cameras, scene-state sampling, z-buffer depth rendering over a table plane and
//! the multiplicative-Gamma plus correlated-Gaussian depth noise model.

mod camera;
mod image;
mod noise;
mod raster;
mod state;

pub use camera::{CameraIntrinsics, CameraModel, SphericalPose};
pub use image::{read_depth_image, write_depth_image, DepthImage};
pub use noise::{corrupt_image, gp_noise_field, sample_alpha, NoiseModel};
pub use raster::{render_depth, render_scene, table_depth, RenderedImage};
pub use state::{object_pose, sample_state, SceneObject, SceneState, StateDistribution};
