//! Synthetic grasp datasets from analytic wrench-space metrics, a grasp-quality
//! convolutional network trained from scratch, and depth-image grasp planners.
//!
//! The crate is organised as a pipeline:
//!
//! * [`mesh`]: OBJ loading, preprocessing, convex hulls and quasi-static stable poses.
//! * [`grasp_analysis`]: antipodal grasp sampling, contact wrenches, force closure,
//!   epsilon quality and its Monte-Carlo robust estimate, gripper collision checks.
//! * [`render`]: scene-state sampling, z-buffer depth rendering and the image noise model.
//! * [`grasp_image`]: projection of grasps into images, aligned grasp crops and dataset I/O.
//! * [`gqcnn`]: the grasp-quality network, exact gradients, SGD training and evaluation.
//! * [`planner`]: depth-image antipodal sampling, argmax and cross-entropy-method policies,
//!   and the image-centroid heuristic baseline.

pub mod error;
pub mod gqcnn;
pub mod grasp_analysis;
pub mod grasp_image;
pub mod mesh;
pub mod planner;
pub mod render;
pub mod rng;
pub mod shapes;

pub use error::{Error, Result};
