//! Coarse-to-fine 3D manipulation pipeline: canonical-view geometry,
//! keypoint heatmaps, keyframe datasets, the two-round planner protocol and
//! a synthetic tabletop benchmark with four generalization levels.

pub mod bench;
pub mod format;
pub mod geometry;
pub mod heatmap;
pub mod planner;
pub mod rng;
pub mod trajectory;
