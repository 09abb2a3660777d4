//! Scene geometry: pinhole cameras, RGB-D unprojection, point clouds and the
//! three orthographic canonical views (front, left, top) used by every
//! downstream stage.
//!
//! All operations here are pure functions of their inputs.

mod camera;
mod cloud;
mod crop;
mod views;

pub use camera::{unproject, CameraModel, Intrinsics, RgbdImage};
pub use cloud::PointCloud;
pub use crop::{crop_cloud, crop_views, crop_zoom};
pub use views::{
    pixel_to_world, project_canonical, world_to_pixel, Axis, CanonicalView, SignedAxis, ViewId,
    ViewPose, ViewSet, MIN_RESOLUTION,
};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

/// Default canonical view resolution for the full pipeline.
pub const DEFAULT_RESOLUTION: usize = 224;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum GeometryError {
    #[error("input shape mismatch: expected {expected}, got {got}")]
    InputShape { expected: String, got: String },
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("invalid workspace bounds: min {min:?} must be < max {max:?} componentwise")]
    InvalidBounds { min: [f64; 3], max: [f64; 3] },
    #[error("resolution {0} is below the minimum of {MIN_RESOLUTION}")]
    ResolutionTooSmall(usize),
    #[error("no valid points inside the workspace bounds")]
    EmptyScene,
    #[error("no points inside the crop cube centered at {center:?}")]
    EmptyCrop { center: [f64; 3] },
    #[error("invalid crop: {0}")]
    InvalidCrop(String),
    #[error("pixel ({u}, {v}) outside a {resolution}x{resolution} view")]
    PixelOutOfRange { u: usize, v: usize, resolution: usize },
}

/// Closed axis-aligned box in world coordinates (meters).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkspaceBounds {
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
}

impl WorkspaceBounds {
    pub fn new(min: Vector3<f64>, max: Vector3<f64>) -> Result<Self, GeometryError> {
        let ok = (0..3).all(|i| min[i].is_finite() && max[i].is_finite() && min[i] < max[i]);
        if !ok {
            return Err(GeometryError::InvalidBounds {
                min: min.into(),
                max: max.into(),
            });
        }
        Ok(Self { min, max })
    }

    /// Axis-aligned cube of side `side` centered at `center`.
    pub fn cube(center: Vector3<f64>, side: f64) -> Result<Self, GeometryError> {
        if !(side > 0.0 && side.is_finite()) {
            return Err(GeometryError::InvalidCrop(format!("cube side must be > 0, got {side}")));
        }
        if !center.iter().all(|c| c.is_finite()) {
            return Err(GeometryError::InvalidCrop(format!(
                "crop center must be finite, got {:?}",
                <[f64; 3]>::from(center)
            )));
        }
        let half = Vector3::repeat(side / 2.0);
        Self::new(center - half, center + half)
    }

    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn extent(&self) -> Vector3<f64> {
        self.max - self.min
    }

    pub fn center(&self) -> Vector3<f64> {
        (self.min + self.max) / 2.0
    }

    pub fn max_extent(&self) -> f64 {
        self.extent().max()
    }

    /// Closest point of the box to `p`.
    pub fn clamp(&self, p: &Vector3<f64>) -> Vector3<f64> {
        Vector3::new(
            p.x.clamp(self.min.x, self.max.x),
            p.y.clamp(self.min.y, self.max.y),
            p.z.clamp(self.min.z, self.max.z),
        )
    }

    pub fn translated(&self, offset: &Vector3<f64>) -> Self {
        Self {
            min: self.min + offset,
            max: self.max + offset,
        }
    }

    /// True when `other` lies entirely inside `self`.
    pub fn encloses(&self, other: &WorkspaceBounds) -> bool {
        self.contains(&other.min) && self.contains(&other.max)
    }
}

impl Default for WorkspaceBounds {
    /// 0.64 m cube over the tabletop, so a 64 px view has 1 cm pixels.
    fn default() -> Self {
        Self {
            min: Vector3::new(-0.32, -0.32, -0.02),
            max: Vector3::new(0.32, 0.32, 0.62),
        }
    }
}
