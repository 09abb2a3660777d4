use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::{GeometryError, PointCloud};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

/// Pinhole camera. `rotation`/`translation` map camera coordinates
/// (x right, y down, z forward) to world coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub name: String,
    pub intrinsics: Intrinsics,
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    pub width: usize,
    pub height: usize,
}

impl CameraModel {
    pub fn new(
        name: impl Into<String>,
        intrinsics: Intrinsics,
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
        width: usize,
        height: usize,
    ) -> Result<Self, GeometryError> {
        let cam = Self {
            name: name.into(),
            intrinsics,
            rotation,
            translation,
            width,
            height,
        };
        cam.validate()?;
        Ok(cam)
    }

    /// Camera at `eye` looking at `target`; `up` picks the roll.
    pub fn look_at(
        name: impl Into<String>,
        eye: Vector3<f64>,
        target: Vector3<f64>,
        up: Vector3<f64>,
        intrinsics: Intrinsics,
        width: usize,
        height: usize,
    ) -> Result<Self, GeometryError> {
        let forward = (target - eye).normalize();
        let right = forward.cross(&up);
        if right.norm() < 1e-9 {
            return Err(GeometryError::InvalidCamera("up is parallel to the view direction".into()));
        }
        let right = right.normalize();
        let down = forward.cross(&right);
        let rotation = Matrix3::from_columns(&[right, down, forward]);
        Self::new(name, intrinsics, rotation, eye, width, height)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let k = &self.intrinsics;
        if !(k.fx > 0.0 && k.fy > 0.0 && k.fx.is_finite() && k.fy.is_finite()) {
            return Err(GeometryError::InvalidCamera(format!(
                "focal lengths must be positive, got fx={} fy={}",
                k.fx, k.fy
            )));
        }
        if !(k.cx > 0.0 && k.cx < self.width as f64 && k.cy > 0.0 && k.cy < self.height as f64) {
            return Err(GeometryError::InvalidCamera(format!(
                "principal point ({}, {}) outside {}x{} image",
                k.cx, k.cy, self.width, self.height
            )));
        }
        let gram = self.rotation.transpose() * self.rotation;
        if (gram - Matrix3::identity()).abs().max() > 1e-6 || self.rotation.determinant() <= 0.0 {
            return Err(GeometryError::InvalidCamera("rotation is not orthonormal".into()));
        }
        if !self.translation.iter().all(|t| t.is_finite()) {
            return Err(GeometryError::InvalidCamera("translation must be finite".into()));
        }
        Ok(())
    }

    pub fn world_to_camera(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.transpose() * (p - self.translation)
    }

    /// Forward pinhole projection: continuous pixel coordinates and depth.
    /// Returns `None` for points at or behind the camera plane.
    pub fn project(&self, p: &Vector3<f64>) -> Option<(f64, f64, f64)> {
        let c = self.world_to_camera(p);
        if c.z <= 0.0 {
            return None;
        }
        let k = &self.intrinsics;
        Some((k.fx * c.x / c.z + k.cx, k.fy * c.y / c.z + k.cy, c.z))
    }

    /// World-space ray through pixel `(u, v)`, scaled so that the ray
    /// parameter equals camera depth.
    pub fn pixel_ray(&self, u: f64, v: f64) -> (Vector3<f64>, Vector3<f64>) {
        let k = &self.intrinsics;
        let dir_cam = Vector3::new((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
        (self.translation, self.rotation * dir_cam)
    }
}

/// Per-pixel RGB (values in [0, 1]) and metric depth, row-major.
/// A depth of 0 marks a pixel without a return.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbdImage {
    pub width: usize,
    pub height: usize,
    pub rgb: Vec<[f64; 3]>,
    pub depth: Vec<f64>,
}

impl RgbdImage {
    pub fn new(
        width: usize,
        height: usize,
        rgb: Vec<[f64; 3]>,
        depth: Vec<f64>,
    ) -> Result<Self, GeometryError> {
        let n = width * height;
        if rgb.len() != n || depth.len() != n {
            return Err(GeometryError::InputShape {
                expected: format!("{n} pixels ({width}x{height})"),
                got: format!("{} rgb, {} depth", rgb.len(), depth.len()),
            });
        }
        Ok(Self {
            width,
            height,
            rgb,
            depth,
        })
    }

    pub fn blank(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            rgb: vec![[0.0; 3]; width * height],
            depth: vec![0.0; width * height],
        }
    }
}

/// Lift every pixel with a positive finite depth into world coordinates.
/// Output keeps one entry per pixel; pixels without depth are masked invalid.
pub fn unproject(rgbd: &RgbdImage, camera: &CameraModel) -> Result<PointCloud, GeometryError> {
    if rgbd.width != camera.width || rgbd.height != camera.height {
        return Err(GeometryError::InputShape {
            expected: format!("{}x{}", camera.width, camera.height),
            got: format!("{}x{}", rgbd.width, rgbd.height),
        });
    }
    if rgbd.rgb.len() != rgbd.width * rgbd.height || rgbd.depth.len() != rgbd.rgb.len() {
        return Err(GeometryError::InputShape {
            expected: format!("{} pixels", rgbd.width * rgbd.height),
            got: format!("{} rgb, {} depth", rgbd.rgb.len(), rgbd.depth.len()),
        });
    }
    let k = &camera.intrinsics;
    let n = rgbd.depth.len();
    let mut cloud = PointCloud::with_capacity(n);
    for v in 0..rgbd.height {
        for u in 0..rgbd.width {
            let i = v * rgbd.width + u;
            let d = rgbd.depth[i];
            if d.is_finite() && d > 0.0 {
                let local = Vector3::new((u as f64 - k.cx) * d / k.fx, (v as f64 - k.cy) * d / k.fy, d);
                cloud.push(camera.rotation * local + camera.translation, rgbd.rgb[i], true);
            } else {
                cloud.push(Vector3::repeat(f64::NAN), rgbd.rgb[i], false);
            }
        }
    }
    Ok(cloud)
}
