use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Scene;
use crate::geometry::{unproject, CameraModel, GeometryError, Intrinsics, PointCloud, RgbdImage};

/// Spacing of the surface samples splatted into the cameras (m).
pub const SURFACE_SPACING: f64 = 0.004;
const TABLE_COLOR: [f64; 3] = [0.62, 0.6, 0.55];
const TABLE_HALF: f64 = 0.4;

/// Four static cameras: front, two shoulders, and overhead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraRig {
    pub cameras: Vec<CameraModel>,
}

impl CameraRig {
    pub fn standard(resolution: usize) -> Self {
        let f = 0.5 * resolution as f64 / (30f64).to_radians().tan();
        let c = 0.5 * resolution as f64;
        let k = Intrinsics { fx: f, fy: f, cx: c, cy: c };
        let target = Vector3::new(0.0, 0.02, 0.1);
        let z = Vector3::z();
        let cam = |name: &str, eye: Vector3<f64>, target: Vector3<f64>, up: Vector3<f64>| {
            CameraModel::look_at(name, eye, target, up, k, resolution, resolution).expect("fixed rig is valid")
        };
        Self {
            cameras: vec![
                cam("front", Vector3::new(0.0, -0.95, 0.6), target, z),
                cam("left_shoulder", Vector3::new(-0.7, -0.6, 0.65), target, z),
                cam("right_shoulder", Vector3::new(0.7, -0.6, 0.65), target, z),
                cam("overhead", Vector3::new(0.0, -0.08, 1.15), Vector3::zeros(), Vector3::y()),
            ],
        }
    }

    pub fn render(&self, scene: &Scene) -> Vec<RgbdImage> {
        let mut points = Vec::new();
        for prism in scene.prisms() {
            prism.surface_points(SURFACE_SPACING, &mut points);
        }
        self.cameras
            .par_iter()
            .map(|cam| {
                let mut img = table_image(cam);
                splat(cam, &points, &mut img);
                img
            })
            .collect()
    }

    /// Fused cloud of all cameras, invalid pixels dropped.
    pub fn cloud_from_images(&self, images: &[RgbdImage]) -> Result<PointCloud, GeometryError> {
        if images.len() != self.cameras.len() {
            return Err(GeometryError::InputShape {
                expected: format!("{} images", self.cameras.len()),
                got: format!("{}", images.len()),
            });
        }
        let mut cloud = PointCloud::default();
        for (img, cam) in images.iter().zip(&self.cameras) {
            let c = unproject(img, cam)?;
            for i in 0..c.len() {
                if c.valid[i] {
                    cloud.push(c.points[i], c.colors[i], true);
                }
            }
        }
        Ok(cloud)
    }

    pub fn observe_cloud(&self, scene: &Scene) -> Result<PointCloud, GeometryError> {
        self.cloud_from_images(&self.render(scene))
    }
}

/// Exact ray cast of the table plane for every pixel.
fn table_image(cam: &CameraModel) -> RgbdImage {
    let mut img = RgbdImage::blank(cam.width, cam.height);
    for v in 0..cam.height {
        for u in 0..cam.width {
            let (o, dir) = cam.pixel_ray(u as f64, v as f64);
            if dir.z >= 0.0 {
                continue;
            }
            let t = -o.z / dir.z;
            let hit = o + dir * t;
            if hit.x.abs() <= TABLE_HALF && hit.y.abs() <= TABLE_HALF {
                let i = v * cam.width + u;
                img.depth[i] = t;
                img.rgb[i] = TABLE_COLOR;
            }
        }
    }
    img
}

/// Z-buffered point splat; each sample covers the pixel nearest to its
/// projection.
fn splat(cam: &CameraModel, points: &[(Vector3<f64>, [f64; 3])], img: &mut RgbdImage) {
    for (p, color) in points {
        let Some((u, v, d)) = cam.project(p) else {
            continue;
        };
        let (u, v) = (u.round(), v.round());
        if u < 0.0 || v < 0.0 || u >= cam.width as f64 || v >= cam.height as f64 {
            continue;
        }
        let i = v as usize * cam.width + u as usize;
        if img.depth[i] == 0.0 || d < img.depth[i] {
            img.depth[i] = d;
            img.rgb[i] = *color;
        }
    }
}
