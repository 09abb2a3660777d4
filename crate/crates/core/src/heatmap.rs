//! Per-view keypoint heatmaps: Gaussian training targets, fusion of three
//! view heatmaps into one 3D keypoint over a candidate cloud, and the
//! coarse-to-fine refinement loop.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::geometry::{
    crop_cloud, crop_views, crop_zoom, GeometryError, PointCloud, ViewId, ViewPose, ViewSet, WorkspaceBounds,
};

pub const DEFAULT_SIGMA: f64 = 1.5;

/// Total scores below this are treated as an absent signal.
pub const NO_SIGNAL_THRESHOLD: f64 = 1e-12;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum HeatmapError {
    #[error("keypoint {point:?} lies outside the view bounds")]
    OutOfBounds { point: [f64; 3] },
    #[error("sigma must be positive and finite, got {0}")]
    InvalidSigma(f64),
    #[error("heatmap resolutions disagree: {0:?}")]
    ResolutionMismatch(Vec<usize>),
    #[error("candidate cloud has no valid points")]
    NoCandidates,
    #[error("all candidate scores are zero (best {best:e})")]
    NoSignal { best: f64 },
    #[error("empty crop around coarse keypoint {:?}", coarse.position)]
    EmptyCrop { coarse: Keypoint3D },
    #[error("grid step must be positive and finite, got {0}")]
    InvalidGridStep(f64),
    #[error("fine stage failed: {0}")]
    FineStage(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub view: ViewId,
    pub resolution: usize,
    pub values: Vec<f64>,
}

impl Heatmap {
    pub fn zeros(view: ViewId, resolution: usize) -> Self {
        Self {
            view,
            resolution,
            values: vec![0.0; resolution * resolution],
        }
    }

    pub fn at(&self, u: usize, v: usize) -> f64 {
        self.values[v * self.resolution + u]
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn normalize(&mut self) {
        let s = self.sum();
        if s > 0.0 {
            self.values.iter_mut().for_each(|x| *x /= s);
        }
    }

    /// Highest-valued pixel; ties go to the lowest row-major index.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, x) in self.values.iter().enumerate() {
            if *x > self.values[best] {
                best = i;
            }
        }
        (best % self.resolution, best / self.resolution)
    }

    /// Bilinear sample at continuous image coordinates (pixel `u` spans
    /// `[u, u+1)`, values sit at pixel centers). Zero outside the image.
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let r = self.resolution as f64;
        if !(x >= 0.0 && x <= r && y >= 0.0 && y <= r) {
            return 0.0;
        }
        let gx = (x - 0.5).clamp(0.0, r - 1.0);
        let gy = (y - 0.5).clamp(0.0, r - 1.0);
        let (x0, y0) = (gx.floor() as usize, gy.floor() as usize);
        let x1 = (x0 + 1).min(self.resolution - 1);
        let y1 = (y0 + 1).min(self.resolution - 1);
        let (fx, fy) = (gx - x0 as f64, gy - y0 as f64);
        let top = self.at(x0, y0) * (1.0 - fx) + self.at(x1, y0) * fx;
        let bottom = self.at(x0, y1) * (1.0 - fx) + self.at(x1, y1) * fx;
        top * (1.0 - fy) + bottom * fy
    }
}

fn check_sigma(sigma: f64) -> Result<(), HeatmapError> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(HeatmapError::InvalidSigma(sigma))
    }
}

fn gaussian(pose: &ViewPose, center: (f64, f64), sigma: f64) -> Heatmap {
    let r = pose.resolution;
    let inv = 1.0 / (2.0 * sigma * sigma);
    let mut h = Heatmap::zeros(pose.id, r);
    for v in 0..r {
        let dy = v as f64 + 0.5 - center.1;
        for u in 0..r {
            let dx = u as f64 + 0.5 - center.0;
            h.values[v * r + u] = (-(dx * dx + dy * dy) * inv).exp();
        }
    }
    h
}

/// Isotropic Gaussian around the keypoint's projection, normalized to sum 1.
pub fn render_target(keypoint: &Vector3<f64>, pose: &ViewPose, sigma: f64) -> Result<Heatmap, HeatmapError> {
    check_sigma(sigma)?;
    if !pose.bounds.contains(keypoint) {
        return Err(HeatmapError::OutOfBounds { point: (*keypoint).into() });
    }
    let mut h = gaussian(pose, pose.image_coords(keypoint), sigma);
    h.normalize();
    Ok(h)
}

/// Targets for all three views.
pub fn render_targets(keypoint: &Vector3<f64>, poses: &[ViewPose; 3], sigma: f64) -> Result<[Heatmap; 3], HeatmapError> {
    Ok([
        render_target(keypoint, &poses[0], sigma)?,
        render_target(keypoint, &poses[1], sigma)?,
        render_target(keypoint, &poses[2], sigma)?,
    ])
}

/// Gaussian density with peak `1 / (2 pi sigma^2)` around the projection of
/// `point`, which may lie outside the view; only the in-image part is kept.
pub fn render_density(point: &Vector3<f64>, pose: &ViewPose, sigma: f64) -> Result<Heatmap, HeatmapError> {
    check_sigma(sigma)?;
    let mut h = gaussian(pose, pose.image_coords(point), sigma);
    let scale = 1.0 / (2.0 * std::f64::consts::PI * sigma * sigma);
    h.values.iter_mut().for_each(|x| *x *= scale);
    Ok(h)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keypoint3D {
    pub position: Vector3<f64>,
    pub confidence: f64,
    /// Index of the winning point in the candidate cloud.
    pub index: usize,
}

/// Score of one candidate: sum over views of the heatmap sampled at the
/// candidate's projection.
pub fn candidate_score(heatmaps: &[Heatmap; 3], poses: &[ViewPose; 3], p: &Vector3<f64>) -> f64 {
    heatmaps
        .iter()
        .zip(poses)
        .map(|(h, pose)| {
            let (x, y) = pose.image_coords(p);
            h.sample(x, y)
        })
        .sum()
}

/// Fuse three view heatmaps into the best-scoring valid candidate point.
pub fn decode_keypoint(
    heatmaps: &[Heatmap; 3],
    candidates: &PointCloud,
    poses: &[ViewPose; 3],
) -> Result<Keypoint3D, HeatmapError> {
    let resolutions: Vec<usize> = heatmaps
        .iter()
        .map(|h| h.resolution)
        .chain(poses.iter().map(|p| p.resolution))
        .collect();
    if resolutions.iter().any(|r| *r != resolutions[0])
        || heatmaps.iter().zip(poses).any(|(h, p)| h.view != p.id || h.values.len() != h.resolution * h.resolution)
    {
        return Err(HeatmapError::ResolutionMismatch(resolutions));
    }
    let mut best: Option<(usize, f64)> = None;
    for (i, (p, valid)) in candidates.points.iter().zip(&candidates.valid).enumerate() {
        if !valid {
            continue;
        }
        let s = candidate_score(heatmaps, poses, p);
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    let (index, score) = best.ok_or(HeatmapError::NoCandidates)?;
    if score < NO_SIGNAL_THRESHOLD {
        return Err(HeatmapError::NoSignal { best: score });
    }
    Ok(Keypoint3D {
        position: candidates.points[index],
        confidence: score,
        index,
    })
}

/// The fine branch: maps re-projected crop views to three heatmaps.
pub trait FineStage {
    fn predict(&self, views: &ViewSet) -> Result<[Heatmap; 3], HeatmapError>;
}

impl<F> FineStage for F
where
    F: Fn(&ViewSet) -> Result<[Heatmap; 3], HeatmapError>,
{
    fn predict(&self, views: &ViewSet) -> Result<[Heatmap; 3], HeatmapError> {
        self(views)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoarseToFineConfig {
    pub cube_side: f64,
    pub resolution: usize,
    /// Fine confidence below `drop_ratio * coarse confidence` is flagged.
    pub drop_ratio: f64,
    /// When set, the fine decode also scores a regular grid of this step
    /// over the crop cube, so targets in free space can be reached.
    pub grid_step: Option<f64>,
}

impl Default for CoarseToFineConfig {
    fn default() -> Self {
        Self {
            cube_side: 0.16,
            resolution: 64,
            drop_ratio: 0.5,
            grid_step: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoarseToFine {
    pub coarse: Keypoint3D,
    pub fine: Keypoint3D,
    pub crop: WorkspaceBounds,
    pub confidence_dropped: bool,
}

/// Result of the fine stage around one center.
#[derive(Debug, Clone, PartialEq)]
pub struct Refined {
    pub fine: Keypoint3D,
    pub crop: WorkspaceBounds,
    pub views: ViewSet,
    /// Cropped cloud followed by the grid candidates, if any.
    pub candidates: PointCloud,
}

/// Regular grid with spacing `step` filling the closed box.
pub fn grid_candidates(cube: &WorkspaceBounds, step: f64) -> PointCloud {
    let e = cube.extent();
    let n = e.map(|x| (x / step).floor() as usize + 1);
    let mut cloud = PointCloud::with_capacity(n.x * n.y * n.z);
    for k in 0..n.z {
        for j in 0..n.y {
            for i in 0..n.x {
                let p = cube.min + Vector3::new(i as f64, j as f64, k as f64) * step;
                cloud.push(p, [0.0; 3], true);
            }
        }
    }
    cloud
}

/// Crop and re-project around `center`, run the fine stage and decode over
/// the cropped cloud (plus the optional grid).
pub fn refine_keypoint(
    cloud: &PointCloud,
    center: &Vector3<f64>,
    fine_stage: &dyn FineStage,
    config: &CoarseToFineConfig,
) -> Result<Refined, HeatmapError> {
    let crop = WorkspaceBounds::cube(*center, config.cube_side)?;
    let views = match crop_zoom(cloud, center, config.cube_side, config.resolution) {
        Ok(v) => v,
        Err(GeometryError::EmptyCrop { .. }) if config.grid_step.is_some() => {
            crop_views(cloud, center, config.cube_side, config.resolution)?
        }
        Err(GeometryError::EmptyCrop { .. }) => {
            return Err(HeatmapError::EmptyCrop {
                coarse: Keypoint3D { position: *center, confidence: 0.0, index: 0 },
            })
        }
        Err(e) => return Err(e.into()),
    };
    let mut candidates = crop_cloud(cloud, &crop);
    if let Some(step) = config.grid_step {
        if !(step > 0.0 && step.is_finite()) {
            return Err(HeatmapError::InvalidGridStep(step));
        }
        let grid = grid_candidates(&crop, step);
        for i in 0..grid.len() {
            candidates.push(grid.points[i], grid.colors[i], true);
        }
    }
    let heatmaps = fine_stage.predict(&views)?;
    let fine = decode_keypoint(&heatmaps, &candidates, &views.poses())?;
    Ok(Refined { fine, crop, views, candidates })
}

/// Decode the coarse keypoint, then refine around it.
pub fn coarse_to_fine_keypoint(
    cloud: &PointCloud,
    coarse_heatmaps: &[Heatmap; 3],
    coarse_poses: &[ViewPose; 3],
    fine_stage: &dyn FineStage,
    config: &CoarseToFineConfig,
) -> Result<CoarseToFine, HeatmapError> {
    let coarse = decode_keypoint(coarse_heatmaps, cloud, coarse_poses)?;
    let refined = match refine_keypoint(cloud, &coarse.position, fine_stage, config) {
        Err(HeatmapError::EmptyCrop { .. }) => return Err(HeatmapError::EmptyCrop { coarse }),
        other => other?,
    };
    Ok(CoarseToFine {
        confidence_dropped: refined.fine.confidence < config.drop_ratio * coarse.confidence,
        coarse,
        fine: refined.fine,
        crop: refined.crop,
    })
}
