use c2f_core::geometry::{crop_views, world_to_pixel, PointCloud, ViewSet, WorkspaceBounds};
use c2f_core::heatmap::render_targets;
use c2f_core::rng::stream;
use c2f_core::trajectory::TrainingSample;
use nalgebra::{UnitQuaternion, Vector3};
use rand::Rng;

use crate::{encode_observation, Encoders, Features, ModelConfig, PredictorError, Target};

fn bin_width(bins: usize) -> f64 {
    360.0 / bins as f64
}

/// Bin of an angle in radians. Bin `b` is centered on `b * width - 180`
/// degrees, so -180 and +180 share bin 0.
pub fn angle_to_bin(angle: f64, bins: usize) -> usize {
    let deg = angle.to_degrees();
    let b = ((deg + 180.0) / bin_width(bins)).round() as i64;
    b.rem_euclid(bins as i64) as usize
}

/// Center of bin `b`, in radians.
pub fn bin_to_angle(bin: usize, bins: usize) -> f64 {
    (bin as f64 * bin_width(bins) - 180.0).to_radians()
}

/// Roll, pitch and yaw bins.
pub fn rotation_to_bins(q: &UnitQuaternion<f64>, bins: usize) -> [usize; 3] {
    let (r, p, y) = q.euler_angles();
    [angle_to_bin(r, bins), angle_to_bin(p, bins), angle_to_bin(y, bins)]
}

pub fn bins_to_rotation(b: [usize; 3], bins: usize) -> UnitQuaternion<f64> {
    UnitQuaternion::from_euler_angles(bin_to_angle(b[0], bins), bin_to_angle(b[1], bins), bin_to_angle(b[2], bins))
}

/// Fixed, seeded offset of a sample's crop center from its keypoint.
pub fn crop_jitter(seed: u64, index: usize, jitter: f64) -> Vector3<f64> {
    if jitter == 0.0 {
        return Vector3::zeros();
    }
    let mut rng = stream(&["crop-jitter", &seed.to_string(), &index.to_string()]);
    Vector3::from_fn(|_, _| rng.random_range(-jitter..=jitter))
}

/// One model input with its supervision.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub features: Features,
    pub target: Target,
    pub views: ViewSet,
    pub keypoint: Vector3<f64>,
}

impl Example {
    /// Pixel of the keypoint in each crop view.
    pub fn target_pixels(&self) -> [(usize, usize); 3] {
        let poses = self.views.poses();
        poses.map(|p| world_to_pixel(&p, &self.keypoint).expect("keypoint lies inside the crop"))
    }
}

/// Build the crop views around `center` and the targets for `sample`.
pub fn prepare_example(
    cloud: &PointCloud,
    sample: &TrainingSample,
    center: &Vector3<f64>,
    cube_side: f64,
    encoders: &Encoders,
    config: &ModelConfig,
) -> Result<Example, PredictorError> {
    let crop = WorkspaceBounds::cube(*center, cube_side)?;
    if !crop.contains(&sample.keypoint) {
        return Err(PredictorError::TargetOutside {
            keypoint: sample.keypoint,
            crop,
        });
    }
    let views = crop_views(cloud, center, cube_side, config.resolution)?;
    let heat = render_targets(&sample.keypoint, &views.poses(), config.sigma)?;
    let target = Target {
        heatmaps: heat.map(|h| h.values),
        rotation_bins: rotation_to_bins(&sample.action.orientation, config.rotation_bins),
        gripper: sample.action.gripper.as_f64(),
    };
    let features = encode_observation(&views, &sample.target_step, sample.gripper.as_f64(), encoders, config)?;
    Ok(Example {
        features,
        target,
        views,
        keypoint: sample.keypoint,
    })
}
