//! Demonstration trajectories: keyframe extraction, segmentation, the
//! post-keyframe sampling windows and the builders for training samples and
//! object-position records.

mod sampling;
mod samples;
pub mod store;

pub use sampling::{sample_training_indices, SamplingStrategy, DEFAULT_M};
pub use samples::{
    build_object_position_dataset, build_training_samples, ObjectPosition, ObjectPositionDataset,
    ObjectPositionRecord, SampleConfig, TrainingSample,
};

use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::geometry::{RgbdImage, WorkspaceBounds};

/// Speed below which a local minimum counts as a pause (m/s).
pub const DEFAULT_VEL_EPSILON: f64 = 1e-3;

#[derive(Debug, thiserror::Error)]
pub enum TrajectoryError {
    #[error("trajectory is empty")]
    Empty,
    #[error("invalid keyframes {keyframes:?} for a trajectory of length {len}: {reason}")]
    InvalidKeyframes { keyframes: Vec<usize>, len: usize, reason: String },
    #[error("plan has {plan_steps} steps but the trajectory has {keyframes} keyframes")]
    Alignment { plan_steps: usize, keyframes: usize },
    #[error("timestep {index} is not monotone")]
    NonMonotoneTimestep { index: usize },
    #[error("action at frame {index} is outside the workspace: {position:?}")]
    ActionOutOfBounds { index: usize, position: [f64; 3] },
    #[error("no scenes given")]
    NoScenes,
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
    #[error(transparent)]
    Format(#[from] crate::format::FormatError),
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("bad metadata in {path}: {message}")]
    Meta { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gripper {
    Open,
    Closed,
}

impl Gripper {
    pub fn as_f64(self) -> f64 {
        match self {
            Gripper::Open => 0.0,
            Gripper::Closed => 1.0,
        }
    }
}

/// End-effector target: position, orientation and gripper command.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
    pub gripper: Gripper,
}

impl Action {
    pub fn new(position: Vector3<f64>, orientation: UnitQuaternion<f64>, gripper: Gripper) -> Self {
        Self {
            position,
            orientation,
            gripper,
        }
    }

    pub fn in_bounds(&self, bounds: &WorkspaceBounds) -> bool {
        bounds.contains(&self.position)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectState {
    pub name: String,
    pub position: Vector3<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub timestep: usize,
    pub gripper: Gripper,
    /// One image per camera of the rig, in rig order. Empty when the
    /// trajectory was generated without rendering.
    pub images: Vec<RgbdImage>,
    /// Ground-truth positions of the task-relevant objects at this step.
    pub objects: Vec<ObjectState>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub observation: Observation,
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub task: String,
    pub frames: Vec<Frame>,
    pub keyframes: Vec<usize>,
    /// Seconds between frames.
    pub dt: f64,
}

impl Trajectory {
    /// Build a trajectory and extract its keyframes.
    pub fn new(task: impl Into<String>, frames: Vec<Frame>, dt: f64, vel_epsilon: f64) -> Result<Self, TrajectoryError> {
        if frames.is_empty() {
            return Err(TrajectoryError::Empty);
        }
        for (i, w) in frames.windows(2).enumerate() {
            if w[1].observation.timestep <= w[0].observation.timestep {
                return Err(TrajectoryError::NonMonotoneTimestep { index: i + 1 });
            }
        }
        let mut t = Self {
            task: task.into(),
            frames,
            keyframes: Vec::new(),
            dt,
        };
        t.keyframes = extract_keyframes(&t, vel_epsilon);
        Ok(t)
    }

    /// Rebuild a trajectory with known keyframes (e.g. read from disk).
    pub fn with_keyframes(task: impl Into<String>, frames: Vec<Frame>, keyframes: Vec<usize>, dt: f64) -> Result<Self, TrajectoryError> {
        validate_keyframes(&keyframes, frames.len())?;
        Ok(Self {
            task: task.into(),
            frames,
            keyframes,
            dt,
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn validate_actions(&self, bounds: &WorkspaceBounds) -> Result<(), TrajectoryError> {
        for (index, f) in self.frames.iter().enumerate() {
            if !f.action.in_bounds(bounds) {
                return Err(TrajectoryError::ActionOutOfBounds {
                    index,
                    position: f.action.position.into(),
                });
            }
        }
        Ok(())
    }

    /// End-effector speed per frame; frame 0 has no predecessor and reports
    /// infinity so it never counts as a pause.
    pub fn speeds(&self) -> Vec<f64> {
        let mut s = vec![f64::INFINITY; self.len()];
        for t in 1..self.len() {
            s[t] = (self.frames[t].action.position - self.frames[t - 1].action.position).norm() / self.dt;
        }
        s
    }
}

/// Frame `t` is a keyframe when the gripper state changes from `t-1`, or
/// when the speed at `t` is below `vel_epsilon` and a local minimum. The
/// final frame is always a keyframe.
pub fn extract_keyframes(traj: &Trajectory, vel_epsilon: f64) -> Vec<usize> {
    let n = traj.len();
    if n == 0 {
        return Vec::new();
    }
    let speed = traj.speeds();
    let mut keys = Vec::new();
    for t in 1..n.saturating_sub(1) {
        let gripper_change = traj.frames[t].action.gripper != traj.frames[t - 1].action.gripper;
        let pause = speed[t] < vel_epsilon && speed[t] <= speed[t - 1] && speed[t] < speed[t + 1];
        if gripper_change || pause {
            keys.push(t);
        }
    }
    keys.push(n - 1);
    keys
}

pub fn validate_keyframes(keyframes: &[usize], len: usize) -> Result<(), TrajectoryError> {
    let err = |reason: &str| TrajectoryError::InvalidKeyframes {
        keyframes: keyframes.to_vec(),
        len,
        reason: reason.into(),
    };
    if keyframes.is_empty() {
        return Err(err("need at least one keyframe"));
    }
    if keyframes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(err("indices must be strictly increasing"));
    }
    if *keyframes.last().expect("nonempty") + 1 != len {
        return Err(err("the last frame must be a keyframe"));
    }
    Ok(())
}

/// Frames `start..=end` whose actions lead to `keyframe` (`== end`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn keyframe(&self) -> usize {
        self.end
    }
}

/// Segment `k` covers `(t_{k-1}, t_k]`, the first one starting at frame 0.
pub fn segment(keyframes: &[usize], len: usize) -> Result<Vec<Segment>, TrajectoryError> {
    validate_keyframes(keyframes, len)?;
    let mut start = 0;
    Ok(keyframes
        .iter()
        .map(|&end| {
            let s = Segment { start, end };
            start = end + 1;
            s
        })
        .collect())
}

/// Index `k` of the keyframe labelling frame `t`: the first keyframe with
/// `t_{k-1} <= t < t_k`. Frames at or after the last keyframe have no label.
pub fn target_keyframe(keyframes: &[usize], t: usize) -> Option<usize> {
    keyframes.iter().position(|&k| t < k)
}
