use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{sample_training_indices, Action, Gripper, ObjectState, SamplingStrategy, Trajectory, TrajectoryError};
use crate::bench::{CameraRig, Scene};
use crate::geometry::{project_canonical, world_to_pixel, ViewPose, ViewSet, WorkspaceBounds};
use crate::planner::{Plan, INITIAL_STATE};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleConfig {
    pub strategy: SamplingStrategy,
    pub bounds: WorkspaceBounds,
    pub resolution: usize,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            strategy: SamplingStrategy::default(),
            bounds: WorkspaceBounds::default(),
            resolution: 64,
        }
    }
}

/// An object's world position and its pixel in each canonical view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectPosition {
    pub name: String,
    pub world: Vector3<f64>,
    pub pixels: [(usize, usize); 3],
}

impl ObjectPosition {
    /// `None` when the object lies outside the views' bounds.
    pub fn locate(name: &str, world: Vector3<f64>, poses: &[ViewPose; 3]) -> Option<Self> {
        let px = |i: usize| world_to_pixel(&poses[i], &world);
        Some(Self {
            name: name.to_owned(),
            world,
            pixels: [px(0)?, px(1)?, px(2)?],
        })
    }
}

fn locate_all(objects: &[ObjectState], poses: &[ViewPose; 3]) -> (Vec<ObjectPosition>, usize) {
    let mut skipped = 0;
    let found = objects
        .iter()
        .filter_map(|o| {
            let p = ObjectPosition::locate(&o.name, o.position, poses);
            skipped += usize::from(p.is_none());
            p
        })
        .collect();
    (found, skipped)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSample {
    /// Frame the observation comes from.
    pub obs_index: usize,
    /// Frame of the target keyframe.
    pub target_index: usize,
    /// Position of the target keyframe in the keyframe list (and plan).
    pub target_keyframe: usize,
    pub gripper: Gripper,
    pub previous_step: String,
    pub subtask: usize,
    pub subtask_plan: Vec<String>,
    pub target_step: String,
    pub object_positions: Vec<ObjectPosition>,
    pub keypoint: Vector3<f64>,
    pub action: Action,
}

/// One sample per sampled observation, paired with the plan step of its
/// target keyframe and the step before it as the memory cue.
pub fn build_training_samples(
    traj: &Trajectory,
    plan: &Plan,
    config: &SampleConfig,
) -> Result<Vec<TrainingSample>, TrajectoryError> {
    super::validate_keyframes(&traj.keyframes, traj.len())?;
    if plan.len() != traj.keyframes.len() {
        return Err(TrajectoryError::Alignment {
            plan_steps: plan.len(),
            keyframes: traj.keyframes.len(),
        });
    }
    let steps: Vec<&str> = plan.steps().collect();
    let poses = ViewPose::all(config.bounds, config.resolution);
    let mut out = Vec::new();
    for (obs, target) in sample_training_indices(&traj.keyframes, config.strategy) {
        let k = traj
            .keyframes
            .iter()
            .position(|&t| t == target)
            .expect("sampler targets are keyframes");
        let m = plan.subtask_of_index(k).expect("aligned plan");
        let action = traj.frames[target].action;
        let observation = &traj.frames[obs].observation;
        out.push(TrainingSample {
            obs_index: obs,
            target_index: target,
            target_keyframe: k,
            gripper: observation.gripper,
            previous_step: if k == 0 { INITIAL_STATE.to_owned() } else { steps[k - 1].to_owned() },
            subtask: m,
            subtask_plan: plan.subtasks[m].clone(),
            target_step: steps[k].to_owned(),
            object_positions: locate_all(&observation.objects, &poses).0,
            keypoint: action.position,
            action,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectPositionRecord {
    pub views: ViewSet,
    pub objects: Vec<ObjectPosition>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectPositionDataset {
    pub records: Vec<ObjectPositionRecord>,
    /// Objects left out because they fall outside the workspace.
    pub skipped_objects: usize,
    /// Scenes whose cloud had no point in the workspace.
    pub empty_scenes: usize,
}

/// Render each scene, lift it to a cloud, project it to the canonical views
/// and record every object's world position with its pixel per view.
pub fn build_object_position_dataset(
    scenes: &[Scene],
    rig: &CameraRig,
    bounds: &WorkspaceBounds,
    resolution: usize,
) -> Result<ObjectPositionDataset, TrajectoryError> {
    if scenes.is_empty() {
        return Err(TrajectoryError::NoScenes);
    }
    let poses = ViewPose::all(*bounds, resolution);
    let mut data = ObjectPositionDataset {
        records: Vec::new(),
        skipped_objects: 0,
        empty_scenes: 0,
    };
    for scene in scenes {
        let cloud = rig.observe_cloud(scene)?;
        let views = match project_canonical(&cloud, bounds, resolution) {
            Ok(v) => v,
            Err(crate::geometry::GeometryError::EmptyScene) => {
                data.empty_scenes += 1;
                tracing::warn!("scene without points in the workspace");
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let (objects, skipped) = locate_all(&scene.object_states(), &poses);
        if skipped > 0 {
            tracing::warn!(skipped, "objects outside the workspace were skipped");
        }
        data.skipped_objects += skipped;
        data.records.push(ObjectPositionRecord { views, objects });
    }
    Ok(data)
}
