use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{generate_scene, BenchError, CameraRig, Scene, SceneConfig, TaskInstance};
use crate::geometry::WorkspaceBounds;
use crate::rng::stream;
use crate::trajectory::store::{write_trajectory, TrajectoryMeta, META_VERSION};
use crate::trajectory::{Action, Frame, Observation, Trajectory, DEFAULT_VEL_EPSILON};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpertConfig {
    /// Distance covered per frame while moving (m).
    pub step_length: f64,
    /// Seconds per frame.
    pub dt: f64,
    pub vel_epsilon: f64,
}

impl Default for ExpertConfig {
    fn default() -> Self {
        Self {
            step_length: 0.03,
            dt: 0.1,
            vel_epsilon: DEFAULT_VEL_EPSILON,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Demonstration {
    pub trajectory: Trajectory,
    /// Frame index at which each plan step completes.
    pub events: Vec<usize>,
    pub initial: Scene,
    pub final_scene: Scene,
}

/// Scripted expert: for every plan step, move in a straight line at
/// constant speed to the step's target, then hold still for one frame while
/// issuing the gripper command. With a rig, every frame is rendered.
pub fn demonstrate(
    instance: &TaskInstance,
    scene: &Scene,
    rig: Option<&CameraRig>,
    config: &ExpertConfig,
) -> Result<Demonstration, BenchError> {
    let initial = scene.clone();
    let mut scene = scene.clone();
    let mut frames = Vec::new();
    let observe = |scene: &Scene, t: usize| Observation {
        timestep: t,
        gripper: scene.gripper.gripper,
        images: rig.map(|r| r.render(scene)).unwrap_or_default(),
        objects: scene.object_states(),
    };
    frames.push(Frame {
        observation: observe(&scene, 0),
        action: scene.gripper,
    });
    let mut events = Vec::new();
    for goal in &instance.goals {
        let target = goal.target_action(&scene)?;
        let from = scene.gripper;
        let n = ((target.position - from.position).norm() / config.step_length).ceil().max(1.0) as usize;
        for i in 1..=n {
            let s = i as f64 / n as f64;
            let position = from.position.lerp(&target.position, s);
            let orientation = from
                .orientation
                .try_slerp(&target.orientation, s, 1e-9)
                .unwrap_or(target.orientation);
            scene.move_gripper(position, orientation);
            let t = frames.len();
            frames.push(Frame {
                observation: observe(&scene, t),
                action: Action::new(position, orientation, from.gripper),
            });
        }
        scene.set_gripper(target.gripper);
        let t = frames.len();
        frames.push(Frame {
            observation: observe(&scene, t),
            action: scene.gripper,
        });
        events.push(t);
    }
    let trajectory = Trajectory::new(instance.text.clone(), frames, config.dt, config.vel_epsilon)?;
    Ok(Demonstration {
        trajectory,
        events,
        initial,
        final_scene: scene,
    })
}

/// Settings for recording demonstrations to disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoConfig {
    pub bounds: WorkspaceBounds,
    pub camera_resolution: usize,
    pub scene: SceneConfig,
    pub expert: ExpertConfig,
}

impl Default for DemoConfig {
    fn default() -> Self {
        Self {
            bounds: WorkspaceBounds::default(),
            camera_resolution: 64,
            scene: SceneConfig::default(),
            expert: ExpertConfig::default(),
        }
    }
}

/// Directory name of one recorded demonstration.
pub fn demo_dir_name(instance: &TaskInstance, seed: u64) -> String {
    format!("{}_{}_v{}_s{seed}", instance.level.name(), instance.task_id, instance.variation_index)
}

/// Generate the scene for `(instance, seed)`, run the expert with rendering
/// and return the metadata and trajectory to store.
pub fn record_demonstration(
    instance: &TaskInstance,
    seed: u64,
    config: &DemoConfig,
) -> Result<(TrajectoryMeta, Trajectory), BenchError> {
    let mut rng = stream(&["demo", &instance.label(), &seed.to_string()]);
    let scene = generate_scene(instance, config.bounds, &config.scene, &mut rng)?;
    let rig = CameraRig::standard(config.camera_resolution);
    let demo = demonstrate(instance, &scene, Some(&rig), &config.expert)?;
    let meta = TrajectoryMeta {
        version: META_VERSION,
        task: instance.text.clone(),
        task_id: instance.task_id.clone(),
        level: instance.level.name().to_owned(),
        variation: instance.variation_index,
        seed,
        plan: instance.plan.clone(),
        keyframes: demo.trajectory.keyframes.clone(),
        dt: config.expert.dt,
        frames: demo.trajectory.len(),
        object_names: scene.object_states().into_iter().map(|o| o.name).collect(),
        rig,
        bounds: config.bounds,
        initial_scene: demo.initial,
    };
    Ok((meta, demo.trajectory))
}

/// Record every instance × seed under `out`, one directory each. Returns
/// the directories in a fixed order.
pub fn generate_demonstrations(
    instances: &[TaskInstance],
    seeds: &[u64],
    out: &Path,
    config: &DemoConfig,
) -> Result<Vec<PathBuf>, BenchError> {
    let jobs: Vec<(&TaskInstance, u64)> = instances.iter().flat_map(|i| seeds.iter().map(move |&s| (i, s))).collect();
    jobs.par_iter()
        .map(|&(inst, seed)| {
            let (meta, traj) = record_demonstration(inst, seed, config)?;
            let dir = out.join(demo_dir_name(inst, seed));
            write_trajectory(&dir, &meta, &traj)?;
            Ok(dir)
        })
        .collect()
}
