//! On-disk layout. A trajectory directory holds `meta.json`, `frames.c2ft`
//! (actions, gripper states, object positions) and, when rendered,
//! `observations.c2ft` (RGB-D per camera). A dataset directory holds one
//! sample file per trajectory, `plans.jsonl` and `manifest.json`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    build_object_position_dataset, build_training_samples, Action, ObjectPosition, ObjectPositionDataset,
    ObjectPositionRecord, Frame, Gripper, ObjectState, Observation, SampleConfig, SamplingStrategy,
    TrainingSample, Trajectory, TrajectoryError,
};
use crate::bench::{CameraRig, Scene};
use crate::format::{load_views, save_views, rgbd_frames_from_tensors, rgbd_frames_to_tensors, Tensor, TensorFile};
use crate::geometry::{PointCloud, RgbdImage, WorkspaceBounds};
use crate::planner::Plan;

pub const META_VERSION: u32 = 1;
pub const META_FILE: &str = "meta.json";
pub const FRAMES_FILE: &str = "frames.c2ft";
pub const OBSERVATIONS_FILE: &str = "observations.c2ft";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const PLANS_FILE: &str = "plans.jsonl";
pub const OBJECT_POSITIONS_FILE: &str = "object_positions.jsonl";
pub const OBJECT_POSITIONS_DIR: &str = "object_positions";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub version: u32,
    pub task: String,
    pub task_id: String,
    pub level: String,
    pub variation: usize,
    pub seed: u64,
    pub plan: Plan,
    pub keyframes: Vec<usize>,
    pub dt: f64,
    pub frames: usize,
    pub object_names: Vec<String>,
    pub rig: CameraRig,
    pub bounds: WorkspaceBounds,
    pub initial_scene: Scene,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> TrajectoryError + '_ {
    move |source| TrajectoryError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn meta_err(path: &Path, message: impl std::fmt::Display) -> TrajectoryError {
    TrajectoryError::Meta {
        path: path.display().to_string(),
        message: message.to_string(),
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), TrajectoryError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| meta_err(path, e))?;
    text.push('\n');
    std::fs::write(path, text).map_err(io_err(path))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, TrajectoryError> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    serde_json::from_slice(&bytes).map_err(|e| meta_err(path, e))
}

pub fn write_trajectory(dir: &Path, meta: &TrajectoryMeta, traj: &Trajectory) -> Result<(), TrajectoryError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let n = traj.len();
    let k = meta.object_names.len();
    let mut f = TensorFile::new("trajectory_frames");
    f.push(Tensor::from_f64("timestep", vec![n], traj.frames.iter().map(|f| f.observation.timestep as f64)));
    f.push(Tensor::from_f64(
        "position",
        vec![n, 3],
        traj.frames.iter().flat_map(|f| f.action.position.iter().copied().collect::<Vec<_>>()),
    ));
    f.push(Tensor::from_f64(
        "orientation_xyzw",
        vec![n, 4],
        traj.frames.iter().flat_map(|f| f.action.orientation.coords.iter().copied().collect::<Vec<_>>()),
    ));
    f.push(Tensor::from_f64("gripper_command", vec![n], traj.frames.iter().map(|f| f.action.gripper.as_f64())));
    f.push(Tensor::from_f64("gripper_state", vec![n], traj.frames.iter().map(|f| f.observation.gripper.as_f64())));
    let mut objects = Vec::with_capacity(n * k * 3);
    for fr in &traj.frames {
        if fr.observation.objects.len() != k {
            return Err(meta_err(dir, "object list changes between frames"));
        }
        objects.extend(fr.observation.objects.iter().flat_map(|o| [o.position.x, o.position.y, o.position.z]));
    }
    f.push(Tensor::from_f64("objects", vec![n, k, 3], objects));
    f.save(&dir.join(FRAMES_FILE))?;

    let cameras = meta.rig.cameras.len();
    if traj.frames.iter().all(|f| f.observation.images.len() == cameras) && cameras > 0 {
        let mut obs = TensorFile::new("observations");
        for c in 0..cameras {
            let frames: Vec<&RgbdImage> = traj.frames.iter().map(|f| &f.observation.images[c]).collect();
            for t in rgbd_frames_to_tensors(&format!("camera{c}"), &frames) {
                obs.push(t);
            }
        }
        obs.save(&dir.join(OBSERVATIONS_FILE))?;
    }
    write_json(&dir.join(META_FILE), meta)
}

fn gripper_of(x: f32) -> Gripper {
    if x > 0.5 {
        Gripper::Closed
    } else {
        Gripper::Open
    }
}

/// Read a trajectory directory; observations are loaded when present.
pub fn read_trajectory(dir: &Path) -> Result<(TrajectoryMeta, Trajectory), TrajectoryError> {
    let meta_path = dir.join(META_FILE);
    let meta: TrajectoryMeta = read_json(&meta_path)?;
    if meta.version != META_VERSION {
        return Err(meta_err(&meta_path, format!("unsupported version {}", meta.version)));
    }
    let f = TensorFile::load(&dir.join(FRAMES_FILE))?;
    f.expect_kind("trajectory_frames")?;
    let (n, k) = (meta.frames, meta.object_names.len());
    let ts = f.get_shaped("timestep", &[n])?;
    let pos = f.get_shaped("position", &[n, 3])?;
    let rot = f.get_shaped("orientation_xyzw", &[n, 4])?;
    let cmd = f.get_shaped("gripper_command", &[n])?;
    let state = f.get_shaped("gripper_state", &[n])?;
    let objs = f.get_shaped("objects", &[n, k, 3])?;
    let obs_path = dir.join(OBSERVATIONS_FILE);
    let mut images: Vec<Vec<RgbdImage>> = vec![Vec::new(); n];
    if obs_path.exists() {
        let obs = TensorFile::load(&obs_path)?;
        obs.expect_kind("observations")?;
        for c in 0..meta.rig.cameras.len() {
            let frames = rgbd_frames_from_tensors(&obs, &format!("camera{c}"))?;
            if frames.len() != n {
                return Err(meta_err(&obs_path, format!("camera{c} has {} frames, expected {n}", frames.len())));
            }
            for (t, img) in frames.into_iter().enumerate() {
                images[t].push(img);
            }
        }
    }
    let v3 = |d: &[f32]| Vector3::new(d[0] as f64, d[1] as f64, d[2] as f64);
    let frames = images
        .into_iter()
        .enumerate()
        .map(|(t, images)| {
            let r = &rot.data[4 * t..4 * t + 4];
            let q = Quaternion::new(r[3] as f64, r[0] as f64, r[1] as f64, r[2] as f64);
            Frame {
                observation: Observation {
                    timestep: ts.data[t] as usize,
                    gripper: gripper_of(state.data[t]),
                    images,
                    objects: (0..k)
                        .map(|j| ObjectState {
                            name: meta.object_names[j].clone(),
                            position: v3(&objs.data[3 * (t * k + j)..]),
                        })
                        .collect(),
                },
                action: Action::new(v3(&pos.data[3 * t..]), UnitQuaternion::from_quaternion(q), gripper_of(cmd.data[t])),
            }
        })
        .collect();
    let traj = Trajectory::with_keyframes(meta.task.clone(), frames, meta.keyframes.clone(), meta.dt)?;
    Ok((meta, traj))
}

/// Trajectory directories under `root`, sorted by name.
pub fn list_trajectories(root: &Path) -> Result<Vec<PathBuf>, TrajectoryError> {
    let mut dirs = Vec::new();
    for entry in std::fs::read_dir(root).map_err(io_err(root))? {
        let path = entry.map_err(io_err(root))?.path();
        if path.join(META_FILE).is_file() {
            dirs.push(path);
        }
    }
    dirs.sort();
    Ok(dirs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Relative to the dataset directory.
    pub path: String,
    pub trajectory: String,
    pub task_id: String,
    pub level: String,
    pub variation: usize,
    pub seed: u64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: u32,
    pub strategy: SamplingStrategy,
    pub bounds: WorkspaceBounds,
    pub total_samples: usize,
    pub samples_per_task: BTreeMap<String, usize>,
    pub files: Vec<ManifestEntry>,
    pub plans: usize,
    pub object_position_records: usize,
    pub skipped_objects: usize,
}

/// One line of `object_positions.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectPositionLine {
    /// Views file, relative to the dataset directory.
    pub views: String,
    pub objects: Vec<ObjectPosition>,
}

/// Write each record's views under `object_positions/` and one JSON line
/// per record.
pub fn write_object_positions(out: &Path, data: &ObjectPositionDataset) -> Result<(), TrajectoryError> {
    let dir = out.join(OBJECT_POSITIONS_DIR);
    std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let mut lines = String::new();
    for (i, r) in data.records.iter().enumerate() {
        let rel = format!("{OBJECT_POSITIONS_DIR}/r{i:05}.c2ft");
        save_views(&r.views, &out.join(&rel))?;
        let line = ObjectPositionLine { views: rel, objects: r.objects.clone() };
        lines.push_str(&serde_json::to_string(&line).map_err(|e| meta_err(out, e))?);
        lines.push('\n');
    }
    let path = out.join(OBJECT_POSITIONS_FILE);
    std::fs::write(&path, lines).map_err(io_err(&path))
}

pub fn read_object_positions(out: &Path) -> Result<Vec<ObjectPositionRecord>, TrajectoryError> {
    let path = out.join(OBJECT_POSITIONS_FILE);
    let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
    text.lines()
        .map(|l| {
            let line: ObjectPositionLine = serde_json::from_str(l).map_err(|e| meta_err(&path, e))?;
            Ok(ObjectPositionRecord { views: load_views(&out.join(&line.views))?, objects: line.objects })
        })
        .collect()
}

/// A training sample with the fused point cloud of its observation.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredSample {
    pub sample: TrainingSample,
    pub cloud: PointCloud,
}

/// Fused in-bounds cloud of one observation.
pub fn observation_cloud(rig: &CameraRig, images: &[RgbdImage], bounds: &WorkspaceBounds) -> Result<PointCloud, TrajectoryError> {
    Ok(rig.cloud_from_images(images)?.filter_to_bounds(bounds))
}

fn write_samples(path: &Path, samples: &[StoredSample]) -> Result<(), TrajectoryError> {
    let mut f = TensorFile::new("samples");
    for (i, s) in samples.iter().enumerate() {
        let c = &s.cloud;
        let n = c.len();
        f.push(Tensor::from_f64(format!("{i}.points"), vec![n, 3], c.points.iter().flat_map(|p| [p.x, p.y, p.z])));
        f.push(Tensor::from_f64(format!("{i}.colors"), vec![n, 3], c.colors.iter().flatten().copied()));
    }
    f.meta = serde_json::to_value(samples.iter().map(|s| &s.sample).collect::<Vec<_>>()).map_err(|e| meta_err(path, e))?;
    f.save(path)?;
    Ok(())
}

pub fn read_samples(path: &Path) -> Result<Vec<StoredSample>, TrajectoryError> {
    let f = TensorFile::load(path)?;
    f.expect_kind("samples")?;
    let samples: Vec<TrainingSample> = serde_json::from_value(f.meta.clone()).map_err(|e| meta_err(path, e))?;
    samples
        .into_iter()
        .enumerate()
        .map(|(i, sample)| {
            let pts = f.get(&format!("{i}.points"))?;
            let n = pts.dims.first().copied().unwrap_or(0);
            let cols = f.get_shaped(&format!("{i}.colors"), &[n, 3])?;
            let triple = |d: &[f32], j: usize| [d[3 * j] as f64, d[3 * j + 1] as f64, d[3 * j + 2] as f64];
            let cloud = PointCloud::from_points(
                (0..n).map(|j| Vector3::from(triple(&pts.data, j))).collect(),
                (0..n).map(|j| triple(&cols.data, j)).collect(),
            );
            Ok(StoredSample { sample, cloud })
        })
        .collect()
}

/// Build training samples for every trajectory under `traj_root` and write
/// them with a manifest to `out`. Trajectories are processed in parallel;
/// the manifest is merged in directory order.
pub fn build_dataset(traj_root: &Path, out: &Path, config: &SampleConfig) -> Result<DatasetManifest, TrajectoryError> {
    let dirs = list_trajectories(traj_root)?;
    if dirs.is_empty() {
        return Err(meta_err(traj_root, "no trajectories found"));
    }
    std::fs::create_dir_all(out).map_err(io_err(out))?;
    let per_traj: Vec<(ManifestEntry, TrajectoryMeta)> = dirs
        .par_iter()
        .map(|dir| {
            let (meta, traj) = read_trajectory(dir)?;
            let samples = build_training_samples(&traj, &meta.plan, config)?;
            let stored = samples
                .into_iter()
                .map(|sample| {
                    let images = &traj.frames[sample.obs_index].observation.images;
                    if images.is_empty() {
                        return Err(meta_err(dir, "trajectory has no rendered observations"));
                    }
                    let cloud = observation_cloud(&meta.rig, images, &config.bounds)?;
                    Ok(StoredSample { sample, cloud })
                })
                .collect::<Result<Vec<_>, TrajectoryError>>()?;
            let name = dir.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let file = format!("{name}.c2ft");
            write_samples(&out.join(&file), &stored)?;
            Ok((
                ManifestEntry {
                    path: file,
                    trajectory: name,
                    task_id: meta.task_id.clone(),
                    level: meta.level.clone(),
                    variation: meta.variation,
                    seed: meta.seed,
                    samples: stored.len(),
                },
                meta,
            ))
        })
        .collect::<Result<_, TrajectoryError>>()?;

    let mut plans = String::new();
    let mut per_task = BTreeMap::new();
    let mut objects = ObjectPositionDataset { records: Vec::new(), skipped_objects: 0, empty_scenes: 0 };
    for (entry, meta) in &per_traj {
        *per_task.entry(entry.task_id.clone()).or_insert(0) += entry.samples;
        plans.push_str(&serde_json::to_string(&meta.plan).map_err(|e| meta_err(out, e))?);
        plans.push('\n');
        let d = build_object_position_dataset(std::slice::from_ref(&meta.initial_scene), &meta.rig, &config.bounds, config.resolution)?;
        objects.records.extend(d.records);
        objects.skipped_objects += d.skipped_objects;
        objects.empty_scenes += d.empty_scenes;
    }
    write_object_positions(out, &objects)?;
    let plans_path = out.join(PLANS_FILE);
    std::fs::write(&plans_path, plans).map_err(io_err(&plans_path))?;
    let manifest = DatasetManifest {
        version: META_VERSION,
        strategy: config.strategy,
        bounds: config.bounds,
        total_samples: per_traj.iter().map(|(e, _)| e.samples).sum(),
        samples_per_task: per_task,
        plans: per_traj.len(),
        object_position_records: objects.records.len(),
        skipped_objects: objects.skipped_objects,
        files: per_traj.into_iter().map(|(e, _)| e).collect(),
    };
    write_json(&out.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<DatasetManifest, TrajectoryError> {
    read_json(&dir.join(MANIFEST_FILE))
}

/// All samples listed in a dataset manifest, in manifest order.
pub fn load_dataset(dir: &Path) -> Result<Vec<StoredSample>, TrajectoryError> {
    let manifest = read_manifest(dir)?;
    let mut out = Vec::new();
    for e in &manifest.files {
        out.extend(read_samples(&dir.join(&e.path))?);
    }
    Ok(out)
}
