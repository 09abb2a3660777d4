use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Mutex;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{generate_scene, BenchError, CameraRig, Level, Scene, SceneConfig, TaskInstance};
use crate::geometry::{project_canonical, PointCloud, ViewSet, WorkspaceBounds};
use crate::planner::{OracleConfig, OraclePlanner, PlannerSession};
use crate::rng::episode_rng;
use crate::trajectory::{Action, Gripper};

/// Everything an executor may look at for one step.
pub struct StepContext<'a> {
    pub instance: &'a TaskInstance,
    /// Ground-truth scene, for oracle executors only.
    pub scene: &'a Scene,
    pub cloud: &'a PointCloud,
    pub views: &'a ViewSet,
    pub instruction: &'a str,
    /// The planner's 3D keypoint.
    pub keypoint: Vector3<f64>,
    pub gripper: Gripper,
}

/// Turns a planner step into a keyframe action.
pub trait Executor: Sync {
    fn act(&self, ctx: &StepContext, rng: &mut ChaCha8Rng) -> Result<Action, BenchError>;
}

/// Ground-truth action for the instructed step, clamped into the crop cube
/// around the planner's keypoint.
#[derive(Debug, Clone, Copy)]
pub struct OracleExecutor {
    pub cube_side: f64,
}

impl Executor for OracleExecutor {
    fn act(&self, ctx: &StepContext, _rng: &mut ChaCha8Rng) -> Result<Action, BenchError> {
        let goal = ctx
            .instance
            .goal_for(ctx.instruction)
            .ok_or_else(|| BenchError::Executor(format!("unknown instruction {:?}", ctx.instruction)))?;
        let mut action = goal.target_action(ctx.scene)?;
        let cube = WorkspaceBounds::cube(ctx.keypoint, self.cube_side)?;
        action.position = cube.clamp(&action.position);
        Ok(action)
    }
}

/// Uniform position in the workspace with the instructed step's
/// orientation and gripper command.
#[derive(Debug, Clone, Copy)]
pub struct RandomExecutor;

impl Executor for RandomExecutor {
    fn act(&self, ctx: &StepContext, rng: &mut ChaCha8Rng) -> Result<Action, BenchError> {
        let b = ctx.scene.bounds;
        let position = Vector3::from_fn(|i, _| rng.random_range(b.min[i]..=b.max[i]));
        let mut action = match ctx.instance.goal_for(ctx.instruction) {
            Some(goal) => goal.target_action(ctx.scene)?,
            None => ctx.scene.gripper,
        };
        action.position = position;
        Ok(action)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    /// Feed the previous step back to the planner.
    pub memory: bool,
    pub subtask_scoping: bool,
    pub noise_sigma: f64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            memory: true,
            subtask_scoping: true,
            noise_sigma: 0.0,
        }
    }
}

impl PolicyConfig {
    /// No memory cue and the whole plan in one list.
    pub fn monolithic(noise_sigma: f64) -> Self {
        Self {
            memory: false,
            subtask_scoping: false,
            noise_sigma,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub episodes: usize,
    pub seeds: Vec<u64>,
    pub bounds: WorkspaceBounds,
    pub resolution: usize,
    pub camera_resolution: usize,
    pub max_steps_factor: usize,
    pub scene: SceneConfig,
    pub policy: PolicyConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            episodes: 20,
            seeds: (0..5).collect(),
            bounds: WorkspaceBounds::default(),
            resolution: 64,
            camera_resolution: 64,
            max_steps_factor: 2,
            scene: SceneConfig::default(),
            policy: PolicyConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub level: Level,
    pub task_id: String,
    pub variation: usize,
    pub seed: u64,
    pub episode: usize,
    pub success: bool,
    pub steps: usize,
    /// Why the episode stopped early, if it did.
    pub failure: Option<String>,
    /// SHA-256 of the episode's planner transcript.
    pub transcript_sha256: String,
}

/// Run one episode: plan, observe, act, step, until success, completion,
/// an error or the step budget.
pub fn run_episode(
    instance: &TaskInstance,
    seed: u64,
    episode: usize,
    executor: &dyn Executor,
    rig: &CameraRig,
    config: &EvalConfig,
) -> EpisodeResult {
    let mut rng = episode_rng(seed, &instance.label(), instance.variation_index, episode);
    let mut result = EpisodeResult {
        level: instance.level,
        task_id: instance.task_id.clone(),
        variation: instance.variation_index,
        seed,
        episode,
        success: false,
        steps: 0,
        failure: None,
        transcript_sha256: String::new(),
    };
    let mut scene = match generate_scene(instance, config.bounds, &config.scene, &mut rng) {
        Ok(s) => s,
        Err(e) => {
            result.failure = Some(e.to_string());
            return result;
        }
    };
    let planner_rng = Mutex::new(ChaCha8Rng::seed_from_u64(rng.random()));
    let oracle = OracleConfig {
        subtask_scoping: config.policy.subtask_scoping,
        noise_sigma: config.policy.noise_sigma,
    };
    let mut session = PlannerSession::new(&instance.text, config.policy.memory).expect("task text is nonempty");
    let budget = config.max_steps_factor * instance.plan.len();
    let outcome: Result<(), BenchError> = (|| {
        while result.steps < budget {
            let planner = OraclePlanner::bind(instance, &scene, oracle, &planner_rng);
            if session.round1(&planner)?.is_empty() {
                return Ok(());
            }
            let cloud = rig.observe_cloud(&scene)?;
            let views = project_canonical(&cloud, &config.bounds, config.resolution)?;
            let response = session.round2(&planner, &views, scene.gripper.gripper)?;
            let ctx = StepContext {
                instance,
                scene: &scene,
                cloud: &cloud,
                views: &views,
                instruction: &response.step_instruction,
                keypoint: response.keypoint.world,
                gripper: scene.gripper.gripper,
            };
            let action = executor.act(&ctx, &mut rng)?;
            scene.step(&action);
            session.advance(&response);
            result.steps += 1;
            if instance.success.holds(&scene) {
                result.success = true;
                return Ok(());
            }
        }
        Ok(())
    })();
    if let Err(e) = outcome {
        result.failure = Some(e.to_string());
    }
    result.transcript_sha256 = crate::planner::wire::sha256_hex(session.transcript_jsonl().as_bytes());
    result
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub level: Level,
    /// Success rate per seed, in `EvalConfig::seeds` order.
    pub per_seed: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation over seeds.
    pub std: f64,
    pub episodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRow {
    pub level: Level,
    pub task_id: String,
    pub variation: usize,
    pub text: String,
    pub per_seed: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub policy: String,
    pub config: EvalConfig,
    pub levels: Vec<LevelSummary>,
    pub tasks: Vec<TaskRow>,
    pub episodes: Vec<EpisodeResult>,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn per_seed_rates<'a>(seeds: &[u64], eps: impl Iterator<Item = &'a EpisodeResult> + Clone) -> Vec<f64> {
    seeds
        .iter()
        .map(|s| {
            let (n, ok) = eps
                .clone()
                .filter(|e| e.seed == *s)
                .fold((0usize, 0usize), |(n, ok), e| (n + 1, ok + usize::from(e.success)));
            if n == 0 {
                0.0
            } else {
                ok as f64 / n as f64
            }
        })
        .collect()
}

/// Every instance × seed × episode, run in parallel and reduced in a fixed
/// order.
pub fn evaluate(policy: &str, instances: &[TaskInstance], executor: &dyn Executor, config: &EvalConfig) -> EvalReport {
    let rig = CameraRig::standard(config.camera_resolution);
    let jobs: Vec<(usize, u64, usize)> = (0..instances.len())
        .flat_map(|i| config.seeds.iter().flat_map(move |&s| (0..config.episodes).map(move |e| (i, s, e))))
        .collect();
    let episodes: Vec<EpisodeResult> = jobs
        .par_iter()
        .map(|&(i, s, e)| run_episode(&instances[i], s, e, executor, &rig, config))
        .collect();
    EvalReport::from_episodes(policy, config.clone(), instances, episodes)
}

impl EvalReport {
    pub fn from_episodes(policy: &str, config: EvalConfig, instances: &[TaskInstance], episodes: Vec<EpisodeResult>) -> Self {
        let mut levels: BTreeMap<Level, Vec<&EpisodeResult>> = BTreeMap::new();
        for e in &episodes {
            levels.entry(e.level).or_default().push(e);
        }
        let levels = levels
            .into_iter()
            .map(|(level, eps)| {
                let per_seed = per_seed_rates(&config.seeds, eps.iter().copied());
                let (mean, std) = mean_std(&per_seed);
                LevelSummary { level, per_seed, mean, std, episodes: eps.len() }
            })
            .collect();
        let tasks = instances
            .iter()
            .map(|inst| {
                let eps = episodes
                    .iter()
                    .filter(|e| e.level == inst.level && e.task_id == inst.task_id && e.variation == inst.variation_index);
                let per_seed = per_seed_rates(&config.seeds, eps);
                let (mean, std) = mean_std(&per_seed);
                TaskRow {
                    level: inst.level,
                    task_id: inst.task_id.clone(),
                    variation: inst.variation_index,
                    text: inst.text.clone(),
                    per_seed,
                    mean,
                    std,
                }
            })
            .collect();
        Self { policy: policy.to_owned(), config, levels, tasks, episodes }
    }

    pub fn level(&self, level: Level) -> Option<&LevelSummary> {
        self.levels.iter().find(|l| l.level == level)
    }

    /// Aligned text table: one row per task variation, then per level.
    pub fn render_table(&self) -> String {
        let pct = |x: f64| format!("{:.1}", 100.0 * x);
        let mut rows: Vec<[String; 5]> = vec![[
            "level".into(),
            "task".into(),
            "var".into(),
            "success %".into(),
            "std".into(),
        ]];
        for t in &self.tasks {
            rows.push([t.level.name().into(), t.task_id.clone(), t.variation.to_string(), pct(t.mean), pct(t.std)]);
        }
        for l in &self.levels {
            rows.push([l.level.name().into(), "(all)".into(), "-".into(), pct(l.mean), pct(l.std)]);
        }
        let widths: Vec<usize> = (0..5).map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0)).collect();
        let mut out = format!("policy: {}\n", self.policy);
        for (i, r) in rows.iter().enumerate() {
            let line: Vec<String> = r
                .iter()
                .enumerate()
                .map(|(c, s)| if c >= 2 { format!("{s:>w$}", w = widths[c]) } else { format!("{s:<w$}", w = widths[c]) })
                .collect();
            let _ = writeln!(out, "{}", line.join("  ").trim_end());
            if i == 0 {
                let _ = writeln!(out, "{}", "-".repeat(widths.iter().sum::<usize>() + 8));
            }
        }
        out
    }
}

/// Upper bound on the success rate of a policy that places every action
/// uniformly in the workspace: it needs at least one grasp, which succeeds
/// only when the action lands within the grasp radius of the target.
pub fn chance_baseline(instance: &TaskInstance, bounds: &WorkspaceBounds, grasp_radius: f64, max_steps_factor: usize) -> f64 {
    let e = bounds.extent();
    let p = (4.0 / 3.0 * std::f64::consts::PI * grasp_radius.powi(3) / (e.x * e.y * e.z)).min(1.0);
    let tries = (max_steps_factor * instance.plan.len()) as i32;
    1.0 - (1.0 - p).powi(tries)
}
