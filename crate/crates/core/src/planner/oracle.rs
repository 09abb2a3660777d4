use std::sync::Mutex;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{KeypointPrediction, Plan, Planner, PlannerError, Round1Query, Round2Query, Round2Response, INITIAL_STATE};
use crate::bench::{Scene, TaskInstance};
use crate::trajectory::ObjectPosition;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    /// Answer round 1 with the current sub-task only; otherwise with the
    /// whole plan as one list.
    pub subtask_scoping: bool,
    /// Per-axis standard deviation of keypoint noise (m).
    pub noise_sigma: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            subtask_scoping: true,
            noise_sigma: 0.0,
        }
    }
}

/// Scripted planner reading the ground-truth plan and the scene it is bound
/// to. Without a memory cue it can only guess among the steps whose gripper
/// precondition matches the observed gripper state.
pub struct OraclePlanner<'a> {
    instance: &'a TaskInstance,
    scene: &'a Scene,
    config: OracleConfig,
    rng: &'a Mutex<ChaCha8Rng>,
    plan: Plan,
}

impl<'a> OraclePlanner<'a> {
    pub fn bind(instance: &'a TaskInstance, scene: &'a Scene, config: OracleConfig, rng: &'a Mutex<ChaCha8Rng>) -> Self {
        let plan = if config.subtask_scoping {
            instance.plan.clone()
        } else {
            instance.plan.flattened()
        };
        Self {
            instance,
            scene,
            config,
            rng,
            plan,
        }
    }

    fn choose(&self, query: &Round2Query) -> String {
        let sub = &query.subtask_plan;
        match &query.previous_step {
            Some(prev) => match sub.iter().position(|s| s == prev) {
                Some(i) if i + 1 < sub.len() => sub[i + 1].clone(),
                _ => {
                    if prev != INITIAL_STATE {
                        tracing::debug!(previous = %prev, "previous step outside the sub-task; restarting it");
                    }
                    sub[0].clone()
                }
            },
            None => {
                let pre = self.instance.preconditions();
                let matching: Vec<&String> = sub
                    .iter()
                    .filter(|s| self.instance.plan.locate(s).is_some_and(|r| pre[r.index] == query.gripper))
                    .collect();
                let pool: Vec<&String> = if matching.is_empty() { sub.iter().collect() } else { matching };
                let mut rng = self.rng.lock().expect("rng lock");
                pool[rng.random_range(0..pool.len())].clone()
            }
        }
    }
}

impl Planner for OraclePlanner<'_> {
    fn round1(&self, query: &Round1Query) -> Result<Vec<String>, PlannerError> {
        if query.task.trim().is_empty() {
            return Err(PlannerError::EmptyTask);
        }
        let next = match query.previous_step.as_deref() {
            None | Some(INITIAL_STATE) => 0,
            Some(prev) => {
                self.plan
                    .locate(prev)
                    .ok_or_else(|| PlannerError::UnknownProgress(prev.to_owned()))?
                    .index
                    + 1
            }
        };
        Ok(match self.plan.subtask_of_index(next) {
            Some(m) => self.plan.subtasks[m].clone(),
            None => Vec::new(),
        })
    }

    fn round2(&self, query: &Round2Query) -> Result<Round2Response, PlannerError> {
        if query.subtask_plan.is_empty() {
            return Err(PlannerError::EmptySubtask);
        }
        let step = self.choose(query);
        let goal = self
            .instance
            .goal_for(&step)
            .ok_or_else(|| PlannerError::UnknownProgress(step.clone()))?;
        let target = goal
            .target_action(self.scene)
            .map_err(|e| PlannerError::Backend(e.to_string()))?;
        let mut world = target.position;
        if self.config.noise_sigma > 0.0 {
            let normal = Normal::new(0.0, self.config.noise_sigma).map_err(|e| PlannerError::Backend(e.to_string()))?;
            let mut rng = self.rng.lock().expect("rng lock");
            world += nalgebra::Vector3::from_fn(|_, _| normal.sample(&mut *rng));
        }
        let poses = query.views.poses();
        let world = query.views.bounds().clamp(&world);
        let relevant: Vec<String> = self
            .instance
            .variation
            .objects()
            .iter()
            .map(|k| k.name())
            .chain(self.instance.variation.drawer().map(|d| format!("{} drawer handle", d.level)))
            .collect();
        let object_positions = self
            .scene
            .object_states()
            .into_iter()
            .filter(|o| relevant.contains(&o.name))
            .filter_map(|o| ObjectPosition::locate(&o.name, o.position, &poses))
            .collect();
        Ok(Round2Response {
            object_positions,
            step_instruction: step,
            keypoint: KeypointPrediction::from_world(world, &poses),
        })
    }
}
