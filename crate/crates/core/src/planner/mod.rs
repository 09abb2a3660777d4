//! The two-round planner protocol. Round 1 is text only (task and memory
//! cue to the current sub-task plan); round 2 adds the canonical views and
//! returns object positions, the next step instruction and its keypoint.

mod oracle;
mod plan;
mod session;
pub mod wire;

pub use oracle::{OracleConfig, OraclePlanner};
pub use plan::{Plan, StepRef, INITIAL_STATE};
pub use session::{PlannerSession, TranscriptEntry};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::geometry::{world_to_pixel, ViewPose, ViewSet};
use crate::trajectory::{Gripper, ObjectPosition};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PlannerError {
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("task description is empty")]
    EmptyTask,
    #[error("previous step {0:?} is not part of the plan")]
    UnknownProgress(String),
    #[error("round 2 needs a nonempty sub-task plan")]
    EmptySubtask,
    #[error("could not parse planner output: {message}")]
    Parse { message: String, raw: String },
    #[error("instruction {instruction:?} is not in the current sub-task plan {plan:?}")]
    ProtocolViolation { instruction: String, plan: Vec<String> },
    #[error("{what} pixel {got:?} in the {view} view does not match its world point (expected {expected:?})")]
    Inconsistent {
        what: String,
        view: &'static str,
        expected: Option<(usize, usize)>,
        got: Option<(usize, usize)>,
    },
    #[error("planner failed: {0}")]
    Backend(String),
}

/// Round 1: text only. There is deliberately no observation field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Round1Query {
    pub task: String,
    /// `None` when the memory cue is ablated.
    pub previous_step: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Round2Query {
    pub task: String,
    pub views: ViewSet,
    pub gripper: Gripper,
    pub subtask_plan: Vec<String>,
    pub previous_step: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeypointPrediction {
    /// Pixel per view (front, left, top); `None` outside that view.
    pub pixels: [Option<(usize, usize)>; 3],
    pub world: Vector3<f64>,
}

impl KeypointPrediction {
    pub fn from_world(world: Vector3<f64>, poses: &[ViewPose; 3]) -> Self {
        Self {
            pixels: [0, 1, 2].map(|i| world_to_pixel(&poses[i], &world)),
            world,
        }
    }
}

/// Fields appear in reasoning order: objects, instruction, keypoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Round2Response {
    pub object_positions: Vec<ObjectPosition>,
    pub step_instruction: String,
    pub keypoint: KeypointPrediction,
}

/// Check that every reported pixel is the projection of its world point.
pub fn validate_response(response: &Round2Response, poses: &[ViewPose; 3]) -> Result<(), PlannerError> {
    let check = |what: &str, world: &Vector3<f64>, got: [Option<(usize, usize)>; 3]| {
        for (i, pose) in poses.iter().enumerate() {
            let expected = world_to_pixel(pose, world);
            if expected != got[i] {
                return Err(PlannerError::Inconsistent {
                    what: what.to_owned(),
                    view: pose.id.name(),
                    expected,
                    got: got[i],
                });
            }
        }
        Ok(())
    };
    check("keypoint", &response.keypoint.world, response.keypoint.pixels)?;
    for o in &response.object_positions {
        check(&o.name, &o.world, o.pixels.map(Some))?;
    }
    Ok(())
}

/// A planner answering both rounds. Implementations must tolerate
/// concurrent calls from independent sessions.
pub trait Planner: Sync {
    fn round1(&self, query: &Round1Query) -> Result<Vec<String>, PlannerError>;
    fn round2(&self, query: &Round2Query) -> Result<Round2Response, PlannerError>;
}
