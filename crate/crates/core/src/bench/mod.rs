//! Synthetic tabletop benchmark: scenes, keyframe-granularity dynamics,
//! tasks at four generalization levels, a scripted expert and the
//! evaluation protocol.

mod eval;
mod expert;
mod render;
mod scene;
mod tasks;

pub use eval::{
    chance_baseline, evaluate, run_episode, EpisodeResult, EvalConfig, EvalReport, Executor, LevelSummary,
    OracleExecutor, PolicyConfig, RandomExecutor, StepContext, TaskRow,
};
pub use expert::{
    demo_dir_name, demonstrate, generate_demonstrations, record_demonstration, DemoConfig, Demonstration, ExpertConfig,
};
pub use render::{CameraRig, SURFACE_SPACING};
pub use scene::{
    facing_cabinet, home_action, top_down, Cabinet, CabinetModel, CabinetParams, Color, DynamicsParams, Footprint,
    Held, ObjectKind, Prism, Scene, SceneObject, Shape, Support,
};
pub use tasks::{
    generate_scene, Destination, DrawerSpec, Level, Predicate, SceneConfig, StepGoal, Suite, TaskInstance, TaskSpec,
    TaskVariation, SUITE_VERSION,
};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("suite error: {0}")]
    Suite(String),
    #[error("scene has no {0}")]
    MissingObject(String),
    #[error("could not place {0} without overlap")]
    Placement(String),
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
    #[error(transparent)]
    Trajectory(#[from] crate::trajectory::TrajectoryError),
    #[error(transparent)]
    Planner(#[from] crate::planner::PlannerError),
    #[error("executor failed: {0}")]
    Executor(String),
}
