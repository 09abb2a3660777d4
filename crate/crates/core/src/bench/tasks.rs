use std::collections::BTreeSet;
use std::f64::consts::FRAC_PI_4;
use std::path::Path;

use nalgebra::{Vector2, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::scene::{facing_cabinet, top_down, Cabinet, CabinetModel, Color, ObjectKind, Scene, SceneObject, Shape, Support};
use super::{BenchError, Held};
use crate::planner::Plan;
use crate::trajectory::{Action, Gripper};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Train,
    L1,
    L2,
    L3,
    L4,
}

impl Level {
    pub const EVAL: [Level; 4] = [Level::L1, Level::L2, Level::L3, Level::L4];

    pub fn name(self) -> &'static str {
        match self {
            Level::Train => "train",
            Level::L1 => "l1",
            Level::L2 => "l2",
            Level::L3 => "l3",
            Level::L4 => "l4",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DrawerSpec {
    pub model: CabinetModel,
    pub level: String,
}

impl DrawerSpec {
    pub fn index(&self) -> Result<usize, BenchError> {
        self.model
            .level_index(&self.level)
            .ok_or_else(|| BenchError::Suite(format!("cabinet {:?} has no {:?} drawer", self.model, self.level)))
    }
}

/// One concrete task variation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaskVariation {
    PickLift { item: ObjectKind },
    PutInCup { item: ObjectKind, cup: ObjectKind },
    /// Bottom object first; each later one goes on top of the stack.
    Stack { items: Vec<ObjectKind> },
    OpenDrawer { drawer: DrawerSpec },
    CloseDrawer { drawer: DrawerSpec },
    OpenDrawerPutItem { item: ObjectKind, drawer: DrawerSpec },
    /// The drawer starts open.
    PutItemsInDrawer { items: Vec<ObjectKind>, drawer: DrawerSpec },
}

/// Where a carried object goes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Destination {
    Object(ObjectKind),
    Drawer { level: usize, name: String, slot: usize },
}

impl Destination {
    fn phrase(&self) -> String {
        match self {
            Destination::Object(k) => format!("the {k}"),
            Destination::Drawer { name, .. } => format!("the {name} drawer"),
        }
    }

    fn preposition(&self) -> &'static str {
        match self {
            Destination::Object(k) if k.shape != Shape::Cup => "onto",
            _ => "into",
        }
    }
}

/// Semantic goal of one plan step; the step's keyframe action is computed
/// from the scene state when the step starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "goal", rename_all = "snake_case")]
pub enum StepGoal {
    AlignAbove { item: ObjectKind },
    Grasp { item: ObjectKind },
    Lift { item: ObjectKind },
    CarryAbove { item: ObjectKind, dest: Destination },
    Release { item: ObjectKind, dest: Destination },
    AlignHandle { level: usize, name: String },
    GraspHandle { level: usize, name: String },
    Pull { level: usize, name: String },
    Push { level: usize, name: String },
}

const ALIGN_CLEARANCE: f64 = 0.08;
const LIFT_HEIGHT: f64 = 0.15;
const RELEASE_GAP: f64 = 0.01;
const HANDLE_STANDOFF: f64 = 0.06;

impl StepGoal {
    pub fn instruction(&self) -> String {
        match self {
            StepGoal::AlignAbove { item } => format!("The robot arm moves above the {item}"),
            StepGoal::Grasp { item } => format!("The robot arm grasps the {item}"),
            StepGoal::Lift { item } => format!("The robot arm lifts the {item} up"),
            StepGoal::CarryAbove { item, dest } => format!("The robot arm carries the {item} above {}", dest.phrase()),
            StepGoal::Release { item, dest } => {
                format!("The robot arm lowers the {item} {} {} and releases it", dest.preposition(), dest.phrase())
            }
            StepGoal::AlignHandle { name, .. } => {
                format!("The robot arm lowers itself to align with the handle of the {name} drawer")
            }
            StepGoal::GraspHandle { name, .. } => format!("The robot arm grasps the {name} drawer's handle firmly"),
            StepGoal::Pull { name, .. } => format!("The robot pulls the handle back, smoothly opening the {name} drawer"),
            StepGoal::Push { name, .. } => format!("The robot pushes the handle forward, closing the {name} drawer"),
        }
    }

    /// Gripper command issued at the end of the step.
    pub fn gripper(&self) -> Gripper {
        match self {
            StepGoal::AlignAbove { .. } | StepGoal::Release { .. } | StepGoal::AlignHandle { .. } => Gripper::Open,
            _ => Gripper::Closed,
        }
    }

    /// Keyframe action for this step in the current scene, clamped into the
    /// workspace.
    pub fn target_action(&self, scene: &Scene) -> Result<Action, BenchError> {
        let up = |h: f64| Vector3::new(0.0, 0.0, h);
        let (position, orientation) = match self {
            StepGoal::AlignAbove { item } => {
                let o = scene.object(*item)?;
                (o.grasp_point() + up(ALIGN_CLEARANCE), top_down(o.yaw))
            }
            StepGoal::Grasp { item } => {
                let o = scene.object(*item)?;
                (o.grasp_point(), top_down(o.yaw))
            }
            StepGoal::Lift { item } => {
                let o = scene.object(*item)?;
                (o.grasp_point() + up(LIFT_HEIGHT), top_down(o.yaw))
            }
            StepGoal::CarryAbove { item, dest } | StepGoal::Release { item, dest } => {
                let o = scene.object(*item)?;
                let extra = if matches!(self, StepGoal::CarryAbove { .. }) { ALIGN_CLEARANCE } else { 0.0 };
                let place = place_point(scene, dest, *item)?;
                (place + up(0.5 * o.height() + RELEASE_GAP + extra), top_down(o.yaw))
            }
            StepGoal::AlignHandle { level, .. } => {
                let c = scene.cabinet()?;
                (c.handle(*level) - Vector3::new(0.0, HANDLE_STANDOFF, 0.0), facing_cabinet())
            }
            StepGoal::GraspHandle { level, .. } => (scene.cabinet()?.handle(*level), facing_cabinet()),
            StepGoal::Pull { level, .. } => (scene.cabinet()?.handle_at(*level, 1.0), facing_cabinet()),
            StepGoal::Push { level, .. } => (scene.cabinet()?.handle_at(*level, 0.0), facing_cabinet()),
        };
        Ok(Action::new(scene.bounds.clamp(&position), orientation, self.gripper()))
    }
}

/// Resting height and location for an object dropped at `dest`.
fn place_point(scene: &Scene, dest: &Destination, item: ObjectKind) -> Result<Vector3<f64>, BenchError> {
    match dest {
        Destination::Object(k) => {
            let j = scene.find(*k).ok_or_else(|| BenchError::MissingObject(k.name()))?;
            let base = &scene.objects[j];
            let moving = scene.find(item);
            let top = scene
                .dependents(j)
                .into_iter()
                .filter(|&d| Some(d) != moving)
                .map(|d| scene.objects[d].surface_z())
                .fold(base.surface_z(), f64::max);
            Ok(Vector3::new(base.position.x, base.position.y, top))
        }
        Destination::Drawer { level, slot, .. } => Ok(scene.cabinet()?.slot(*level, *slot)),
    }
}

/// Success condition, decidable from the scene state alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Predicate {
    Lifted { item: ObjectKind, min_z: f64 },
    RestsOn { item: ObjectKind, base: ObjectKind },
    InDrawer { item: ObjectKind, level: usize },
    DrawerOpen { level: usize, min_open: f64 },
    DrawerClosed { level: usize, max_open: f64 },
    All { parts: Vec<Predicate> },
}

impl Predicate {
    pub fn holds(&self, scene: &Scene) -> bool {
        match self {
            Predicate::Lifted { item, min_z } => scene
                .find(*item)
                .is_some_and(|i| scene.held == Held::Object(i) && scene.objects[i].position.z >= *min_z),
            Predicate::RestsOn { item, base } => match (scene.find(*item), scene.find(*base)) {
                (Some(i), Some(b)) => scene.rests_on(i, b),
                _ => false,
            },
            Predicate::InDrawer { item, level } => {
                scene.find(*item).is_some_and(|i| scene.objects[i].support == Support::Drawer(*level))
            }
            Predicate::DrawerOpen { level, min_open } => {
                scene.cabinet.as_ref().is_some_and(|c| c.open[*level] >= *min_open)
            }
            Predicate::DrawerClosed { level, max_open } => {
                scene.cabinet.as_ref().is_some_and(|c| c.open[*level] <= *max_open)
            }
            Predicate::All { parts } => parts.iter().all(|p| p.holds(scene)),
        }
    }
}

/// A variation expanded into text, plan, per-step goals and success test.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskInstance {
    pub task_id: String,
    pub level: Level,
    pub variation_index: usize,
    pub variation: TaskVariation,
    pub text: String,
    pub plan: Plan,
    pub goals: Vec<StepGoal>,
    pub success: Predicate,
}

fn pick_place(item: ObjectKind, dest: Destination) -> Vec<StepGoal> {
    vec![
        StepGoal::AlignAbove { item },
        StepGoal::Grasp { item },
        StepGoal::CarryAbove { item, dest: dest.clone() },
        StepGoal::Release { item, dest },
    ]
}

fn drawer_goals(level: usize, name: &str, open: bool) -> Vec<StepGoal> {
    let name = name.to_owned();
    vec![
        StepGoal::AlignHandle { level, name: name.clone() },
        StepGoal::GraspHandle { level, name: name.clone() },
        if open {
            StepGoal::Pull { level, name }
        } else {
            StepGoal::Push { level, name }
        },
    ]
}

fn join_and(names: &[String]) -> String {
    match names {
        [] => String::new(),
        [a] => a.clone(),
        [init @ .., last] => format!("{} and {last}", init.join(", ")),
    }
}

const DRAWER_OPEN: f64 = 0.8;
const DRAWER_CLOSED: f64 = 0.05;

impl TaskVariation {
    /// Objects the variation needs in the scene.
    pub fn objects(&self) -> Vec<ObjectKind> {
        match self {
            TaskVariation::PickLift { item } | TaskVariation::OpenDrawerPutItem { item, .. } => vec![*item],
            TaskVariation::PutInCup { item, cup } => vec![*item, *cup],
            TaskVariation::Stack { items } | TaskVariation::PutItemsInDrawer { items, .. } => items.clone(),
            TaskVariation::OpenDrawer { .. } | TaskVariation::CloseDrawer { .. } => Vec::new(),
        }
    }

    pub fn drawer(&self) -> Option<&DrawerSpec> {
        match self {
            TaskVariation::OpenDrawer { drawer }
            | TaskVariation::CloseDrawer { drawer }
            | TaskVariation::OpenDrawerPutItem { drawer, .. }
            | TaskVariation::PutItemsInDrawer { drawer, .. } => Some(drawer),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let objs = self.objects();
        let distinct: BTreeSet<_> = objs.iter().collect();
        if distinct.len() != objs.len() {
            return Err(BenchError::Suite(format!("variation {self:?} repeats an object")));
        }
        match self {
            TaskVariation::Stack { items } if items.len() < 2 => {
                return Err(BenchError::Suite("a stack needs at least two objects".into()))
            }
            TaskVariation::Stack { items } if items[..items.len() - 1].iter().any(|k| !k.shape.is_support()) => {
                return Err(BenchError::Suite(format!("only the top of a stack may be a {}", Shape::Star.noun())))
            }
            TaskVariation::PutInCup { cup, .. } if cup.shape != Shape::Cup => {
                return Err(BenchError::Suite(format!("{cup} is not a cup")))
            }
            TaskVariation::PutItemsInDrawer { items, .. } if items.is_empty() || items.len() > 2 => {
                return Err(BenchError::Suite("a drawer holds one or two objects".into()))
            }
            _ => {}
        }
        if let Some(d) = self.drawer() {
            d.index()?;
        }
        Ok(())
    }

    pub fn instantiate(&self, task_id: &str, level: Level, variation_index: usize) -> Result<TaskInstance, BenchError> {
        self.validate()?;
        let name = |k: &ObjectKind| format!("the {k}");
        let (text, subtasks, success): (String, Vec<Vec<StepGoal>>, Predicate) = match self {
            TaskVariation::PickLift { item } => (
                format!("pick up the {item} and lift it"),
                vec![vec![
                    StepGoal::AlignAbove { item: *item },
                    StepGoal::Grasp { item: *item },
                    StepGoal::Lift { item: *item },
                ]],
                Predicate::Lifted { item: *item, min_z: 0.1 },
            ),
            TaskVariation::PutInCup { item, cup } => (
                format!("put the {item} in the {cup}"),
                vec![pick_place(*item, Destination::Object(*cup))],
                Predicate::RestsOn { item: *item, base: *cup },
            ),
            TaskVariation::Stack { items } => {
                let base = items[0];
                let movers = &items[1..];
                let text = if items.iter().all(|k| k.shape == Shape::Cup) {
                    let colors: Vec<String> = movers.iter().map(|k| k.color.name().to_owned()).collect();
                    format!("stack the {} cup on the {base}", join_and(&colors))
                } else {
                    format!("stack {} on the {base}", join_and(&movers.iter().map(name).collect::<Vec<_>>()))
                };
                let subtasks = items
                    .windows(2)
                    .map(|w| {
                        let dest = if w[0].shape == Shape::Cup { base } else { w[0] };
                        pick_place(w[1], Destination::Object(dest))
                    })
                    .collect();
                let parts = movers.iter().map(|m| Predicate::RestsOn { item: *m, base }).collect();
                (text, subtasks, Predicate::All { parts })
            }
            TaskVariation::OpenDrawer { drawer } | TaskVariation::CloseDrawer { drawer } => {
                let open = matches!(self, TaskVariation::OpenDrawer { .. });
                let level = drawer.index()?;
                (
                    format!("{} the {} drawer", if open { "open" } else { "close" }, drawer.level),
                    vec![drawer_goals(level, &drawer.level, open)],
                    if open {
                        Predicate::DrawerOpen { level, min_open: DRAWER_OPEN }
                    } else {
                        Predicate::DrawerClosed { level, max_open: DRAWER_CLOSED }
                    },
                )
            }
            TaskVariation::OpenDrawerPutItem { item, drawer } => {
                let level = drawer.index()?;
                let dest = Destination::Drawer { level, name: drawer.level.clone(), slot: 0 };
                (
                    format!("open the {} drawer and put the {item} in it", drawer.level),
                    vec![drawer_goals(level, &drawer.level, true), pick_place(*item, dest)],
                    Predicate::All {
                        parts: vec![
                            Predicate::DrawerOpen { level, min_open: DRAWER_OPEN },
                            Predicate::InDrawer { item: *item, level },
                        ],
                    },
                )
            }
            TaskVariation::PutItemsInDrawer { items, drawer } => {
                let level = drawer.index()?;
                let subtasks = items
                    .iter()
                    .enumerate()
                    .map(|(slot, k)| pick_place(*k, Destination::Drawer { level, name: drawer.level.clone(), slot }))
                    .collect();
                (
                    format!("put {} in the {} drawer", join_and(&items.iter().map(name).collect::<Vec<_>>()), drawer.level),
                    subtasks,
                    Predicate::All {
                        parts: items.iter().map(|k| Predicate::InDrawer { item: *k, level }).collect(),
                    },
                )
            }
        };
        let plan = Plan::new(
            text.clone(),
            subtasks.iter().map(|s| s.iter().map(StepGoal::instruction).collect()).collect(),
        )
        .map_err(|e| BenchError::Suite(e.to_string()))?;
        Ok(TaskInstance {
            task_id: task_id.to_owned(),
            level,
            variation_index,
            variation: self.clone(),
            text,
            plan,
            goals: subtasks.into_iter().flatten().collect(),
            success,
        })
    }
}

impl TaskInstance {
    pub fn goal_for(&self, instruction: &str) -> Option<&StepGoal> {
        self.plan.locate(instruction).map(|r| &self.goals[r.index])
    }

    /// Gripper state expected at the start of each step.
    pub fn preconditions(&self) -> Vec<Gripper> {
        let mut state = Gripper::Open;
        self.goals
            .iter()
            .map(|g| std::mem::replace(&mut state, g.gripper()))
            .collect()
    }

    pub fn label(&self) -> String {
        format!("{}/{}/{}", self.level.name(), self.task_id, self.variation_index)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub distractors: usize,
    pub max_tries: usize,
    pub dynamics: super::DynamicsParams,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            distractors: 1,
            max_tries: 2000,
            dynamics: super::DynamicsParams::default(),
        }
    }
}

const TRAIN_COLORS: [Color; 4] = [Color::Red, Color::Green, Color::Blue, Color::Yellow];
const TRAIN_SHAPES: [Shape; 3] = [Shape::Block, Shape::Cylinder, Shape::Cup];
const CABINET_Y: f64 = 0.22;

/// Random scene with the variation's objects, a few distractors and, for
/// drawer tasks, a cabinet. Objects never overlap at spawn.
pub fn generate_scene(
    instance: &TaskInstance,
    bounds: crate::geometry::WorkspaceBounds,
    config: &SceneConfig,
    rng: &mut impl Rng,
) -> Result<Scene, BenchError> {
    let mut scene = Scene::new(bounds, config.dynamics);
    let needed = instance.variation.objects();
    let mut kinds = needed.clone();
    let (colors, shapes): (Vec<Color>, Vec<Shape>) = if instance.level == Level::L2 {
        (Color::ALL.to_vec(), Shape::ALL.to_vec())
    } else {
        (TRAIN_COLORS.to_vec(), TRAIN_SHAPES.to_vec())
    };
    let mut guard = 0;
    while kinds.len() < needed.len() + config.distractors && guard < 1000 {
        guard += 1;
        let k = ObjectKind::new(colors[rng.random_range(0..colors.len())], shapes[rng.random_range(0..shapes.len())]);
        if !kinds.contains(&k) {
            kinds.push(k);
        }
    }
    let y_max = if let Some(d) = instance.variation.drawer() {
        let cx = rng.random_range(-0.08..0.08);
        let mut cab = Cabinet::new(d.model, Vector2::new(cx, CABINET_Y));
        if matches!(
            instance.variation,
            TaskVariation::CloseDrawer { .. } | TaskVariation::PutItemsInDrawer { .. }
        ) {
            cab.open[d.index()?] = 1.0;
        }
        scene.cabinet = Some(cab);
        -0.05
    } else {
        0.12
    };
    for kind in kinds {
        let r = kind.shape.footprint().radius();
        let mut placed = false;
        for _ in 0..config.max_tries {
            let p = Vector3::new(rng.random_range(-0.25..0.25), rng.random_range(-0.25..y_max), 0.0);
            let clear = scene
                .objects
                .iter()
                .all(|o| (o.position.xy() - p.xy()).norm() > o.radius() + r + 0.02);
            if clear {
                let yaw = match kind.shape {
                    Shape::Block | Shape::Star | Shape::Moon => rng.random_range(-FRAC_PI_4..FRAC_PI_4),
                    _ => 0.0,
                };
                scene.objects.push(SceneObject { kind, position: p, yaw, support: Support::Table });
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(BenchError::Placement(kind.name()));
        }
    }
    Ok(scene)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub id: String,
    pub level: Level,
    pub variations: Vec<TaskVariation>,
}

/// Versioned suite definition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suite {
    pub version: u32,
    pub name: String,
    pub tasks: Vec<TaskSpec>,
}

pub const SUITE_VERSION: u32 = 1;

impl Suite {
    pub fn from_toml(text: &str) -> Result<Self, BenchError> {
        let suite: Suite = toml::from_str(text).map_err(|e| BenchError::Suite(e.to_string()))?;
        if suite.version != SUITE_VERSION {
            return Err(BenchError::Suite(format!("unsupported suite version {}", suite.version)));
        }
        for t in &suite.tasks {
            if t.variations.is_empty() {
                return Err(BenchError::Suite(format!("task {} has no variations", t.id)));
            }
            t.variations.iter().try_for_each(TaskVariation::validate)?;
        }
        Ok(suite)
    }

    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_toml(&text)
    }

    /// The bundled suite: 16 training variations, their L1 copies, and the
    /// L2-L4 held-out sets.
    pub fn standard() -> Self {
        Self::from_toml(include_str!("../../suites/standard.toml")).expect("bundled suite parses")
    }

    /// Four training tasks plus one L1 and one L4 task, for quick runs.
    pub fn mini() -> Self {
        Self::from_toml(include_str!("../../suites/mini.toml")).expect("bundled suite parses")
    }

    pub fn instances(&self) -> Result<Vec<TaskInstance>, BenchError> {
        let mut out = Vec::new();
        for t in &self.tasks {
            for (i, v) in t.variations.iter().enumerate() {
                out.push(v.instantiate(&t.id, t.level, i)?);
            }
        }
        Ok(out)
    }

    pub fn instances_at(&self, level: Level) -> Result<Vec<TaskInstance>, BenchError> {
        Ok(self.instances()?.into_iter().filter(|i| i.level == level).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k(s: &str) -> ObjectKind {
        s.parse().unwrap()
    }

    #[test]
    fn open_drawer_plan_has_three_steps() {
        let v = TaskVariation::OpenDrawer {
            drawer: DrawerSpec { model: CabinetModel::A, level: "top".into() },
        };
        let inst = v.instantiate("open_drawer", Level::Train, 0).unwrap();
        assert_eq!(inst.text, "open the top drawer");
        assert_eq!(
            inst.plan.subtasks,
            vec![vec![
                "The robot arm lowers itself to align with the handle of the top drawer".to_string(),
                "The robot arm grasps the top drawer's handle firmly".to_string(),
                "The robot pulls the handle back, smoothly opening the top drawer".to_string(),
            ]]
        );
    }

    #[test]
    fn cup_stack_splits_into_two_subtasks() {
        let v = TaskVariation::Stack { items: vec![k("red cup"), k("blue cup"), k("yellow cup")] };
        let inst = v.instantiate("stack_cups", Level::L4, 0).unwrap();
        assert_eq!(inst.text, "stack the blue and yellow cup on the red cup");
        assert_eq!(inst.plan.subtasks.len(), 2);
        assert!(inst.plan.subtasks[1].iter().all(|s| s.contains("yellow cup")));
        assert!(inst.plan.subtasks[1][3].contains("into the red cup"));
    }

    #[test]
    fn composition_concatenates_component_plans() {
        let drawer = DrawerSpec { model: CabinetModel::A, level: "top".into() };
        let item = k("red block");
        let composed = TaskVariation::OpenDrawerPutItem { item, drawer: drawer.clone() }
            .instantiate("c", Level::L4, 0)
            .unwrap();
        let open = TaskVariation::OpenDrawer { drawer: drawer.clone() }.instantiate("o", Level::Train, 0).unwrap();
        let put = TaskVariation::PutItemsInDrawer { items: vec![item], drawer }
            .instantiate("p", Level::Train, 0)
            .unwrap();
        assert_eq!(composed.plan.subtasks, vec![open.plan.subtasks[0].clone(), put.plan.subtasks[0].clone()]);
    }

    #[test]
    fn preconditions_track_gripper() {
        let inst = TaskVariation::PutInCup { item: k("red block"), cup: k("blue cup") }
            .instantiate("p", Level::Train, 0)
            .unwrap();
        use Gripper::*;
        assert_eq!(inst.preconditions(), vec![Open, Open, Closed, Closed]);
    }

    #[test]
    fn invalid_variations_are_rejected() {
        assert!(TaskVariation::Stack { items: vec![k("red block")] }.validate().is_err());
        assert!(TaskVariation::PutInCup { item: k("red block"), cup: k("blue block") }.validate().is_err());
        let d = DrawerSpec { model: CabinetModel::B, level: "middle".into() };
        assert!(TaskVariation::OpenDrawer { drawer: d }.validate().is_err());
        assert!(Suite::from_toml("version = 2\nname = \"x\"\ntasks = []").is_err());
    }

    #[test]
    fn bundled_suites_parse() {
        let s = Suite::standard();
        let count = |l| s.instances_at(l).unwrap().len();
        assert_eq!(count(Level::Train), 16);
        assert_eq!(count(Level::L1), 16);
        assert!(count(Level::L2) > 0 && count(Level::L3) > 0 && count(Level::L4) > 0);
        assert_eq!(Suite::mini().tasks.len(), 6);
        assert_eq!(Suite::mini().instances_at(Level::Train).unwrap().len(), 4);
    }
}
