use std::f64::consts::PI;

use nalgebra::{UnitQuaternion, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::geometry::WorkspaceBounds;
use crate::trajectory::{Action, Gripper, ObjectState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Block,
    Cylinder,
    Star,
    Moon,
    Cup,
}

impl Shape {
    pub const ALL: [Shape; 5] = [Shape::Block, Shape::Cylinder, Shape::Star, Shape::Moon, Shape::Cup];

    pub fn noun(self) -> &'static str {
        match self {
            Shape::Block => "block",
            Shape::Cylinder => "cylinder",
            Shape::Star => "star",
            Shape::Moon => "moon",
            Shape::Cup => "cup",
        }
    }

    /// Footprint half-width and height.
    pub fn dims(self) -> (f64, f64) {
        match self {
            Shape::Block => (0.02, 0.04),
            Shape::Cylinder => (0.02, 0.05),
            Shape::Star => (0.028, 0.03),
            Shape::Moon => (0.025, 0.03),
            Shape::Cup => (0.04, 0.07),
        }
    }

    pub fn footprint(self) -> Footprint {
        let (r, _) = self.dims();
        match self {
            Shape::Block => Footprint::Rect { hx: r, hy: r },
            Shape::Cylinder => Footprint::Disc { r },
            Shape::Star => Footprint::Star { r_out: r, r_in: 0.45 * r, points: 5 },
            Shape::Moon => Footprint::Moon { r, cut_r: 0.85 * r, cut_offset: 0.6 * r },
            Shape::Cup => Footprint::Annulus { r_in: r - 0.006, r_out: r },
        }
    }

    /// Whether other objects can be stacked on or placed in it.
    pub fn is_support(self) -> bool {
        matches!(self, Shape::Block | Shape::Cylinder | Shape::Cup)
    }

    /// Height above the base at which carried objects come to rest.
    pub fn rest_height(self) -> f64 {
        match self {
            Shape::Cup => CUP_FLOOR,
            other => other.dims().1,
        }
    }
}

const CUP_FLOOR: f64 = 0.006;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Color {
    Red,
    Green,
    Blue,
    Yellow,
    Orange,
    Purple,
    Cyan,
    Pink,
}

impl Color {
    pub const ALL: [Color; 8] = [
        Color::Red,
        Color::Green,
        Color::Blue,
        Color::Yellow,
        Color::Orange,
        Color::Purple,
        Color::Cyan,
        Color::Pink,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Color::Red => "red",
            Color::Green => "green",
            Color::Blue => "blue",
            Color::Yellow => "yellow",
            Color::Orange => "orange",
            Color::Purple => "purple",
            Color::Cyan => "cyan",
            Color::Pink => "pink",
        }
    }

    pub fn rgb(self) -> [f64; 3] {
        match self {
            Color::Red => [0.85, 0.1, 0.1],
            Color::Green => [0.1, 0.7, 0.2],
            Color::Blue => [0.1, 0.2, 0.85],
            Color::Yellow => [0.9, 0.85, 0.1],
            Color::Orange => [0.95, 0.5, 0.05],
            Color::Purple => [0.5, 0.1, 0.6],
            Color::Cyan => [0.1, 0.8, 0.85],
            Color::Pink => [0.95, 0.5, 0.7],
        }
    }
}

/// A colored shape such as "red block".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ObjectKind {
    pub color: Color,
    pub shape: Shape,
}

impl ObjectKind {
    pub fn new(color: Color, shape: Shape) -> Self {
        Self { color, shape }
    }

    pub fn name(&self) -> String {
        format!("{} {}", self.color.name(), self.shape.noun())
    }
}

impl std::str::FromStr for ObjectKind {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || BenchError::Suite(format!("unknown object {s:?}; expected \"<color> <shape>\""));
        let (c, n) = s.trim().split_once(' ').ok_or_else(bad)?;
        let color = Color::ALL.into_iter().find(|x| x.name() == c).ok_or_else(bad)?;
        let shape = Shape::ALL.into_iter().find(|x| x.noun() == n.trim()).ok_or_else(bad)?;
        Ok(Self { color, shape })
    }
}

impl std::fmt::Display for ObjectKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.name())
    }
}

impl Serialize for ObjectKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.name())
    }
}

impl<'de> Deserialize<'de> for ObjectKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// 2D region in an object's local frame, extruded between two heights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Footprint {
    Rect { hx: f64, hy: f64 },
    Disc { r: f64 },
    Annulus { r_in: f64, r_out: f64 },
    Star { r_out: f64, r_in: f64, points: usize },
    Moon { r: f64, cut_r: f64, cut_offset: f64 },
}

impl Footprint {
    pub fn contains(&self, p: Vector2<f64>) -> bool {
        match *self {
            Footprint::Rect { hx, hy } => p.x.abs() <= hx && p.y.abs() <= hy,
            Footprint::Disc { r } => p.norm() <= r,
            Footprint::Annulus { r_in, r_out } => (r_in..=r_out).contains(&p.norm()),
            Footprint::Star { r_out, r_in, points } => {
                let rho = p.norm();
                if rho > r_out {
                    return false;
                }
                let sector = 2.0 * PI / points as f64;
                // distance in angle from the nearest tip, folded to [0, sector/2]
                let a = (p.y.atan2(p.x) - PI / 2.0).rem_euclid(sector);
                let a = a.min(sector - a) / (sector / 2.0);
                rho <= r_out + (r_in - r_out) * a
            }
            Footprint::Moon { r, cut_r, cut_offset } => {
                p.norm() <= r && (p - Vector2::new(cut_offset, 0.0)).norm() > cut_r
            }
        }
    }

    pub fn radius(&self) -> f64 {
        match *self {
            Footprint::Rect { hx, hy } => hx.hypot(hy),
            Footprint::Disc { r } | Footprint::Moon { r, .. } => r,
            Footprint::Annulus { r_out, .. } | Footprint::Star { r_out, .. } => r_out,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prism {
    pub center: Vector2<f64>,
    pub yaw: f64,
    pub z0: f64,
    pub z1: f64,
    pub footprint: Footprint,
    pub color: [f64; 3],
}


impl Prism {
    /// Surface samples (tops and side walls) on a grid of `spacing`,
    /// colored with a slight shading of the walls.
    pub fn surface_points(&self, spacing: f64, out: &mut Vec<(Vector3<f64>, [f64; 3])>) {
        let n = (self.footprint.radius() / spacing).ceil() as i64 + 1;
        let (s, c) = self.yaw.sin_cos();
        let width = (2 * n + 1) as usize;
        let local = |i: i64, j: i64| Vector2::new(i as f64 * spacing, j as f64 * spacing);
        let inside: Vec<bool> = (-n..=n)
            .flat_map(|j| (-n..=n).map(move |i| (i, j)))
            .map(|(i, j)| self.footprint.contains(local(i, j)))
            .collect();
        let at = |i: i64, j: i64| {
            let (a, b) = (i + n, j + n);
            a >= 0 && b >= 0 && (a as usize) < width && (b as usize) < width && inside[b as usize * width + a as usize]
        };
        let wall = self.color.map(|x| 0.8 * x);
        let layers = ((self.z1 - self.z0) / spacing).ceil().max(1.0) as usize;
        for j in -n..=n {
            for i in -n..=n {
                if !at(i, j) {
                    continue;
                }
                let l = local(i, j);
                let xy = self.center + Vector2::new(c * l.x - s * l.y, s * l.x + c * l.y);
                out.push((Vector3::new(xy.x, xy.y, self.z1), self.color));
                if !(at(i - 1, j) && at(i + 1, j) && at(i, j - 1) && at(i, j + 1)) {
                    for k in 0..layers {
                        let z = self.z0 + (self.z1 - self.z0) * k as f64 / layers as f64;
                        out.push((Vector3::new(xy.x, xy.y, z), wall));
                    }
                }
            }
        }
    }
}

/// What an object currently rests on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Support {
    Table,
    Object(usize),
    Drawer(usize),
    Gripper,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub kind: ObjectKind,
    /// Center of the object's base.
    pub position: Vector3<f64>,
    pub yaw: f64,
    pub support: Support,
}

impl SceneObject {
    pub fn name(&self) -> String {
        self.kind.name()
    }

    pub fn height(&self) -> f64 {
        self.kind.shape.dims().1
    }

    pub fn radius(&self) -> f64 {
        self.kind.shape.footprint().radius()
    }

    pub fn grasp_point(&self) -> Vector3<f64> {
        self.position + Vector3::new(0.0, 0.0, 0.5 * self.height())
    }

    /// Height at which objects placed on or in this one rest.
    pub fn surface_z(&self) -> f64 {
        self.position.z + self.kind.shape.rest_height()
    }

    pub fn prisms(&self) -> Vec<Prism> {
        let (r, h) = self.kind.shape.dims();
        let base = Prism {
            center: self.position.xy(),
            yaw: self.yaw,
            z0: self.position.z,
            z1: self.position.z + h,
            footprint: self.kind.shape.footprint(),
            color: self.kind.color.rgb(),
        };
        if self.kind.shape == Shape::Cup {
            let floor = Prism {
                z1: self.position.z + CUP_FLOOR,
                footprint: Footprint::Disc { r },
                ..base
            };
            vec![base, floor]
        } else {
            vec![base]
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CabinetModel {
    /// Three levels, narrow handles.
    A,
    /// Four shallower levels, wide handles set further out, longer travel.
    B,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CabinetParams {
    pub width: f64,
    pub depth: f64,
    pub level_height: f64,
    pub levels: usize,
    pub travel: f64,
    pub handle_offset: f64,
    pub handle_width: f64,
}

const PANEL: f64 = 0.012;

impl CabinetModel {
    pub fn params(self) -> CabinetParams {
        match self {
            CabinetModel::A => CabinetParams {
                width: 0.22,
                depth: 0.16,
                level_height: 0.08,
                levels: 3,
                travel: 0.12,
                handle_offset: 0.02,
                handle_width: 0.06,
            },
            CabinetModel::B => CabinetParams {
                width: 0.26,
                depth: 0.18,
                level_height: 0.065,
                levels: 4,
                travel: 0.14,
                handle_offset: 0.03,
                handle_width: 0.1,
            },
        }
    }

    pub fn level_name(self, level: usize) -> &'static str {
        let n = self.params().levels;
        match level {
            0 => "bottom",
            l if l + 1 == n => "top",
            1 if n == 3 => "middle",
            1 => "second",
            _ => "third",
        }
    }

    pub fn level_index(self, name: &str) -> Option<usize> {
        (0..self.params().levels).find(|&l| self.level_name(l) == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cabinet {
    pub model: CabinetModel,
    pub center: Vector2<f64>,
    /// Open fraction per level, bottom first.
    pub open: Vec<f64>,
}

const CABINET_COLOR: [f64; 3] = [0.55, 0.35, 0.2];
const PANEL_COLOR: [f64; 3] = [0.65, 0.45, 0.28];
const HANDLE_COLOR: [f64; 3] = [0.75, 0.75, 0.78];

impl Cabinet {
    pub fn new(model: CabinetModel, center: Vector2<f64>) -> Self {
        Self {
            model,
            center,
            open: vec![0.0; model.params().levels],
        }
    }

    pub fn front_y(&self) -> f64 {
        self.center.y - 0.5 * self.model.params().depth
    }

    fn level_z0(&self, level: usize) -> f64 {
        level as f64 * self.model.params().level_height
    }

    /// Outer face of the drawer's front panel.
    pub fn panel_y(&self, level: usize) -> f64 {
        self.front_y() - PANEL - self.open[level] * self.model.params().travel
    }

    pub fn handle(&self, level: usize) -> Vector3<f64> {
        let p = self.model.params();
        Vector3::new(
            self.center.x,
            self.panel_y(level) - p.handle_offset,
            self.level_z0(level) + 0.5 * p.level_height,
        )
    }

    /// Handle position for a given open fraction.
    pub fn handle_at(&self, level: usize, open: f64) -> Vector3<f64> {
        let mut c = self.clone();
        c.open[level] = open;
        c.handle(level)
    }

    /// Open fraction that puts the handle at world `y`, clamped to [0, 1].
    pub fn open_for_handle_y(&self, y: f64) -> f64 {
        let p = self.model.params();
        ((self.front_y() - PANEL - p.handle_offset - y) / p.travel).clamp(0.0, 1.0)
    }

    pub fn floor_z(&self, level: usize) -> f64 {
        self.level_z0(level) + 0.01
    }

    /// `(min, max)` corners of the part of the drawer interior that sticks
    /// out of the body.
    pub fn exposed(&self, level: usize) -> (Vector2<f64>, Vector2<f64>) {
        let p = self.model.params();
        let hx = 0.5 * p.width - 0.015;
        (
            Vector2::new(self.center.x - hx, self.panel_y(level) + PANEL + 0.005),
            Vector2::new(self.center.x + hx, self.front_y() - 0.005),
        )
    }

    /// Drop target `slot` (0 or 1) in the exposed part of the drawer.
    pub fn slot(&self, level: usize, slot: usize) -> Vector3<f64> {
        let (lo, hi) = self.exposed(level);
        let dx = if slot == 0 { -0.045 } else { 0.045 };
        Vector3::new(self.center.x + dx, 0.5 * (lo.y + hi.y), self.floor_z(level))
    }

    pub fn height(&self) -> f64 {
        let p = self.model.params();
        p.levels as f64 * p.level_height + 0.01
    }

    pub fn prisms(&self) -> Vec<Prism> {
        let p = self.model.params();
        let rect = |cx: f64, cy: f64, hx: f64, hy: f64, z0: f64, z1: f64, color| Prism {
            center: Vector2::new(cx, cy),
            yaw: 0.0,
            z0,
            z1,
            footprint: Footprint::Rect { hx, hy },
            color,
        };
        let (w, front) = (p.width, self.front_y());
        let mut out = vec![rect(self.center.x, self.center.y, 0.5 * w, 0.5 * p.depth, 0.0, self.height(), CABINET_COLOR)];
        for level in 0..p.levels {
            let z0 = self.level_z0(level) + 0.004;
            let z1 = z0 + p.level_height - 0.008;
            let panel = self.panel_y(level);
            out.push(rect(self.center.x, panel + 0.5 * PANEL, 0.5 * w - 0.004, 0.5 * PANEL, z0, z1, PANEL_COLOR));
            let h = self.handle(level);
            out.push(rect(h.x, h.y + 0.5 * p.handle_offset, 0.5 * p.handle_width, 0.5 * p.handle_offset, h.z - 0.008, h.z + 0.008, HANDLE_COLOR));
            let out_len = front - (panel + PANEL);
            if out_len > 1e-6 {
                let cy = 0.5 * (front + panel + PANEL);
                out.push(rect(self.center.x, cy, 0.5 * w - 0.004, 0.5 * out_len, z0, self.floor_z(level), PANEL_COLOR));
                for sx in [-1.0, 1.0] {
                    let x = self.center.x + sx * (0.5 * w - 0.01);
                    out.push(rect(x, cy, 0.006, 0.5 * out_len, z0, z1 - 0.01, PANEL_COLOR));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicsParams {
    pub grasp_radius: f64,
    pub place_tolerance: f64,
}

impl Default for DynamicsParams {
    fn default() -> Self {
        Self {
            grasp_radius: 0.02,
            place_tolerance: 0.03,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Held {
    Nothing,
    Object(usize),
    Handle(usize),
}

/// Gripper pointing straight down, rotated about the vertical by `yaw`.
pub fn top_down(yaw: f64) -> UnitQuaternion<f64> {
    UnitQuaternion::from_euler_angles(PI, 0.0, yaw)
}

/// Gripper pointing along +y, used on drawer handles.
pub fn facing_cabinet() -> UnitQuaternion<f64> {
    UnitQuaternion::from_euler_angles(-PI / 2.0, 0.0, 0.0)
}

pub fn home_action() -> Action {
    Action::new(Vector3::new(0.0, -0.15, 0.4), top_down(0.0), Gripper::Open)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub bounds: WorkspaceBounds,
    pub objects: Vec<SceneObject>,
    pub cabinet: Option<Cabinet>,
    pub gripper: Action,
    pub held: Held,
    pub dynamics: DynamicsParams,
}

impl Scene {
    pub fn new(bounds: WorkspaceBounds, dynamics: DynamicsParams) -> Self {
        Self {
            bounds,
            objects: Vec::new(),
            cabinet: None,
            gripper: home_action(),
            held: Held::Nothing,
            dynamics,
        }
    }

    pub fn find(&self, kind: ObjectKind) -> Option<usize> {
        self.objects.iter().position(|o| o.kind == kind)
    }

    pub fn object(&self, kind: ObjectKind) -> Result<&SceneObject, BenchError> {
        self.find(kind)
            .map(|i| &self.objects[i])
            .ok_or_else(|| BenchError::MissingObject(kind.name()))
    }

    pub fn cabinet(&self) -> Result<&Cabinet, BenchError> {
        self.cabinet.as_ref().ok_or_else(|| BenchError::MissingObject("cabinet".into()))
    }

    /// Named ground-truth positions: object centers and drawer handles.
    pub fn object_states(&self) -> Vec<ObjectState> {
        let mut out: Vec<ObjectState> = self
            .objects
            .iter()
            .map(|o| ObjectState {
                name: o.name(),
                position: o.grasp_point(),
            })
            .collect();
        if let Some(c) = &self.cabinet {
            for l in 0..c.open.len() {
                out.push(ObjectState {
                    name: format!("{} drawer handle", c.model.level_name(l)),
                    position: c.handle(l),
                });
            }
        }
        out
    }

    pub fn prisms(&self) -> Vec<Prism> {
        let mut out: Vec<Prism> = self.objects.iter().flat_map(SceneObject::prisms).collect();
        if let Some(c) = &self.cabinet {
            out.extend(c.prisms());
        }
        out
    }

    /// Objects resting, directly or through a stack, on object `i`.
    pub fn dependents(&self, i: usize) -> Vec<usize> {
        let mut set = vec![i];
        let mut grew = true;
        while grew {
            grew = false;
            for (j, o) in self.objects.iter().enumerate() {
                if let Support::Object(k) = o.support {
                    if set.contains(&k) && !set.contains(&j) {
                        set.push(j);
                        grew = true;
                    }
                }
            }
        }
        set.remove(0);
        set.sort_unstable();
        set
    }

    /// Whether `i` sits on `base`, directly or through a stack.
    pub fn rests_on(&self, i: usize, base: usize) -> bool {
        let mut cur = i;
        for _ in 0..self.objects.len() {
            match self.objects[cur].support {
                Support::Object(k) if k == base => return true,
                Support::Object(k) => cur = k,
                _ => return false,
            }
        }
        false
    }

    fn shift(&mut self, i: usize, delta: Vector3<f64>) {
        for j in std::iter::once(i).chain(self.dependents(i)) {
            self.objects[j].position += delta;
        }
    }

    /// Apply one keyframe action: move, then open or close the gripper.
    pub fn step(&mut self, action: &Action) {
        self.move_gripper(action.position, action.orientation);
        self.set_gripper(action.gripper);
    }

    pub fn move_gripper(&mut self, position: Vector3<f64>, orientation: UnitQuaternion<f64>) {
        match self.held {
            Held::Object(i) => {
                let delta = position - self.gripper.position;
                self.shift(i, delta);
            }
            Held::Handle(level) => {
                let cab = self.cabinet.as_mut().expect("holding a handle implies a cabinet");
                let before = cab.open[level];
                cab.open[level] = cab.open_for_handle_y(position.y);
                let dy = -(cab.open[level] - before) * cab.model.params().travel;
                let inside: Vec<usize> = (0..self.objects.len())
                    .filter(|&j| self.objects[j].support == Support::Drawer(level))
                    .collect();
                for j in inside {
                    self.shift(j, Vector3::new(0.0, dy, 0.0));
                }
            }
            Held::Nothing => {}
        }
        self.gripper.position = position;
        self.gripper.orientation = orientation;
    }

    pub fn set_gripper(&mut self, state: Gripper) {
        if state == self.gripper.gripper {
            return;
        }
        self.gripper.gripper = state;
        match state {
            Gripper::Closed => self.grasp(),
            Gripper::Open => self.release(),
        }
    }

    fn grasp(&mut self) {
        let p = self.gripper.position;
        let mut best: Option<(f64, Held)> = None;
        let mut consider = |d: f64, h: Held| {
            if d <= self.dynamics.grasp_radius && best.is_none_or(|(b, _)| d < b) {
                best = Some((d, h));
            }
        };
        for (i, o) in self.objects.iter().enumerate() {
            consider((o.grasp_point() - p).norm(), Held::Object(i));
        }
        if let Some(c) = &self.cabinet {
            for l in 0..c.open.len() {
                consider((c.handle(l) - p).norm(), Held::Handle(l));
            }
        }
        if let Some((_, h)) = best {
            self.held = h;
            if let Held::Object(i) = h {
                self.objects[i].support = Support::Gripper;
            }
        }
    }

    fn release(&mut self) {
        let held = std::mem::replace(&mut self.held, Held::Nothing);
        let Held::Object(i) = held else {
            return;
        };
        let item = &self.objects[i];
        let (xy, bottom) = (item.position.xy(), item.position.z);
        let carried = self.dependents(i);
        let mut support = (0.0, Support::Table);
        let mut offer = |z: f64, s: Support| {
            if z <= bottom + 1e-9 && z > support.0 {
                support = (z, s);
            }
        };
        for (j, o) in self.objects.iter().enumerate() {
            if j == i || carried.contains(&j) || !o.kind.shape.is_support() {
                continue;
            }
            if (o.position.xy() - xy).norm() <= self.dynamics.place_tolerance {
                offer(o.surface_z(), Support::Object(j));
            }
        }
        if let Some(c) = &self.cabinet {
            for l in 0..c.open.len() {
                let (lo, hi) = c.exposed(l);
                if (lo.x..=hi.x).contains(&xy.x) && (lo.y..=hi.y).contains(&xy.y) {
                    offer(c.floor_z(l), Support::Drawer(l));
                }
            }
        }
        let (z, s) = support;
        self.shift(i, Vector3::new(0.0, 0.0, z - bottom));
        self.objects[i].support = s;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scene_with(kind: ObjectKind, at: Vector3<f64>) -> Scene {
        let mut s = Scene::new(WorkspaceBounds::default(), DynamicsParams::default());
        s.objects.push(SceneObject {
            kind,
            position: at,
            yaw: 0.0,
            support: Support::Table,
        });
        s
    }

    fn block(c: Color) -> ObjectKind {
        ObjectKind::new(c, Shape::Block)
    }

    #[test]
    fn grasp_within_radius_attaches() {
        let mut s = scene_with(block(Color::Red), Vector3::new(0.1, 0.0, 0.0));
        let g = s.objects[0].grasp_point();
        s.step(&Action::new(g + Vector3::new(0.001, 0.0, 0.0), top_down(0.0), Gripper::Closed));
        assert_eq!(s.held, Held::Object(0));
        s.step(&Action::new(g + Vector3::new(0.0, 0.0, 0.15), top_down(0.0), Gripper::Closed));
        assert!((s.objects[0].grasp_point() - (g + Vector3::new(-0.001, 0.0, 0.15))).norm() < 1e-12);
    }

    #[test]
    fn grasp_far_away_is_a_no_op() {
        let mut s = scene_with(block(Color::Red), Vector3::new(0.1, 0.0, 0.0));
        let g = s.objects[0].grasp_point();
        s.step(&Action::new(g + Vector3::new(0.1, 0.0, 0.0), top_down(0.0), Gripper::Closed));
        assert_eq!(s.held, Held::Nothing);
        assert_eq!(s.objects[0].position, Vector3::new(0.1, 0.0, 0.0));
    }

    #[test]
    fn release_over_cup_lands_inside() {
        let mut s = scene_with(block(Color::Red), Vector3::new(0.1, 0.0, 0.0));
        s.objects.push(SceneObject {
            kind: ObjectKind::new(Color::Blue, Shape::Cup),
            position: Vector3::new(-0.1, 0.0, 0.0),
            yaw: 0.0,
            support: Support::Table,
        });
        s.step(&Action::new(s.objects[0].grasp_point(), top_down(0.0), Gripper::Closed));
        s.step(&Action::new(Vector3::new(-0.09, 0.01, 0.2), top_down(0.0), Gripper::Closed));
        s.step(&Action::new(Vector3::new(-0.09, 0.01, 0.2), top_down(0.0), Gripper::Open));
        assert_eq!(s.objects[0].support, Support::Object(1));
        assert!((s.objects[0].position.z - CUP_FLOOR).abs() < 1e-12);
        // outside the tolerance it falls to the table
        s.step(&Action::new(s.objects[0].grasp_point(), top_down(0.0), Gripper::Closed));
        s.step(&Action::new(Vector3::new(-0.1, 0.1, 0.2), top_down(0.0), Gripper::Open));
        assert_eq!(s.objects[0].support, Support::Table);
        assert_eq!(s.objects[0].position.z, 0.0);
    }

    #[test]
    fn pulling_handle_opens_drawer_and_moves_contents() {
        let mut s = Scene::new(WorkspaceBounds::default(), DynamicsParams::default());
        s.cabinet = Some(Cabinet::new(CabinetModel::A, Vector2::new(0.0, 0.22)));
        let c = s.cabinet.clone().unwrap();
        let h = c.handle(2);
        s.step(&Action::new(h, facing_cabinet(), Gripper::Closed));
        assert_eq!(s.held, Held::Handle(2));
        let full = c.handle_at(2, 1.0);
        s.step(&Action::new(full, facing_cabinet(), Gripper::Closed));
        assert!((s.cabinet.as_ref().unwrap().open[2] - 1.0).abs() < 1e-12);
        assert_eq!(s.cabinet.as_ref().unwrap().handle(2), full);
        // half way back
        s.step(&Action::new(c.handle_at(2, 0.5), facing_cabinet(), Gripper::Closed));
        assert!((s.cabinet.as_ref().unwrap().open[2] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn star_and_moon_footprints() {
        let star = Shape::Star.footprint();
        assert!(star.contains(Vector2::new(0.0, 0.027)));
        assert!(star.contains(Vector2::zeros()));
        assert!(!star.contains(Vector2::new(0.0, -0.027)));
        let moon = Shape::Moon.footprint();
        assert!(moon.contains(Vector2::new(-0.02, 0.0)));
        assert!(!moon.contains(Vector2::new(0.01, 0.0)));
    }

    #[test]
    fn object_names_roundtrip() {
        for c in Color::ALL {
            for s in Shape::ALL {
                let k = ObjectKind::new(c, s);
                assert_eq!(k.name().parse::<ObjectKind>().unwrap(), k);
            }
        }
        assert!("mauve block".parse::<ObjectKind>().is_err());
    }

    #[test]
    fn level_names() {
        assert_eq!(CabinetModel::A.level_index("middle"), Some(1));
        assert_eq!(CabinetModel::B.level_index("top"), Some(3));
        assert_eq!(CabinetModel::B.level_index("middle"), None);
    }
}
