use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{GeometryError, PointCloud, WorkspaceBounds};

pub const MIN_RESOLUTION: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ViewId {
    Front,
    Left,
    Top,
}

impl ViewId {
    pub const ALL: [ViewId; 3] = [ViewId::Front, ViewId::Left, ViewId::Top];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            ViewId::Front => "front",
            ViewId::Left => "left",
            ViewId::Top => "top",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// A world axis with a direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignedAxis {
    pub axis: Axis,
    pub positive: bool,
}

impl SignedAxis {
    const fn pos(axis: Axis) -> Self {
        Self { axis, positive: true }
    }

    const fn neg(axis: Axis) -> Self {
        Self { axis, positive: false }
    }

    fn index(self) -> usize {
        self.axis as usize
    }

    pub fn to_vector(self) -> Vector3<f64> {
        let mut v = Vector3::zeros();
        v[self.index()] = if self.positive { 1.0 } else { -1.0 };
        v
    }

    /// Signed coordinate of `p` along this axis.
    fn coord(self, p: &Vector3<f64>) -> f64 {
        if self.positive {
            p[self.index()]
        } else {
            -p[self.index()]
        }
    }

    /// Range of `coord` over the box.
    fn range(self, b: &WorkspaceBounds) -> (f64, f64) {
        let i = self.index();
        if self.positive {
            (b.min[i], b.max[i])
        } else {
            (-b.max[i], -b.min[i])
        }
    }
}

/// Orthographic pose of one canonical view over a box: image columns run
/// along `right`, rows along `down`, depth along `forward`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewPose {
    pub id: ViewId,
    pub bounds: WorkspaceBounds,
    pub resolution: usize,
    pub right: SignedAxis,
    pub down: SignedAxis,
    pub forward: SignedAxis,
}

impl ViewPose {
    /// Front looks along +y, left along +x, top along -z.
    pub fn new(id: ViewId, bounds: WorkspaceBounds, resolution: usize) -> Self {
        let (right, down, forward) = match id {
            ViewId::Front => (SignedAxis::pos(Axis::X), SignedAxis::neg(Axis::Z), SignedAxis::pos(Axis::Y)),
            ViewId::Left => (SignedAxis::neg(Axis::Y), SignedAxis::neg(Axis::Z), SignedAxis::pos(Axis::X)),
            ViewId::Top => (SignedAxis::pos(Axis::X), SignedAxis::neg(Axis::Y), SignedAxis::neg(Axis::Z)),
        };
        Self {
            id,
            bounds,
            resolution,
            right,
            down,
            forward,
        }
    }

    pub fn all(bounds: WorkspaceBounds, resolution: usize) -> [ViewPose; 3] {
        ViewId::ALL.map(|id| ViewPose::new(id, bounds, resolution))
    }

    /// Continuous image coordinates in `[0, R]`; pixel `u` spans `[u, u+1)`.
    /// Points outside the box still map, to coordinates outside `[0, R]`.
    pub fn image_coords(&self, p: &Vector3<f64>) -> (f64, f64) {
        let r = self.resolution as f64;
        let (lo_u, hi_u) = self.right.range(&self.bounds);
        let (lo_v, hi_v) = self.down.range(&self.bounds);
        (
            (self.right.coord(p) - lo_u) / (hi_u - lo_u) * r,
            (self.down.coord(p) - lo_v) / (hi_v - lo_v) * r,
        )
    }

    /// Distance of `p` from the near face of the box along the view axis.
    pub fn depth(&self, p: &Vector3<f64>) -> f64 {
        let (lo, _) = self.forward.range(&self.bounds);
        self.forward.coord(p) - lo
    }

    pub fn depth_extent(&self) -> f64 {
        let (lo, hi) = self.forward.range(&self.bounds);
        hi - lo
    }

    /// World coordinates of the center of pixel `(u, v)` along the two image
    /// axes, returned as `(right_axis_value, down_axis_value)` in signed-axis
    /// coordinates. Used to check pixel labels against world positions.
    pub fn pixel_center_coords(&self, u: usize, v: usize) -> (f64, f64) {
        let r = self.resolution as f64;
        let (lo_u, hi_u) = self.right.range(&self.bounds);
        let (lo_v, hi_v) = self.down.range(&self.bounds);
        (
            lo_u + (u as f64 + 0.5) / r * (hi_u - lo_u),
            lo_v + (v as f64 + 0.5) / r * (hi_v - lo_v),
        )
    }

    /// Signed coordinates of `p` along the right and down axes.
    pub fn plane_coords(&self, p: &Vector3<f64>) -> (f64, f64) {
        (self.right.coord(p), self.down.coord(p))
    }

    /// Pixel size along the right and down axes, in meters.
    pub fn pixel_size(&self) -> (f64, f64) {
        let r = self.resolution as f64;
        let (lo_u, hi_u) = self.right.range(&self.bounds);
        let (lo_v, hi_v) = self.down.range(&self.bounds);
        ((hi_u - lo_u) / r, (hi_v - lo_v) / r)
    }
}

/// Integer pixel of `p` in the view, or `None` when `p` lies outside the
/// view's (closed) box. The far face maps onto the last pixel.
pub fn world_to_pixel(pose: &ViewPose, p: &Vector3<f64>) -> Option<(usize, usize)> {
    if !pose.bounds.contains(p) {
        return None;
    }
    let (x, y) = pose.image_coords(p);
    let last = pose.resolution - 1;
    Some(((x.floor() as usize).min(last), (y.floor() as usize).min(last)))
}

/// One orthographic projection of a point cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalView {
    pub pose: ViewPose,
    pub rgb: Vec<[f64; 3]>,
    pub depth: Vec<f64>,
    pub world_xyz: Vec<[f64; 3]>,
    pub occupancy: Vec<bool>,
}

impl CanonicalView {
    pub fn empty(pose: ViewPose) -> Self {
        let n = pose.resolution * pose.resolution;
        Self {
            pose,
            rgb: vec![[0.0; 3]; n],
            depth: vec![pose.bounds.max_extent(); n],
            world_xyz: vec![[f64::NAN; 3]; n],
            occupancy: vec![false; n],
        }
    }

    pub fn id(&self) -> ViewId {
        self.pose.id
    }

    pub fn resolution(&self) -> usize {
        self.pose.resolution
    }

    pub fn occupied_count(&self) -> usize {
        self.occupancy.iter().filter(|o| **o).count()
    }

    /// `(u, v)` of every occupied pixel, row-major.
    pub fn occupied_pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let r = self.resolution();
        self.occupancy
            .iter()
            .enumerate()
            .filter(|(_, o)| **o)
            .map(move |(i, _)| (i % r, i / r))
    }
}

/// The front, left and top views of one scene, in that order.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewSet {
    pub views: [CanonicalView; 3],
}

impl ViewSet {
    pub fn get(&self, id: ViewId) -> &CanonicalView {
        &self.views[id.index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = &CanonicalView> {
        self.views.iter()
    }

    pub fn poses(&self) -> [ViewPose; 3] {
        [self.views[0].pose, self.views[1].pose, self.views[2].pose]
    }

    pub fn bounds(&self) -> WorkspaceBounds {
        self.views[0].pose.bounds
    }

    pub fn resolution(&self) -> usize {
        self.views[0].pose.resolution
    }
}

/// Project the valid in-bounds points of `cloud` into the three canonical
/// views. The nearest point along each view axis wins its pixel; equal
/// depths go to the lowest point index.
pub fn project_canonical(
    cloud: &PointCloud,
    bounds: &WorkspaceBounds,
    resolution: usize,
) -> Result<ViewSet, GeometryError> {
    if resolution < MIN_RESOLUTION {
        return Err(GeometryError::ResolutionTooSmall(resolution));
    }
    let kept: Vec<usize> = (0..cloud.len())
        .filter(|&i| cloud.valid[i] && bounds.contains(&cloud.points[i]))
        .collect();
    if kept.is_empty() {
        return Err(GeometryError::EmptyScene);
    }
    let views = ViewPose::all(*bounds, resolution).map(|pose| rasterize(cloud, &kept, pose));
    Ok(ViewSet { views })
}

fn rasterize(cloud: &PointCloud, kept: &[usize], pose: ViewPose) -> CanonicalView {
    let r = pose.resolution;
    let mut entries: Vec<(usize, f64, usize)> = kept
        .iter()
        .map(|&i| {
            let p = &cloud.points[i];
            // kept points are inside the box, so the pixel always exists
            let (u, v) = world_to_pixel(&pose, p).expect("in-bounds point");
            (v * r + u, pose.depth(p), i)
        })
        .collect();
    entries.sort_unstable_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut view = CanonicalView::empty(pose);
    let mut last_pixel = usize::MAX;
    for (pixel, depth, i) in entries {
        if pixel == last_pixel {
            continue;
        }
        last_pixel = pixel;
        view.occupancy[pixel] = true;
        view.depth[pixel] = depth;
        view.rgb[pixel] = cloud.colors[i];
        view.world_xyz[pixel] = cloud.points[i].into();
    }
    view
}

/// World point stored at pixel `(u, v)`, or `None` for an empty pixel.
pub fn pixel_to_world(
    view: &CanonicalView,
    u: usize,
    v: usize,
) -> Result<Option<Vector3<f64>>, GeometryError> {
    let r = view.resolution();
    if u >= r || v >= r {
        return Err(GeometryError::PixelOutOfRange { u, v, resolution: r });
    }
    let i = v * r + u;
    Ok(view.occupancy[i].then(|| Vector3::from(view.world_xyz[i])))
}
