use nalgebra::Vector3;

use super::{project_canonical, CanonicalView, GeometryError, PointCloud, ViewPose, ViewSet, WorkspaceBounds};

/// Valid points of `cloud` inside the closed `cube`.
pub fn crop_cloud(cloud: &PointCloud, cube: &WorkspaceBounds) -> PointCloud {
    cloud.filter_to_bounds(cube)
}

/// Re-project the part of `cloud` inside the cube of side `cube_side`
/// around `center`, at the same resolution, over the cube's own bounds.
pub fn crop_zoom(
    cloud: &PointCloud,
    center: &Vector3<f64>,
    cube_side: f64,
    resolution: usize,
) -> Result<ViewSet, GeometryError> {
    let cube = WorkspaceBounds::cube(*center, cube_side)?;
    match project_canonical(cloud, &cube, resolution) {
        Err(GeometryError::EmptyScene) => Err(GeometryError::EmptyCrop {
            center: (*center).into(),
        }),
        other => other,
    }
}

/// Like [`crop_zoom`], but an empty cube yields empty views instead of an
/// error. Useful when the target may sit in free space.
pub fn crop_views(
    cloud: &PointCloud,
    center: &Vector3<f64>,
    cube_side: f64,
    resolution: usize,
) -> Result<ViewSet, GeometryError> {
    match crop_zoom(cloud, center, cube_side, resolution) {
        Err(GeometryError::EmptyCrop { .. }) => {
            let cube = WorkspaceBounds::cube(*center, cube_side)?;
            Ok(ViewSet {
                views: ViewPose::all(cube, resolution).map(CanonicalView::empty),
            })
        }
        other => other,
    }
}
