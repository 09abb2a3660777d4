use nalgebra::Vector3;

use super::WorkspaceBounds;

/// Point cloud in world coordinates with per-point color and validity.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vector3<f64>>,
    pub colors: Vec<[f64; 3]>,
    pub valid: Vec<bool>,
}

impl PointCloud {
    pub fn with_capacity(n: usize) -> Self {
        Self {
            points: Vec::with_capacity(n),
            colors: Vec::with_capacity(n),
            valid: Vec::with_capacity(n),
        }
    }

    /// All-valid cloud from points and colors of equal length.
    pub fn from_points(points: Vec<Vector3<f64>>, colors: Vec<[f64; 3]>) -> Self {
        assert_eq!(points.len(), colors.len(), "points and colors must have equal length");
        let valid = vec![true; points.len()];
        Self { points, colors, valid }
    }

    pub fn push(&mut self, point: Vector3<f64>, color: [f64; 3], valid: bool) {
        self.points.push(point);
        self.colors.push(color);
        self.valid.push(valid);
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    pub fn iter_valid(&self) -> impl Iterator<Item = (&Vector3<f64>, &[f64; 3])> {
        self.points
            .iter()
            .zip(&self.colors)
            .zip(&self.valid)
            .filter(|(_, v)| **v)
            .map(|(pc, _)| pc)
    }

    /// Valid points inside `bounds` (closed), preserving order.
    pub fn filter_to_bounds(&self, bounds: &WorkspaceBounds) -> PointCloud {
        let mut out = PointCloud::default();
        for (p, c) in self.iter_valid() {
            if bounds.contains(p) {
                out.push(*p, *c, true);
            }
        }
        out
    }

    pub fn extend_from(&mut self, other: &PointCloud) {
        self.points.extend_from_slice(&other.points);
        self.colors.extend_from_slice(&other.colors);
        self.valid.extend_from_slice(&other.valid);
    }

    /// Reorder points by `order` (a permutation of `0..len`).
    pub fn permuted(&self, order: &[usize]) -> PointCloud {
        let mut out = PointCloud::with_capacity(order.len());
        for &i in order {
            out.push(self.points[i], self.colors[i], self.valid[i]);
        }
        out
    }

    /// Index of the valid point nearest to `p`.
    pub fn nearest(&self, p: &Vector3<f64>) -> Option<usize> {
        self.points
            .iter()
            .zip(&self.valid)
            .enumerate()
            .filter(|(_, (_, v))| **v)
            .map(|(i, (q, _))| (i, (q - p).norm_squared()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i)
    }
}
