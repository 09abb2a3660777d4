//! Independent reference implementations used as test oracles. Nothing here
//! calls into the library's projection or decoding code.
#![allow(dead_code)]

use c2f_core::geometry::{PointCloud, WorkspaceBounds};
use nalgebra::Vector3;
use rand::Rng;

pub struct OracleView {
    pub occupancy: Vec<bool>,
    pub depth: Vec<f64>,
    pub xyz: Vec<[f64; 3]>,
    pub rgb: Vec<[f64; 3]>,
}

/// `(column coordinate, row coordinate, depth)` of `p` in view `view`
/// (0 front, 1 left, 2 top), written out per view.
pub fn view_coords(view: usize, p: &Vector3<f64>, b: &WorkspaceBounds, r: usize) -> (f64, f64, f64) {
    let r = r as f64;
    match view {
        // columns +x, rows -z, depth +y
        0 => (
            (p.x - b.min.x) / (b.max.x - b.min.x) * r,
            (-p.z - -b.max.z) / (-b.min.z - -b.max.z) * r,
            p.y - b.min.y,
        ),
        // columns -y, rows -z, depth +x
        1 => (
            (-p.y - -b.max.y) / (-b.min.y - -b.max.y) * r,
            (-p.z - -b.max.z) / (-b.min.z - -b.max.z) * r,
            p.x - b.min.x,
        ),
        // columns +x, rows -y, depth -z
        _ => (
            (p.x - b.min.x) / (b.max.x - b.min.x) * r,
            (-p.y - -b.max.y) / (-b.min.y - -b.max.y) * r,
            -p.z - -b.max.z,
        ),
    }
}

pub fn pixel_of(view: usize, p: &Vector3<f64>, b: &WorkspaceBounds, r: usize) -> (usize, usize) {
    let (x, y, _) = view_coords(view, p, b, r);
    ((x.floor() as usize).min(r - 1), (y.floor() as usize).min(r - 1))
}

pub fn inside(p: &Vector3<f64>, b: &WorkspaceBounds) -> bool {
    (0..3).all(|i| b.min[i] <= p[i] && p[i] <= b.max[i])
}

/// Loop over points, keep the smallest depth per pixel (first index wins
/// ties).
pub fn rasterize(cloud: &PointCloud, b: &WorkspaceBounds, r: usize) -> [OracleView; 3] {
    std::array::from_fn(|view| {
        let mut out = OracleView {
            occupancy: vec![false; r * r],
            depth: vec![f64::INFINITY; r * r],
            xyz: vec![[f64::NAN; 3]; r * r],
            rgb: vec![[0.0; 3]; r * r],
        };
        for i in 0..cloud.len() {
            let p = cloud.points[i];
            if !cloud.valid[i] || !inside(&p, b) {
                continue;
            }
            let (u, v) = pixel_of(view, &p, b, r);
            let (_, _, d) = view_coords(view, &p, b, r);
            let k = v * r + u;
            if d < out.depth[k] {
                out.occupancy[k] = true;
                out.depth[k] = d;
                out.xyz[k] = [p.x, p.y, p.z];
                out.rgb[k] = cloud.colors[i];
            }
        }
        out
    })
}

pub fn random_point(rng: &mut impl Rng, b: &WorkspaceBounds) -> Vector3<f64> {
    Vector3::from_fn(|i, _| rng.random_range(b.min[i]..=b.max[i]))
}

/// Random cloud; some points are snapped onto a coarse lattice so that
/// pixel collisions and equal depths actually occur.
pub fn random_cloud(rng: &mut impl Rng, b: &WorkspaceBounds, n: usize) -> PointCloud {
    let mut cloud = PointCloud::with_capacity(n);
    for _ in 0..n {
        let mut p = random_point(rng, b);
        if rng.random_bool(0.3) {
            p = p.map(|x| (x * 20.0).round() / 20.0);
            p = Vector3::from_fn(|i, _| p[i].clamp(b.min[i], b.max[i]));
        }
        let valid = rng.random_bool(0.95);
        let outside = rng.random_bool(0.05);
        if outside {
            p.x = b.max.x + 0.1;
        }
        cloud.push(p, [rng.random(), rng.random(), rng.random()], valid);
    }
    cloud
}

/// Unnormalized isotropic Gaussian in continuous pixel coordinates, the
/// same target shape the library renders, evaluated directly.
pub fn gaussian_score(view: usize, g: &Vector3<f64>, c: &Vector3<f64>, b: &WorkspaceBounds, r: usize, sigma: f64) -> f64 {
    let (gx, gy, _) = view_coords(view, g, b, r);
    let (cx, cy, _) = view_coords(view, c, b, r);
    let d2 = (gx - cx).powi(2) + (gy - cy).powi(2);
    (-d2 / (2.0 * sigma * sigma)).exp()
}

/// Index of the best candidate under exhaustive direct scoring.
pub fn exhaustive_decode(g: &Vector3<f64>, candidates: &[Vector3<f64>], b: &WorkspaceBounds, r: usize, sigma: f64) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, c) in candidates.iter().enumerate() {
        let s: f64 = (0..3).map(|v| gaussian_score(v, g, c, b, r, sigma)).sum();
        if s > best.1 {
            best = (i, s);
        }
    }
    best.0
}

/// Axis-aligned grid with spacing `step` covering the box.
pub fn grid(b: &WorkspaceBounds, step: f64) -> Vec<Vector3<f64>> {
    let n: Vec<usize> = (0..3).map(|i| ((b.max[i] - b.min[i]) / step).floor() as usize + 1).collect();
    let mut out = Vec::with_capacity(n[0] * n[1] * n[2]);
    for k in 0..n[2] {
        for j in 0..n[1] {
            for i in 0..n[0] {
                out.push(b.min + Vector3::new(i as f64, j as f64, k as f64) * step);
            }
        }
    }
    out
}
