mod support;

use c2f_core::bench::{generate_scene, CameraRig, SceneConfig, Suite};
use c2f_core::geometry::{PointCloud, ViewPose, ViewSet, WorkspaceBounds};
use c2f_core::heatmap::{
    coarse_to_fine_keypoint, decode_keypoint, render_target, render_targets, CoarseToFineConfig, DEFAULT_SIGMA,
};
use c2f_core::rng::stream;
use nalgebra::Vector3;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// 1 cm grid around `g` that contains `g` as a node, clipped to the box.
fn grid_through(g: &Vector3<f64>, b: &WorkspaceBounds, half: i32) -> Vec<Vector3<f64>> {
    let mut out = Vec::new();
    for k in -half..=half {
        for j in -half..=half {
            for i in -half..=half {
                let p = g + Vector3::new(i as f64, j as f64, k as f64) * 0.01;
                if support::inside(&p, b) {
                    out.push(p);
                }
            }
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn targets_sum_to_one_and_peak_at_the_projection(seed in any::<u64>(), r in prop::sample::select(vec![16usize, 32, 64])) {
        let b = WorkspaceBounds::default();
        let g = support::random_point(&mut ChaCha8Rng::seed_from_u64(seed), &b);
        for (vi, pose) in ViewPose::all(b, r).iter().enumerate() {
            let h = render_target(&g, pose, DEFAULT_SIGMA).unwrap();
            prop_assert!((h.sum() - 1.0).abs() < 1e-6);
            prop_assert!(h.values.iter().all(|x| x.is_finite() && *x >= 0.0));
            prop_assert_eq!(h.argmax(), support::pixel_of(vi, &g, &b, r));
        }
    }

    #[test]
    fn decoding_a_target_over_a_cloud_containing_it_returns_it(seed in any::<u64>(), sigma_frac in 0.05f64..1.0) {
        let b = WorkspaceBounds::default();
        let r = 64;
        let sigma = sigma_frac * r as f64 / 8.0;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cloud = support::random_cloud(&mut rng, &b, 500);
        let g = support::random_point(&mut rng, &b);
        let at = rng.random_range(0..cloud.len());
        cloud.points[at] = g;
        cloud.valid[at] = true;
        let poses = ViewPose::all(b, r);
        let hm = render_targets(&g, &poses, sigma).unwrap();
        let kp = decode_keypoint(&hm, &cloud, &poses).unwrap();
        prop_assert_eq!(kp.position, g);
    }

    #[test]
    fn scores_do_not_depend_on_candidate_order(seed in any::<u64>()) {
        let b = WorkspaceBounds::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<Vector3<f64>> = (0..300).map(|_| support::random_point(&mut rng, &b)).collect();
        let cloud = PointCloud::from_points(pts.clone(), vec![[0.0; 3]; 300]);
        let mut order: Vec<usize> = (0..300).collect();
        use rand::seq::SliceRandom;
        order.shuffle(&mut rng);
        let poses = ViewPose::all(b, 32);
        let hm = render_targets(&support::random_point(&mut rng, &b), &poses, 2.0).unwrap();
        let a = decode_keypoint(&hm, &cloud, &poses).unwrap();
        let p = decode_keypoint(&hm, &cloud.permuted(&order), &poses).unwrap();
        prop_assert_eq!(a.position, p.position);
        prop_assert_eq!(a.confidence, p.confidence);
    }
}

#[test]
fn gaussian_targets_decode_within_one_grid_cell() {
    let b = WorkspaceBounds::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let r = 64;
    let poses = ViewPose::all(b, r);
    for _ in 0..200 {
        // keep the grid node off the box edges so the grid surrounds g
        let g = support::random_point(&mut rng, &b).map(|x| x.clamp(-0.25, 0.55));
        let grid = grid_through(&g, &b, 4);
        let cloud = PointCloud::from_points(grid.clone(), vec![[0.0; 3]; grid.len()]);
        let kp = decode_keypoint(&render_targets(&g, &poses, DEFAULT_SIGMA).unwrap(), &cloud, &poses).unwrap();
        let oracle = grid[support::exhaustive_decode(&g, &grid, &b, r, DEFAULT_SIGMA)];
        assert!((kp.position - g).amax() <= 0.01 + 1e-12, "{:?} vs {g:?}", kp.position);
        assert!((kp.position - oracle).amax() <= 0.01 + 1e-12);
    }
}

/// Coarse heatmaps come from a perturbed keypoint at low resolution; the
/// fine stage re-renders the truth inside the crop.
#[test]
fn fine_stage_never_does_worse_than_coarse_on_rendered_scenes() {
    let b = WorkspaceBounds::default();
    let suite = Suite::standard();
    let instances = suite.instances().unwrap();
    let rig = CameraRig::standard(64);
    let noise = Normal::new(0.0, 0.015).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut ok = 0;
    for s in 0..50 {
        let inst = &instances[s % instances.len()];
        let scene = generate_scene(inst, b, &SceneConfig::default(), &mut stream(&["c2f", &s.to_string()])).unwrap();
        let cloud = rig.observe_cloud(&scene).unwrap().filter_to_bounds(&b);
        let g = cloud.points[rng.random_range(0..cloud.len())];
        let off = Vector3::from_fn(|_, _| noise.sample(&mut rng));
        let coarse_poses = ViewPose::all(b, 32);
        let coarse_hm = render_targets(&b.clamp(&(g + off)), &coarse_poses, DEFAULT_SIGMA).unwrap();
        let coarse_only = decode_keypoint(&coarse_hm, &cloud, &coarse_poses).unwrap();
        let fine = move |v: &ViewSet| render_targets(&g, &v.poses(), DEFAULT_SIGMA);
        let out = coarse_to_fine_keypoint(&cloud, &coarse_hm, &coarse_poses, &fine, &CoarseToFineConfig::default()).unwrap();
        assert_eq!(out.coarse, coarse_only);
        if (out.fine.position - g).norm() <= (coarse_only.position - g).norm() {
            ok += 1;
        }
    }
    assert!(ok * 100 >= 95 * 50, "{ok}/50");
}
