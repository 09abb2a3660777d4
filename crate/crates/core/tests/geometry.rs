mod support;

use c2f_core::geometry::{
    crop_zoom, pixel_to_world, project_canonical, world_to_pixel, GeometryError, PointCloud, ViewPose, WorkspaceBounds,
};
use nalgebra::Vector3;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn bits(x: [f64; 3]) -> [u64; 3] {
    x.map(f64::to_bits)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn projection_matches_brute_force_rasterizer(seed in any::<u64>(), n in 1usize..10_000, r in prop::sample::select(vec![8usize, 16, 33, 64])) {
        let b = WorkspaceBounds::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cloud = support::random_cloud(&mut rng, &b, n);
        let oracle = support::rasterize(&cloud, &b, r);
        match project_canonical(&cloud, &b, r) {
            Err(GeometryError::EmptyScene) => prop_assert!(oracle.iter().all(|v| v.occupancy.iter().all(|o| !o))),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
            Ok(views) => {
                for (view, o) in views.iter().zip(&oracle) {
                    prop_assert_eq!(&view.occupancy, &o.occupancy);
                    for k in 0..r * r {
                        prop_assert_eq!(bits(view.world_xyz[k]), bits(o.xyz[k]));
                        if o.occupancy[k] {
                            prop_assert_eq!(view.depth[k].to_bits(), o.depth[k].to_bits());
                            prop_assert_eq!(bits(view.rgb[k]), bits(o.rgb[k]));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn occupied_pixels_roundtrip_exactly(seed in any::<u64>(), n in 1usize..3_000) {
        let b = WorkspaceBounds::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cloud = support::random_cloud(&mut rng, &b, n);
        let Ok(views) = project_canonical(&cloud, &b, 64) else { return Ok(()) };
        for (vi, view) in views.iter().enumerate() {
            for (u, v) in view.occupied_pixels() {
                let p = pixel_to_world(view, u, v).unwrap().unwrap();
                prop_assert_eq!(world_to_pixel(&view.pose, &p), Some((u, v)));
                prop_assert_eq!(support::pixel_of(vi, &p, &b, 64), (u, v));
                prop_assert!(view.depth[v * 64 + u].is_finite() && view.depth[v * 64 + u] >= 0.0);
            }
            for k in 0..64 * 64 {
                if !view.occupancy[k] {
                    prop_assert_eq!(pixel_to_world(view, k % 64, k / 64).unwrap(), None);
                }
            }
        }
        // a point kept in two views stores the same coordinates in both
        let front: std::collections::HashSet<[u64; 3]> = views.views[0].occupied_pixels()
            .map(|(u, v)| bits(views.views[0].world_xyz[v * 64 + u])).collect();
        for (u, v) in views.views[2].occupied_pixels() {
            let x = bits(views.views[2].world_xyz[v * 64 + u]);
            if front.contains(&x) {
                let p = Vector3::from(views.views[2].world_xyz[v * 64 + u]);
                let (fu, fv) = world_to_pixel(&views.views[0].pose, &p).unwrap();
                prop_assert_eq!(bits(views.views[0].world_xyz[fv * 64 + fu]), x);
            }
        }
    }

    #[test]
    fn nested_crops_show_subsets(seed in any::<u64>(), inner in 0.05f64..0.2, outer_extra in 0.0f64..0.2) {
        let b = WorkspaceBounds::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cloud = support::random_cloud(&mut rng, &b, 4000);
        let center = support::random_point(&mut rng, &b);
        let (Ok(a), Ok(big)) = (crop_zoom(&cloud, &center, inner, 32), crop_zoom(&cloud, &center, inner + outer_extra, 32)) else {
            return Ok(());
        };
        let a_inside = cloud.filter_to_bounds(&a.bounds());
        let b_inside = cloud.filter_to_bounds(&big.bounds());
        let outer: std::collections::HashSet<[u64; 3]> = b_inside.points.iter().map(|p| bits((*p).into())).collect();
        prop_assert!(a_inside.points.iter().all(|p| outer.contains(&bits((*p).into()))));
        for view in a.iter() {
            for (u, v) in view.occupied_pixels() {
                prop_assert!(outer.contains(&bits(view.world_xyz[v * 32 + u])));
            }
        }
    }

    #[test]
    fn projection_ignores_point_order(seed in any::<u64>(), n in 1usize..2000) {
        let b = WorkspaceBounds::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<Vector3<f64>> = (0..n).map(|_| support::random_point(&mut rng, &b)).collect();
        let cloud = PointCloud::from_points(pts, vec![[0.5; 3]; n]);
        let mut order: Vec<usize> = (0..n).collect();
        use rand::seq::SliceRandom;
        order.shuffle(&mut rng);
        let a = project_canonical(&cloud, &b, 32).unwrap();
        let p = project_canonical(&cloud.permuted(&order), &b, 32).unwrap();
        prop_assert_eq!(format!("{a:?}"), format!("{p:?}"));
    }
}

#[test]
fn crop_keeps_exactly_the_points_inside() {
    let b = WorkspaceBounds::default();
    let center = Vector3::new(0.05, -0.02, 0.2);
    let side = 0.1;
    let mut pts = Vec::new();
    // ten points spread on distinct rows, columns and depths
    for i in 0..10 {
        let t = i as f64 / 10.0 - 0.45;
        pts.push(center + Vector3::new(t * side, -t * side * 0.9, t * side * 0.8));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    while pts.len() < 110 {
        let p = support::random_point(&mut rng, &b);
        if (p - center).amax() > side / 2.0 + 1e-9 {
            pts.push(p);
        }
    }
    let cloud = PointCloud::from_points(pts.clone(), vec![[1.0; 3]; pts.len()]);
    let views = crop_zoom(&cloud, &center, side, 64).unwrap();
    let mut seen = std::collections::BTreeSet::new();
    for view in views.iter() {
        for (u, v) in view.occupied_pixels() {
            seen.insert(bits(view.world_xyz[v * 64 + u]));
        }
    }
    let expected: std::collections::BTreeSet<_> = pts[..10].iter().map(|p| bits((*p).into())).collect();
    assert_eq!(seen, expected);
    for pose in ViewPose::all(views.bounds(), 64) {
        assert_eq!(pose.resolution, 64);
    }
}
