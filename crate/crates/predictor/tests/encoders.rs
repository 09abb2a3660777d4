mod common;

use c2f_core::geometry::{project_canonical, CanonicalView, PointCloud, ViewPose, ViewSet, WorkspaceBounds};
use c2f_core::heatmap::{refine_keypoint, CoarseToFineConfig, Heatmap, HeatmapError};
use c2f_predictor::{
    encode_observation, BagOfWords, DepthPatches, Encoders, FourierPosition, ModelConfig, PatchEncoder, Predictor,
    PredictorError, RgbPatches,
};
use common::{tabletop, tiny_model};
use nalgebra::Vector3;
use ndarray::Array2;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn workspace() -> WorkspaceBounds {
    WorkspaceBounds::new(Vector3::new(-0.25, -0.25, -0.125), Vector3::new(0.25, 0.25, 0.375)).unwrap()
}

#[test]
fn token_counts_follow_patch_grid() {
    let cfg = ModelConfig {
        resolution: 64,
        patch: 8,
        ..Default::default()
    };
    let enc = Encoders::toy(&cfg);
    let cloud = tabletop(Vector3::new(0.0, 0.0, 0.02), 0.04, [0.8, 0.1, 0.1]);
    let views = project_canonical(&cloud, &workspace(), 64).unwrap();
    let f = encode_observation(&views, "pick up the red block", 0.0, &enc, &cfg).unwrap();
    for v in 0..3 {
        assert_eq!(f.rgb[v].nrows(), 64);
        assert_eq!(f.depth[v].nrows(), 64);
        assert_eq!(f.position[v].dim(), (64, 6 * cfg.bands));
    }
    // start token + five words, then one proprio token
    assert_eq!(f.text.len(), 6);
    assert_eq!(f.token_count(), 3 * 64 + 6 + 1);
}

#[test]
fn empty_scene_has_zero_depth_and_position_features() {
    let cfg = tiny_model();
    let enc = Encoders::toy(&cfg);
    let views = ViewSet {
        views: ViewPose::all(workspace(), cfg.resolution).map(CanonicalView::empty),
    };
    let f = encode_observation(&views, "", 1.0, &enc, &cfg).unwrap();
    for v in 0..3 {
        assert!(f.position[v].iter().all(|x| *x == 0.0));
        assert!(f.depth[v].iter().all(|x| *x == 0.0));
        assert!(f.rgb[v].iter().all(|x| *x == 0.0));
    }
    let p = Predictor::new(cfg).unwrap();
    // the position projection then contributes nothing to the tokens
    assert!(f.position[0].dot(&p.params.w_pos).iter().all(|x| *x == 0.0));
}

/// Continuous random points: no two share a depth, so the projection has no
/// ties to break by index.
fn random_cloud(seed: u64, n: usize) -> PointCloud {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = PointCloud::default();
    for _ in 0..n {
        let p = Vector3::new(rng.random_range(-0.25..0.25), rng.random_range(-0.25..0.25), rng.random_range(-0.125..0.375));
        c.push(p, [rng.random(), rng.random(), rng.random()], true);
    }
    c
}

fn lattice_cloud(seed: u64, n: usize) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    use rand::Rng;
    let mut c = PointCloud::default();
    for _ in 0..n {
        // dyadic lattice: exact under translation by dyadic offsets
        let p = Vector3::from_fn(|_, _| rng.random_range(-60..60) as f64 / 256.0) + Vector3::new(0.0, 0.0, 0.125);
        c.push(p, [rng.random(), rng.random(), rng.random()], true);
    }
    c
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn permuting_the_cloud_leaves_features_identical(seed in 0u64..1000, n in 1usize..400) {
        let cfg = tiny_model();
        let enc = Encoders::toy(&cfg);
        let cloud = random_cloud(seed, n);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed + 1));
        let a = project_canonical(&cloud, &workspace(), cfg.resolution).unwrap();
        let b = project_canonical(&cloud.permuted(&order), &workspace(), cfg.resolution).unwrap();
        let fa = encode_observation(&a, "push the button", 0.0, &enc, &cfg).unwrap();
        let fb = encode_observation(&b, "push the button", 0.0, &enc, &cfg).unwrap();
        prop_assert_eq!(fa, fb);
    }

    #[test]
    fn translating_scene_and_bounds_keeps_position_features(
        seed in 0u64..1000,
        n in 1usize..400,
        shift in prop::array::uniform3(-64i32..64),
    ) {
        let cfg = tiny_model();
        let enc = Encoders::toy(&cfg);
        let cloud = lattice_cloud(seed, n);
        let off = Vector3::new(shift[0] as f64, shift[1] as f64, shift[2] as f64) / 128.0;
        let moved = PointCloud::from_points(cloud.points.iter().map(|p| p + off).collect(), cloud.colors.clone());
        let a = project_canonical(&cloud, &workspace(), cfg.resolution).unwrap();
        let b = project_canonical(&moved, &workspace().translated(&off), cfg.resolution).unwrap();
        let fa = encode_observation(&a, "x", 0.0, &enc, &cfg).unwrap();
        let fb = encode_observation(&b, "x", 0.0, &enc, &cfg).unwrap();
        for v in 0..3 {
            let d = (&fa.position[v] - &fb.position[v]).mapv(f64::abs);
            prop_assert!(d.iter().all(|x| *x < 1e-12), "max diff {}", d.iter().copied().fold(0.0, f64::max));
            prop_assert_eq!(&fa.depth[v], &fb.depth[v]);
        }
    }
}

/// Grayscale replicated into three channels: same width as the toy rgb
/// encoder, different features.
struct GrayPatches(usize);

impl PatchEncoder for GrayPatches {
    fn name(&self) -> &str {
        "gray"
    }

    fn patch(&self) -> usize {
        self.0
    }

    fn feature_dim(&self) -> usize {
        3 * self.0 * self.0
    }

    fn encode(&self, view: &CanonicalView) -> Array2<f64> {
        let mut out = RgbPatches { patch: self.0 }.encode(view);
        for mut row in out.rows_mut() {
            for px in row.as_slice_mut().unwrap().chunks_mut(3) {
                let g = (px[0] + px[1] + px[2]) / 3.0;
                px.fill(g);
            }
        }
        out
    }
}

#[test]
fn swapping_an_encoder_with_equal_dims_keeps_every_shape() {
    let cfg = tiny_model();
    let cloud = tabletop(Vector3::new(0.0, 0.0, 0.02), 0.04, [0.8, 0.1, 0.1]);
    let views = project_canonical(&cloud, &workspace(), cfg.resolution).unwrap();
    let toy = Predictor::new(cfg.clone()).unwrap();
    let swapped = Encoders {
        rgb: Box::new(GrayPatches(cfg.patch)),
        depth: Box::new(DepthPatches { patch: cfg.patch }),
        position: Box::new(FourierPosition { patch: cfg.patch, bands: cfg.bands }),
        text: Box::new(BagOfWords { vocab: cfg.vocab, max_words: 4 }),
    };
    let other = Predictor::with_encoders(cfg.clone(), swapped).unwrap();
    let a = toy.predict_views(&views, "open the drawer", 0.0).unwrap();
    let b = other.predict_views(&views, "open the drawer", 0.0).unwrap();
    let fa = toy.encode(&views, "open the drawer", 0.0).unwrap();
    let fb = other.encode(&views, "open the drawer", 0.0).unwrap();
    assert_ne!(fa.rgb, fb.rgb);
    for v in 0..3 {
        assert_eq!(a.heat_logits[v].len(), b.heat_logits[v].len());
    }
    assert_eq!(a.rot_logits.dim(), b.rot_logits.dim());
    let toy_shapes: Vec<_> = toy.params.tensors().into_iter().map(|(n, t)| (n, t.dim())).collect();
    let other_shapes: Vec<_> = other.params.tensors().into_iter().map(|(n, t)| (n, t.dim())).collect();
    assert_eq!(toy_shapes, other_shapes);

    // a mismatched patch size is a configuration error
    let bad = Encoders {
        rgb: Box::new(RgbPatches { patch: 2 }),
        ..Encoders::toy(&cfg)
    };
    assert!(matches!(Predictor::with_encoders(cfg, bad), Err(PredictorError::Config(_))));
}

#[test]
fn predictions_are_reproducible_and_finite() {
    let cfg = tiny_model();
    let cloud = tabletop(Vector3::new(0.0, 0.0, 0.02), 0.04, [0.8, 0.1, 0.1]);
    let views = project_canonical(&cloud, &workspace(), cfg.resolution).unwrap();
    let a = Predictor::new(cfg.clone()).unwrap().predict_views(&views, "open", 1.0).unwrap();
    let b = Predictor::new(cfg).unwrap().predict_views(&views, "open", 1.0).unwrap();
    assert!(a.is_finite());
    assert_eq!(a, b);
    for h in a.heatmaps(8) {
        assert!(h.values.iter().all(|x| *x >= 0.0));
        assert!((h.sum() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn decoded_keypoint_lies_in_the_crop() {
    let p = Predictor::new(ModelConfig::default()).unwrap();
    let cloud = tabletop(Vector3::new(0.02, -0.03, 0.02), 0.04, [0.2, 0.7, 0.2]);
    let config = CoarseToFineConfig {
        cube_side: 0.16,
        resolution: p.config.resolution,
        grid_step: Some(0.01),
        ..Default::default()
    };
    let stage = |v: &ViewSet| -> Result<[Heatmap; 3], HeatmapError> {
        let pred = p.predict_views(v, "grasp the green block", 0.0).map_err(|e| HeatmapError::FineStage(e.to_string()))?;
        Ok(pred.heatmaps(p.config.resolution))
    };
    for center in [
        Vector3::new(0.02, -0.03, 0.04),
        Vector3::new(-0.2, 0.25, 0.3),
        Vector3::new(0.0, 0.0, 0.0),
    ] {
        let r = refine_keypoint(&cloud, &center, &stage, &config).unwrap();
        assert!(r.crop.contains(&r.fine.position), "{:?} outside {:?}", r.fine.position, r.crop);
    }
}
