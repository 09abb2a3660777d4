//! One PASS/FAIL line per acceptance criterion, written straight to stderr
//! so it shows without `--nocapture`.

#[path = "../../core/tests/support/mod.rs"]
mod support;

#[path = "../../predictor/tests/common/mod.rs"]
mod common;

use std::collections::BTreeMap;
use std::io::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use c2f_core::bench::{evaluate, generate_scene, CameraRig, EvalConfig, Level, OracleExecutor, PolicyConfig, SceneConfig, Suite};
use c2f_core::geometry::{pixel_to_world, project_canonical, world_to_pixel, GeometryError, PointCloud, ViewPose, ViewSet, WorkspaceBounds};
use c2f_core::heatmap::{coarse_to_fine_keypoint, decode_keypoint, render_targets, CoarseToFineConfig, DEFAULT_SIGMA};
use c2f_core::rng::stream;
use c2f_core::trajectory::{sample_training_indices, SamplingStrategy, DEFAULT_M};
use c2f_predictor::{prepare_example, ModelConfig, Predictor, Trainer};
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(t: Duration, limit: Duration) -> String {
    format!("{:.1}s (limit {}s)", t.as_secs_f64(), limit.as_secs())
}

fn bits(x: [f64; 3]) -> [u64; 3] {
    x.map(f64::to_bits)
}

fn geometry_oracle() -> Outcome {
    let limit = Duration::from_secs(60);
    let t0 = Instant::now();
    let b = WorkspaceBounds::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut mismatches, mut roundtrips) = (0usize, 0usize);
    let mut largest = 0;
    for s in 0..200 {
        let n = if s % 10 == 0 { 10_000 } else { rng.random_range(1..=10_000) };
        largest = largest.max(n);
        let r = [8, 16, 33, 64][s % 4];
        let cloud = support::random_cloud(&mut rng, &b, n);
        let oracle = support::rasterize(&cloud, &b, r);
        let views = match project_canonical(&cloud, &b, r) {
            Err(GeometryError::EmptyScene) => {
                mismatches += usize::from(oracle.iter().any(|v| v.occupancy.iter().any(|o| *o)));
                continue;
            }
            Err(e) => return Err(e.to_string()),
            Ok(v) => v,
        };
        for (vi, (view, o)) in views.iter().zip(&oracle).enumerate() {
            for k in 0..r * r {
                let same = view.occupancy[k] == o.occupancy[k]
                    && bits(view.world_xyz[k]) == bits(o.xyz[k])
                    && (!o.occupancy[k]
                        || (view.depth[k].to_bits() == o.depth[k].to_bits() && bits(view.rgb[k]) == bits(o.rgb[k])));
                mismatches += usize::from(!same);
            }
            for (u, v) in view.occupied_pixels() {
                let p = pixel_to_world(view, u, v).map_err(|e| e.to_string())?.ok_or("occupied pixel without a point")?;
                let back = world_to_pixel(&view.pose, &p) == Some((u, v)) && support::pixel_of(vi, &p, &b, r) == (u, v);
                roundtrips += usize::from(!back);
            }
        }
    }
    let t = t0.elapsed();
    check(
        mismatches == 0 && roundtrips == 0 && t < limit,
        format!("200 scenes up to {largest} points: {mismatches} pixel mismatches, {roundtrips} roundtrip failures, {}", within(t, limit)),
    )
}

fn grid_through(g: &Vector3<f64>, b: &WorkspaceBounds, half: i32, step: f64) -> Vec<Vector3<f64>> {
    let mut out = Vec::new();
    for k in -half..=half {
        for j in -half..=half {
            for i in -half..=half {
                let p = g + Vector3::new(i as f64, j as f64, k as f64) * step;
                if support::inside(&p, b) {
                    out.push(p);
                }
            }
        }
    }
    out
}

fn keypoint_decode() -> Outcome {
    let limit = Duration::from_secs(30);
    let t0 = Instant::now();
    let b = WorkspaceBounds::default();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let r = 64;
    let step = 0.01;
    let poses = ViewPose::all(b, r);
    let mut worst: f64 = 0.0;
    let mut disagree = 0;
    for _ in 0..200 {
        let g = support::random_point(&mut rng, &b).map(|x| x.clamp(-0.25, 0.55));
        let grid = grid_through(&g, &b, 4, step);
        let cloud = PointCloud::from_points(grid.clone(), vec![[0.0; 3]; grid.len()]);
        let hm = render_targets(&g, &poses, DEFAULT_SIGMA).map_err(|e| e.to_string())?;
        let kp = decode_keypoint(&hm, &cloud, &poses).map_err(|e| e.to_string())?;
        worst = worst.max((kp.position - g).amax());
        let oracle = grid[support::exhaustive_decode(&g, &grid, &b, r, DEFAULT_SIGMA)];
        disagree += usize::from((kp.position - oracle).amax() > step + 1e-12);
    }
    let t = t0.elapsed();
    check(
        worst <= step + 1e-12 && disagree == 0 && t < limit,
        format!("200 scenes: worst error {:.4} m on a {step} m grid, {disagree} off the exhaustive oracle, {}", worst, within(t, limit)),
    )
}

fn coarse_to_fine() -> Outcome {
    let b = WorkspaceBounds::default();
    let instances = Suite::standard().instances().map_err(|e| e.to_string())?;
    let rig = CameraRig::standard(64);
    let noise = Normal::new(0.0, 0.015).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut ok = 0;
    for s in 0..50 {
        let inst = &instances[(7 * s) % instances.len()];
        let scene = generate_scene(inst, b, &SceneConfig::default(), &mut stream(&["acceptance-c2f", &s.to_string()]))
            .map_err(|e| e.to_string())?;
        let cloud = rig.observe_cloud(&scene).map_err(|e| e.to_string())?.filter_to_bounds(&b);
        let g = cloud.points[rng.random_range(0..cloud.len())];
        let off = Vector3::from_fn(|_, _| noise.sample(&mut rng));
        let coarse_poses = ViewPose::all(b, 32);
        let coarse_hm = render_targets(&b.clamp(&(g + off)), &coarse_poses, DEFAULT_SIGMA).map_err(|e| e.to_string())?;
        let coarse_only = decode_keypoint(&coarse_hm, &cloud, &coarse_poses).map_err(|e| e.to_string())?;
        let fine = move |v: &ViewSet| render_targets(&g, &v.poses(), DEFAULT_SIGMA);
        let out = coarse_to_fine_keypoint(&cloud, &coarse_hm, &coarse_poses, &fine, &CoarseToFineConfig::default())
            .map_err(|e| e.to_string())?;
        ok += usize::from((out.fine.position - g).norm() <= (coarse_only.position - g).norm());
    }
    check(ok * 100 >= 95 * 50, format!("fine error <= coarse-only error in {ok}/50 scenes"))
}

/// Independent enumeration of the post-keyframe windows.
fn enumerate_windows(keyframes: &[usize], m: usize) -> BTreeMap<usize, usize> {
    let mut out = BTreeMap::new();
    for t in 0..keyframes[keyframes.len() - 1] {
        let next = keyframes.iter().copied().find(|k| *k > t).unwrap();
        let prev = keyframes.iter().copied().rfind(|k| *k <= t);
        let keep = match prev {
            None => t == 0,
            Some(p) => t - p <= m,
        };
        if keep {
            out.insert(t, next);
        }
    }
    out
}

fn sampling() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut cases = 0;
    let mut total = 0;
    for _ in 0..2000 {
        let k = rng.random_range(1..8);
        let mut kf: Vec<usize> = (0..k).map(|_| rng.random_range(1..60)).collect();
        kf.sort_unstable();
        kf.dedup();
        let m = rng.random_range(0..9);
        let got = sample_training_indices(&kf, SamplingStrategy::PostKeyframe { m });
        let expected: Vec<(usize, usize)> = enumerate_windows(&kf, m).into_iter().collect();
        if got != expected {
            return Err(format!("keyframes {kf:?} m {m}: {got:?} vs {expected:?}"));
        }
        for strategy in [SamplingStrategy::PostKeyframe { m }, SamplingStrategy::EveryN { n: m + 1 }, SamplingStrategy::SymmetricWindow { m }] {
            for (obs, target) in sample_training_indices(&kf, strategy) {
                if obs >= target {
                    return Err(format!("{strategy:?} on {kf:?}: sample {obs} not before {target}"));
                }
            }
        }
        cases += 1;
        total += got.len();
    }
    let default_m = matches!(SamplingStrategy::default(), SamplingStrategy::PostKeyframe { m: 5 }) && DEFAULT_M == 5;
    check(default_m, format!("{cases} keyframe sets, {total} samples match the enumeration, all before their targets, default m = {DEFAULT_M}"))
}

fn gradient_check() -> Outcome {
    let mut p = Predictor::new(common::tiny_model()).map_err(|e| e.to_string())?;
    let block = Vector3::new(0.02, -0.01, 0.02);
    let cloud = common::tabletop(block, 0.04, [0.9, 0.1, 0.1]);
    let kp = block + Vector3::new(0.004, 0.0, 0.03);
    let s = common::sample(kp, "grasp the red block", (0.1, -0.4, 1.2), true);
    let center = kp + Vector3::new(0.01, -0.02, 0.005);
    let mut e = prepare_example(&cloud, &s, &center, 0.16, &p.encoders, &p.config).map_err(|e| e.to_string())?;
    e.features.gripper = 0.3;
    let (checked, worst) = common::gradient_check(&mut p, &e);
    let (name, max) = worst.iter().cloned().fold((String::new(), 0.0), |a, b| if b.1 > a.1 { b } else { a });
    check(
        checked == p.params.count() && max <= 1e-4,
        format!("{checked} parameters in {} tensors, worst relative error {max:.2e} ({name})", worst.len()),
    )
}

fn overfit() -> Outcome {
    let mut p = Predictor::new(ModelConfig::default()).map_err(|e| e.to_string())?;
    let block = Vector3::new(0.03, 0.02, 0.02);
    let cloud = common::tabletop(block, 0.04, [0.1, 0.2, 0.9]);
    let center = Vector3::new(0.03, 0.02, 0.04);
    let kp = center + Vector3::new(0.0025, -0.0125, 0.0075);
    let s = common::sample(kp, "grasp the blue block", (0.0, 0.0, 0.8), true);
    let e = prepare_example(&cloud, &s, &center, 0.16, &p.encoders, &p.config).map_err(|e| e.to_string())?;
    let target = e.target_pixels();
    let mut trainer = Trainer::new(&p.params, &common::fast_train(0.003));
    for step in 1..=500 {
        trainer.step(&mut p, &[&e]).map_err(|e| e.to_string())?;
        let heat = p.predict(&e.features).map_err(|e| e.to_string())?.heatmaps(p.config.resolution);
        if (0..3).all(|v| heat[v].argmax() == target[v]) {
            return Ok(format!("argmax on target in all 3 views after {step} steps"));
        }
    }
    Err("argmax not on target within 500 steps".into())
}

fn oracle_ceiling() -> Outcome {
    let limit = Duration::from_secs(300);
    let t0 = Instant::now();
    let instances: Vec<_> = Suite::standard()
        .instances()
        .map_err(|e| e.to_string())?
        .into_iter()
        .filter(|i| i.level != Level::Train)
        .collect();
    let config = EvalConfig::default();
    let report = evaluate("oracle", &instances, &OracleExecutor { cube_side: 0.16 }, &config);
    let t = t0.elapsed();
    let rates: Vec<String> = Level::EVAL
        .iter()
        .map(|l| report.level(*l).map_or("missing".into(), |s| format!("{} {:.1}%", l.name(), 100.0 * s.mean)))
        .collect();
    let all = Level::EVAL.iter().all(|l| report.level(*l).is_some_and(|s| s.mean == 1.0 && s.per_seed.iter().all(|r| *r == 1.0)));
    let per_variation = report.episodes.len() / instances.len();
    check(
        all && config.episodes == 20 && config.seeds.len() == 5 && per_variation == 100 && t < limit,
        format!(
            "{} ({} x {} seeds per variation, {} episodes), {}",
            rates.join(", "),
            config.episodes,
            config.seeds.len(),
            report.episodes.len(),
            within(t, limit)
        ),
    )
}

const ABLATION_NOISE: f64 = 0.02;

fn l4_ablation() -> Outcome {
    let instances = Suite::standard().instances_at(Level::L4).map_err(|e| e.to_string())?;
    let exec = OracleExecutor { cube_side: 0.16 };
    let run = |policy: PolicyConfig| {
        let config = EvalConfig { policy, ..EvalConfig::default() };
        evaluate("noisy-oracle", &instances, &exec, &config).level(Level::L4).map_or(0.0, |l| l.mean)
    };
    let full = run(PolicyConfig { noise_sigma: ABLATION_NOISE, ..PolicyConfig::default() });
    let mono = run(PolicyConfig::monolithic(ABLATION_NOISE));
    let gap = 100.0 * (full - mono);
    check(
        gap >= 20.0,
        format!("noise {ABLATION_NOISE} m: memory + scoping {:.1}%, monolithic {:.1}%, gap {gap:.1} pp", 100.0 * full, 100.0 * mono),
    )
}

const PIPELINE_CONFIG: &str = r#"
[data]
suite = "mini"
demos_per_variation = 1

[model]
resolution = 16
patch = 4
dim = 8
layers = 1
heads = 2
bands = 2
vocab = 32
max_words = 12
rotation_bins = 12

[train]
epochs = 2
batch_size = 16

[eval]
episodes = 2
seeds = 2
levels = ["l4"]
"#;

fn files(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn cli_run(config: &Path, root: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_c2f"))
        .args(["--config", config.to_str().unwrap(), "--out", root.to_str().unwrap(), "--seed", "11"])
        .args(args)
        .env_remove("C2F_SEED")
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = dir.path().join("config.toml");
    std::fs::write(&config, PIPELINE_CONFIG).map_err(|e| e.to_string())?;
    let commands: [&[&str]; 7] = [
        &["generate"],
        &["build-dataset"],
        &["train"],
        &["evaluate", "--policy", "oracle"],
        &["evaluate", "--policy", "noisy-oracle", "--no-memory", "--no-subtask-scoping"],
        &["evaluate", "--policy", "trained", "--checkpoint", "CKPT"],
        &["inspect", "VIEWS", "--checkpoint", "CKPT", "--instruction", "put the block in the drawer", "--keypoint", "0.0,0.05,0.1"],
    ];
    let mut snaps = Vec::new();
    for run in ["a", "b"] {
        let root = dir.path().join(run);
        let ckpt = root.join("train/checkpoint.c2ft").to_string_lossy().into_owned();
        let views = root.join("dataset/object_positions/r00000.c2ft").to_string_lossy().into_owned();
        for cmd in commands {
            let args: Vec<&str> = cmd
                .iter()
                .map(|a| match *a {
                    "CKPT" => ckpt.as_str(),
                    "VIEWS" => views.as_str(),
                    a => a,
                })
                .collect();
            cli_run(&config, &root, &args)?;
        }
        snaps.push(files(&root));
    }
    let (a, b) = (&snaps[0], &snaps[1]);
    let differing: Vec<&String> = a.keys().filter(|k| b.get(*k) != a.get(*k)).collect();
    let kinds = ["generate.json", "manifest.json", "checkpoint.c2ft", "report.json", ".png"];
    let covered = kinds.iter().all(|k| a.keys().any(|f| f.ends_with(k)));
    check(
        differing.is_empty() && a.len() == b.len() && covered,
        format!("{} commands, {} output files compared byte for byte, differing: {differing:?}", commands.len(), a.len()),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

#[test]
fn acceptance() {
    let criteria: [Criterion; 9] = [
        ("geometry oracle suite", geometry_oracle),
        ("keypoint decode", keypoint_decode),
        ("coarse-to-fine", coarse_to_fine),
        ("sampling", sampling),
        ("gradient check", gradient_check),
        ("overfit", overfit),
        ("oracle ceiling", oracle_ceiling),
        ("L4 ablation", l4_ablation),
        ("determinism", determinism),
    ];
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        let _ = writeln!(std::io::stderr(), "{tag} [{}] {name}: {detail}", i + 1);
        if outcome.is_err() {
            failed.push(*name);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
