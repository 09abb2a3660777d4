use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SMALL: &str = r#"
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

fn c2f(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_c2f"));
    cmd.args(args).env_remove("C2F_SEED").env_remove("RUST_LOG");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = c2f(args, &[]);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn small_config(dir: &Path) -> PathBuf {
    let p = dir.join("small.toml");
    std::fs::write(&p, SMALL).unwrap();
    p
}

/// Every file under `root` keyed by its relative path.
fn snapshot(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

/// Full pipeline under `root`; returns the snapshot.
fn pipeline(config: &Path, root: &Path, seed: &str, jobs: &str) -> BTreeMap<String, Vec<u8>> {
    let base = |cmd: &str| -> Vec<String> {
        ["--config", config.to_str().unwrap(), "--out", root.to_str().unwrap(), "--seed", seed, "--jobs", jobs, cmd]
            .map(String::from)
            .to_vec()
    };
    let run = |mut a: Vec<String>, extra: &[&str]| {
        a.extend(extra.iter().map(|s| s.to_string()));
        let refs: Vec<&str> = a.iter().map(String::as_str).collect();
        ok(&refs)
    };
    run(base("generate"), &[]);
    run(base("build-dataset"), &[]);
    run(base("train"), &[]);
    let ckpt = root.join("train/checkpoint.c2ft");
    run(base("evaluate"), &["--policy", "oracle"]);
    run(base("evaluate"), &["--policy", "noisy-oracle", "--no-memory"]);
    run(base("evaluate"), &["--policy", "trained", "--checkpoint", ckpt.to_str().unwrap()]);
    let views = root.join("dataset/object_positions/r00000.c2ft");
    run(base("inspect"), &[views.to_str().unwrap(), "--checkpoint", ckpt.to_str().unwrap(), "--instruction", "open the drawer", "--keypoint", "0.0,0.05,0.1"]);
    snapshot(root)
}

#[test]
fn reruns_with_the_same_seed_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let a = pipeline(&cfg, &dir.path().join("a"), "3", "1");
    let b = pipeline(&cfg, &dir.path().join("b"), "3", "0");
    let keys: Vec<&String> = a.keys().collect();
    for expected in [
        "trajectories/generate.json",
        "dataset/manifest.json",
        "train/checkpoint.c2ft",
        "train/report.json",
        "eval/oracle/report.json",
        "eval/trained/table.txt",
        "inspect/r00000/top.png",
    ] {
        assert!(a.contains_key(expected), "{expected} not written; have {keys:?}");
    }
    assert_eq!(keys, b.keys().collect::<Vec<_>>());
    for (k, v) in &a {
        assert!(v == &b[k], "{k} differs between reruns");
    }
    let c = pipeline(&cfg, &dir.path().join("c"), "4", "1");
    assert_ne!(a["train/checkpoint.c2ft"], c["train/checkpoint.c2ft"]);
    assert_ne!(a["eval/noisy-oracle/report.json"], c["eval/noisy-oracle/report.json"]);
}

#[test]
fn missing_trajectory_directory_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope");
    let out = c2f(&["build-dataset", "--traj-dir", missing.to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(2));
    let out = c2f(&["--out", dir.path().to_str().unwrap(), "train"], &[]);
    assert_eq!(out.status.code(), Some(2));
}

fn total_samples(dataset: &Path) -> u64 {
    let m: serde_json::Value = serde_json::from_slice(&std::fs::read(dataset.join("manifest.json")).unwrap()).unwrap();
    m["total_samples"].as_u64().unwrap()
}

#[test]
fn smaller_windows_give_fewer_samples() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let (c, root) = (cfg.to_str().unwrap(), dir.path().to_str().unwrap());
    ok(&["--config", c, "--out", root, "generate"]);
    let d5 = dir.path().join("d5");
    let d0 = dir.path().join("d0");
    ok(&["--config", c, "--out", root, "build-dataset", "--out-dir", d5.to_str().unwrap()]);
    ok(&["--config", c, "--out", root, "build-dataset", "--m", "0", "--out-dir", d0.to_str().unwrap()]);
    let (n5, n0) = (total_samples(&d5), total_samples(&d0));
    assert!(n0 < n5, "m=0 gave {n0}, m=5 gave {n5}");
    // with m = 0 only frame 0 and the keyframes themselves are samples
    let plans = std::fs::read_to_string(d0.join("plans.jsonl")).unwrap();
    let steps: u64 = plans
        .lines()
        .map(|l| {
            let v: serde_json::Value = serde_json::from_str(l).unwrap();
            v["subtasks"].as_array().unwrap().iter().map(|s| s.as_array().unwrap().len() as u64).sum::<u64>()
        })
        .sum();
    assert_eq!(n0, steps);
}

#[test]
fn help_lists_every_config_key() {
    let out = ok(&["--help"]);
    let help = String::from_utf8(out.stdout).unwrap();
    for key in [
        "general.seed",
        "general.out",
        "general.jobs",
        "data.suite",
        "data.m",
        "model.resolution",
        "model.loss_weights.gripper",
        "model.init_seed",
        "train.lr",
        "train.batch_size",
        "train.crop_jitter",
        "eval.episodes",
        "eval.noise_sigma",
        "eval.subtask_scoping",
    ] {
        assert!(help.contains(key), "{key} missing from --help");
    }
    assert!(help.contains("0.0024") && help.contains("192"));
}

#[test]
fn bad_configs_and_arguments_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[train]\nlearning_rate = 1.0\n").unwrap();
    assert_eq!(c2f(&["--config", bad.to_str().unwrap(), "generate"], &[]).status.code(), Some(1));
    assert_eq!(c2f(&["train", "--lr", "0"], &[]).status.code(), Some(1));
    assert_eq!(c2f(&["train", "--lr", "-0.1"], &[]).status.code(), Some(1));
    assert_eq!(c2f(&["evaluate", "--policy", "trained"], &[]).status.code(), Some(1));
    assert_eq!(c2f(&["evaluate", "--level", "l9"], &[]).status.code(), Some(1));
    assert_eq!(c2f(&["frobnicate"], &[]).status.code(), Some(1));
}

#[test]
fn seed_precedence_is_flag_then_env_then_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("seed.toml");
    std::fs::write(&cfg, format!("[general]\nseed = 7\n{SMALL}")).unwrap();
    let seeds = |name: &str, flag: Option<&str>, env: Option<&str>| -> serde_json::Value {
        let out = dir.path().join(name);
        let mut args = vec!["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
        if let Some(f) = flag {
            args.extend(["--seed", f]);
        }
        args.push("generate");
        let envs: Vec<(&str, &str)> = env.map(|e| vec![("C2F_SEED", e)]).unwrap_or_default();
        assert!(c2f(&args, &envs).status.success());
        let m: serde_json::Value =
            serde_json::from_slice(&std::fs::read(out.join("trajectories/generate.json")).unwrap()).unwrap();
        m["seeds"].clone()
    };
    assert_eq!(seeds("a", Some("3"), Some("5")), serde_json::json!([3]));
    assert_eq!(seeds("b", None, Some("5")), serde_json::json!([5]));
    assert_eq!(seeds("c", None, None), serde_json::json!([7]));
}

#[test]
fn inspect_rejects_unknown_files() {
    let dir = tempfile::tempdir().unwrap();
    let junk = dir.path().join("junk.bin");
    std::fs::write(&junk, b"not a tensor file at all").unwrap();
    assert_eq!(c2f(&["inspect", junk.to_str().unwrap()], &[]).status.code(), Some(2));
    let json = dir.path().join("other.json");
    std::fs::write(&json, "{\"hello\": 1}").unwrap();
    assert_eq!(c2f(&["inspect", json.to_str().unwrap()], &[]).status.code(), Some(2));
    let missing = dir.path().join("missing.c2ft");
    assert_eq!(c2f(&["inspect", missing.to_str().unwrap()], &[]).status.code(), Some(2));
}

#[test]
fn inspect_marks_the_keypoint_pixel() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let (c, root) = (cfg.to_str().unwrap(), dir.path().to_str().unwrap());
    ok(&["--config", c, "--out", root, "generate"]);
    ok(&["--config", c, "--out", root, "build-dataset"]);
    let views = dir.path().join("dataset/object_positions/r00000.c2ft");
    let png_dir = dir.path().join("png");
    // a keypoint on pixel centers of the 64 px views (1 cm pixels): no ties
    let out = ok(&[
        "--config",
        c,
        "inspect",
        views.to_str().unwrap(),
        "--keypoint",
        "0.105,-0.055,0.205",
        "--out-dir",
        png_dir.to_str().unwrap(),
    ]);
    let text = String::from_utf8(out.stdout).unwrap();
    // front: u from x, v from z going down; top: u from x, v from y going down
    let front = image::open(png_dir.join("front.png")).unwrap().to_rgb8();
    let top = image::open(png_dir.join("top.png")).unwrap().to_rgb8();
    assert_eq!(front.dimensions(), (64, 64));
    let (u, vf, vt) = (((0.105 + 0.32) / 0.01) as u32, ((0.62 - 0.205) / 0.01) as u32, ((0.32 + 0.055) / 0.01) as u32);
    // the keypoint marker is drawn over the argmax marker
    assert_eq!(front.get_pixel(u, vf).0, [0, 128, 255]);
    assert_eq!(top.get_pixel(u, vt).0, [0, 128, 255]);
    assert!(text.contains(&format!("({u}, {vf})  ({u}, {vf})")), "{text}");
}

#[test]
fn report_level_means_match_recomputation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let (c, root) = (cfg.to_str().unwrap(), dir.path().to_str().unwrap());
    ok(&["--config", c, "--out", root, "evaluate", "--policy", "noisy-oracle", "--no-memory", "--seeds", "3"]);
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("eval/noisy-oracle/report.json")).unwrap()).unwrap();
    let episodes = report["episodes"].as_array().unwrap();
    for level in report["levels"].as_array().unwrap() {
        let name = level["level"].as_str().unwrap();
        let mut rates = Vec::new();
        for seed in 0..3u64 {
            let eps: Vec<_> = episodes
                .iter()
                .filter(|e| e["level"] == name && e["seed"].as_u64() == Some(seed))
                .collect();
            rates.push(eps.iter().filter(|e| e["success"] == true).count() as f64 / eps.len() as f64);
        }
        let mean = rates.iter().sum::<f64>() / 3.0;
        assert!((level["mean"].as_f64().unwrap() - mean).abs() < 1e-12);
        let per_seed: Vec<f64> = level["per_seed"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
        assert_eq!(per_seed, rates);
    }
    let table = std::fs::read_to_string(dir.path().join("eval/noisy-oracle/table.txt")).unwrap();
    assert!(table.starts_with("policy: noisy-oracle"));
}

#[test]
fn divergent_training_exits_with_the_last_good_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let (c, root) = (cfg.to_str().unwrap(), dir.path().to_str().unwrap());
    ok(&["--config", c, "--out", root, "generate"]);
    ok(&["--config", c, "--out", root, "build-dataset"]);
    // a step this large overflows the weights on the first update
    let out = c2f(&["--config", c, "--out", root, "train", "--lr", "1e307"], &[]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("non-finite loss"));
    let ckpt = dir.path().join("train/checkpoint.c2ft");
    let text = String::from_utf8(ok(&["inspect", ckpt.to_str().unwrap()]).stdout).unwrap();
    assert!(text.starts_with("checkpoint: step 1,"), "{text}");
}
