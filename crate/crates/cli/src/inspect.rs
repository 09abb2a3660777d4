use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use c2f_core::bench::EvalReport;
use c2f_core::format::{load_views, TensorFile};
use c2f_core::geometry::{crop_views, world_to_pixel, CanonicalView, PointCloud, ViewSet};
use c2f_core::heatmap::{render_targets, Heatmap};
use c2f_core::trajectory::store::{read_samples, DatasetManifest};
use c2f_predictor::{load_checkpoint, TrainReport};
use clap::Args;
use image::{Rgb, RgbImage};
use nalgebra::Vector3;

use crate::config::Config;
use crate::CliError;

#[derive(Debug, Args)]
pub struct InspectArgs {
    pub path: PathBuf,
    /// Where view PNGs go; defaults to <out>/inspect/<file stem>.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// World keypoint "x,y,z": overlay its target heatmap on views and mark
    /// its pixel.
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
    pub keypoint: Option<Vector3<f64>>,
    /// Overlay this checkpoint's predicted heatmaps instead. Views at another
    /// resolution are first cropped around --keypoint.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, default_value = "")]
    pub instruction: String,
    /// Gripper input for the prediction: 1 closed, 0 open.
    #[arg(long, default_value_t = 0.0)]
    pub gripper: f64,
}

fn parse_vec3(s: &str) -> Result<Vector3<f64>, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [x, y, z] if parts.iter().all(|v| v.is_finite()) => Ok(Vector3::new(x, y, z)),
        _ => Err(format!("expected three finite numbers \"x,y,z\", got {s:?}")),
    }
}

fn data_err(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

pub fn inspect(config: &Config, args: InspectArgs) -> Result<(), CliError> {
    let path = &args.path;
    if !path.is_file() {
        return Err(CliError::Data(format!("no file at {}", path.display())));
    }
    let text = if path.extension().is_some_and(|e| e == "json") {
        inspect_json(path)?
    } else {
        let kind = TensorFile::peek_kind(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        match kind.as_str() {
            "views" => inspect_views(config, &args)?,
            "checkpoint" => inspect_checkpoint(path)?,
            "samples" => inspect_samples(path)?,
            other => return Err(CliError::Data(format!("{}: cannot inspect {other:?} files", path.display()))),
        }
    };
    print!("{text}");
    Ok(())
}

fn table(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(String::len).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for r in rows {
        let line: Vec<String> = r.iter().enumerate().map(|(c, s)| format!("{s:<w$}", w = widths[c])).collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
    }
    out
}

fn inspect_json(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_slice(&bytes).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let has = |k: &str| value.get(k).is_some();
    if has("levels") && has("episodes") {
        let r: EvalReport = serde_json::from_value(value).map_err(data_err)?;
        return Ok(r.render_table());
    }
    if has("final_train") {
        let r: TrainReport = serde_json::from_value(value).map_err(data_err)?;
        let mut rows = vec![vec!["epoch".into(), "steps".into(), "loss".into(), "heatmap".into(), "rotation".into(), "gripper".into()]];
        for e in &r.epochs {
            let l = &e.loss;
            rows.push(vec![
                e.epoch.to_string(),
                e.steps.to_string(),
                format!("{:.4}", l.total),
                format!("{:.4}", l.heatmap),
                format!("{:.4}", l.rotation),
                format!("{:.4}", l.gripper),
            ]);
        }
        let mut out = format!(
            "train report: {} parameters, {} train / {} held-out / {} skipped samples\n",
            r.parameters, r.train_samples, r.holdout_samples, r.skipped_samples
        );
        out.push_str(&table(&rows));
        for (name, s) in [("train", &r.final_train), ("held-out", &r.final_holdout)] {
            let _ = writeln!(
                out,
                "{name}: pixel error {:.3}, rotation acc {:.3}, gripper acc {:.3}",
                s.mean_pixel_error, s.rotation_accuracy, s.gripper_accuracy
            );
        }
        return Ok(out);
    }
    if has("total_samples") && has("files") {
        let m: DatasetManifest = serde_json::from_value(value).map_err(data_err)?;
        let mut rows = vec![vec!["task".to_string(), "samples".to_string()]];
        rows.extend(m.samples_per_task.iter().map(|(t, n)| vec![t.clone(), n.to_string()]));
        let mut out = format!(
            "dataset: {} samples in {} files, {} object-position records\n",
            m.total_samples,
            m.files.len(),
            m.object_position_records
        );
        out.push_str(&table(&rows));
        return Ok(out);
    }
    Err(CliError::Data(format!("{}: unrecognized JSON document", path.display())))
}

fn inspect_checkpoint(path: &Path) -> Result<String, CliError> {
    let (predictor, step) = load_checkpoint(path).map_err(data_err)?;
    let c = &predictor.config;
    let mut out = format!(
        "checkpoint: step {step}, {} parameters\nmodel: resolution {}, patch {}, dim {}, layers {}, heads {}, rotation bins {}\n",
        predictor.params.count(),
        c.resolution,
        c.patch,
        c.dim,
        c.layers,
        c.heads,
        c.rotation_bins
    );
    let mut rows = vec![vec!["tensor".to_string(), "shape".to_string(), "mean |w|".to_string()]];
    for (name, t) in predictor.params.tensors() {
        let mean = t.iter().map(|x| x.abs()).sum::<f64>() / t.len().max(1) as f64;
        rows.push(vec![name.to_string(), format!("{}x{}", t.nrows(), t.ncols()), format!("{mean:.5}")]);
    }
    out.push_str(&table(&rows));
    Ok(out)
}

fn inspect_samples(path: &Path) -> Result<String, CliError> {
    let samples = read_samples(path).map_err(data_err)?;
    let mut rows = vec![["#", "obs", "target", "subtask", "gripper", "points", "keypoint", "step"].map(String::from).to_vec()];
    for (i, s) in samples.iter().enumerate() {
        let t = &s.sample;
        let k = t.keypoint;
        rows.push(vec![
            i.to_string(),
            t.obs_index.to_string(),
            t.target_index.to_string(),
            t.subtask.to_string(),
            format!("{:?}", t.gripper).to_lowercase(),
            s.cloud.len().to_string(),
            format!("({:.3}, {:.3}, {:.3})", k.x, k.y, k.z),
            t.target_step.clone(),
        ]);
    }
    let mut out = format!("{} samples\n", samples.len());
    out.push_str(&table(&rows));
    Ok(out)
}

const OVERLAY: [f64; 3] = [1.0, 0.1, 0.1];
const ARGMAX_MARK: [u8; 3] = [0, 255, 0];
const KEYPOINT_MARK: [u8; 3] = [0, 128, 255];

fn to_u8(x: f64) -> u8 {
    (x.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn render(view: &CanonicalView, heat: Option<&Heatmap>, keypoint: Option<(usize, usize)>) -> RgbImage {
    let r = view.resolution();
    let peak = heat.map_or(0.0, |h| h.values.iter().copied().fold(0.0, f64::max));
    let mut img = RgbImage::new(r as u32, r as u32);
    for i in 0..r * r {
        let base = view.rgb[i];
        let a = match heat {
            Some(h) if peak > 0.0 => 0.75 * h.values[i] / peak,
            _ => 0.0,
        };
        let px: [u8; 3] = std::array::from_fn(|c| to_u8((1.0 - a) * base[c] + a * OVERLAY[c]));
        img.put_pixel((i % r) as u32, (i / r) as u32, Rgb(px));
    }
    if let Some(h) = heat {
        let (u, v) = h.argmax();
        img.put_pixel(u as u32, v as u32, Rgb(ARGMAX_MARK));
    }
    if let Some((u, v)) = keypoint {
        img.put_pixel(u as u32, v as u32, Rgb(KEYPOINT_MARK));
    }
    img
}

/// Every occupied pixel's point, as a cloud.
fn views_cloud(views: &ViewSet) -> PointCloud {
    let mut cloud = PointCloud::default();
    for view in views.iter() {
        for (k, occupied) in view.occupancy.iter().enumerate() {
            if *occupied {
                cloud.push(Vector3::from(view.world_xyz[k]), view.rgb[k], true);
            }
        }
    }
    cloud
}

fn inspect_views(config: &Config, args: &InspectArgs) -> Result<String, CliError> {
    let mut views: ViewSet = load_views(&args.path).map_err(data_err)?;
    if let Some(k) = args.keypoint {
        if !views.bounds().contains(&k) {
            return Err(CliError::Usage(format!("keypoint {k:?} lies outside the views' bounds")));
        }
    }
    let heat: Option<[Heatmap; 3]> = match (&args.checkpoint, args.keypoint) {
        (Some(ckpt), k) => {
            let (p, _) = load_checkpoint(ckpt).map_err(data_err)?;
            let r = p.config.resolution;
            if views.resolution() != r {
                // predict on the crop around the keypoint, as the executor does
                let Some(k) = k else {
                    return Err(CliError::Usage(format!(
                        "checkpoint expects {r} px views, file has {} px; pass --keypoint to crop around",
                        views.resolution()
                    )));
                };
                views = crop_views(&views_cloud(&views), &k, config.train.cube_side, r).map_err(data_err)?;
            }
            let pred = p.predict_views(&views, &args.instruction, args.gripper).map_err(data_err)?;
            Some(pred.heatmaps(r))
        }
        (None, Some(k)) => Some(render_targets(&k, &views.poses(), config.model.sigma).map_err(data_err)?),
        (None, None) => None,
    };
    let r = views.resolution();
    let poses = views.poses();
    let stem = args.path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "views".into());
    let out = args.out_dir.clone().unwrap_or_else(|| config.general.out.join("inspect").join(stem));
    std::fs::create_dir_all(&out).map_err(|e| CliError::Data(format!("{}: {e}", out.display())))?;
    let mut rows = vec![["view", "occupied", "depth min", "depth max", "argmax", "keypoint px", "png"].map(String::from).to_vec()];
    for (i, view) in views.iter().enumerate() {
        let kp_px = args.keypoint.and_then(|k| world_to_pixel(&poses[i], &k));
        let h = heat.as_ref().map(|h| &h[i]);
        let name = view.id().name();
        let png = out.join(format!("{name}.png"));
        render(view, h, kp_px).save(&png).map_err(|e| CliError::Data(format!("{}: {e}", png.display())))?;
        let depths = view.depth.iter().zip(&view.occupancy).filter(|(_, o)| **o).map(|(d, _)| *d);
        let (lo, hi) = depths.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), d| (a.min(d), b.max(d)));
        let fmt_px = |p: Option<(usize, usize)>| p.map_or("-".to_string(), |(u, v)| format!("({u}, {v})"));
        let occupied = view.occupancy.iter().filter(|o| **o).count();
        let (lo, hi) = if occupied == 0 { ("-".into(), "-".into()) } else { (format!("{lo:.3}"), format!("{hi:.3}")) };
        rows.push(vec![
            name.into(),
            occupied.to_string(),
            lo,
            hi,
            fmt_px(h.map(Heatmap::argmax)),
            fmt_px(kp_px),
            png.display().to_string(),
        ]);
    }
    let mut text = format!("views: {r} px, bounds {:?} .. {:?}\n", views.bounds().min.as_slice(), views.bounds().max.as_slice());
    text.push_str(&table(&rows));
    Ok(text)
}
