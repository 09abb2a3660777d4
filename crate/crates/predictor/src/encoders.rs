//! Feature extractors in front of the learned projections. The model only
//! sees their outputs, so any implementation with matching patch size and
//! feature width can be swapped in.

use c2f_core::geometry::{CanonicalView, ViewSet, WorkspaceBounds};
use ndarray::Array2;

use crate::{ModelConfig, PredictorError};

/// Turns one canonical view into one feature row per patch, row-major over
/// the patch grid.
pub trait PatchEncoder: Send + Sync {
    fn name(&self) -> &str;
    fn patch(&self) -> usize;
    fn feature_dim(&self) -> usize;
    fn encode(&self, view: &CanonicalView) -> Array2<f64>;
}

/// Maps an instruction to token ids below `vocab()`.
pub trait TextEncoder: Send + Sync {
    fn name(&self) -> &str;
    fn vocab(&self) -> usize;
    fn encode(&self, text: &str) -> Vec<usize>;
}

/// Pixel indices of patch `k` in a view of side `r`.
fn patch_pixels(r: usize, p: usize, k: usize) -> impl Iterator<Item = usize> {
    let per_side = r / p;
    let (px, py) = (k % per_side, k / per_side);
    (0..p * p).map(move |j| (py * p + j / p) * r + px * p + j % p)
}

fn patch_rows(view: &CanonicalView, p: usize, width: usize, mut fill: impl FnMut(usize, &mut [f64])) -> Array2<f64> {
    let r = view.resolution();
    let n = (r / p).pow(2);
    let mut out = Array2::zeros((n, width));
    for k in 0..n {
        let mut row = out.row_mut(k);
        let row = row.as_slice_mut().expect("rows of a standard layout array are contiguous");
        for (j, i) in patch_pixels(r, p, k).enumerate() {
            fill(i, &mut row[j * width / (p * p)..(j + 1) * width / (p * p)]);
        }
    }
    out
}

/// Raw colors of each patch, centered on zero. Empty pixels are zero.
#[derive(Debug, Clone, Copy)]
pub struct RgbPatches {
    pub patch: usize,
}

impl PatchEncoder for RgbPatches {
    fn name(&self) -> &str {
        "rgb-patches"
    }

    fn patch(&self) -> usize {
        self.patch
    }

    fn feature_dim(&self) -> usize {
        3 * self.patch * self.patch
    }

    fn encode(&self, view: &CanonicalView) -> Array2<f64> {
        patch_rows(view, self.patch, self.feature_dim(), |i, out| {
            if view.occupancy[i] {
                for c in 0..3 {
                    out[c] = view.rgb[i][c] - 0.5;
                }
            }
        })
    }
}

/// Depth of each pixel as a fraction of the view's depth extent; empty
/// pixels are zero.
#[derive(Debug, Clone, Copy)]
pub struct DepthPatches {
    pub patch: usize,
}

impl PatchEncoder for DepthPatches {
    fn name(&self) -> &str {
        "depth-patches"
    }

    fn patch(&self) -> usize {
        self.patch
    }

    fn feature_dim(&self) -> usize {
        self.patch * self.patch
    }

    fn encode(&self, view: &CanonicalView) -> Array2<f64> {
        let extent = view.pose.depth_extent();
        patch_rows(view, self.patch, self.feature_dim(), |i, out| {
            if view.occupancy[i] {
                out[0] = view.depth[i] / extent;
            }
        })
    }
}

/// Fourier features of one world point, with coordinates mapped to [-1, 1]
/// over `bounds`. Layout per band: sin x, sin y, sin z, cos x, cos y, cos z.
/// Non-finite points embed to zero.
pub fn position_embedding(p: &[f64; 3], bounds: &WorkspaceBounds, bands: usize) -> Vec<f64> {
    let mut out = vec![0.0; 6 * bands];
    if p.iter().any(|x| !x.is_finite()) {
        return out;
    }
    let e = bounds.extent();
    for a in 0..3 {
        let c = 2.0 * (p[a] - bounds.min[a]) / e[a] - 1.0;
        for b in 0..bands {
            let w = (1u64 << b) as f64 * std::f64::consts::PI * c;
            out[6 * b + a] = w.sin();
            out[6 * b + 3 + a] = w.cos();
        }
    }
    out
}

/// Patch mean of the per-pixel position embedding of the `world_xyz`
/// channel, normalized by the view's own bounds.
#[derive(Debug, Clone, Copy)]
pub struct FourierPosition {
    pub patch: usize,
    pub bands: usize,
}

impl PatchEncoder for FourierPosition {
    fn name(&self) -> &str {
        "fourier-position"
    }

    fn patch(&self) -> usize {
        self.patch
    }

    fn feature_dim(&self) -> usize {
        6 * self.bands
    }

    fn encode(&self, view: &CanonicalView) -> Array2<f64> {
        let r = view.resolution();
        let p = self.patch;
        let n = (r / p).pow(2);
        let mut out = Array2::zeros((n, self.feature_dim()));
        let scale = 1.0 / (p * p) as f64;
        for k in 0..n {
            for i in patch_pixels(r, p, k) {
                let e = position_embedding(&view.world_xyz[i], &view.pose.bounds, self.bands);
                for (o, x) in out.row_mut(k).iter_mut().zip(e) {
                    *o += x * scale;
                }
            }
        }
        out
    }
}

/// Hashed bag of words. Id 0 is a start token that is always present, so
/// an empty instruction still yields one token.
#[derive(Debug, Clone, Copy)]
pub struct BagOfWords {
    pub vocab: usize,
    pub max_words: usize,
}

fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

impl TextEncoder for BagOfWords {
    fn name(&self) -> &str {
        "bag-of-words"
    }

    fn vocab(&self) -> usize {
        self.vocab
    }

    fn encode(&self, text: &str) -> Vec<usize> {
        let words = text
            .split(|c: char| !c.is_alphanumeric() && c != '\'')
            .filter(|w| !w.is_empty())
            .take(self.max_words)
            .map(|w| 1 + (fnv1a(&w.to_lowercase()) % (self.vocab as u64 - 1)) as usize);
        std::iter::once(0).chain(words).collect()
    }
}

pub struct Encoders {
    pub rgb: Box<dyn PatchEncoder>,
    pub depth: Box<dyn PatchEncoder>,
    pub position: Box<dyn PatchEncoder>,
    pub text: Box<dyn TextEncoder>,
}

impl std::fmt::Debug for Encoders {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Encoders")
            .field("rgb", &self.rgb.name())
            .field("depth", &self.depth.name())
            .field("position", &self.position.name())
            .field("text", &self.text.name())
            .finish()
    }
}

impl Encoders {
    pub fn toy(config: &ModelConfig) -> Self {
        Self {
            rgb: Box::new(RgbPatches { patch: config.patch }),
            depth: Box::new(DepthPatches { patch: config.patch }),
            position: Box::new(FourierPosition {
                patch: config.patch,
                bands: config.bands,
            }),
            text: Box::new(BagOfWords {
                vocab: config.vocab,
                max_words: config.max_words,
            }),
        }
    }

    /// Feature widths of the rgb, depth and position encoders.
    pub fn feature_dims(&self) -> [usize; 3] {
        [self.rgb.feature_dim(), self.depth.feature_dim(), self.position.feature_dim()]
    }

    pub fn check(&self, config: &ModelConfig) -> Result<(), PredictorError> {
        for e in [&self.rgb, &self.depth, &self.position] {
            if e.patch() != config.patch {
                return Err(PredictorError::Config(format!(
                    "encoder {} uses patch {}, model expects {}",
                    e.name(),
                    e.patch(),
                    config.patch
                )));
            }
        }
        if self.text.vocab() != config.vocab {
            return Err(PredictorError::Config(format!(
                "text encoder vocab {} != model vocab {}",
                self.text.vocab(),
                config.vocab
            )));
        }
        Ok(())
    }
}

/// Encoder outputs for one observation, ready for the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Features {
    pub rgb: [Array2<f64>; 3],
    pub depth: [Array2<f64>; 3],
    pub position: [Array2<f64>; 3],
    pub text: Vec<usize>,
    /// 1 for closed, 0 for open.
    pub gripper: f64,
}

impl Features {
    pub fn token_count(&self) -> usize {
        self.rgb.iter().map(|a| a.nrows()).sum::<usize>() + self.text.len() + 1
    }
}

/// Run the encoders over the three views, the instruction and the gripper
/// state. Views must have the model's resolution.
pub fn encode_observation(
    views: &ViewSet,
    instruction: &str,
    gripper: f64,
    encoders: &Encoders,
    config: &ModelConfig,
) -> Result<Features, PredictorError> {
    encoders.check(config)?;
    if views.resolution() != config.resolution {
        return Err(PredictorError::Config(format!(
            "views are {}px, model expects {}px",
            views.resolution(),
            config.resolution
        )));
    }
    let run = |e: &dyn PatchEncoder| -> Result<[Array2<f64>; 3], PredictorError> {
        let out = [0, 1, 2].map(|i| e.encode(&views.views[i]));
        let rows = config.patches_per_view();
        if out.iter().any(|a| a.nrows() != rows || a.ncols() != e.feature_dim()) {
            return Err(PredictorError::Config(format!(
                "encoder {} returned {:?}, expected [{rows}, {}]",
                e.name(),
                out[0].dim(),
                e.feature_dim()
            )));
        }
        Ok(out)
    };
    let text = encoders.text.encode(instruction);
    if let Some(bad) = text.iter().find(|t| **t >= config.vocab) {
        return Err(PredictorError::Config(format!("token id {bad} outside vocab {}", config.vocab)));
    }
    Ok(Features {
        rgb: run(encoders.rgb.as_ref())?,
        depth: run(encoders.depth.as_ref())?,
        position: run(encoders.position.as_ref())?,
        text,
        gripper,
    })
}
