//! Token fusion transformer with hand-written backward pass.
//!
//! Tokens: front, left and top image patches, then instruction words, then
//! one proprio token. Each image token is the sum of its rgb, depth and
//! position projections plus a learned slot embedding.

use c2f_core::geometry::ViewId;
use c2f_core::heatmap::Heatmap;
use ndarray::{s, Array1, Array2, ArrayView2, Axis};

use crate::{Features, ModelConfig, Params, PredictorError};

const LN_EPS: f64 = 1e-5;

/// Raw network outputs. Heatmap logits are row-major over each view.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub heat_logits: [Vec<f64>; 3],
    /// One row of `rotation_bins` logits per Euler axis.
    pub rot_logits: Array2<f64>,
    pub grip_logit: f64,
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|x| x / z).collect()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Prediction {
    /// Softmax-normalized heatmaps.
    pub fn heatmaps(&self, resolution: usize) -> [Heatmap; 3] {
        ViewId::ALL.map(|id| Heatmap {
            view: id,
            resolution,
            values: softmax(&self.heat_logits[id.index()]),
        })
    }

    /// Argmax bin per axis; ties go to the lowest bin.
    pub fn rotation_bins(&self) -> [usize; 3] {
        [0, 1, 2].map(|a| {
            let row = self.rot_logits.row(a);
            let mut best = 0;
            for (i, x) in row.iter().enumerate() {
                if *x > row[best] {
                    best = i;
                }
            }
            best
        })
    }

    pub fn gripper_closed(&self) -> bool {
        self.grip_logit > 0.0
    }

    pub fn is_finite(&self) -> bool {
        self.heat_logits.iter().flatten().all(|x| x.is_finite())
            && self.rot_logits.iter().all(|x| x.is_finite())
            && self.grip_logit.is_finite()
    }
}

/// Gradient of a scalar with respect to every prediction output.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionGrad {
    pub heat_logits: [Vec<f64>; 3],
    pub rot_logits: Array2<f64>,
    pub grip_logit: f64,
}

struct LnCache {
    xhat: Array2<f64>,
    inv_std: Array1<f64>,
}

fn layer_norm(x: &Array2<f64>, g: &Array2<f64>, b: &Array2<f64>) -> (Array2<f64>, LnCache) {
    let d = x.ncols() as f64;
    let mut xhat = x.clone();
    let mut inv_std = Array1::zeros(x.nrows());
    for (mut row, is) in xhat.rows_mut().into_iter().zip(inv_std.iter_mut()) {
        let mu = row.sum() / d;
        let var = row.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / d;
        *is = 1.0 / (var + LN_EPS).sqrt();
        row.mapv_inplace(|v| (v - mu) * *is);
    }
    let y = &xhat * g + b;
    (y, LnCache { xhat, inv_std })
}

/// Returns dx and accumulates dg, db.
fn layer_norm_backward(dy: &Array2<f64>, g: &Array2<f64>, c: &LnCache, dg: &mut Array2<f64>, db: &mut Array2<f64>) -> Array2<f64> {
    *dg += &(dy * &c.xhat).sum_axis(Axis(0)).insert_axis(Axis(0));
    *db += &dy.sum_axis(Axis(0)).insert_axis(Axis(0));
    let dxhat = dy * g;
    let d = dy.ncols() as f64;
    let mut dx = Array2::zeros(dy.raw_dim());
    for i in 0..dy.nrows() {
        let dh = dxhat.row(i);
        let xh = c.xhat.row(i);
        let m1 = dh.sum() / d;
        let m2 = dh.dot(&xh) / d;
        for j in 0..dy.ncols() {
            dx[[i, j]] = c.inv_std[i] * (dh[j] - m1 - xh[j] * m2);
        }
    }
    dx
}

fn softmax_rows(s: &mut Array2<f64>) {
    for mut row in s.rows_mut() {
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|x| (x - m).exp());
        let z = row.sum();
        row.mapv_inplace(|x| x / z);
    }
}

struct BlockCache {
    ln1: LnCache,
    a: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    probs: Vec<Array2<f64>>,
    o: Array2<f64>,
    ln2: LnCache,
    b: Array2<f64>,
    h: Array2<f64>,
    z: Array2<f64>,
}

/// Intermediate values kept for the backward pass.
pub struct Cache {
    blocks: Vec<BlockCache>,
    lnf: LnCache,
    y: Array2<f64>,
    pooled: Array2<f64>,
}

/// Stacked per-view encoder rows: `3N x width`.
fn stack(rows: &[Array2<f64>; 3]) -> Array2<f64> {
    ndarray::concatenate(Axis(0), &[rows[0].view(), rows[1].view(), rows[2].view()]).expect("views share a width")
}

fn check_shapes(params: &Params, config: &ModelConfig, f: &Features) -> Result<(), PredictorError> {
    let n = config.patches_per_view();
    let widths = [
        (&f.rgb, params.w_rgb.nrows(), "rgb"),
        (&f.depth, params.w_depth.nrows(), "depth"),
        (&f.position, params.w_pos.nrows(), "position"),
    ];
    for (rows, w, name) in widths {
        if rows.iter().any(|r| r.dim() != (n, w)) {
            return Err(PredictorError::Config(format!(
                "{name} features are {:?}, weights expect ({n}, {w})",
                rows[0].dim()
            )));
        }
    }
    if params.view_pos.nrows() != 3 * n || params.w_heat.ncols() != config.patch * config.patch {
        return Err(PredictorError::Config("weights do not match the model config".into()));
    }
    if f.text.iter().any(|t| *t >= params.text_emb.nrows()) {
        return Err(PredictorError::Config("token id outside the embedding table".into()));
    }
    Ok(())
}

fn embed(params: &Params, config: &ModelConfig, f: &Features) -> Array2<f64> {
    let n3 = 3 * config.patches_per_view();
    let m = n3 + f.text.len() + 1;
    let mut x = Array2::zeros((m, config.dim));
    let img = stack(&f.rgb).dot(&params.w_rgb)
        + &params.b_rgb
        + stack(&f.depth).dot(&params.w_depth)
        + stack(&f.position).dot(&params.w_pos)
        + &params.view_pos;
    x.slice_mut(s![..n3, ..]).assign(&img);
    for (j, id) in f.text.iter().enumerate() {
        x.row_mut(n3 + j).assign(&params.text_emb.row(*id));
    }
    let prop = ndarray::arr2(&[[f.gripper, 1.0 - f.gripper]]).dot(&params.w_prop);
    x.row_mut(m - 1).assign(&prop.row(0));
    x
}

fn head_cols(config: &ModelConfig, h: usize) -> ndarray::Slice {
    let dh = config.head_dim();
    ndarray::Slice::from(h * dh..(h + 1) * dh)
}

/// Pixel index -> (patch, offset inside the patch) for each pixel of a view.
fn pixel_layout(config: &ModelConfig) -> Vec<(usize, usize)> {
    let (r, p) = (config.resolution, config.patch);
    (0..r * r)
        .map(|i| {
            let (x, y) = (i % r, i / r);
            ((y / p) * (r / p) + x / p, (y % p) * p + x % p)
        })
        .collect()
}

pub fn forward(params: &Params, config: &ModelConfig, f: &Features) -> Result<(Prediction, Cache), PredictorError> {
    check_shapes(params, config, f)?;
    let scale = 1.0 / (config.head_dim() as f64).sqrt();
    let mut x = embed(params, config, f);
    let mut blocks = Vec::with_capacity(params.blocks.len());
    for bp in &params.blocks {
        let (a, ln1) = layer_norm(&x, &bp.ln1_g, &bp.ln1_b);
        let q = a.dot(&bp.wq);
        let k = a.dot(&bp.wk);
        let v = a.dot(&bp.wv);
        let mut o = Array2::zeros(x.raw_dim());
        let mut probs = Vec::with_capacity(config.heads);
        for h in 0..config.heads {
            let c = head_cols(config, h);
            let qh = q.slice_axis(Axis(1), c);
            let kh = k.slice_axis(Axis(1), c);
            let mut p = qh.dot(&kh.t()) * scale;
            softmax_rows(&mut p);
            o.slice_axis_mut(Axis(1), c).assign(&p.dot(&v.slice_axis(Axis(1), c)));
            probs.push(p);
        }
        let x1 = &x + &o.dot(&bp.wo) + &bp.bo;
        let (b, ln2) = layer_norm(&x1, &bp.ln2_g, &bp.ln2_b);
        let hpre = b.dot(&bp.w1) + &bp.b1;
        let z = hpre.mapv(|t| t * sigmoid(t));
        let x2 = &x1 + &z.dot(&bp.w2) + &bp.b2;
        blocks.push(BlockCache {
            ln1,
            a,
            q,
            k,
            v,
            probs,
            o,
            ln2,
            b,
            h: hpre,
            z,
        });
        x = x2;
    }
    let (y, lnf) = layer_norm(&x, &params.lnf_g, &params.lnf_b);
    let n3 = 3 * config.patches_per_view();
    let heat = y.slice(s![..n3, ..]).dot(&params.w_heat) + &params.b_heat;
    let n = config.patches_per_view();
    let layout = pixel_layout(config);
    let heat_logits = [0, 1, 2].map(|v| layout.iter().map(|(k, j)| heat[[v * n + k, *j]]).collect());
    let pooled = y.mean_axis(Axis(0)).expect("at least one token").insert_axis(Axis(0));
    let rot = pooled.dot(&params.w_rot) + &params.b_rot;
    let rot_logits = rot.into_shape_with_order((3, config.rotation_bins)).expect("3 x bins logits");
    let grip_logit = pooled.dot(&params.w_grip)[[0, 0]] + params.b_grip[[0, 0]];
    let pred = Prediction {
        heat_logits,
        rot_logits,
        grip_logit,
    };
    Ok((pred, Cache { blocks, lnf, y, pooled }))
}

pub fn backward(params: &Params, config: &ModelConfig, f: &Features, cache: &Cache, dpred: &PredictionGrad) -> Params {
    let mut g = params.zeros_like();
    let n = config.patches_per_view();
    let n3 = 3 * n;
    let m = cache.y.nrows();
    let scale = 1.0 / (config.head_dim() as f64).sqrt();

    // heads
    let mut dheat = Array2::zeros((n3, config.patch * config.patch));
    for (i, (k, j)) in pixel_layout(config).into_iter().enumerate() {
        for v in 0..3 {
            dheat[[v * n + k, j]] += dpred.heat_logits[v][i];
        }
    }
    let y_img = cache.y.slice(s![..n3, ..]);
    g.w_heat = y_img.t().dot(&dheat);
    g.b_heat = dheat.sum_axis(Axis(0)).insert_axis(Axis(0));
    let mut dy = Array2::zeros(cache.y.raw_dim());
    dy.slice_mut(s![..n3, ..]).assign(&dheat.dot(&params.w_heat.t()));

    let drot = dpred
        .rot_logits
        .clone()
        .into_shape_with_order((1, 3 * config.rotation_bins))
        .expect("3 x bins logits");
    g.w_rot = cache.pooled.t().dot(&drot);
    g.b_rot = drot.clone();
    let dgrip = ndarray::arr2(&[[dpred.grip_logit]]);
    g.w_grip = cache.pooled.t().dot(&dgrip);
    g.b_grip = dgrip.clone();
    let dpooled = drot.dot(&params.w_rot.t()) + dgrip.dot(&params.w_grip.t());
    dy += &(dpooled / m as f64);

    let mut dx = layer_norm_backward(&dy, &params.lnf_g, &cache.lnf, &mut g.lnf_g, &mut g.lnf_b);

    for (li, (bp, bc)) in params.blocks.iter().zip(&cache.blocks).enumerate().rev() {
        let gb = &mut g.blocks[li];
        // mlp: x2 = x1 + silu(b w1 + b1) w2 + b2
        gb.w2 = bc.z.t().dot(&dx);
        gb.b2 = dx.sum_axis(Axis(0)).insert_axis(Axis(0));
        let dz = dx.dot(&bp.w2.t());
        let dh = ndarray::Zip::from(&dz).and(&bc.h).map_collect(|dz, h| {
            let s = sigmoid(*h);
            dz * s * (1.0 + h * (1.0 - s))
        });
        gb.w1 = bc.b.t().dot(&dh);
        gb.b1 = dh.sum_axis(Axis(0)).insert_axis(Axis(0));
        let db = dh.dot(&bp.w1.t());
        let dx1 = dx + layer_norm_backward(&db, &bp.ln2_g, &bc.ln2, &mut gb.ln2_g, &mut gb.ln2_b);

        // attention: x1 = x + o wo + bo
        gb.wo = bc.o.t().dot(&dx1);
        gb.bo = dx1.sum_axis(Axis(0)).insert_axis(Axis(0));
        let do_ = dx1.dot(&bp.wo.t());
        let mut dq = Array2::zeros(bc.q.raw_dim());
        let mut dk = Array2::zeros(bc.k.raw_dim());
        let mut dv = Array2::zeros(bc.v.raw_dim());
        for h in 0..config.heads {
            let c = head_cols(config, h);
            let p = &bc.probs[h];
            let doh = do_.slice_axis(Axis(1), c);
            let vh = bc.v.slice_axis(Axis(1), c);
            let dp = doh.dot(&vh.t());
            dv.slice_axis_mut(Axis(1), c).assign(&p.t().dot(&doh));
            let mut ds = dp;
            for (mut dr, pr) in ds.rows_mut().into_iter().zip(p.rows()) {
                let dot = dr.dot(&pr);
                ndarray::Zip::from(&mut dr).and(&pr).for_each(|d, p| *d = p * (*d - dot) * scale);
            }
            dq.slice_axis_mut(Axis(1), c).assign(&ds.dot(&bc.k.slice_axis(Axis(1), c)));
            dk.slice_axis_mut(Axis(1), c).assign(&ds.t().dot(&bc.q.slice_axis(Axis(1), c)));
        }
        gb.wq = bc.a.t().dot(&dq);
        gb.wk = bc.a.t().dot(&dk);
        gb.wv = bc.a.t().dot(&dv);
        let da = dq.dot(&bp.wq.t()) + dk.dot(&bp.wk.t()) + dv.dot(&bp.wv.t());
        dx = &dx1 + &layer_norm_backward(&da, &bp.ln1_g, &bc.ln1, &mut gb.ln1_g, &mut gb.ln1_b);
    }

    // embedding
    let dimg = dx.slice(s![..n3, ..]);
    g.w_rgb = stack(&f.rgb).t().dot(&dimg);
    g.b_rgb = dimg.sum_axis(Axis(0)).insert_axis(Axis(0));
    g.w_depth = stack(&f.depth).t().dot(&dimg);
    g.w_pos = stack(&f.position).t().dot(&dimg);
    g.view_pos = dimg.to_owned();
    for (j, id) in f.text.iter().enumerate() {
        let mut row = g.text_emb.row_mut(*id);
        row += &dx.row(n3 + j);
    }
    let prop: ArrayView2<f64> = dx.slice(s![m - 1..m, ..]);
    g.w_prop = ndarray::arr2(&[[f.gripper], [1.0 - f.gripper]]).dot(&prop);
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_maps_patches_row_major() {
        let c = ModelConfig {
            resolution: 8,
            patch: 4,
            ..Default::default()
        };
        let l = pixel_layout(&c);
        assert_eq!(l[0], (0, 0));
        assert_eq!(l[5], (1, 1));
        assert_eq!(l[8 * 4], (2, 0));
        assert_eq!(l[63], (3, 15));
    }

    #[test]
    fn softmax_and_sigmoid_are_stable() {
        let p = softmax(&[1000.0, 1000.0, f64::NEG_INFINITY]);
        assert_eq!(p, vec![0.5, 0.5, 0.0]);
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert_eq!(sigmoid(0.0), 0.5);
    }
}
