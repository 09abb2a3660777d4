use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::ModelConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct BlockParams {
    pub ln1_g: Array2<f64>,
    pub ln1_b: Array2<f64>,
    pub wq: Array2<f64>,
    pub wk: Array2<f64>,
    pub wv: Array2<f64>,
    pub wo: Array2<f64>,
    pub bo: Array2<f64>,
    pub ln2_g: Array2<f64>,
    pub ln2_b: Array2<f64>,
    pub w1: Array2<f64>,
    pub b1: Array2<f64>,
    pub w2: Array2<f64>,
    pub b2: Array2<f64>,
}

/// Every learned tensor. Biases and norm parameters are `1 x n` rows.
/// Gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub w_rgb: Array2<f64>,
    pub b_rgb: Array2<f64>,
    pub w_depth: Array2<f64>,
    pub w_pos: Array2<f64>,
    /// Learned embedding of each patch slot, all three views stacked.
    pub view_pos: Array2<f64>,
    pub text_emb: Array2<f64>,
    pub w_prop: Array2<f64>,
    pub blocks: Vec<BlockParams>,
    pub lnf_g: Array2<f64>,
    pub lnf_b: Array2<f64>,
    pub w_heat: Array2<f64>,
    pub b_heat: Array2<f64>,
    pub w_rot: Array2<f64>,
    pub b_rot: Array2<f64>,
    pub w_grip: Array2<f64>,
    pub b_grip: Array2<f64>,
}

pub type Grads = Params;

impl Params {
    /// Seeded initialization; `feature_dims` are the rgb, depth and position
    /// encoder widths.
    pub fn init(config: &ModelConfig, feature_dims: [usize; 3]) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed);
        let mut normal = |rows: usize, cols: usize, std: f64| {
            let n = Normal::new(0.0, std).expect("std is positive");
            Array2::from_shape_simple_fn((rows, cols), || n.sample(&mut rng))
        };
        let d = config.dim;
        let h = config.mlp_ratio * d;
        let pp = config.patch * config.patch;
        let fan = |n: usize| 1.0 / (n as f64).sqrt();
        let [fr, fd, fp] = feature_dims;
        let w_rgb = normal(fr, d, fan(fr));
        let w_depth = normal(fd, d, fan(fd));
        let w_pos = normal(fp, d, fan(fp));
        let view_pos = normal(3 * config.patches_per_view(), d, 0.1);
        let text_emb = normal(config.vocab, d, 1.0);
        let w_prop = normal(2, d, 1.0);
        let blocks = (0..config.layers)
            .map(|_| BlockParams {
                ln1_g: Array2::ones((1, d)),
                ln1_b: Array2::zeros((1, d)),
                wq: normal(d, d, fan(d)),
                wk: normal(d, d, fan(d)),
                wv: normal(d, d, fan(d)),
                wo: normal(d, d, fan(d)),
                bo: Array2::zeros((1, d)),
                ln2_g: Array2::ones((1, d)),
                ln2_b: Array2::zeros((1, d)),
                w1: normal(d, h, fan(d)),
                b1: Array2::zeros((1, h)),
                w2: normal(h, d, fan(h)),
                b2: Array2::zeros((1, d)),
            })
            .collect();
        Self {
            w_rgb,
            b_rgb: Array2::zeros((1, d)),
            w_depth,
            w_pos,
            view_pos,
            text_emb,
            w_prop,
            blocks,
            lnf_g: Array2::ones((1, d)),
            lnf_b: Array2::zeros((1, d)),
            w_heat: normal(d, pp, fan(d)),
            b_heat: Array2::zeros((1, pp)),
            w_rot: normal(d, 3 * config.rotation_bins, fan(d)),
            b_rot: Array2::zeros((1, 3 * config.rotation_bins)),
            w_grip: normal(d, 1, fan(d)),
            b_grip: Array2::zeros((1, 1)),
        }
    }

    /// Named tensors in a fixed order, shared by checkpoints and the
    /// optimizer.
    pub fn tensors(&self) -> Vec<(String, &Array2<f64>)> {
        let mut out: Vec<(String, &Array2<f64>)> = vec![
            ("w_rgb".into(), &self.w_rgb),
            ("b_rgb".into(), &self.b_rgb),
            ("w_depth".into(), &self.w_depth),
            ("w_pos".into(), &self.w_pos),
            ("view_pos".into(), &self.view_pos),
            ("text_emb".into(), &self.text_emb),
            ("w_prop".into(), &self.w_prop),
        ];
        for (i, b) in self.blocks.iter().enumerate() {
            for (n, t) in [
                ("ln1_g", &b.ln1_g),
                ("ln1_b", &b.ln1_b),
                ("wq", &b.wq),
                ("wk", &b.wk),
                ("wv", &b.wv),
                ("wo", &b.wo),
                ("bo", &b.bo),
                ("ln2_g", &b.ln2_g),
                ("ln2_b", &b.ln2_b),
                ("w1", &b.w1),
                ("b1", &b.b1),
                ("w2", &b.w2),
                ("b2", &b.b2),
            ] {
                out.push((format!("blocks.{i}.{n}"), t));
            }
        }
        out.extend([
            ("lnf_g".into(), &self.lnf_g),
            ("lnf_b".into(), &self.lnf_b),
            ("w_heat".into(), &self.w_heat),
            ("b_heat".into(), &self.b_heat),
            ("w_rot".into(), &self.w_rot),
            ("b_rot".into(), &self.b_rot),
            ("w_grip".into(), &self.w_grip),
            ("b_grip".into(), &self.b_grip),
        ]);
        out
    }

    /// Same order as [`Params::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut Array2<f64>> {
        let mut out: Vec<&mut Array2<f64>> = vec![
            &mut self.w_rgb,
            &mut self.b_rgb,
            &mut self.w_depth,
            &mut self.w_pos,
            &mut self.view_pos,
            &mut self.text_emb,
            &mut self.w_prop,
        ];
        for b in &mut self.blocks {
            out.extend([
                &mut b.ln1_g,
                &mut b.ln1_b,
                &mut b.wq,
                &mut b.wk,
                &mut b.wv,
                &mut b.wo,
                &mut b.bo,
                &mut b.ln2_g,
                &mut b.ln2_b,
                &mut b.w1,
                &mut b.b1,
                &mut b.w2,
                &mut b.b2,
            ]);
        }
        out.extend([
            &mut self.lnf_g,
            &mut self.lnf_b,
            &mut self.w_heat,
            &mut self.b_heat,
            &mut self.w_rot,
            &mut self.b_rot,
            &mut self.w_grip,
            &mut self.b_grip,
        ]);
        out
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    pub fn count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn add_assign(&mut self, other: &Params) {
        for (a, (_, b)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            *a += b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for t in self.tensors_mut() {
            t.mapv_inplace(|x| x * s);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.iter().all(|x| x.is_finite()))
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    m: Params,
    v: Params,
}

impl Adam {
    pub fn new(params: &Params, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            beta1,
            beta2,
            eps,
            t: 0,
            m: params.zeros_like(),
            v: params.zeros_like(),
        }
    }

    pub fn step(&mut self, params: &mut Params, grads: &Grads, lr: f64) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let gs = grads.tensors();
        for (((p, m), v), (_, g)) in params
            .tensors_mut()
            .into_iter()
            .zip(self.m.tensors_mut())
            .zip(self.v.tensors_mut())
            .zip(gs)
        {
            ndarray::Zip::from(p).and(m).and(v).and(g).for_each(|p, m, v, &g| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            });
        }
    }
}
