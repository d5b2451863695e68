use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::ModelConfig;

/// Every trainable tensor of the toy model. Vectors are stored as `1 × n`
/// matrices so that all groups share one representation.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub tok_emb: Array2<f64>,
    pub pos_emb: Array2<f64>,
    pub ln1_g: Array2<f64>,
    pub ln1_b: Array2<f64>,
    pub wq: Array2<f64>,
    pub wk: Array2<f64>,
    pub wv: Array2<f64>,
    pub wo: Array2<f64>,
    pub ln2_g: Array2<f64>,
    pub ln2_b: Array2<f64>,
    pub w1: Array2<f64>,
    pub b1: Array2<f64>,
    pub w2: Array2<f64>,
    pub b2: Array2<f64>,
    pub lnf_g: Array2<f64>,
    pub lnf_b: Array2<f64>,
    pub lm_bias: Array2<f64>,
    /// Three-way clue classifier, `d × 3`.
    pub cls_w: Array2<f64>,
}

pub const GROUP_NAMES: [&str; N_GROUPS] = [
    "tok_emb", "pos_emb", "ln1_g", "ln1_b", "wq", "wk", "wv", "wo", "ln2_g", "ln2_b", "w1", "b1",
    "w2", "b2", "lnf_g", "lnf_b", "lm_bias", "cls_w",
];

pub const N_GROUPS: usize = 18;

pub const INIT_SCALE: f64 = 0.02;

impl Params {
    pub fn zeros(cfg: &ModelConfig) -> Self {
        let (v, d, l, f) = (cfg.vocab_size, cfg.d, cfg.max_len, cfg.d_ff);
        Self {
            tok_emb: Array2::zeros((v, d)),
            pos_emb: Array2::zeros((l, d)),
            ln1_g: Array2::zeros((1, d)),
            ln1_b: Array2::zeros((1, d)),
            wq: Array2::zeros((d, d)),
            wk: Array2::zeros((d, d)),
            wv: Array2::zeros((d, d)),
            wo: Array2::zeros((d, d)),
            ln2_g: Array2::zeros((1, d)),
            ln2_b: Array2::zeros((1, d)),
            w1: Array2::zeros((d, f)),
            b1: Array2::zeros((1, f)),
            w2: Array2::zeros((f, d)),
            b2: Array2::zeros((1, d)),
            lnf_g: Array2::zeros((1, d)),
            lnf_b: Array2::zeros((1, d)),
            lm_bias: Array2::zeros((1, v)),
            cls_w: Array2::zeros((d, 3)),
        }
    }

    /// Weights ~ N(0, 0.02²), biases zero, layer-norm gains one.
    pub fn init(cfg: &ModelConfig) -> Self {
        let mut p = Self::zeros(cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let normal = Normal::new(0.0, INIT_SCALE).expect("valid scale");
        for (name, t) in p.groups_mut() {
            if name.ends_with("_g") {
                t.fill(1.0);
            } else if !name.starts_with('b') && !name.ends_with("_b") && name != "lm_bias" {
                t.iter_mut().for_each(|x| *x = normal.sample(&mut rng));
            }
        }
        p
    }

    pub fn zeros_like(&self) -> Self {
        let z = |a: &Array2<f64>| Array2::zeros(a.raw_dim());
        Self {
            tok_emb: z(&self.tok_emb),
            pos_emb: z(&self.pos_emb),
            ln1_g: z(&self.ln1_g),
            ln1_b: z(&self.ln1_b),
            wq: z(&self.wq),
            wk: z(&self.wk),
            wv: z(&self.wv),
            wo: z(&self.wo),
            ln2_g: z(&self.ln2_g),
            ln2_b: z(&self.ln2_b),
            w1: z(&self.w1),
            b1: z(&self.b1),
            w2: z(&self.w2),
            b2: z(&self.b2),
            lnf_g: z(&self.lnf_g),
            lnf_b: z(&self.lnf_b),
            lm_bias: z(&self.lm_bias),
            cls_w: z(&self.cls_w),
        }
    }

    pub fn groups(&self) -> [(&'static str, &Array2<f64>); N_GROUPS] {
        [
            ("tok_emb", &self.tok_emb),
            ("pos_emb", &self.pos_emb),
            ("ln1_g", &self.ln1_g),
            ("ln1_b", &self.ln1_b),
            ("wq", &self.wq),
            ("wk", &self.wk),
            ("wv", &self.wv),
            ("wo", &self.wo),
            ("ln2_g", &self.ln2_g),
            ("ln2_b", &self.ln2_b),
            ("w1", &self.w1),
            ("b1", &self.b1),
            ("w2", &self.w2),
            ("b2", &self.b2),
            ("lnf_g", &self.lnf_g),
            ("lnf_b", &self.lnf_b),
            ("lm_bias", &self.lm_bias),
            ("cls_w", &self.cls_w),
        ]
    }

    pub fn groups_mut(&mut self) -> [(&'static str, &mut Array2<f64>); N_GROUPS] {
        [
            ("tok_emb", &mut self.tok_emb),
            ("pos_emb", &mut self.pos_emb),
            ("ln1_g", &mut self.ln1_g),
            ("ln1_b", &mut self.ln1_b),
            ("wq", &mut self.wq),
            ("wk", &mut self.wk),
            ("wv", &mut self.wv),
            ("wo", &mut self.wo),
            ("ln2_g", &mut self.ln2_g),
            ("ln2_b", &mut self.ln2_b),
            ("w1", &mut self.w1),
            ("b1", &mut self.b1),
            ("w2", &mut self.w2),
            ("b2", &mut self.b2),
            ("lnf_g", &mut self.lnf_g),
            ("lnf_b", &mut self.lnf_b),
            ("lm_bias", &mut self.lm_bias),
            ("cls_w", &mut self.cls_w),
        ]
    }

    /// `self += alpha * other`
    pub fn scaled_add(&mut self, alpha: f64, other: &Params) {
        for ((_, a), (_, b)) in self.groups_mut().into_iter().zip(other.groups()) {
            a.scaled_add(alpha, b);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.groups()
            .iter()
            .all(|(_, t)| t.iter().all(|x| x.is_finite()))
    }

    pub fn num_params(&self) -> usize {
        self.groups().iter().map(|(_, t)| t.len()).sum()
    }
}
