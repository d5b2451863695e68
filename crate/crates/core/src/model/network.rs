//! Single-head, single-block transformer encoder with hand-written backprop:
//!
//! ```text
//! x = tok_emb[ids] + pos_emb[0..n]
//! a = ln1(x)
//! h = x + softmax(a Wq (a Wk)ᵀ / √d, pad keys masked) (a Wv) Wo
//! y = h + gelu(ln2(h) W1 + b1) W2 + b2
//! e = lnf(y)                               contextual embeddings
//! p = softmax(e tok_embᵀ + lm_bias)        tied LM head
//! c = softmax(e W_cls)                     three-way clue classifier
//! ```
//!
//! `ln*` are row-wise layer norms with learned gain and bias.

use ndarray::{s, Array1, Array2, ArrayView1, Axis};

use super::params::Params;
use crate::masking::PAD_ID;

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;
const LN_EPS: f64 = 1e-5;

#[inline]
fn gelu(u: f64) -> f64 {
    0.5 * u * (1.0 + (GELU_C * (u + GELU_A * u * u * u)).tanh())
}

#[inline]
fn gelu_grad(u: f64) -> f64 {
    let t = (GELU_C * (u + GELU_A * u * u * u)).tanh();
    0.5 * (1.0 + t) + 0.5 * u * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * u * u)
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in row.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in row.iter_mut() {
        *x /= sum;
    }
}

/// Normalized rows and inverse standard deviations of one layer norm.
#[derive(Debug, Clone)]
struct NormCache {
    xhat: Array2<f64>,
    inv_std: Vec<f64>,
}

fn layer_norm(x: &Array2<f64>, g: &Array2<f64>, b: &Array2<f64>) -> (Array2<f64>, NormCache) {
    let d = x.ncols() as f64;
    let mut xhat = x.clone();
    let mut inv_std = Vec::with_capacity(x.nrows());
    for mut row in xhat.rows_mut() {
        let mu = row.sum() / d;
        row.mapv_inplace(|v| v - mu);
        let var = row.dot(&row) / d;
        let inv = 1.0 / (var + LN_EPS).sqrt();
        row *= inv;
        inv_std.push(inv);
    }
    let mut out = &xhat * &g.row(0);
    out += &b.row(0);
    (out, NormCache { xhat, inv_std })
}

/// Returns the input gradient and accumulates gain and bias gradients.
fn layer_norm_backward(
    dout: &Array2<f64>,
    cache: &NormCache,
    g: &Array2<f64>,
    dg: &mut Array2<f64>,
    db: &mut Array2<f64>,
) -> Array2<f64> {
    dg.row_mut(0)
        .scaled_add(1.0, &(dout * &cache.xhat).sum_axis(Axis(0)));
    db.row_mut(0).scaled_add(1.0, &dout.sum_axis(Axis(0)));
    let d = dout.ncols() as f64;
    let mut dx = dout * &g.row(0);
    for ((mut row, xhat), &inv) in dx
        .rows_mut()
        .into_iter()
        .zip(cache.xhat.rows())
        .zip(&cache.inv_std)
    {
        let mean = row.sum() / d;
        let proj = row.dot(&xhat) / d;
        row.zip_mut_with(&xhat, |v, &xh| *v = inv * (*v - mean - xh * proj));
    }
    dx
}

/// Activations kept for the backward pass.
#[derive(Debug, Clone)]
pub(crate) struct Cache {
    pub ids: Vec<u32>,
    an: Array2<f64>,
    n1: NormCache,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    a: Array2<f64>,
    c: Array2<f64>,
    hn: Array2<f64>,
    n2: NormCache,
    u: Array2<f64>,
    g: Array2<f64>,
    nf: NormCache,
    /// Contextual embeddings.
    pub y: Array2<f64>,
}

pub(crate) fn encode(p: &Params, ids: &[u32]) -> Cache {
    let n = ids.len();
    let d = p.wq.nrows();
    let mut x = Array2::zeros((n, d));
    for (i, &t) in ids.iter().enumerate() {
        let mut row = x.row_mut(i);
        row.assign(&p.tok_emb.row(t as usize));
        row += &p.pos_emb.row(i);
    }
    let (an, n1) = layer_norm(&x, &p.ln1_g, &p.ln1_b);
    let q = an.dot(&p.wq);
    let k = an.dot(&p.wk);
    let v = an.dot(&p.wv);
    let scale = 1.0 / (d as f64).sqrt();
    let mut a = q.dot(&k.t()) * scale;
    let valid: Vec<bool> = ids.iter().map(|&t| t != PAD_ID).collect();
    let any_valid = valid.iter().any(|&b| b);
    for mut row in a.rows_mut() {
        if !any_valid {
            row.fill(0.0);
            continue;
        }
        for (j, s) in row.iter_mut().enumerate() {
            if !valid[j] {
                *s = f64::NEG_INFINITY;
            }
        }
        softmax_in_place(row.as_slice_mut().expect("standard layout"));
    }
    let c = a.dot(&v);
    let h = x + c.dot(&p.wo);
    let (hn, n2) = layer_norm(&h, &p.ln2_g, &p.ln2_b);
    let mut u = hn.dot(&p.w1);
    u += &p.b1.row(0);
    let g = u.mapv(gelu);
    let mut r = h + g.dot(&p.w2);
    r += &p.b2.row(0);
    let (y, nf) = layer_norm(&r, &p.lnf_g, &p.lnf_b);
    Cache {
        ids: ids.to_vec(),
        an,
        n1,
        q,
        k,
        v,
        a,
        c,
        hn,
        n2,
        u,
        g,
        nf,
        y,
    }
}

/// Vocabulary distribution for one contextual embedding.
pub(crate) fn lm_probs(p: &Params, y: ArrayView1<f64>) -> Array1<f64> {
    let mut logits = p.tok_emb.dot(&y);
    logits += &p.lm_bias.row(0);
    softmax_in_place(logits.as_slice_mut().expect("contiguous"));
    logits
}

pub(crate) fn cls_probs(p: &Params, y: ArrayView1<f64>) -> [f64; 3] {
    let z = y.dot(&p.cls_w);
    let mut out = [z[0], z[1], z[2]];
    softmax_in_place(&mut out);
    out
}

/// Accumulates the LM-head gradient for `dlogits` at one position.
pub(crate) fn lm_backward(
    p: &Params,
    y: ArrayView1<f64>,
    dlogits: &Array1<f64>,
    dy: &mut Array2<f64>,
    pos: usize,
    grads: &mut Params,
) {
    let vocab = dlogits.len();
    let mut dyi = dy.row_mut(pos);
    for t in 0..vocab {
        let g = dlogits[t];
        if g == 0.0 {
            continue;
        }
        dyi.scaled_add(g, &p.tok_emb.row(t));
        grads.tok_emb.row_mut(t).scaled_add(g, &y);
    }
    grads.lm_bias.row_mut(0).scaled_add(1.0, dlogits);
}

pub(crate) fn cls_backward(
    p: &Params,
    y: ArrayView1<f64>,
    dz: [f64; 3],
    dy: &mut Array2<f64>,
    pos: usize,
    grads: &mut Params,
) {
    let dz = Array1::from(dz.to_vec());
    dy.row_mut(pos).scaled_add(1.0, &p.cls_w.dot(&dz));
    for (r, &yi) in y.iter().enumerate() {
        grads.cls_w.row_mut(r).scaled_add(yi, &dz);
    }
}

/// Backpropagates `dy` (gradient w.r.t. contextual embeddings) into `grads`.
pub(crate) fn backward(p: &Params, cache: &Cache, dy: Array2<f64>, grads: &mut Params) {
    let d = p.wq.nrows();
    let scale = 1.0 / (d as f64).sqrt();

    // e = lnf(r), r = h + g W2 + b2
    let dr = layer_norm_backward(&dy, &cache.nf, &p.lnf_g, &mut grads.lnf_g, &mut grads.lnf_b);
    grads.b2.row_mut(0).scaled_add(1.0, &dr.sum_axis(Axis(0)));
    grads.w2.scaled_add(1.0, &cache.g.t().dot(&dr));
    let mut du = dr.dot(&p.w2.t());
    let mut dh = dr;

    // g = gelu(ln2(h) W1 + b1)
    du.zip_mut_with(&cache.u, |du, &u| *du *= gelu_grad(u));
    grads.b1.row_mut(0).scaled_add(1.0, &du.sum_axis(Axis(0)));
    grads.w1.scaled_add(1.0, &cache.hn.t().dot(&du));
    let dhn = du.dot(&p.w1.t());
    dh += &layer_norm_backward(&dhn, &cache.n2, &p.ln2_g, &mut grads.ln2_g, &mut grads.ln2_b);

    // h = x + (A V) Wo, with q, k, v projected from ln1(x)
    grads.wo.scaled_add(1.0, &cache.c.t().dot(&dh));
    let dc = dh.dot(&p.wo.t());
    let mut dx = dh;
    let da = dc.dot(&cache.v.t());
    let dv = cache.a.t().dot(&dc);
    let mut ds = Array2::zeros(cache.a.raw_dim());
    for i in 0..cache.a.nrows() {
        let a = cache.a.row(i);
        let dai = da.row(i);
        let inner = a.dot(&dai);
        ds.row_mut(i)
            .iter_mut()
            .zip(a.iter().zip(dai.iter()))
            .for_each(|(s, (&aij, &daij))| *s = aij * (daij - inner));
    }
    let dq = ds.dot(&cache.k) * scale;
    let dk = ds.t().dot(&cache.q) * scale;
    grads.wq.scaled_add(1.0, &cache.an.t().dot(&dq));
    grads.wk.scaled_add(1.0, &cache.an.t().dot(&dk));
    grads.wv.scaled_add(1.0, &cache.an.t().dot(&dv));
    let mut dan = dq.dot(&p.wq.t());
    dan += &dk.dot(&p.wk.t());
    dan += &dv.dot(&p.wv.t());
    dx += &layer_norm_backward(&dan, &cache.n1, &p.ln1_g, &mut grads.ln1_g, &mut grads.ln1_b);

    let n = cache.ids.len();
    for (i, &t) in cache.ids.iter().enumerate() {
        grads.tok_emb.row_mut(t as usize).scaled_add(1.0, &dx.row(i));
    }
    grads
        .pos_emb
        .slice_mut(s![0..n, ..])
        .scaled_add(1.0, &dx);
}
