//! Single-head scaled dot-product self-attention with manual backprop.

use ndarray::{Array2, Axis};

use crate::encoders::params::{ParamView, PMat, Tensor, TensorStore};
use crate::error::Result;

/// Single-head self-attention layer (query/key/value matrices, no positional
/// information). Softmax rows sum to 1 within 1e-9.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfAttentionLayer {
    pub wq: PMat,
    pub wk: PMat,
    pub wv: PMat,
    dim: usize,
}

/// Intermediates cached by a forward pass, consumed by backward.
#[derive(Debug, Clone)]
pub struct AttentionCache {
    x: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    attn: Array2<f64>,
}

impl SelfAttentionLayer {
    pub fn new(dim: usize, rng: &mut impl rand::Rng) -> Self {
        Self {
            wq: PMat::uniform(dim, dim, dim, rng),
            wk: PMat::uniform(dim, dim, dim, rng),
            wv: PMat::uniform(dim, dim, dim, rng),
            dim,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Attention over the rows of `x` (positions x dim).
    pub fn forward(&self, x: &Array2<f64>) -> (Array2<f64>, AttentionCache) {
        let q = x.dot(&self.wq.v);
        let k = x.dot(&self.wk.v);
        let v = x.dot(&self.wv.v);
        let scale = 1.0 / (self.dim as f64).sqrt();
        let mut scores = q.dot(&k.t());
        scores.mapv_inplace(|s| s * scale);
        let attn = softmax_rows(&scores);
        let out = attn.dot(&v);
        (out, AttentionCache { x: x.clone(), q, k, v, attn })
    }

    /// Accumulate parameter gradients and return the gradient w.r.t. `x`.
    pub fn backward(&mut self, cache: &AttentionCache, d_out: &Array2<f64>) -> Array2<f64> {
        let scale = 1.0 / (self.dim as f64).sqrt();
        let d_attn = d_out.dot(&cache.v.t());
        let d_v = cache.attn.t().dot(d_out);
        // softmax backward per row: ds = a * (da - <da, a>)
        let mut d_scores = Array2::zeros(d_attn.raw_dim());
        for (i, (a_row, da_row)) in cache
            .attn
            .axis_iter(Axis(0))
            .zip(d_attn.axis_iter(Axis(0)))
            .enumerate()
        {
            let inner: f64 = a_row.iter().zip(da_row.iter()).map(|(a, d)| a * d).sum();
            for (j, (&a, &d)) in a_row.iter().zip(da_row.iter()).enumerate() {
                d_scores[[i, j]] = a * (d - inner) * scale;
            }
        }
        let d_q = d_scores.dot(&cache.k);
        let d_k = d_scores.t().dot(&cache.q);
        self.wq.g += &cache.x.t().dot(&d_q);
        self.wk.g += &cache.x.t().dot(&d_k);
        self.wv.g += &cache.x.t().dot(&d_v);
        d_q.dot(&self.wq.v.t()) + d_k.dot(&self.wk.v.t()) + d_v.dot(&self.wv.v.t())
    }

    pub fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(ParamView<'_>)) {
        self.wq.visit(&format!("{prefix}.wq"), f);
        self.wk.visit(&format!("{prefix}.wk"), f);
        self.wv.visit(&format!("{prefix}.wv"), f);
    }

    pub fn zero_grad(&mut self) {
        self.wq.zero_grad();
        self.wk.zero_grad();
        self.wv.zero_grad();
    }

    pub fn export_tensors(&self, prefix: &str, store: &mut TensorStore) {
        store.put(format!("{prefix}.wq"), Tensor::from_mat(&self.wq.v));
        store.put(format!("{prefix}.wk"), Tensor::from_mat(&self.wk.v));
        store.put(format!("{prefix}.wv"), Tensor::from_mat(&self.wv.v));
    }

    pub fn import_tensors(&mut self, prefix: &str, store: &mut TensorStore) -> Result<()> {
        self.wq = PMat::new(store.take(&format!("{prefix}.wq"))?.to_mat()?);
        self.wk = PMat::new(store.take(&format!("{prefix}.wk"))?.to_mat()?);
        self.wv = PMat::new(store.take(&format!("{prefix}.wv"))?.to_mat()?);
        Ok(())
    }
}

pub fn softmax_rows(scores: &Array2<f64>) -> Array2<f64> {
    let mut out = scores.clone();
    for mut row in out.axis_iter_mut(Axis(0)) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for x in row.iter_mut() {
            *x = (*x - max).exp();
            sum += *x;
        }
        for x in row.iter_mut() {
            *x /= sum;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let scores = Array2::from_shape_fn((5, 7), |_| rng.gen_range(-4.0..4.0));
        let sm = softmax_rows(&scores);
        for row in sm.axis_iter(Axis(0)) {
            let sum: f64 = row.sum();
            assert!((sum - 1.0).abs() < 1e-9, "row sum {sum}");
        }
    }

    #[test]
    fn zero_value_matrix_gives_zero_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut layer = SelfAttentionLayer::new(3, &mut rng);
        layer.wv.v.fill(0.0);
        let x = array![[1.0, -0.5, 0.25], [0.1, 0.2, 0.3]];
        let (out, _) = layer.forward(&x);
        assert!(out.iter().all(|&v| v == 0.0));
    }

    /// Independent brute-force attention evaluation on a 2-position sequence.
    fn brute_force_two_positions(
        wq: &Array2<f64>,
        wk: &Array2<f64>,
        wv: &Array2<f64>,
        x: &Array2<f64>,
    ) -> Vec<f64> {
        let d = x.ncols();
        let row = |m: &Array2<f64>, i: usize| -> Vec<f64> {
            (0..d).map(|j| (0..d).map(|k| x[[i, k]] * m[[k, j]]).sum()).collect()
        };
        let q0 = row(wq, 0);
        let k: Vec<Vec<f64>> = (0..x.nrows()).map(|i| row(wk, i)).collect();
        let v: Vec<Vec<f64>> = (0..x.nrows()).map(|i| row(wv, i)).collect();
        let scale = 1.0 / (d as f64).sqrt();
        let logits: Vec<f64> = k
            .iter()
            .map(|ki| ki.iter().zip(&q0).map(|(a, b)| a * b).sum::<f64>() * scale)
            .collect();
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        (0..d)
            .map(|j| exps.iter().zip(&v).map(|(e, vi)| e / z * vi[j]).sum())
            .collect()
    }

    #[test]
    fn matches_hand_computed_attention_on_two_positions() {
        let wq = array![[0.5, -0.25], [0.1, 0.7]];
        let wk = array![[0.3, 0.2], [-0.6, 0.4]];
        let wv = array![[1.0, 0.0], [0.5, -0.5]];
        let layer = SelfAttentionLayer {
            wq: PMat::new(wq.clone()),
            wk: PMat::new(wk.clone()),
            wv: PMat::new(wv.clone()),
            dim: 2,
        };
        let x = array![[0.2, -0.1], [0.9, 0.4]];
        let (out, _) = layer.forward(&x);
        let expect = brute_force_two_positions(&wq, &wk, &wv, &x);
        for j in 0..2 {
            assert!((out[[0, j]] - expect[j]).abs() < 1e-12);
        }
    }
}
