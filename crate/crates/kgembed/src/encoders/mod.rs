//! Attribute encoders: map raw entity payloads to embedding vectors.
//!
//! Three stand-in architectures are provided, one per attribute modality
//! style:
//!
//! - [`SequenceMeanEncoder`]: frozen per-token embeddings, mean-pooled over
//!   the sequence, then an affine projection. Only the projection trains.
//! - [`SequenceAttentionEncoder`]: frozen per-token embeddings, one
//!   single-head self-attention layer (no residual, no positions), output
//!   taken at the BOS position, then an affine projection. The attention
//!   weights and projection train.
//! - [`TextEncoder`]: trainable token embeddings and a small stack of
//!   attention + feed-forward blocks with residual connections; output taken
//!   at the BOS position, then an affine projection. Everything trains.
//!   Inputs are truncated to `max_len` tokens.
//!
//! Encoding with fixed parameters is a pure read and safe to call
//! concurrently; parameter updates require exclusive access.

pub mod attention;
pub mod params;
pub mod tokenizer;

pub use attention::{softmax_rows, AttentionCache, SelfAttentionLayer};
pub use params::{ParamView, PMat, PVec, Tensor, TensorStore};
pub use tokenizer::{tokenize, TokenVocabulary, TokenizerKind, BOS_INDEX, UNK_INDEX};

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-token embedding table that is never updated during training.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenTokenEmbeddings {
    table: Array2<f64>,
}

impl FrozenTokenEmbeddings {
    /// Seeded-random table, bitwise constant afterwards.
    pub fn seeded(vocab_size: usize, token_dim: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (token_dim as f64).sqrt();
        let table = Array2::from_shape_fn((vocab_size, token_dim), |_| rng.gen_range(-bound..bound));
        Self { table }
    }

    pub fn row(&self, index: usize) -> ndarray::ArrayView1<'_, f64> {
        self.table.row(index)
    }

    pub fn table(&self) -> &Array2<f64> {
        &self.table
    }

    fn gather(&self, ids: &[usize]) -> Array2<f64> {
        let mut x = Array2::zeros((ids.len(), self.table.ncols()));
        for (i, &id) in ids.iter().enumerate() {
            x.row_mut(i).assign(&self.table.row(id));
        }
        x
    }
}

/// Affine map from the encoder width to the stored embedding width.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionLayer {
    pub w: PMat,
    pub b: PVec,
}

impl ProjectionLayer {
    pub fn new(out_len: usize, in_len: usize, rng: &mut impl Rng) -> Self {
        Self {
            w: PMat::uniform(out_len, in_len, in_len, rng),
            b: PVec::zeros(out_len),
        }
    }

    pub fn forward(&self, x: &Array1<f64>) -> Array1<f64> {
        self.w.v.dot(x) + &self.b.v
    }

    /// Accumulate parameter gradients; returns the gradient w.r.t. `x`.
    pub fn backward(&mut self, x: &Array1<f64>, upstream: &Array1<f64>) -> Array1<f64> {
        for (i, &u) in upstream.iter().enumerate() {
            self.b.g[i] += u;
            for (j, &xj) in x.iter().enumerate() {
                self.w.g[[i, j]] += u * xj;
            }
        }
        self.w.v.t().dot(upstream)
    }

    pub fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(ParamView<'_>)) {
        self.w.visit(&format!("{prefix}.w"), f);
        self.b.visit(&format!("{prefix}.b"), f);
    }

    pub fn zero_grad(&mut self) {
        self.w.zero_grad();
        self.b.zero_grad();
    }

    pub fn export_tensors(&self, prefix: &str, store: &mut TensorStore) {
        store.put(format!("{prefix}.w"), Tensor::from_mat(&self.w.v));
        store.put(format!("{prefix}.b"), Tensor::from_vec1(&self.b.v));
    }

    pub fn import_tensors(&mut self, prefix: &str, store: &mut TensorStore) -> Result<()> {
        self.w = PMat::new(store.take(&format!("{prefix}.w"))?.to_mat()?);
        self.b = PVec::new(store.take(&format!("{prefix}.b"))?.to_vec1()?);
        Ok(())
    }
}

/// Mean-pooled frozen token embeddings followed by a projection.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceMeanEncoder {
    vocab: TokenVocabulary,
    frozen: FrozenTokenEmbeddings,
    proj: ProjectionLayer,
}

#[derive(Debug, Clone)]
pub struct MeanCache {
    mean: Array1<f64>,
}

impl SequenceMeanEncoder {
    pub fn new(vocab: TokenVocabulary, token_dim: usize, out_len: usize, rng: &mut impl Rng) -> Self {
        let frozen = FrozenTokenEmbeddings::seeded(vocab.len(), token_dim, rng);
        let proj = ProjectionLayer::new(out_len, token_dim, rng);
        Self { vocab, frozen, proj }
    }

    pub fn forward(&self, payload: &str) -> Result<(Vec<f64>, MeanCache)> {
        let ids = self.vocab.encode(payload);
        if ids.is_empty() {
            return Err(Error::EmptyInput("attribute payload tokenized to nothing".into()));
        }
        let mut mean = Array1::zeros(self.frozen.table().ncols());
        for &id in &ids {
            mean += &self.frozen.row(id);
        }
        mean /= ids.len() as f64;
        let out = self.proj.forward(&mean);
        Ok((out.to_vec(), MeanCache { mean }))
    }

    pub fn backward(&mut self, cache: &MeanCache, upstream: &[f64]) {
        let up = Array1::from_vec(upstream.to_vec());
        // frozen table receives no gradient
        let _ = self.proj.backward(&cache.mean, &up);
    }
}

/// Frozen token embeddings, one self-attention layer, BOS-position output.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceAttentionEncoder {
    vocab: TokenVocabulary,
    frozen: FrozenTokenEmbeddings,
    attn: SelfAttentionLayer,
    proj: ProjectionLayer,
}

#[derive(Debug, Clone)]
pub struct AttnEncCache {
    attn: AttentionCache,
    first: Array1<f64>,
    positions: usize,
}

impl SequenceAttentionEncoder {
    pub fn new(vocab: TokenVocabulary, token_dim: usize, out_len: usize, rng: &mut impl Rng) -> Self {
        let frozen = FrozenTokenEmbeddings::seeded(vocab.len(), token_dim, rng);
        let attn = SelfAttentionLayer::new(token_dim, rng);
        let proj = ProjectionLayer::new(out_len, token_dim, rng);
        Self { vocab, frozen, attn, proj }
    }

    pub fn forward(&self, payload: &str) -> Result<(Vec<f64>, AttnEncCache)> {
        let mut ids = vec![BOS_INDEX];
        ids.extend(self.vocab.encode(payload));
        if ids.len() == 1 {
            return Err(Error::EmptyInput("attribute payload tokenized to nothing".into()));
        }
        let x = self.frozen.gather(&ids);
        let (out, cache) = self.attn.forward(&x);
        let first = out.row(0).to_owned();
        let projected = self.proj.forward(&first);
        Ok((projected.to_vec(), AttnEncCache { attn: cache, first, positions: ids.len() }))
    }

    pub fn backward(&mut self, cache: &AttnEncCache, upstream: &[f64]) {
        let up = Array1::from_vec(upstream.to_vec());
        let d_first = self.proj.backward(&cache.first, &up);
        let mut d_out = Array2::zeros((cache.positions, d_first.len()));
        d_out.row_mut(0).assign(&d_first);
        // input rows are frozen; discard their gradient
        let _ = self.attn.backward(&cache.attn, &d_out);
    }
}

/// Two-layer feed-forward sublayer with tanh nonlinearity.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedForward {
    w1: PMat,
    b1: PVec,
    w2: PMat,
    b2: PVec,
}

#[derive(Debug, Clone)]
struct FfCache {
    input: Array2<f64>,
    hidden: Array2<f64>,
}

impl FeedForward {
    fn new(dim: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        Self {
            w1: PMat::uniform(hidden, dim, dim, rng),
            b1: PVec::zeros(hidden),
            w2: PMat::uniform(dim, hidden, hidden, rng),
            b2: PVec::zeros(dim),
        }
    }

    fn forward(&self, x: &Array2<f64>) -> (Array2<f64>, FfCache) {
        let mut z = x.dot(&self.w1.v.t());
        z += &self.b1.v;
        let hidden = z.mapv(f64::tanh);
        let mut out = hidden.dot(&self.w2.v.t());
        out += &self.b2.v;
        (out, FfCache { input: x.clone(), hidden })
    }

    fn backward(&mut self, cache: &FfCache, d_out: &Array2<f64>) -> Array2<f64> {
        self.w2.g += &d_out.t().dot(&cache.hidden);
        self.b2.g += &d_out.sum_axis(Axis(0));
        let d_hidden = d_out.dot(&self.w2.v);
        let d_z = &d_hidden * &cache.hidden.mapv(|h| 1.0 - h * h);
        self.w1.g += &d_z.t().dot(&cache.input);
        self.b1.g += &d_z.sum_axis(Axis(0));
        d_z.dot(&self.w1.v)
    }

    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(ParamView<'_>)) {
        self.w1.visit(&format!("{prefix}.w1"), f);
        self.b1.visit(&format!("{prefix}.b1"), f);
        self.w2.visit(&format!("{prefix}.w2"), f);
        self.b2.visit(&format!("{prefix}.b2"), f);
    }

    fn zero_grad(&mut self) {
        self.w1.zero_grad();
        self.b1.zero_grad();
        self.w2.zero_grad();
        self.b2.zero_grad();
    }

    fn export_tensors(&self, prefix: &str, store: &mut TensorStore) {
        store.put(format!("{prefix}.w1"), Tensor::from_mat(&self.w1.v));
        store.put(format!("{prefix}.b1"), Tensor::from_vec1(&self.b1.v));
        store.put(format!("{prefix}.w2"), Tensor::from_mat(&self.w2.v));
        store.put(format!("{prefix}.b2"), Tensor::from_vec1(&self.b2.v));
    }

    fn import_tensors(&mut self, prefix: &str, store: &mut TensorStore) -> Result<()> {
        self.w1 = PMat::new(store.take(&format!("{prefix}.w1"))?.to_mat()?);
        self.b1 = PVec::new(store.take(&format!("{prefix}.b1"))?.to_vec1()?);
        self.w2 = PMat::new(store.take(&format!("{prefix}.w2"))?.to_mat()?);
        self.b2 = PVec::new(store.take(&format!("{prefix}.b2"))?.to_vec1()?);
        Ok(())
    }
}

/// Attention sublayer plus feed-forward sublayer, each with a residual
/// connection.
#[derive(Debug, Clone, PartialEq)]
pub struct TextBlock {
    attn: SelfAttentionLayer,
    ff: FeedForward,
}

#[derive(Debug, Clone)]
struct TextBlockCache {
    attn: AttentionCache,
    ff: FfCache,
}

impl TextBlock {
    fn forward(&self, x: &Array2<f64>) -> (Array2<f64>, TextBlockCache) {
        let (a, attn_cache) = self.attn.forward(x);
        let h = x + &a;
        let (f, ff_cache) = self.ff.forward(&h);
        let y = &h + &f;
        (y, TextBlockCache { attn: attn_cache, ff: ff_cache })
    }

    fn backward(&mut self, cache: &TextBlockCache, d_y: &Array2<f64>) -> Array2<f64> {
        let d_h = d_y + &self.ff.backward(&cache.ff, d_y);
        &d_h + &self.attn.backward(&cache.attn, &d_h)
    }
}

/// Trainable token embeddings with a residual attention stack.
#[derive(Debug, Clone, PartialEq)]
pub struct TextEncoder {
    vocab: TokenVocabulary,
    token_emb: PMat,
    blocks: Vec<TextBlock>,
    proj: ProjectionLayer,
    max_len: usize,
}

#[derive(Debug, Clone)]
pub struct TextCache {
    ids: Vec<usize>,
    blocks: Vec<TextBlockCache>,
    last: Array2<f64>,
}

impl TextEncoder {
    pub fn new(
        vocab: TokenVocabulary,
        token_dim: usize,
        out_len: usize,
        layers: usize,
        max_len: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let token_emb = PMat::uniform(vocab.len(), token_dim, token_dim, rng);
        let blocks = (0..layers)
            .map(|_| TextBlock {
                attn: SelfAttentionLayer::new(token_dim, rng),
                ff: FeedForward::new(token_dim, token_dim, rng),
            })
            .collect();
        let proj = ProjectionLayer::new(out_len, token_dim, rng);
        Self { vocab, token_emb, blocks, proj, max_len }
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn forward(&self, payload: &str) -> Result<(Vec<f64>, TextCache)> {
        let mut ids = vec![BOS_INDEX];
        let tokens = self.vocab.encode(payload);
        if tokens.is_empty() {
            return Err(Error::EmptyInput("attribute payload tokenized to nothing".into()));
        }
        ids.extend(tokens.into_iter().take(self.max_len));
        let mut x = Array2::zeros((ids.len(), self.token_emb.v.ncols()));
        for (i, &id) in ids.iter().enumerate() {
            x.row_mut(i).assign(&self.token_emb.v.row(id));
        }
        let mut caches = Vec::with_capacity(self.blocks.len());
        for block in &self.blocks {
            let (y, cache) = block.forward(&x);
            caches.push(cache);
            x = y;
        }
        let first = x.row(0).to_owned();
        let out = self.proj.forward(&first);
        Ok((out.to_vec(), TextCache { ids, blocks: caches, last: x }))
    }

    pub fn backward(&mut self, cache: &TextCache, upstream: &[f64]) {
        let up = Array1::from_vec(upstream.to_vec());
        let first = cache.last.row(0).to_owned();
        let d_first = self.proj.backward(&first, &up);
        let mut d_x = Array2::zeros(cache.last.raw_dim());
        d_x.row_mut(0).assign(&d_first);
        for (block, bcache) in self.blocks.iter_mut().zip(cache.blocks.iter()).rev() {
            d_x = block.backward(bcache, &d_x);
        }
        for (i, &id) in cache.ids.iter().enumerate() {
            let mut row = self.token_emb.g.row_mut(id);
            row += &d_x.row(i);
        }
    }
}

/// Which encoder architecture a modality uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderKind {
    SequenceMean,
    SequenceAttention,
    Text,
}

impl std::str::FromStr for EncoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sequence_mean" | "mean" => Ok(EncoderKind::SequenceMean),
            "sequence_attention" | "attention" => Ok(EncoderKind::SequenceAttention),
            "text" => Ok(EncoderKind::Text),
            other => Err(Error::InvalidArgument(format!("unknown encoder kind {other:?}"))),
        }
    }
}

/// One registered attribute encoder.
#[derive(Debug, Clone, PartialEq)]
pub enum AttributeEncoder {
    SequenceMean(SequenceMeanEncoder),
    SequenceAttention(SequenceAttentionEncoder),
    Text(TextEncoder),
}

/// Forward-pass intermediates, fed back to `backward`.
#[derive(Debug, Clone)]
pub enum EncodeCache {
    Mean(MeanCache),
    Attention(AttnEncCache),
    Text(TextCache),
}

impl AttributeEncoder {
    pub fn build(
        kind: EncoderKind,
        vocab: TokenVocabulary,
        token_dim: usize,
        out_len: usize,
        layers: usize,
        max_len: usize,
        rng: &mut impl Rng,
    ) -> Self {
        match kind {
            EncoderKind::SequenceMean => {
                AttributeEncoder::SequenceMean(SequenceMeanEncoder::new(vocab, token_dim, out_len, rng))
            }
            EncoderKind::SequenceAttention => AttributeEncoder::SequenceAttention(
                SequenceAttentionEncoder::new(vocab, token_dim, out_len, rng),
            ),
            EncoderKind::Text => {
                AttributeEncoder::Text(TextEncoder::new(vocab, token_dim, out_len, layers, max_len, rng))
            }
        }
    }

    pub fn kind(&self) -> EncoderKind {
        match self {
            AttributeEncoder::SequenceMean(_) => EncoderKind::SequenceMean,
            AttributeEncoder::SequenceAttention(_) => EncoderKind::SequenceAttention,
            AttributeEncoder::Text(_) => EncoderKind::Text,
        }
    }

    pub fn encode(&self, payload: &str) -> Result<(Vec<f64>, EncodeCache)> {
        match self {
            AttributeEncoder::SequenceMean(e) => {
                let (out, c) = e.forward(payload)?;
                Ok((out, EncodeCache::Mean(c)))
            }
            AttributeEncoder::SequenceAttention(e) => {
                let (out, c) = e.forward(payload)?;
                Ok((out, EncodeCache::Attention(c)))
            }
            AttributeEncoder::Text(e) => {
                let (out, c) = e.forward(payload)?;
                Ok((out, EncodeCache::Text(c)))
            }
        }
    }

    pub fn backward(&mut self, cache: &EncodeCache, upstream: &[f64]) {
        match (self, cache) {
            (AttributeEncoder::SequenceMean(e), EncodeCache::Mean(c)) => e.backward(c, upstream),
            (AttributeEncoder::SequenceAttention(e), EncodeCache::Attention(c)) => e.backward(c, upstream),
            (AttributeEncoder::Text(e), EncodeCache::Text(c)) => e.backward(c, upstream),
            _ => panic!("encode cache does not match encoder architecture"),
        }
    }

    pub fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(ParamView<'_>)) {
        match self {
            AttributeEncoder::SequenceMean(e) => e.proj.visit_params(&format!("{prefix}.proj"), f),
            AttributeEncoder::SequenceAttention(e) => {
                e.attn.visit_params(&format!("{prefix}.attn"), f);
                e.proj.visit_params(&format!("{prefix}.proj"), f);
            }
            AttributeEncoder::Text(e) => {
                e.token_emb.visit(&format!("{prefix}.token_emb"), f);
                for (i, block) in e.blocks.iter_mut().enumerate() {
                    block.attn.visit_params(&format!("{prefix}.block{i}.attn"), f);
                    block.ff.visit_params(&format!("{prefix}.block{i}.ff"), f);
                }
                e.proj.visit_params(&format!("{prefix}.proj"), f);
            }
        }
    }

    pub fn zero_grad(&mut self) {
        match self {
            AttributeEncoder::SequenceMean(e) => e.proj.zero_grad(),
            AttributeEncoder::SequenceAttention(e) => {
                e.attn.zero_grad();
                e.proj.zero_grad();
            }
            AttributeEncoder::Text(e) => {
                e.token_emb.zero_grad();
                for block in &mut e.blocks {
                    block.attn.zero_grad();
                    block.ff.zero_grad();
                }
                e.proj.zero_grad();
            }
        }
    }

    /// Raw sequence representation used by the downstream benchmark's
    /// structural feature source: mean-pooled token-embedding rows, without
    /// attention or projection.
    pub fn mean_pooled_tokens(&self, payload: &str) -> Result<Vec<f64>> {
        let (table, ids): (&Array2<f64>, Vec<usize>) = match self {
            AttributeEncoder::SequenceMean(e) => (e.frozen.table(), e.vocab.encode(payload)),
            AttributeEncoder::SequenceAttention(e) => (e.frozen.table(), e.vocab.encode(payload)),
            AttributeEncoder::Text(e) => (&e.token_emb.v, e.vocab.encode(payload)),
        };
        if ids.is_empty() {
            return Err(Error::EmptyInput("attribute payload tokenized to nothing".into()));
        }
        let mut mean = Array1::zeros(table.ncols());
        for &id in &ids {
            mean += &table.row(id);
        }
        mean /= ids.len() as f64;
        Ok(mean.to_vec())
    }

    pub fn token_dim(&self) -> usize {
        match self {
            AttributeEncoder::SequenceMean(e) => e.frozen.table().ncols(),
            AttributeEncoder::SequenceAttention(e) => e.frozen.table().ncols(),
            AttributeEncoder::Text(e) => e.token_emb.v.ncols(),
        }
    }

    pub fn vocab(&self) -> &TokenVocabulary {
        match self {
            AttributeEncoder::SequenceMean(e) => &e.vocab,
            AttributeEncoder::SequenceAttention(e) => &e.vocab,
            AttributeEncoder::Text(e) => &e.vocab,
        }
    }

    /// Frozen token table, when this architecture has one.
    pub fn frozen_table(&self) -> Option<&Array2<f64>> {
        match self {
            AttributeEncoder::SequenceMean(e) => Some(e.frozen.table()),
            AttributeEncoder::SequenceAttention(e) => Some(e.frozen.table()),
            AttributeEncoder::Text(_) => None,
        }
    }

    pub fn export_tensors(&self, prefix: &str, store: &mut TensorStore) {
        match self {
            AttributeEncoder::SequenceMean(e) => {
                store.put(format!("{prefix}.frozen"), Tensor::from_mat(e.frozen.table()));
                e.proj.export_tensors(&format!("{prefix}.proj"), store);
            }
            AttributeEncoder::SequenceAttention(e) => {
                store.put(format!("{prefix}.frozen"), Tensor::from_mat(e.frozen.table()));
                e.attn.export_tensors(&format!("{prefix}.attn"), store);
                e.proj.export_tensors(&format!("{prefix}.proj"), store);
            }
            AttributeEncoder::Text(e) => {
                store.put(format!("{prefix}.token_emb"), Tensor::from_mat(&e.token_emb.v));
                for (i, block) in e.blocks.iter().enumerate() {
                    block.attn.export_tensors(&format!("{prefix}.block{i}.attn"), store);
                    block.ff.export_tensors(&format!("{prefix}.block{i}.ff"), store);
                }
                e.proj.export_tensors(&format!("{prefix}.proj"), store);
            }
        }
    }

    pub fn import_tensors(&mut self, prefix: &str, store: &mut TensorStore) -> Result<()> {
        match self {
            AttributeEncoder::SequenceMean(e) => {
                e.frozen = FrozenTokenEmbeddings { table: store.take(&format!("{prefix}.frozen"))?.to_mat()? };
                e.proj.import_tensors(&format!("{prefix}.proj"), store)?;
            }
            AttributeEncoder::SequenceAttention(e) => {
                e.frozen = FrozenTokenEmbeddings { table: store.take(&format!("{prefix}.frozen"))?.to_mat()? };
                e.attn.import_tensors(&format!("{prefix}.attn"), store)?;
                e.proj.import_tensors(&format!("{prefix}.proj"), store)?;
            }
            AttributeEncoder::Text(e) => {
                e.token_emb = PMat::new(store.take(&format!("{prefix}.token_emb"))?.to_mat()?);
                for i in 0..e.blocks.len() {
                    e.blocks[i].attn.import_tensors(&format!("{prefix}.block{i}.attn"), store)?;
                    e.blocks[i].ff.import_tensors(&format!("{prefix}.block{i}.ff"), store)?;
                }
                e.proj.import_tensors(&format!("{prefix}.proj"), store)?;
            }
        }
        Ok(())
    }
}
