//! Model state: lookup tables, registered attribute encoders, and the
//! entity -> embedding dispatch.
//!
//! Entities without attributes, and all relations, are embedded by rows of
//! trainable lookup tables. Entities with attribute data are embedded by the
//! encoder registered for their modality. Lookup tables cannot encode unseen
//! ids; attribute encoders can, as long as a payload is supplied.

use std::collections::{BTreeMap, HashMap, HashSet};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoders::{
    AttributeEncoder, EncodeCache, EncoderKind, ParamView, PMat, Tensor, TensorStore,
    TokenVocabulary, TokenizerKind,
};
use crate::error::{Error, Result};
use crate::graph::{EntityId, KnowledgeGraph, ModalityId, RelationId, Triple};
use crate::scoring::{EmbeddingVector, ScorerKind, Space};

/// Trainable embedding rows for attribute-less entities and for relations.
#[derive(Debug, Clone)]
pub struct LookupTable {
    pub(crate) we: PMat,
    pub(crate) wr: PMat,
    /// entity index -> row of `we`
    pub(crate) entity_rows: HashMap<u32, usize>,
    /// row of `we` -> entity index
    pub(crate) row_entities: Vec<u32>,
    pub(crate) entity_space: Space,
    pub(crate) relation_space: Space,
    pub(crate) touched_entity_rows: HashSet<usize>,
    pub(crate) touched_relation_rows: HashSet<usize>,
}

impl LookupTable {
    fn new(
        entities: &[u32],
        num_relations: usize,
        scorer: ScorerKind,
        dim: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let entity_space = scorer.entity_space(dim);
        let relation_space = scorer.relation_space(dim);
        let bound = 6.0 / (dim as f64).sqrt();
        let we = PMat::new(ndarray::Array2::from_shape_fn(
            (entities.len(), entity_space.param_len()),
            |_| rng.gen_range(-bound..bound),
        ));
        let wr = match relation_space {
            // phases hold the unit-modulus constraint by construction
            Space::Phase(_) => PMat::new(ndarray::Array2::from_shape_fn(
                (num_relations, relation_space.param_len()),
                |_| rng.gen_range(0.0..(2.0 * std::f64::consts::PI)),
            )),
            _ => PMat::new(ndarray::Array2::from_shape_fn(
                (num_relations, relation_space.param_len()),
                |_| rng.gen_range(-bound..bound),
            )),
        };
        let entity_rows = entities.iter().enumerate().map(|(row, &e)| (e, row)).collect();
        Self {
            we,
            wr,
            entity_rows,
            row_entities: entities.to_vec(),
            entity_space,
            relation_space,
            touched_entity_rows: HashSet::new(),
            touched_relation_rows: HashSet::new(),
        }
    }

    /// Row of `we` for an entity. Unknown ids are an error: lookup tables
    /// cannot encode entities that were not registered before training.
    pub fn encode_entity(&self, id: EntityId) -> Result<EmbeddingVector> {
        let row = self.entity_row(id)?;
        EmbeddingVector::new(self.entity_space, self.we.v.row(row).to_vec())
    }

    pub fn encode_relation(&self, id: RelationId) -> Result<EmbeddingVector> {
        if id.0 as usize >= self.wr.v.nrows() {
            return Err(Error::UnknownId(format!("relation index {}", id.0)));
        }
        EmbeddingVector::new(self.relation_space, self.wr.v.row(id.0 as usize).to_vec())
    }

    pub fn entity_row(&self, id: EntityId) -> Result<usize> {
        self.entity_rows.get(&id.0).copied().ok_or_else(|| {
            Error::UnknownId(format!(
                "entity index {} has no lookup row (embeddings for unseen entities are not defined)",
                id.0
            ))
        })
    }

    pub fn num_entity_rows(&self) -> usize {
        self.we.v.nrows()
    }
}

/// How one entity was embedded, for routing the backward pass.
#[derive(Debug)]
pub enum EmbSource {
    LookupRow(usize),
    Encoder { modality: u8, cache: EncodeCache },
}

/// Optimizer selection. Plain SGD is the canonical update rule; the adaptive
/// first/second-moment optimizer is an extension behind the same step
/// interface, default off.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    #[default]
    Sgd,
    Adam,
}

#[derive(Debug, Clone, Default)]
pub struct AdamState {
    pub(crate) m: BTreeMap<String, Vec<f64>>,
    pub(crate) v: BTreeMap<String, Vec<f64>>,
    pub(crate) t: u64,
}

/// Configuration for one attribute encoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderSpec {
    pub modality: String,
    pub kind: EncoderKind,
    pub tokenizer: TokenizerKind,
    #[serde(default = "default_layers")]
    pub layers: usize,
    #[serde(default = "default_max_len")]
    pub max_len: usize,
}

fn default_layers() -> usize {
    1
}

fn default_max_len() -> usize {
    64
}

/// Model architecture: scorer, dimension, and per-modality encoders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub scorer: ScorerKind,
    pub dim: usize,
    /// Token embedding width; defaults to `2 * dim`.
    pub token_dim: Option<usize>,
    pub encoders: Vec<EncoderSpec>,
    pub seed: u64,
}

impl ModelSpec {
    pub fn token_dim(&self) -> usize {
        self.token_dim.unwrap_or(2 * self.dim)
    }
}

/// Full trainable state of an embedding model.
#[derive(Debug, Clone)]
pub struct ModelState {
    pub(crate) scorer: ScorerKind,
    pub(crate) dim: usize,
    pub(crate) token_dim: usize,
    pub(crate) lookup: LookupTable,
    /// modality id -> encoder
    pub(crate) encoders: BTreeMap<u8, AttributeEncoder>,
    pub(crate) encoder_specs: BTreeMap<u8, EncoderSpec>,
    pub(crate) encoder_touched: BTreeMap<u8, bool>,
    /// entity index -> (modality id, payload)
    pub(crate) attributes: HashMap<u32, (u8, String)>,
    pub(crate) modalities: Vec<String>,
    pub(crate) entity_names: Vec<String>,
    pub(crate) relation_names: Vec<String>,
    pub(crate) entity_types: Vec<Option<String>>,
    pub(crate) optimizer: OptimizerKind,
    pub(crate) adam: AdamState,
}

impl ModelState {
    /// Build a model over `kg` with the given spec. Every modality carrying
    /// attribute data in `kg` must have exactly one encoder spec.
    pub fn build(kg: &KnowledgeGraph, spec: &ModelSpec) -> Result<Self> {
        if spec.dim == 0 {
            return Err(Error::InvalidArgument("embedding dimension must be > 0".into()));
        }
        let mut by_modality: BTreeMap<u8, &EncoderSpec> = BTreeMap::new();
        for enc in &spec.encoders {
            let mid = kg
                .modality_id(&enc.modality)
                .ok_or_else(|| Error::UnknownModality {
                    name: enc.modality.clone(),
                    registered: kg.modalities().to_vec(),
                })?;
            if by_modality.insert(mid.0, enc).is_some() {
                return Err(Error::InvalidArgument(format!(
                    "modality {:?} has more than one encoder spec",
                    enc.modality
                )));
            }
        }
        // every modality present in the data must be covered
        for record in kg.attributes().values() {
            if !by_modality.contains_key(&record.modality.0) {
                let name = kg.modality_name(record.modality).unwrap_or("?");
                return Err(Error::InvalidArgument(format!(
                    "no encoder registered for modality {name:?}"
                )));
            }
        }

        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let token_dim = spec.token_dim();
        let out_len = spec.scorer.entity_space(spec.dim).param_len();

        // lookup rows for attribute-less entities, in entity-index order
        let lookup_entities: Vec<u32> = kg
            .entities()
            .filter(|&e| kg.modality_of(e) == ModalityId::NONE)
            .map(|e| e.0)
            .collect();
        let lookup = LookupTable::new(&lookup_entities, kg.num_relations(), spec.scorer, spec.dim, &mut rng);

        // per-modality token vocabularies from payloads in entity-index order
        let mut encoders = BTreeMap::new();
        let mut encoder_specs = BTreeMap::new();
        let mut encoder_touched = BTreeMap::new();
        for (&mid, enc_spec) in &by_modality {
            let mut payloads: Vec<(u32, &str)> = kg
                .attributes()
                .values()
                .filter(|rec| rec.modality.0 == mid)
                .map(|rec| (rec.entity.0, rec.payload.as_str()))
                .collect();
            payloads.sort_by_key(|&(e, _)| e);
            let vocab =
                TokenVocabulary::build(enc_spec.tokenizer, payloads.iter().map(|&(_, p)| p));
            let encoder = AttributeEncoder::build(
                enc_spec.kind,
                vocab,
                token_dim,
                out_len,
                enc_spec.layers,
                enc_spec.max_len,
                &mut rng,
            );
            encoders.insert(mid, encoder);
            encoder_specs.insert(mid, (*enc_spec).clone());
            encoder_touched.insert(mid, false);
        }

        let attributes = kg
            .attributes()
            .values()
            .map(|rec| (rec.entity.0, (rec.modality.0, rec.payload.clone())))
            .collect();

        Ok(Self {
            scorer: spec.scorer,
            dim: spec.dim,
            token_dim,
            lookup,
            encoders,
            encoder_specs,
            encoder_touched,
            attributes,
            modalities: kg.modalities().to_vec(),
            entity_names: kg.entity_vocab().names().to_vec(),
            relation_names: kg.relation_vocab().names().to_vec(),
            entity_types: kg.entities().map(|e| kg.entity_type(e).map(String::from)).collect(),
            optimizer: OptimizerKind::Sgd,
            adam: AdamState::default(),
        })
    }

    /// Build a lookup-table-only model: every entity gets a row and
    /// attributes are ignored. Used as stage 1 of pretraining and as the
    /// plain baseline.
    pub fn build_lookup_only(kg: &KnowledgeGraph, scorer: ScorerKind, dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("embedding dimension must be > 0".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let all: Vec<u32> = kg.entities().map(|e| e.0).collect();
        let lookup = LookupTable::new(&all, kg.num_relations(), scorer, dim, &mut rng);
        Ok(Self {
            scorer,
            dim,
            token_dim: 2 * dim,
            lookup,
            encoders: BTreeMap::new(),
            encoder_specs: BTreeMap::new(),
            encoder_touched: BTreeMap::new(),
            attributes: HashMap::new(),
            modalities: kg.modalities().to_vec(),
            entity_names: kg.entity_vocab().names().to_vec(),
            relation_names: kg.relation_vocab().names().to_vec(),
            entity_types: kg.entities().map(|e| kg.entity_type(e).map(String::from)).collect(),
            optimizer: OptimizerKind::Sgd,
            adam: AdamState::default(),
        })
    }

    pub fn scorer(&self) -> ScorerKind {
        self.scorer
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_entities(&self) -> usize {
        self.entity_names.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relation_names.len()
    }

    pub fn relation_names(&self) -> &[String] {
        &self.relation_names
    }

    pub fn lookup(&self) -> &LookupTable {
        &self.lookup
    }

    pub fn entity_type(&self, e: EntityId) -> Option<&str> {
        self.entity_types.get(e.0 as usize).and_then(|t| t.as_deref())
    }

    pub fn entity_name(&self, e: EntityId) -> &str {
        &self.entity_names[e.0 as usize]
    }

    pub fn entity_id(&self, name: &str) -> Option<EntityId> {
        self.entity_names.iter().position(|n| n == name).map(|i| EntityId(i as u32))
    }

    pub fn set_optimizer(&mut self, kind: OptimizerKind) {
        self.optimizer = kind;
    }

    pub fn optimizer(&self) -> OptimizerKind {
        self.optimizer
    }

    pub fn encoder(&self, modality: u8) -> Option<&AttributeEncoder> {
        self.encoders.get(&modality)
    }

    pub fn attribute_of(&self, e: EntityId) -> Option<(u8, &str)> {
        self.attributes.get(&e.0).map(|(m, p)| (*m, p.as_str()))
    }

    /// Modality dispatch: attribute-less entities resolve through the lookup
    /// table, attributed entities through their modality's encoder.
    pub fn emb(&self, entity: EntityId) -> Result<EmbeddingVector> {
        match self.attributes.get(&entity.0) {
            None => self.lookup.encode_entity(entity),
            Some((modality, payload)) => {
                let encoder = self.encoders.get(modality).ok_or_else(|| {
                    Error::InvalidArgument(format!("no encoder for modality id {modality}"))
                })?;
                let (out, _) = encoder.encode(payload)?;
                EmbeddingVector::new(self.scorer.entity_space(self.dim), out)
            }
        }
    }

    /// `emb` plus the information needed to route gradients back.
    pub fn emb_with_source(&self, entity: EntityId) -> Result<(EmbeddingVector, EmbSource)> {
        match self.attributes.get(&entity.0) {
            None => {
                let row = self.lookup.entity_row(entity)?;
                let v = EmbeddingVector::new(self.scorer.entity_space(self.dim), self.lookup.we.v.row(row).to_vec())?;
                Ok((v, EmbSource::LookupRow(row)))
            }
            Some((modality, payload)) => {
                let encoder = self.encoders.get(modality).ok_or_else(|| {
                    Error::InvalidArgument(format!("no encoder for modality id {modality}"))
                })?;
                let (out, cache) = encoder.encode(payload)?;
                let v = EmbeddingVector::new(self.scorer.entity_space(self.dim), out)?;
                Ok((v, EmbSource::Encoder { modality: *modality, cache }))
            }
        }
    }

    pub fn rel_emb(&self, r: RelationId) -> Result<EmbeddingVector> {
        self.lookup.encode_relation(r)
    }

    /// Accumulate the gradient of one embedded entity.
    pub fn backward_entity(&mut self, source: &EmbSource, upstream: &[f64]) {
        match source {
            EmbSource::LookupRow(row) => {
                let mut g = self.lookup.we.g.row_mut(*row);
                for (gi, &u) in g.iter_mut().zip(upstream.iter()) {
                    *gi += u;
                }
                self.lookup.touched_entity_rows.insert(*row);
            }
            EmbSource::Encoder { modality, cache } => {
                if let Some(encoder) = self.encoders.get_mut(modality) {
                    encoder.backward(cache, upstream);
                    self.encoder_touched.insert(*modality, true);
                }
            }
        }
    }

    pub fn backward_relation(&mut self, r: RelationId, upstream: &[f64]) {
        let row = r.0 as usize;
        let mut g = self.lookup.wr.g.row_mut(row);
        for (gi, &u) in g.iter_mut().zip(upstream.iter()) {
            *gi += u;
        }
        self.lookup.touched_relation_rows.insert(row);
    }

    /// Score one triple with current parameters.
    pub fn score_triple(&self, t: &Triple) -> Result<f64> {
        let h = self.emb(t.head)?;
        let r = self.rel_emb(t.relation)?;
        let tl = self.emb(t.tail)?;
        Ok(self.scorer.score_params(h.as_slice(), r.as_slice(), tl.as_slice()))
    }

    /// Embeddings of every entity, as raw parameter vectors. Used by ranking
    /// evaluation, which scores all candidates per triple.
    pub fn all_entity_params(&self) -> Result<Vec<Vec<f64>>> {
        (0..self.num_entities() as u32)
            .map(|e| self.emb(EntityId(e)).map(EmbeddingVector::into_vec))
            .collect()
    }

    /// Visit every parameter touched since the last step: touched lookup
    /// rows, touched relation rows, and all parameters of touched encoders.
    pub(crate) fn visit_touched(&mut self, f: &mut dyn FnMut(ParamView<'_>)) {
        let mut entity_rows: Vec<usize> = self.lookup.touched_entity_rows.iter().copied().collect();
        entity_rows.sort_unstable();
        for row in entity_rows {
            let name = format!("we.{row}");
            let value = self.lookup.we.v.row_mut(row).into_slice().expect("contiguous row");
            let grad = self.lookup.we.g.row_mut(row).into_slice().expect("contiguous row");
            f(ParamView { name, value, grad });
        }
        let mut relation_rows: Vec<usize> = self.lookup.touched_relation_rows.iter().copied().collect();
        relation_rows.sort_unstable();
        for row in relation_rows {
            let name = format!("wr.{row}");
            let value = self.lookup.wr.v.row_mut(row).into_slice().expect("contiguous row");
            let grad = self.lookup.wr.g.row_mut(row).into_slice().expect("contiguous row");
            f(ParamView { name, value, grad });
        }
        let touched: Vec<u8> = self
            .encoder_touched
            .iter()
            .filter(|(_, &t)| t)
            .map(|(&m, _)| m)
            .collect();
        for m in touched {
            if let Some(enc) = self.encoders.get_mut(&m) {
                enc.visit_params(&format!("enc{m}"), f);
            }
        }
    }

    /// Visit every trainable parameter (used by tests and full-decay steps).
    pub fn visit_all_params(&mut self, f: &mut dyn FnMut(ParamView<'_>)) {
        self.lookup.we.visit("we", f);
        self.lookup.wr.visit("wr", f);
        for (m, enc) in self.encoders.iter_mut() {
            enc.visit_params(&format!("enc{m}"), f);
        }
    }

    pub fn zero_grad(&mut self) {
        self.lookup.we.zero_grad();
        self.lookup.wr.zero_grad();
        for enc in self.encoders.values_mut() {
            enc.zero_grad();
        }
        self.lookup.touched_entity_rows.clear();
        self.lookup.touched_relation_rows.clear();
        for t in self.encoder_touched.values_mut() {
            *t = false;
        }
    }

    pub(crate) fn adam_tick(&mut self) -> u64 {
        self.adam.t += 1;
        self.adam.t
    }

    pub(crate) fn adam_buffers(&mut self, name: &str, len: usize) -> (&mut [f64], &mut [f64]) {
        let AdamState { m, v, .. } = &mut self.adam;
        let mb = m.entry(name.to_string()).or_insert_with(|| vec![0.0; len]);
        let vb = v.entry(name.to_string()).or_insert_with(|| vec![0.0; len]);
        (mb.as_mut_slice(), vb.as_mut_slice())
    }

    /// Copy lookup rows from a (typically lookup-only) model trained earlier:
    /// rows for entities this model also resolves by lookup, and all relation
    /// rows. Scorer kind and dimension must match.
    pub fn transfer_lookup_from(&mut self, other: &ModelState) -> Result<()> {
        if self.scorer != other.scorer || self.dim != other.dim {
            return Err(Error::DimensionMismatch(format!(
                "cannot transfer rows between {}/{} and {}/{}",
                other.scorer.name(),
                other.dim,
                self.scorer.name(),
                self.dim
            )));
        }
        if self.relation_names != other.relation_names {
            return Err(Error::InvalidArgument(
                "relation vocabularies differ between stages".into(),
            ));
        }
        for (&entity, &row) in &self.lookup.entity_rows {
            if let Ok(src_row) = other.lookup.entity_row(EntityId(entity)) {
                self.lookup.we.v.row_mut(row).assign(&other.lookup.we.v.row(src_row));
            }
        }
        self.lookup.wr.v.assign(&other.lookup.wr.v);
        Ok(())
    }

    /// All tensors for checkpoint serialization.
    pub(crate) fn export_tensors(&self) -> TensorStore {
        let mut store = TensorStore::default();
        store.put("we", Tensor::from_mat(&self.lookup.we.v));
        store.put("wr", Tensor::from_mat(&self.lookup.wr.v));
        for (m, enc) in &self.encoders {
            enc.export_tensors(&format!("enc{m}"), &mut store);
        }
        for (name, buf) in &self.adam.m {
            store.put(format!("adam_m.{name}"), Tensor { shape: vec![buf.len()], data: buf.clone() });
        }
        for (name, buf) in &self.adam.v {
            store.put(format!("adam_v.{name}"), Tensor { shape: vec![buf.len()], data: buf.clone() });
        }
        store
    }
}
