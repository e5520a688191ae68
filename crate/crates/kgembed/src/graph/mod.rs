//! Knowledge graphs with partial, multimodal attribute data.
//!
//! Entities and relations are opaque string identifiers mapped to dense
//! integer indices in first-appearance order. Graph structures are immutable
//! after load and safe for concurrent reads.

mod degree;
mod io;
mod split;

pub use degree::{degree_counts, degree_table, DegreeRow, DegreeTable};
pub use io::{
    attach_attributes, ingest_triples, load_benchmark_pairs, load_entity_types, read_split_bundle,
    write_split_bundle, AttachStats, SplitManifest,
};
pub use split::{decouple_and_split, SplitBundle};

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense index of an entity in a loaded graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EntityId(pub u32);

/// Dense index of a relation in a loaded graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RelationId(pub u32);

/// Modality of an attribute payload. `0` is reserved for "no attribute";
/// registered modalities are numbered from 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModalityId(pub u8);

impl ModalityId {
    pub const NONE: ModalityId = ModalityId(0);
}

/// A directed typed edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
}

impl Triple {
    pub fn new(head: EntityId, relation: RelationId, tail: EntityId) -> Self {
        Self { head, relation, tail }
    }

    fn key(&self) -> (u32, u32, u32) {
        (self.head.0, self.relation.0, self.tail.0)
    }
}

/// String identifier <-> dense index bijection, stable in first-appearance
/// order for a loaded graph.
#[derive(Debug, Clone, Default)]
pub struct Vocab {
    names: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocab {
    pub fn intern(&mut self, name: &str) -> u32 {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        let i = self.names.len() as u32;
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), i);
        i
    }

    pub fn get(&self, name: &str) -> Option<u32> {
        self.index.get(name).copied()
    }

    pub fn name(&self, i: u32) -> &str {
        &self.names[i as usize]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn from_names(names: Vec<String>) -> Self {
        let index = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i as u32))
            .collect();
        Self { names, index }
    }
}

/// One attribute record: at most one per entity, payload non-empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeRecord {
    pub entity: EntityId,
    pub modality: ModalityId,
    pub payload: String,
}

/// A knowledge graph with an optional entity-type labeling and a partial
/// entity -> attribute map.
#[derive(Debug, Clone)]
pub struct KnowledgeGraph {
    entity_vocab: Vocab,
    relation_vocab: Vocab,
    triples: Vec<Triple>,
    triple_set: HashSet<(u32, u32, u32)>,
    entity_types: Vec<Option<String>>,
    attributes: HashMap<EntityId, AttributeRecord>,
    modalities: Vec<String>,
}

impl KnowledgeGraph {
    pub fn new() -> Self {
        Self {
            entity_vocab: Vocab::default(),
            relation_vocab: Vocab::default(),
            triples: Vec::new(),
            triple_set: HashSet::new(),
            entity_types: Vec::new(),
            attributes: HashMap::new(),
            modalities: Vec::new(),
        }
    }

    /// Build a graph directly from string triples; duplicates are dropped.
    pub fn from_string_triples<'a>(rows: impl IntoIterator<Item = (&'a str, &'a str, &'a str)>) -> Self {
        let mut kg = Self::new();
        for (h, r, t) in rows {
            kg.add_triple_str(h, r, t);
        }
        kg
    }

    /// Intern identifiers and insert the triple unless it is a duplicate.
    /// Returns true if the triple was new.
    pub fn add_triple_str(&mut self, head: &str, relation: &str, tail: &str) -> bool {
        let h = self.intern_entity(head);
        let r = RelationId(self.relation_vocab.intern(relation));
        let t = self.intern_entity(tail);
        let triple = Triple::new(h, r, t);
        if self.triple_set.insert(triple.key()) {
            self.triples.push(triple);
            true
        } else {
            false
        }
    }

    fn intern_entity(&mut self, name: &str) -> EntityId {
        let i = self.entity_vocab.intern(name);
        if i as usize >= self.entity_types.len() {
            self.entity_types.push(None);
        }
        EntityId(i)
    }

    /// Register an attribute modality name; ids are assigned from 1 in
    /// registration order. Re-registering a name returns its existing id.
    pub fn register_modality(&mut self, name: &str) -> ModalityId {
        if let Some(pos) = self.modalities.iter().position(|m| m == name) {
            return ModalityId(pos as u8 + 1);
        }
        self.modalities.push(name.to_string());
        ModalityId(self.modalities.len() as u8)
    }

    pub fn modality_id(&self, name: &str) -> Option<ModalityId> {
        self.modalities
            .iter()
            .position(|m| m == name)
            .map(|p| ModalityId(p as u8 + 1))
    }

    pub fn modality_name(&self, id: ModalityId) -> Option<&str> {
        if id.0 == 0 {
            return None;
        }
        self.modalities.get(id.0 as usize - 1).map(|s| s.as_str())
    }

    pub fn modalities(&self) -> &[String] {
        &self.modalities
    }

    /// Attach one attribute record. The entity must exist; the modality must
    /// be registered. Returns false if the entity already had a record (the
    /// existing record is kept).
    pub fn set_attribute(&mut self, entity: EntityId, modality: ModalityId, payload: &str) -> Result<bool> {
        if entity.0 as usize >= self.num_entities() {
            return Err(Error::UnknownId(format!("entity index {}", entity.0)));
        }
        if modality.0 == 0 || modality.0 as usize > self.modalities.len() {
            return Err(Error::InvalidArgument(format!("modality id {} not registered", modality.0)));
        }
        if payload.is_empty() {
            return Err(Error::EmptyInput("attribute payload".into()));
        }
        if self.attributes.contains_key(&entity) {
            return Ok(false);
        }
        self.attributes.insert(
            entity,
            AttributeRecord { entity, modality, payload: payload.to_string() },
        );
        Ok(true)
    }

    pub fn set_entity_type(&mut self, entity: EntityId, ty: &str) {
        self.entity_types[entity.0 as usize] = Some(ty.to_string());
    }

    pub fn entity_type(&self, entity: EntityId) -> Option<&str> {
        self.entity_types[entity.0 as usize].as_deref()
    }

    pub fn has_entity_types(&self) -> bool {
        self.entity_types.iter().any(|t| t.is_some())
    }

    pub fn attribute(&self, entity: EntityId) -> Option<&AttributeRecord> {
        self.attributes.get(&entity)
    }

    /// Modality of an entity's attribute data; `ModalityId::NONE` when the
    /// entity has no attributes.
    pub fn modality_of(&self, entity: EntityId) -> ModalityId {
        self.attributes.get(&entity).map_or(ModalityId::NONE, |a| a.modality)
    }

    pub fn attributes(&self) -> &HashMap<EntityId, AttributeRecord> {
        &self.attributes
    }

    pub fn num_entities(&self) -> usize {
        self.entity_vocab.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relation_vocab.len()
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn contains_triple(&self, t: &Triple) -> bool {
        self.triple_set.contains(&t.key())
    }

    pub fn entity_id(&self, name: &str) -> Option<EntityId> {
        self.entity_vocab.get(name).map(EntityId)
    }

    pub fn relation_id(&self, name: &str) -> Option<RelationId> {
        self.relation_vocab.get(name).map(RelationId)
    }

    pub fn entity_name(&self, id: EntityId) -> &str {
        self.entity_vocab.name(id.0)
    }

    pub fn relation_name(&self, id: RelationId) -> &str {
        self.relation_vocab.name(id.0)
    }

    pub fn entity_vocab(&self) -> &Vocab {
        &self.entity_vocab
    }

    pub fn relation_vocab(&self) -> &Vocab {
        &self.relation_vocab
    }

    pub fn entities(&self) -> impl Iterator<Item = EntityId> + '_ {
        (0..self.num_entities() as u32).map(EntityId)
    }
}

impl Default for KnowledgeGraph {
    fn default() -> Self {
        Self::new()
    }
}

/// An unordered pair of entity identifiers with a task label. Entities
/// referenced by a benchmark need not appear in the KG.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkPair {
    pub a: String,
    pub b: String,
    pub task: String,
}

/// A collection of benchmark pairs used for decoupling and for the
/// downstream pair-classification harness.
#[derive(Debug, Clone, Default)]
pub struct BenchmarkPairs {
    pairs: Vec<BenchmarkPair>,
    seen: HashSet<(String, String)>,
}

impl BenchmarkPairs {
    pub fn new() -> Self {
        Self::default()
    }

    /// Insert a pair; unordered duplicates are dropped.
    pub fn insert(&mut self, a: &str, b: &str, task: &str) -> bool {
        let key = Self::unordered_key(a, b);
        if !self.seen.insert(key) {
            return false;
        }
        self.pairs.push(BenchmarkPair { a: a.to_string(), b: b.to_string(), task: task.to_string() });
        true
    }

    fn unordered_key(a: &str, b: &str) -> (String, String) {
        if a <= b {
            (a.to_string(), b.to_string())
        } else {
            (b.to_string(), a.to_string())
        }
    }

    pub fn contains_unordered(&self, a: &str, b: &str) -> bool {
        self.seen.contains(&Self::unordered_key(a, b))
    }

    pub fn pairs(&self) -> &[BenchmarkPair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Pairs mapped to KG entity indices, as unordered index pairs. Pairs
    /// whose entities are not both in the KG are skipped (they cannot occur
    /// in any triple).
    pub fn index_pairs(&self, kg: &KnowledgeGraph) -> HashSet<(u32, u32)> {
        let mut set = HashSet::new();
        for p in &self.pairs {
            if let (Some(a), Some(b)) = (kg.entity_id(&p.a), kg.entity_id(&p.b)) {
                set.insert((a.0.min(b.0), a.0.max(b.0)));
            }
        }
        set
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vocab_is_first_appearance_and_bijective() {
        let kg = KnowledgeGraph::from_string_triples([("a", "r", "b"), ("b", "s", "c"), ("a", "s", "c")]);
        assert_eq!(kg.num_entities(), 3);
        assert_eq!(kg.entity_id("a"), Some(EntityId(0)));
        assert_eq!(kg.entity_id("b"), Some(EntityId(1)));
        assert_eq!(kg.entity_id("c"), Some(EntityId(2)));
        assert_eq!(kg.entity_name(EntityId(1)), "b");
        assert_eq!(kg.num_relations(), 2);
    }

    #[test]
    fn duplicate_triples_are_dropped() {
        let kg = KnowledgeGraph::from_string_triples([("a", "r", "b"), ("a", "r", "b")]);
        assert_eq!(kg.num_entities(), 2);
        assert_eq!(kg.num_relations(), 1);
        assert_eq!(kg.triples().len(), 1);
    }

    #[test]
    fn entity_counted_once_across_lines() {
        let kg = KnowledgeGraph::from_string_triples([("a", "r", "b"), ("a", "r", "c"), ("a", "s", "d")]);
        assert_eq!(kg.num_entities(), 4);
    }

    #[test]
    fn attribute_is_partial_function() {
        let mut kg = KnowledgeGraph::from_string_triples([("a", "r", "b"), ("b", "r", "c")]);
        let m = kg.register_modality("protein");
        kg.set_attribute(EntityId(0), m, "MKV").unwrap();
        assert_eq!(kg.modality_of(EntityId(0)), m);
        assert_eq!(kg.modality_of(EntityId(1)), ModalityId::NONE);
        // duplicate record keeps the first
        assert!(!kg.set_attribute(EntityId(0), m, "OTHER").unwrap());
        assert_eq!(kg.attribute(EntityId(0)).unwrap().payload, "MKV");
    }

    #[test]
    fn benchmark_pairs_are_unordered() {
        let mut bp = BenchmarkPairs::new();
        assert!(bp.insert("x", "y", "dpi"));
        assert!(!bp.insert("y", "x", "dpi"));
        assert!(bp.contains_unordered("y", "x"));
    }
}
