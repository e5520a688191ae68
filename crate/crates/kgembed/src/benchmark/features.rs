//! Pair feature construction for the classification benchmark.
//!
//! Every entity in the pair dataset is assigned one feature vector; a pair's
//! row is the concatenation of its two entity vectors in benchmark column
//! order. Entities a source cannot resolve are imputed with the mean vector
//! of all resolved entities of the same entity type.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::benchmark::PairDataset;
use crate::error::{Error, Result};
use crate::graph::KnowledgeGraph;
use crate::model::ModelState;

/// Where entity features come from.
#[derive(Debug, Clone, Copy)]
pub enum FeatureSource<'a> {
    /// Seeded standard-normal vector per entity, stable across pairs.
    Random { dim: usize },
    /// Raw frozen-encoder sequence representation: mean-pooled token
    /// embeddings of the entity's payload, no attention, no projection.
    Structural(&'a ModelState),
    /// Trained embedding via the model's entity dispatch.
    Model(&'a ModelState),
}

impl FeatureSource<'_> {
    pub fn label(&self) -> &'static str {
        match self {
            FeatureSource::Random { .. } => "random",
            FeatureSource::Structural(_) => "structural",
            FeatureSource::Model(_) => "model",
        }
    }
}

/// Concatenated pair features with aligned labels.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<bool>,
    /// Row dimension (twice the per-entity dimension).
    pub dim: usize,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

fn random_vector(name: &str, dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a(name.as_bytes()));
    (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect()
}

fn resolve(source: &FeatureSource<'_>, kg: &KnowledgeGraph, name: &str, seed: u64) -> Option<Vec<f64>> {
    match source {
        FeatureSource::Random { dim } => Some(random_vector(name, *dim, seed)),
        FeatureSource::Structural(model) => {
            let entity = kg.entity_id(name)?;
            let record = kg.attribute(entity)?;
            let encoder = model.encoder(record.modality.0)?;
            encoder.mean_pooled_tokens(&record.payload).ok()
        }
        FeatureSource::Model(model) => {
            let entity = kg.entity_id(name)?;
            model.emb(entity).ok().map(|v| v.into_vec())
        }
    }
}

/// Build the feature matrix for `pairs`. Unresolvable entities are imputed
/// by the mean of resolved entities of their type; an entity with no type
/// pool to impute from is an error.
pub fn featurize(
    pairs: &PairDataset,
    source: &FeatureSource<'_>,
    kg: &KnowledgeGraph,
    seed: u64,
) -> Result<FeatureMatrix> {
    if pairs.instances.is_empty() {
        return Err(Error::EmptyInput("pair dataset".into()));
    }
    // distinct entities in first-appearance order
    let mut names: Vec<&str> = Vec::new();
    let mut index: HashMap<&str, usize> = HashMap::new();
    for inst in &pairs.instances {
        for name in [inst.a.as_str(), inst.b.as_str()] {
            if !index.contains_key(name) {
                index.insert(name, names.len());
                names.push(name);
            }
        }
    }

    let typed = kg.has_entity_types();
    let type_key = |name: &str| -> Option<String> {
        if !typed {
            return Some("All".to_string());
        }
        kg.entity_id(name).and_then(|e| kg.entity_type(e).map(String::from))
    };

    let resolved: Vec<Option<Vec<f64>>> =
        names.iter().map(|n| resolve(source, kg, n, seed)).collect();

    // per-type mean over resolved entities
    let mut pools: HashMap<String, (Vec<f64>, usize)> = HashMap::new();
    let mut entity_dim: Option<usize> = None;
    for (name, features) in names.iter().zip(resolved.iter()) {
        if let Some(v) = features {
            match entity_dim {
                None => entity_dim = Some(v.len()),
                Some(d) if d != v.len() => {
                    return Err(Error::DimensionMismatch(format!(
                        "entity feature width changed from {d} to {} at {name:?}",
                        v.len()
                    )))
                }
                _ => {}
            }
            if let Some(key) = type_key(name) {
                let slot = pools.entry(key).or_insert_with(|| (vec![0.0; v.len()], 0));
                for (s, &x) in slot.0.iter_mut().zip(v.iter()) {
                    *s += x;
                }
                slot.1 += 1;
            }
        }
    }
    let entity_dim = entity_dim
        .ok_or_else(|| Error::InvalidArgument("feature source resolved no entity at all".into()))?;
    let means: HashMap<String, Vec<f64>> = pools
        .into_iter()
        .map(|(k, (sum, n))| (k, sum.into_iter().map(|s| s / n as f64).collect()))
        .collect();

    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(names.len());
    for (name, features) in names.iter().zip(resolved.into_iter()) {
        match features {
            Some(v) => vectors.push(v),
            None => {
                let key = type_key(name);
                let mean = key.as_ref().and_then(|k| means.get(k)).ok_or_else(|| {
                    Error::InvalidArgument(format!(
                        "entity {name:?} is unresolvable and has no type pool to impute from"
                    ))
                })?;
                vectors.push(mean.clone());
            }
        }
    }

    let mut rows = Vec::with_capacity(pairs.instances.len());
    let mut labels = Vec::with_capacity(pairs.instances.len());
    for inst in &pairs.instances {
        let a = &vectors[index[inst.a.as_str()]];
        let b = &vectors[index[inst.b.as_str()]];
        let mut row = Vec::with_capacity(2 * entity_dim);
        row.extend_from_slice(a);
        row.extend_from_slice(b);
        rows.push(row);
        labels.push(inst.label);
    }
    Ok(FeatureMatrix { rows, labels, dim: 2 * entity_dim })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmark::PairInstance;
    use crate::encoders::{EncoderKind, TokenizerKind};
    use crate::model::{EncoderSpec, ModelSpec};
    use crate::scoring::ScorerKind;

    fn dataset(pairs: &[(&str, &str, bool)]) -> PairDataset {
        PairDataset {
            instances: pairs
                .iter()
                .map(|&(a, b, label)| PairInstance { a: a.into(), b: b.into(), label })
                .collect(),
        }
    }

    #[test]
    fn random_features_are_stable_per_entity() {
        let kg = KnowledgeGraph::from_string_triples([("a", "r", "b"), ("b", "r", "c")]);
        let pairs = dataset(&[("a", "b", true), ("a", "c", false)]);
        let m = featurize(&pairs, &FeatureSource::Random { dim: 3 }, &kg, 5).unwrap();
        assert_eq!(m.dim, 6);
        // entity "a" appears in both pairs with the identical vector
        assert_eq!(m.rows[0][..3], m.rows[1][..3]);
        // and the assignment is reproducible
        let again = featurize(&pairs, &FeatureSource::Random { dim: 3 }, &kg, 5).unwrap();
        assert_eq!(m.rows, again.rows);
    }

    #[test]
    fn row_dimension_is_twice_entity_dimension() {
        let kg = KnowledgeGraph::from_string_triples([("a", "r", "b")]);
        let pairs = dataset(&[("a", "b", true)]);
        let m = featurize(&pairs, &FeatureSource::Random { dim: 2 }, &kg, 1).unwrap();
        assert_eq!(m.dim, 4);
        assert_eq!(m.rows[0].len(), 4);
    }

    #[test]
    fn missing_structural_payload_is_imputed_with_type_mean() {
        let mut kg = KnowledgeGraph::from_string_triples([
            ("m1", "r", "m2"),
            ("m2", "r", "m3"),
            ("m3", "r", "m1"),
        ]);
        let molecule = kg.register_modality("molecule");
        for name in ["m1", "m2", "m3"] {
            let e = kg.entity_id(name).unwrap();
            kg.set_entity_type(e, "drug");
        }
        // m3 has no payload
        kg.set_attribute(kg.entity_id("m1").unwrap(), molecule, "CC").unwrap();
        kg.set_attribute(kg.entity_id("m2").unwrap(), molecule, "CO").unwrap();
        let spec = ModelSpec {
            scorer: ScorerKind::TransE,
            dim: 3,
            token_dim: Some(4),
            encoders: vec![EncoderSpec {
                modality: "molecule".into(),
                kind: EncoderKind::SequenceAttention,
                tokenizer: TokenizerKind::Chars,
                layers: 1,
                max_len: 64,
            }],
            seed: 3,
        };
        let model = ModelState::build(&kg, &spec).unwrap();
        let pairs = dataset(&[("m1", "m2", true), ("m2", "m3", false)]);
        let m = featurize(&pairs, &FeatureSource::Structural(&model), &kg, 0).unwrap();
        let enc = model.encoder(1).unwrap();
        let f1 = enc.mean_pooled_tokens("CC").unwrap();
        let f2 = enc.mean_pooled_tokens("CO").unwrap();
        let mean: Vec<f64> = f1.iter().zip(f2.iter()).map(|(a, b)| (a + b) / 2.0).collect();
        let m3 = &m.rows[1][4..8];
        for (x, e) in m3.iter().zip(mean.iter()) {
            assert!((x - e).abs() < 1e-12);
        }
    }

    #[test]
    fn unresolvable_entity_without_pool_is_an_error() {
        let mut kg = KnowledgeGraph::from_string_triples([("a", "r", "b")]);
        kg.set_entity_type(kg.entity_id("a").unwrap(), "drug");
        kg.set_entity_type(kg.entity_id("b").unwrap(), "drug");
        let spec = ModelSpec {
            scorer: ScorerKind::TransE,
            dim: 2,
            token_dim: None,
            encoders: vec![],
            seed: 0,
        };
        let model = ModelState::build(&kg, &spec).unwrap();
        // "zz" is not in the graph: no type, no pool
        let pairs = dataset(&[("a", "b", true), ("a", "zz", false)]);
        assert!(featurize(&pairs, &FeatureSource::Model(&model), &kg, 0).is_err());
    }
}
