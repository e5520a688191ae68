//! Shared fixtures for integration tests: a synthetic multimodal knowledge
//! graph with a planted compositional pattern, and a synthetic
//! pair-classification universe.

#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use kgembed::encoders::{EncoderKind, TokenizerKind};
use kgembed::graph::{BenchmarkPairs, KnowledgeGraph};
use kgembed::model::{EncoderSpec, ModelSpec};
use kgembed::scoring::ScorerKind;

pub const SYNTH_ENTITIES: usize = 50;

/// Synthetic multimodal KG: 50 entities, 3 relations forming a planted
/// compositional pattern (r0 shifts by 7, r1 by 12, r2 = r0 then r1 shifts
/// by 19, all mod 50), and 3 attribute modalities covering 60% of entities
/// with unique payloads.
pub fn synthetic_kg(seed: u64) -> KnowledgeGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kg = KnowledgeGraph::new();
    let name = |i: usize| format!("e{i}");
    for i in 0..SYNTH_ENTITIES {
        kg.add_triple_str(&name(i), "r0", &name((i + 7) % SYNTH_ENTITIES));
        kg.add_triple_str(&name(i), "r1", &name((i + 12) % SYNTH_ENTITIES));
        kg.add_triple_str(&name(i), "r2", &name((i + 19) % SYNTH_ENTITIES));
    }
    let protein = kg.register_modality("protein");
    let molecule = kg.register_modality("molecule");
    let text = kg.register_modality("text");

    let amino = "ACDEFGHIKLMNPQRSTVWY".chars().collect::<Vec<_>>();
    let smiles = "CONHcon123()=#".chars().collect::<Vec<_>>();
    for i in 0..SYNTH_ENTITIES {
        let e = kg.entity_id(&name(i)).unwrap();
        match i % 5 {
            0 => {
                let payload: String = (0..12).map(|_| *amino.choose(&mut rng).unwrap()).collect();
                kg.set_attribute(e, protein, &payload).unwrap();
                kg.set_entity_type(e, "protein");
            }
            1 => {
                let payload: String = (0..12).map(|_| *smiles.choose(&mut rng).unwrap()).collect();
                kg.set_attribute(e, molecule, &payload).unwrap();
                kg.set_entity_type(e, "molecule");
            }
            2 => {
                let shared = format!("family{}", i % 3);
                let payload = format!("{shared} marker{} trait{} sign{}", i, rng.gen_range(0..100), i);
                kg.set_attribute(e, text, &payload).unwrap();
                kg.set_entity_type(e, "disease");
            }
            _ => {
                kg.set_entity_type(e, "other");
            }
        }
    }
    kg
}

/// Encoder model spec used by the synthetic experiments.
pub fn synthetic_spec(scorer: ScorerKind, dim: usize, seed: u64) -> ModelSpec {
    ModelSpec {
        scorer,
        dim,
        token_dim: Some(2 * dim),
        encoders: vec![
            EncoderSpec {
                modality: "protein".into(),
                kind: EncoderKind::SequenceMean,
                tokenizer: TokenizerKind::Chars,
                layers: 1,
                max_len: 64,
            },
            EncoderSpec {
                modality: "molecule".into(),
                kind: EncoderKind::SequenceAttention,
                tokenizer: TokenizerKind::Chars,
                layers: 1,
                max_len: 64,
            },
            EncoderSpec {
                modality: "text".into(),
                kind: EncoderKind::Text,
                tokenizer: TokenizerKind::Words,
                layers: 1,
                max_len: 64,
            },
        ],
        seed,
    }
}

/// Synthetic pair-classification universe: a typed KG of `n` drugs and `n`
/// proteins (chain triples within each type, so no drug-protein edge
/// exists) plus `positives` random distinct drug-protein pairs.
pub fn synthetic_pair_universe(n: usize, positives: usize, seed: u64) -> (KnowledgeGraph, BenchmarkPairs) {
    let mut kg = KnowledgeGraph::new();
    for i in 0..n {
        kg.add_triple_str(&format!("d{i}"), "near", &format!("d{}", (i + 1) % n));
        kg.add_triple_str(&format!("p{i}"), "near", &format!("p{}", (i + 1) % n));
    }
    for i in 0..n {
        let d = kg.entity_id(&format!("d{i}")).unwrap();
        let p = kg.entity_id(&format!("p{i}")).unwrap();
        kg.set_entity_type(d, "drug");
        kg.set_entity_type(p, "protein");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = BenchmarkPairs::new();
    while pairs.len() < positives {
        let d = rng.gen_range(0..n);
        let p = rng.gen_range(0..n);
        pairs.insert(&format!("d{d}"), &format!("p{p}"), "dpi");
    }
    (kg, pairs)
}
