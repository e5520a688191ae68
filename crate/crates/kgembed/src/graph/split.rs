//! Benchmark-decoupled train/validation/test splitting.
//!
//! Splitting proceeds in four steps: (1) every triple whose endpoints form a
//! benchmark pair, in either order, is moved to `removed`; (2) the remaining
//! triples are shuffled and assigned by ratio; (3) a repair pass moves, for
//! any entity absent from the training set, one of its triples from
//! validation/test into training (entities left with no triple at all go to
//! `dropped_entities`); (4) the result is deterministic given the seed.
//! Splitting is single-threaded for determinism.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{BenchmarkPairs, EntityId, KnowledgeGraph, Triple};

/// Benchmark-decoupled triple splits.
///
/// Invariants: the four triple sets partition the original triples; every
/// entity occurring in `validation` or `test` occurs in at least one `train`
/// triple; no split triple connects two entities that form a benchmark pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitBundle {
    pub train: Vec<Triple>,
    pub validation: Vec<Triple>,
    pub test: Vec<Triple>,
    pub removed: Vec<Triple>,
    pub dropped_entities: Vec<EntityId>,
    pub seed: u64,
    pub ratios: (f64, f64, f64),
}

impl SplitBundle {
    /// All split triples (train + validation + test), for filtered ranking.
    pub fn all_split_triples(&self) -> impl Iterator<Item = &Triple> {
        self.train.iter().chain(self.validation.iter()).chain(self.test.iter())
    }
}

/// Remove benchmark-pair triples, split the rest by ratio, and repair
/// training coverage so every surviving entity occurs in `train`.
pub fn decouple_and_split(
    kg: &KnowledgeGraph,
    benchmarks: &BenchmarkPairs,
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<SplitBundle> {
    let (rt, rv, rs) = ratios;
    if rt <= 0.0 || rv <= 0.0 || rs <= 0.0 {
        return Err(Error::InvalidArgument(format!("split ratios must be positive, got {ratios:?}")));
    }
    if (rt + rv + rs - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("split ratios must sum to 1.0, got {ratios:?}")));
    }
    if kg.triples().is_empty() {
        return Err(Error::EmptyInput("graph has no triples".into()));
    }

    let pair_index = benchmarks.index_pairs(kg);
    let mut removed = Vec::new();
    let mut remaining = Vec::new();
    for &t in kg.triples() {
        let key = (t.head.0.min(t.tail.0), t.head.0.max(t.tail.0));
        if pair_index.contains(&key) {
            removed.push(t);
        } else {
            remaining.push(t);
        }
    }
    if remaining.is_empty() {
        return Err(Error::EmptyInput("graph is empty after benchmark decoupling".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    remaining.shuffle(&mut rng);
    let m = remaining.len();
    let n_train = ((m as f64) * rt).floor() as usize;
    let n_valid = ((m as f64) * rv).floor() as usize;
    let mut train: Vec<Triple> = remaining[..n_train].to_vec();
    let mut validation: Vec<Triple> = remaining[n_train..n_train + n_valid].to_vec();
    let mut test: Vec<Triple> = remaining[n_train + n_valid..].to_vec();

    // Repair pass: every entity that survives decoupling must occur in train.
    let mut in_train: HashSet<u32> = HashSet::new();
    for t in &train {
        in_train.insert(t.head.0);
        in_train.insert(t.tail.0);
    }
    let uncovered: Vec<u32> = {
        let mut surviving: HashSet<u32> = HashSet::new();
        for t in remaining.iter() {
            surviving.insert(t.head.0);
            surviving.insert(t.tail.0);
        }
        let mut ids: Vec<u32> = surviving.into_iter().filter(|e| !in_train.contains(e)).collect();
        ids.sort_unstable();
        ids
    };
    for e in uncovered {
        if in_train.contains(&e) {
            continue;
        }
        // Lexicographically first eligible triple by (head, relation, tail)
        // index order, searching validation then test.
        let pick = first_triple_of(&validation, e)
            .map(|i| (true, i))
            .into_iter()
            .chain(first_triple_of(&test, e).map(|i| (false, i)))
            .min_by_key(|&(from_valid, i)| {
                let t = if from_valid { validation[i] } else { test[i] };
                (t.head.0, t.relation.0, t.tail.0)
            });
        if let Some((from_valid, i)) = pick {
            let t = if from_valid { validation.swap_remove(i) } else { test.swap_remove(i) };
            in_train.insert(t.head.0);
            in_train.insert(t.tail.0);
            train.push(t);
        }
    }

    // Entities whose every triple was removed during decoupling.
    let mut dropped: Vec<EntityId> = Vec::new();
    {
        let mut seen_anywhere: HashSet<u32> = HashSet::new();
        for t in train.iter().chain(validation.iter()).chain(test.iter()) {
            seen_anywhere.insert(t.head.0);
            seen_anywhere.insert(t.tail.0);
        }
        for e in kg.entities() {
            if !seen_anywhere.contains(&e.0) {
                dropped.push(e);
            }
        }
        dropped.sort_unstable();
    }

    Ok(SplitBundle {
        train,
        validation,
        test,
        removed,
        dropped_entities: dropped,
        seed,
        ratios,
    })
}

fn first_triple_of(triples: &[Triple], entity: u32) -> Option<usize> {
    let mut best: Option<(u32, u32, u32, usize)> = None;
    for (i, t) in triples.iter().enumerate() {
        if t.head.0 == entity || t.tail.0 == entity {
            let key = (t.head.0, t.relation.0, t.tail.0);
            match best {
                Some((h, r, tl, _)) if (h, r, tl) <= key => {}
                _ => best = Some((key.0, key.1, key.2, i)),
            }
        }
    }
    best.map(|(_, _, _, i)| i)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain_graph(n: usize) -> KnowledgeGraph {
        let names: Vec<String> = (0..=n).map(|i| format!("e{i}")).collect();
        let mut kg = KnowledgeGraph::new();
        for i in 0..n {
            kg.add_triple_str(&names[i], "r", &names[i + 1]);
        }
        kg
    }

    #[test]
    fn empty_benchmarks_is_plain_random_split() {
        let kg = chain_graph(20);
        let bundle = decouple_and_split(&kg, &BenchmarkPairs::new(), (0.8, 0.1, 0.1), 3).unwrap();
        assert!(bundle.removed.is_empty());
        let total = bundle.train.len() + bundle.validation.len() + bundle.test.len();
        assert_eq!(total, 20);
    }

    #[test]
    fn benchmark_pair_triples_are_removed_exhaustively() {
        // 10-triple toy graph with one benchmark pair (x, y) in 2 triples.
        let mut kg = KnowledgeGraph::new();
        kg.add_triple_str("x", "r", "y");
        kg.add_triple_str("y", "s", "x");
        for i in 0..8 {
            kg.add_triple_str(&format!("a{i}"), "r", &format!("a{}", i + 1));
        }
        assert_eq!(kg.triples().len(), 10);
        let mut bench = BenchmarkPairs::new();
        bench.insert("x", "y", "t1");
        let bundle = decouple_and_split(&kg, &bench, (0.8, 0.1, 0.1), 9).unwrap();
        assert_eq!(bundle.removed.len(), 2);
        // Brute-force oracle: scan every split triple for endpoint co-occurrence.
        for t in bundle.all_split_triples() {
            let (h, tl) = (kg.entity_name(t.head), kg.entity_name(t.tail));
            assert!(!bench.contains_unordered(h, tl), "leaked pair ({h}, {tl})");
        }
        // x and y appear only in removed triples.
        assert_eq!(bundle.dropped_entities.len(), 2);
    }

    #[test]
    fn conservation_and_coverage_hold() {
        let kg = chain_graph(50);
        let mut bench = BenchmarkPairs::new();
        bench.insert("e3", "e4", "t");
        bench.insert("e10", "e11", "t");
        let bundle = decouple_and_split(&kg, &bench, (0.7, 0.15, 0.15), 42).unwrap();
        let total =
            bundle.train.len() + bundle.validation.len() + bundle.test.len() + bundle.removed.len();
        assert_eq!(total, kg.triples().len());
        let train_entities: HashSet<u32> = bundle
            .train
            .iter()
            .flat_map(|t| [t.head.0, t.tail.0])
            .collect();
        for t in bundle.validation.iter().chain(bundle.test.iter()) {
            assert!(train_entities.contains(&t.head.0));
            assert!(train_entities.contains(&t.tail.0));
        }
    }

    #[test]
    fn same_seed_is_deterministic() {
        let kg = chain_graph(30);
        let mut bench = BenchmarkPairs::new();
        bench.insert("e5", "e6", "t");
        let a = decouple_and_split(&kg, &bench, (0.8, 0.1, 0.1), 7).unwrap();
        let b = decouple_and_split(&kg, &bench, (0.8, 0.1, 0.1), 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_ratios_rejected() {
        let kg = chain_graph(5);
        assert!(decouple_and_split(&kg, &BenchmarkPairs::new(), (0.9, 0.1, 0.1), 0).is_err());
        assert!(decouple_and_split(&kg, &BenchmarkPairs::new(), (1.0, 0.0, 0.0), 0).is_err());
    }

    #[test]
    fn fully_removed_graph_is_an_error() {
        let mut kg = KnowledgeGraph::new();
        kg.add_triple_str("x", "r", "y");
        let mut bench = BenchmarkPairs::new();
        bench.insert("x", "y", "t");
        assert!(decouple_and_split(&kg, &bench, (0.8, 0.1, 0.1), 0).is_err());
    }
}
