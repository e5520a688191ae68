//! Downstream pair-classification benchmark harness.
//!
//! Positive pairs come from a benchmark collection; negatives are sampled
//! from the typed cross product of the sides, rejecting pairs observed in
//! the KG in either orientation. Features are built per embedding source,
//! folds are kept consistent across sources, and per-fold classifiers are
//! tuned, refit, and scored.

mod classifier;
mod features;
mod kfold;
mod metrics;

pub use classifier::{
    balanced_class_weights, logistic_loss_grad, train_classifier, Balancing, ClassifierHyper,
    ClassifierKind, ClassifierSpec, FittedClassifier,
};
pub use features::{featurize, FeatureMatrix, FeatureSource};
pub use kfold::{stratified_kfold, FoldAssignment};
pub use metrics::{auprc, auroc, classification_metrics, precision_recall_f1, ClassificationMetrics};

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{BenchmarkPairs, EntityId, KnowledgeGraph};

/// One labeled pair. Positives come from the benchmark; negatives are
/// sampled.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PairInstance {
    pub a: String,
    pub b: String,
    pub label: bool,
}

/// Labeled pair dataset: no duplicate pairs, and no negative pair occurs in
/// the KG in either direction.
#[derive(Debug, Clone, Default)]
pub struct PairDataset {
    pub instances: Vec<PairInstance>,
}

impl PairDataset {
    pub fn labels(&self) -> Vec<bool> {
        self.instances.iter().map(|i| i.label).collect()
    }

    pub fn num_positive(&self) -> usize {
        self.instances.iter().filter(|i| i.label).count()
    }
}

fn typed_pool(kg: &KnowledgeGraph, column: impl Iterator<Item = EntityId>) -> Vec<u32> {
    let types: HashSet<String> = column
        .filter_map(|e| kg.entity_type(e).map(String::from))
        .collect();
    if types.is_empty() {
        kg.entities().map(|e| e.0).collect()
    } else {
        kg.entities()
            .filter(|&e| kg.entity_type(e).map(|t| types.contains(t)).unwrap_or(false))
            .map(|e| e.0)
            .collect()
    }
}

/// Draw `ratio * |positives|` negative pairs uniformly from the cross
/// product of the side pools, rejecting positives, any pair co-occurring in
/// a KG triple, and duplicates. Deterministic by seed.
pub fn sample_negatives(
    positives: &BenchmarkPairs,
    kg: &KnowledgeGraph,
    ratio: usize,
    seed: u64,
) -> Result<PairDataset> {
    if positives.is_empty() {
        return Err(Error::EmptyInput("benchmark pairs".into()));
    }
    let mut instances: Vec<PairInstance> = positives
        .pairs()
        .iter()
        .map(|p| PairInstance { a: p.a.clone(), b: p.b.clone(), label: true })
        .collect();
    let needed = ratio * positives.len();
    if needed == 0 {
        return Ok(PairDataset { instances });
    }

    let pool_a = typed_pool(kg, positives.pairs().iter().filter_map(|p| kg.entity_id(&p.a)));
    let pool_b = typed_pool(kg, positives.pairs().iter().filter_map(|p| kg.entity_id(&p.b)));
    if pool_a.is_empty() || pool_b.is_empty() {
        return Err(Error::InvalidArgument("empty entity pool for negative sampling".into()));
    }

    // pairs co-occurring in the KG, in either orientation
    let kg_pairs: HashSet<(u32, u32)> = kg
        .triples()
        .iter()
        .map(|t| (t.head.0.min(t.tail.0), t.head.0.max(t.tail.0)))
        .collect();

    let reject = |a: u32, b: u32, drawn: &HashSet<(u32, u32)>| -> bool {
        if a == b {
            return true;
        }
        let key = (a.min(b), a.max(b));
        if drawn.contains(&key) || kg_pairs.contains(&key) {
            return true;
        }
        positives.contains_unordered(kg.entity_name(EntityId(a)), kg.entity_name(EntityId(b)))
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut drawn: HashSet<(u32, u32)> = HashSet::new();
    let mut negatives: Vec<(u32, u32)> = Vec::with_capacity(needed);
    let attempt_cap = 50 * needed + 1000;
    let mut attempts = 0usize;
    while negatives.len() < needed && attempts < attempt_cap {
        attempts += 1;
        let a = pool_a[rng.gen_range(0..pool_a.len())];
        let b = pool_b[rng.gen_range(0..pool_b.len())];
        if reject(a, b, &drawn) {
            continue;
        }
        drawn.insert((a.min(b), a.max(b)));
        negatives.push((a, b));
    }

    if negatives.len() < needed {
        // rejection sampling stalled; enumerate what is left
        let mut remaining: Vec<(u32, u32)> = Vec::new();
        for &a in &pool_a {
            for &b in &pool_b {
                if !reject(a, b, &drawn) {
                    remaining.push((a, b));
                    drawn.insert((a.min(b), a.max(b)));
                }
            }
        }
        let deficit = needed - negatives.len();
        if remaining.len() < deficit {
            return Err(Error::InvalidArgument(format!(
                "candidate space exhausted: need {needed} negatives, only {} available ({} short)",
                negatives.len() + remaining.len(),
                deficit - remaining.len()
            )));
        }
        remaining.shuffle(&mut rng);
        negatives.extend(remaining.into_iter().take(deficit));
    }

    instances.extend(negatives.into_iter().map(|(a, b)| PairInstance {
        a: kg.entity_name(EntityId(a)).to_string(),
        b: kg.entity_name(EntityId(b)).to_string(),
        label: false,
    }));
    Ok(PairDataset { instances })
}

/// Per-fold test metrics for one (source, classifier) combination.
#[derive(Debug, Clone, Serialize)]
pub struct FoldOutcome {
    pub source: String,
    pub classifier: String,
    pub fold: usize,
    pub metrics: ClassificationMetrics,
}

/// Mean and standard deviation across folds.
#[derive(Debug, Clone, Serialize)]
pub struct AggregateOutcome {
    pub source: String,
    pub classifier: String,
    pub auprc_mean: f64,
    pub auprc_std: f64,
    pub auroc_mean: f64,
    pub auroc_std: f64,
    pub f1_mean: f64,
    pub f1_std: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkReport {
    pub ratio: usize,
    pub k: usize,
    pub seed: u64,
    pub num_positive: usize,
    pub num_negative: usize,
    pub folds: Vec<FoldOutcome>,
    pub aggregates: Vec<AggregateOutcome>,
}

impl BenchmarkReport {
    /// Summary rows `source \t classifier \t auprc \t auroc \t f1` with
    /// mean (std) formatting.
    pub fn tsv_summary(&self) -> String {
        let mut out = String::from("source\tclassifier\tauprc\tauroc\tf1\n");
        for a in &self.aggregates {
            out.push_str(&format!(
                "{}\t{}\t{:.3} ({:.3})\t{:.3} ({:.3})\t{:.3} ({:.3})\n",
                a.source, a.classifier, a.auprc_mean, a.auprc_std, a.auroc_mean, a.auroc_std,
                a.f1_mean, a.f1_std
            ));
        }
        out
    }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Run the full benchmark protocol: sample negatives once, fix folds across
/// sources, then tune/refit/score per (source, classifier, fold).
#[allow(clippy::too_many_arguments)]
pub fn run_benchmark(
    pairs: &BenchmarkPairs,
    kg: &KnowledgeGraph,
    sources: &[(String, FeatureSource<'_>)],
    specs: &[ClassifierSpec],
    k: usize,
    ratio: usize,
    seed: u64,
    tuning_budget: usize,
) -> Result<BenchmarkReport> {
    let dataset = sample_negatives(pairs, kg, ratio, seed)?;
    let labels = dataset.labels();
    let folds = stratified_kfold(&labels, k, seed)?;

    let mut fold_outcomes = Vec::new();
    let mut aggregates = Vec::new();
    for (source_name, source) in sources {
        let features = featurize(&dataset, source, kg, seed)?;
        for spec in specs {
            let mut per_fold = Vec::with_capacity(k);
            for fold in 0..k {
                let train_idx = folds.train_indices(fold);
                let test_idx = folds.test_indices(fold);
                let train_rows: Vec<Vec<f64>> =
                    train_idx.iter().map(|&i| features.rows[i].clone()).collect();
                let train_labels: Vec<bool> = train_idx.iter().map(|&i| labels[i]).collect();
                let fitted = train_classifier(
                    spec,
                    &train_rows,
                    &train_labels,
                    tuning_budget,
                    seed.wrapping_add(fold as u64),
                )?;
                let test_scores: Vec<f64> =
                    test_idx.iter().map(|&i| fitted.predict_proba(&features.rows[i])).collect();
                let test_labels: Vec<bool> = test_idx.iter().map(|&i| labels[i]).collect();
                let m = classification_metrics(&test_scores, &test_labels)?;
                per_fold.push(m);
                fold_outcomes.push(FoldOutcome {
                    source: source_name.clone(),
                    classifier: spec.name().to_string(),
                    fold,
                    metrics: m,
                });
            }
            let (auprc_mean, auprc_std) = mean_std(&per_fold.iter().map(|m| m.auprc).collect::<Vec<_>>());
            let (auroc_mean, auroc_std) = mean_std(&per_fold.iter().map(|m| m.auroc).collect::<Vec<_>>());
            let (f1_mean, f1_std) = mean_std(&per_fold.iter().map(|m| m.f1).collect::<Vec<_>>());
            aggregates.push(AggregateOutcome {
                source: source_name.clone(),
                classifier: spec.name().to_string(),
                auprc_mean,
                auprc_std,
                auroc_mean,
                auroc_std,
                f1_mean,
                f1_std,
            });
        }
    }
    let num_positive = dataset.num_positive();
    Ok(BenchmarkReport {
        ratio,
        k,
        seed,
        num_positive,
        num_negative: dataset.instances.len() - num_positive,
        folds: fold_outcomes,
        aggregates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_kg(n: usize) -> KnowledgeGraph {
        let mut kg = KnowledgeGraph::new();
        for i in 0..n {
            kg.add_triple_str(&format!("d{i}"), "r", &format!("p{i}"));
        }
        for i in 0..n {
            let d = kg.entity_id(&format!("d{i}")).unwrap();
            let p = kg.entity_id(&format!("p{i}")).unwrap();
            kg.set_entity_type(d, "drug");
            kg.set_entity_type(p, "protein");
        }
        kg
    }

    fn positives(n: usize) -> BenchmarkPairs {
        let mut b = BenchmarkPairs::new();
        for i in 0..n {
            b.insert(&format!("d{i}"), &format!("p{}", (i + 1) % n), "dpi");
        }
        b
    }

    #[test]
    fn ratio_is_honored_exactly() {
        let kg = grid_kg(30);
        let pos = positives(10);
        let ds = sample_negatives(&pos, &kg, 10, 5).unwrap();
        assert_eq!(ds.num_positive(), 10);
        assert_eq!(ds.instances.len(), 110);
    }

    #[test]
    fn ratio_zero_keeps_positives_only() {
        let kg = grid_kg(10);
        let pos = positives(5);
        let ds = sample_negatives(&pos, &kg, 0, 5).unwrap();
        assert_eq!(ds.instances.len(), 5);
        assert!(ds.instances.iter().all(|i| i.label));
    }

    #[test]
    fn negative_hygiene_holds_exhaustively() {
        let kg = grid_kg(20);
        let pos = positives(8);
        let ds = sample_negatives(&pos, &kg, 10, 9).unwrap();
        let mut seen = HashSet::new();
        for inst in &ds.instances {
            let key = if inst.a <= inst.b {
                (inst.a.clone(), inst.b.clone())
            } else {
                (inst.b.clone(), inst.a.clone())
            };
            assert!(seen.insert(key), "duplicate pair {inst:?}");
            if !inst.label {
                assert!(!pos.contains_unordered(&inst.a, &inst.b));
                let a = kg.entity_id(&inst.a).unwrap();
                let b = kg.entity_id(&inst.b).unwrap();
                for t in kg.triples() {
                    let co = (t.head == a && t.tail == b) || (t.head == b && t.tail == a);
                    assert!(!co, "negative {inst:?} co-occurs in the KG");
                }
            }
        }
    }

    #[test]
    fn typed_pools_respect_column_types() {
        let kg = grid_kg(12);
        let pos = positives(6);
        let ds = sample_negatives(&pos, &kg, 5, 2).unwrap();
        for inst in ds.instances.iter().filter(|i| !i.label) {
            let a = kg.entity_id(&inst.a).unwrap();
            let b = kg.entity_id(&inst.b).unwrap();
            assert_eq!(kg.entity_type(a), Some("drug"));
            assert_eq!(kg.entity_type(b), Some("protein"));
        }
    }

    #[test]
    fn exhausted_candidate_space_is_an_error() {
        // every drug-protein pair is a KG triple
        let mut kg = KnowledgeGraph::new();
        for i in 0..3 {
            for j in 0..3 {
                kg.add_triple_str(&format!("d{i}"), "r", &format!("p{j}"));
            }
        }
        for i in 0..3 {
            kg.set_entity_type(kg.entity_id(&format!("d{i}")).unwrap(), "drug");
            kg.set_entity_type(kg.entity_id(&format!("p{i}")).unwrap(), "protein");
        }
        let mut pos = BenchmarkPairs::new();
        pos.insert("d0", "p0", "dpi");
        let err = sample_negatives(&pos, &kg, 10, 1).unwrap_err();
        assert!(err.to_string().contains("short"), "unexpected error: {err}");
    }

    #[test]
    fn sampling_is_deterministic() {
        let kg = grid_kg(25);
        let pos = positives(10);
        let a = sample_negatives(&pos, &kg, 10, 7).unwrap();
        let b = sample_negatives(&pos, &kg, 10, 7).unwrap();
        assert_eq!(a.instances, b.instances);
    }

    #[test]
    fn report_has_k_entries_per_source_and_spec() {
        let kg = grid_kg(40);
        let pos = positives(20);
        let sources = vec![("random".to_string(), FeatureSource::Random { dim: 4 })];
        let specs = vec![ClassifierSpec::logistic_regression()];
        let report = run_benchmark(&pos, &kg, &sources, &specs, 4, 3, 11, 2).unwrap();
        assert_eq!(report.folds.len(), 4);
        assert_eq!(report.aggregates.len(), 1);
    }

    #[test]
    fn identical_seeds_give_identical_reports() {
        let kg = grid_kg(40);
        let pos = positives(15);
        let sources = vec![("random".to_string(), FeatureSource::Random { dim: 4 })];
        let specs = vec![ClassifierSpec::logistic_regression()];
        let a = run_benchmark(&pos, &kg, &sources, &specs, 3, 3, 13, 2).unwrap();
        let b = run_benchmark(&pos, &kg, &sources, &specs, 3, 3, 13, 2).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}
