//! Degree-stratified MRR comparison between two models.
//!
//! Evaluation triples touching a target entity type are split into two
//! scopes: (i) the predicted entity is of the target type, and (ii) a
//! target-type entity is given and some other entity is predicted. Within
//! each scope, (triple, side) pairs are bucketed by the degree of the
//! predicted entity in the training graph, on a log2 scale, and the
//! difference in MRR between the two models is reported per bucket.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::eval::{collect_ranks, mrr, Side, TripleFilter};
use crate::graph::Triple;
use crate::model::ModelState;

/// One degree bucket: `degree_lo` is the inclusive lower edge (a power of
/// two, except bucket 0 which collects degree <= 1).
#[derive(Debug, Clone, Serialize)]
pub struct DegreeDeltaRow {
    pub degree_lo: u64,
    pub delta_mrr: f64,
    pub count: usize,
}

/// Bucketed MRR differences, positive when `model_a` ranks better.
#[derive(Debug, Clone, Serialize)]
pub struct DegreeDeltaReport {
    pub target_type: String,
    /// Scope (i): entities of the target type are predicted.
    pub predicting_target: Vec<DegreeDeltaRow>,
    /// Scope (ii): a target-type entity is given, others are predicted.
    pub predicting_other: Vec<DegreeDeltaRow>,
}

impl DegreeDeltaReport {
    /// Flat (scope, degree, delta, count) rows for TSV emission.
    pub fn tsv_rows(&self) -> Vec<(String, u64, f64, usize)> {
        let mut rows = Vec::new();
        for r in &self.predicting_target {
            rows.push(("target".to_string(), r.degree_lo, r.delta_mrr, r.count));
        }
        for r in &self.predicting_other {
            rows.push(("other".to_string(), r.degree_lo, r.delta_mrr, r.count));
        }
        rows
    }
}

fn bucket_of(degree: u64) -> u32 {
    if degree <= 1 {
        0
    } else {
        63 - degree.leading_zeros()
    }
}

/// Compare two models over `triples`, stratified by the training-graph
/// degree (`degrees`, indexed by entity) of the predicted entity.
pub fn degree_stratified_delta(
    model_a: &ModelState,
    model_b: &ModelState,
    triples: &[Triple],
    target_type: &str,
    degrees: &[u64],
    filter: Option<&TripleFilter>,
) -> Result<DegreeDeltaReport> {
    let touching: Vec<Triple> = triples
        .iter()
        .filter(|t| {
            model_a.entity_type(t.head) == Some(target_type)
                || model_a.entity_type(t.tail) == Some(target_type)
        })
        .copied()
        .collect();
    if touching.is_empty() {
        return Err(Error::EmptyInput(format!("no triples touch entity type {target_type:?}")));
    }

    let ranks_a = collect_ranks(model_a, &touching, filter)?;
    let ranks_b = collect_ranks(model_b, &touching, filter)?;
    debug_assert_eq!(ranks_a.len(), ranks_b.len());

    // bucket -> (ranks_a, ranks_b), per scope
    let mut target_buckets: BTreeMap<u32, (Vec<u64>, Vec<u64>)> = BTreeMap::new();
    let mut other_buckets: BTreeMap<u32, (Vec<u64>, Vec<u64>)> = BTreeMap::new();
    for (ea, eb) in ranks_a.iter().zip(ranks_b.iter()) {
        let (predicted, given) = match ea.side {
            Side::Head => (ea.triple.head, ea.triple.tail),
            Side::Tail => (ea.triple.tail, ea.triple.head),
        };
        let predicted_is_target = model_a.entity_type(predicted) == Some(target_type);
        let given_is_target = model_a.entity_type(given) == Some(target_type);
        let scope = if predicted_is_target {
            &mut target_buckets
        } else if given_is_target {
            &mut other_buckets
        } else {
            continue;
        };
        let degree = degrees.get(predicted.0 as usize).copied().unwrap_or(0);
        let slot = scope.entry(bucket_of(degree)).or_default();
        slot.0.push(ea.rank);
        slot.1.push(eb.rank);
    }

    let to_rows = |buckets: BTreeMap<u32, (Vec<u64>, Vec<u64>)>| -> Result<Vec<DegreeDeltaRow>> {
        buckets
            .into_iter()
            .map(|(bucket, (ra, rb))| {
                Ok(DegreeDeltaRow {
                    degree_lo: 1u64 << bucket,
                    delta_mrr: mrr(&ra)? - mrr(&rb)?,
                    count: ra.len(),
                })
            })
            .collect()
    };

    Ok(DegreeDeltaReport {
        target_type: target_type.to_string(),
        predicting_target: to_rows(target_buckets)?,
        predicting_other: to_rows(other_buckets)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{degree_counts, KnowledgeGraph};
    use crate::model::ModelState;
    use crate::scoring::ScorerKind;

    fn typed_kg() -> KnowledgeGraph {
        // 6 entities: d0, d1 diseases; others untyped
        let mut kg = KnowledgeGraph::from_string_triples([
            ("a", "r", "d0"),
            ("b", "r", "d0"),
            ("c", "r", "d1"),
            ("d0", "s", "a"),
            ("b", "s", "c"),
        ]);
        for d in ["d0", "d1"] {
            let e = kg.entity_id(d).unwrap();
            kg.set_entity_type(e, "disease");
        }
        for o in ["a", "b", "c"] {
            let e = kg.entity_id(o).unwrap();
            kg.set_entity_type(e, "other");
        }
        kg
    }

    #[test]
    fn identical_models_have_zero_delta_everywhere() {
        let kg = typed_kg();
        let model = ModelState::build_lookup_only(&kg, ScorerKind::TransE, 4, 3).unwrap();
        let degrees = degree_counts(kg.triples(), kg.num_entities());
        let report =
            degree_stratified_delta(&model, &model, kg.triples(), "disease", &degrees, None).unwrap();
        for row in report.predicting_target.iter().chain(report.predicting_other.iter()) {
            assert_eq!(row.delta_mrr, 0.0);
        }
    }

    #[test]
    fn bucket_populations_partition_the_scope() {
        let kg = typed_kg();
        let model_a = ModelState::build_lookup_only(&kg, ScorerKind::TransE, 4, 3).unwrap();
        let model_b = ModelState::build_lookup_only(&kg, ScorerKind::TransE, 4, 4).unwrap();
        let degrees = degree_counts(kg.triples(), kg.num_entities());
        let report =
            degree_stratified_delta(&model_a, &model_b, kg.triples(), "disease", &degrees, None)
                .unwrap();
        // every triple in scope contributes one head and one tail pair;
        // pairs where neither predicted nor given entity is a disease are skipped
        let touching: Vec<&Triple> = kg
            .triples()
            .iter()
            .filter(|t| {
                kg.entity_type(t.head) == Some("disease") || kg.entity_type(t.tail) == Some("disease")
            })
            .collect();
        let expected_pairs = 2 * touching.len();
        let total: usize = report
            .predicting_target
            .iter()
            .chain(report.predicting_other.iter())
            .map(|r| r.count)
            .sum();
        assert_eq!(total, expected_pairs);
    }

    #[test]
    fn deltas_match_per_bucket_hand_computation() {
        let kg = typed_kg();
        let model_a = ModelState::build_lookup_only(&kg, ScorerKind::TransE, 4, 5).unwrap();
        let model_b = ModelState::build_lookup_only(&kg, ScorerKind::TransE, 4, 6).unwrap();
        let degrees = degree_counts(kg.triples(), kg.num_entities());
        let report =
            degree_stratified_delta(&model_a, &model_b, kg.triples(), "disease", &degrees, None)
                .unwrap();

        // exhaustive oracle: recompute every rank for both models and
        // rebuild the per-bucket deltas by hand
        let touching: Vec<Triple> = kg
            .triples()
            .iter()
            .filter(|t| {
                kg.entity_type(t.head) == Some("disease") || kg.entity_type(t.tail) == Some("disease")
            })
            .copied()
            .collect();
        let ra = collect_ranks(&model_a, &touching, None).unwrap();
        let rb = collect_ranks(&model_b, &touching, None).unwrap();
        let mut by_bucket: BTreeMap<(bool, u32), (Vec<u64>, Vec<u64>)> = BTreeMap::new();
        for (ea, eb) in ra.iter().zip(rb.iter()) {
            let (predicted, given) = match ea.side {
                Side::Head => (ea.triple.head, ea.triple.tail),
                Side::Tail => (ea.triple.tail, ea.triple.head),
            };
            let p_is = kg.entity_type(predicted) == Some("disease");
            let g_is = kg.entity_type(given) == Some("disease");
            if !p_is && !g_is {
                continue;
            }
            let slot = by_bucket
                .entry((p_is, bucket_of(degrees[predicted.0 as usize])))
                .or_default();
            slot.0.push(ea.rank);
            slot.1.push(eb.rank);
        }
        for ((is_target, bucket), (oa, ob)) in by_bucket {
            let expect = mrr(&oa).unwrap() - mrr(&ob).unwrap();
            let rows = if is_target { &report.predicting_target } else { &report.predicting_other };
            let row = rows.iter().find(|r| r.degree_lo == 1u64 << bucket).unwrap();
            assert!((row.delta_mrr - expect).abs() < 1e-12);
            assert_eq!(row.count, oa.len());
        }
    }

    #[test]
    fn missing_target_type_is_an_error() {
        let kg = typed_kg();
        let model = ModelState::build_lookup_only(&kg, ScorerKind::TransE, 4, 3).unwrap();
        let degrees = degree_counts(kg.triples(), kg.num_entities());
        assert!(
            degree_stratified_delta(&model, &model, kg.triples(), "pathway", &degrees, None).is_err()
        );
    }
}
