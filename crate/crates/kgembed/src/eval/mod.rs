//! Rank-based link-prediction evaluation.
//!
//! For a triple and a side (head or tail), every entity is scored as a
//! candidate replacement at that side and the rank of the true entity is
//! recorded. Filtered evaluation (the default) excludes candidates that form
//! another known true triple. Ties use the realistic convention:
//! `1 + #strictly-greater + #ties/2`, rounded half up.

mod degree;
mod welch;

pub use degree::{degree_stratified_delta, DegreeDeltaReport, DegreeDeltaRow};
pub use welch::{welch_test, WelchResult};

use std::collections::HashSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::Triple;
use crate::model::ModelState;

/// Which side of a triple is being predicted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Head,
    Tail,
}

/// Whether candidate filtering is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalMode {
    Raw,
    Filtered,
}

/// Set of known true triples used to exclude competing candidates.
#[derive(Debug, Clone, Default)]
pub struct TripleFilter {
    set: HashSet<(u32, u32, u32)>,
}

impl TripleFilter {
    pub fn from_triples<'a>(triples: impl IntoIterator<Item = &'a Triple>) -> Self {
        let set = triples
            .into_iter()
            .map(|t| (t.head.0, t.relation.0, t.tail.0))
            .collect();
        Self { set }
    }

    pub fn contains(&self, h: u32, r: u32, t: u32) -> bool {
        self.set.contains(&(h, r, t))
    }

    pub fn len(&self) -> usize {
        self.set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.set.is_empty()
    }
}

/// One evaluated (triple, side) pair.
#[derive(Debug, Clone, Serialize)]
pub struct RankEntry {
    pub triple: Triple,
    pub side: Side,
    pub rank: u64,
}

/// Rank of the candidate at `true_idx` among `scores`, with mid-tie
/// resolution rounded half up. `excluded` marks candidates removed by
/// filtering; the true candidate itself is never excluded.
pub fn rank_from_scores(scores: &[f64], true_idx: usize, excluded: impl Fn(usize) -> bool) -> u64 {
    let s = scores[true_idx];
    let mut greater = 0u64;
    let mut ties = 0u64;
    for (i, &c) in scores.iter().enumerate() {
        if i == true_idx || excluded(i) {
            continue;
        }
        if c > s {
            greater += 1;
        } else if c == s {
            ties += 1;
        }
    }
    let doubled = 2 + 2 * greater + ties;
    (doubled + 1) / 2
}

fn scores_for_side(
    model: &ModelState,
    entity_params: &[Vec<f64>],
    triple: &Triple,
    side: Side,
) -> Result<Vec<f64>> {
    for e in [triple.head, triple.tail] {
        if e.0 as usize >= entity_params.len() {
            return Err(Error::UnknownId(format!("entity index {}", e.0)));
        }
    }
    let r = model.rel_emb(triple.relation)?;
    let r = r.as_slice();
    let scorer = model.scorer();
    let scores = match side {
        Side::Tail => {
            let h = &entity_params[triple.head.0 as usize];
            entity_params.iter().map(|x| scorer.score_params(h, r, x)).collect()
        }
        Side::Head => {
            let t = &entity_params[triple.tail.0 as usize];
            entity_params.iter().map(|x| scorer.score_params(x, r, t)).collect()
        }
    };
    Ok(scores)
}

fn rank_one(
    model: &ModelState,
    entity_params: &[Vec<f64>],
    triple: &Triple,
    side: Side,
    filter: Option<&TripleFilter>,
) -> Result<u64> {
    let scores = scores_for_side(model, entity_params, triple, side)?;
    let true_idx = match side {
        Side::Tail => triple.tail.0 as usize,
        Side::Head => triple.head.0 as usize,
    };
    let rank = match (filter, side) {
        (None, _) => rank_from_scores(&scores, true_idx, |_| false),
        (Some(f), Side::Tail) => rank_from_scores(&scores, true_idx, |x| {
            f.contains(triple.head.0, triple.relation.0, x as u32)
        }),
        (Some(f), Side::Head) => rank_from_scores(&scores, true_idx, |x| {
            f.contains(x as u32, triple.relation.0, triple.tail.0)
        }),
    };
    Ok(rank)
}

/// Rank the true entity of `triple` at `side` against all entities the model
/// can embed. With a filter, candidates forming known triples (other than
/// the true entity) are excluded.
pub fn rank_triple(
    model: &ModelState,
    triple: &Triple,
    side: Side,
    filter: Option<&TripleFilter>,
) -> Result<u64> {
    let entity_params = model.all_entity_params()?;
    rank_one(model, &entity_params, triple, side, filter)
}

/// Head and tail ranks for every triple, in triple order.
pub fn collect_ranks(
    model: &ModelState,
    triples: &[Triple],
    filter: Option<&TripleFilter>,
) -> Result<Vec<RankEntry>> {
    let entity_params = model.all_entity_params()?;
    let mut out = Vec::with_capacity(2 * triples.len());
    for t in triples {
        for side in [Side::Head, Side::Tail] {
            let rank = rank_one(model, &entity_params, t, side, filter)?;
            out.push(RankEntry { triple: *t, side, rank });
        }
    }
    Ok(out)
}

/// Mean reciprocal rank.
pub fn mrr(ranks: &[u64]) -> Result<f64> {
    if ranks.is_empty() {
        return Err(Error::EmptyInput("rank list".into()));
    }
    Ok(ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / ranks.len() as f64)
}

/// Fraction of ranks at or below `k`.
pub fn hits_at_k(ranks: &[u64], k: u64) -> Result<f64> {
    if ranks.is_empty() {
        return Err(Error::EmptyInput("rank list".into()));
    }
    if k < 1 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    Ok(ranks.iter().filter(|&&r| r <= k).count() as f64 / ranks.len() as f64)
}

/// Metrics for one relation.
#[derive(Debug, Clone, Serialize)]
pub struct RelationBreakdown {
    pub relation: String,
    pub count: usize,
    pub mrr: f64,
    pub hits1: f64,
    pub hits3: f64,
    pub hits10: f64,
}

/// Link-prediction metrics over a triple set (head and tail prediction).
#[derive(Debug, Clone, Serialize)]
pub struct MetricsReport {
    pub mode: EvalMode,
    pub count: usize,
    pub mrr: f64,
    pub hits1: f64,
    pub hits3: f64,
    pub hits10: f64,
    pub per_relation: Vec<RelationBreakdown>,
}

/// Build a report from collected ranks.
pub fn metrics_from_ranks(
    entries: &[RankEntry],
    mode: EvalMode,
    relation_name: impl Fn(u32) -> String,
) -> Result<MetricsReport> {
    let ranks: Vec<u64> = entries.iter().map(|e| e.rank).collect();
    let mut relations: Vec<u32> = entries.iter().map(|e| e.triple.relation.0).collect();
    relations.sort_unstable();
    relations.dedup();
    let mut per_relation = Vec::with_capacity(relations.len());
    for rel in relations {
        let sub: Vec<u64> = entries
            .iter()
            .filter(|e| e.triple.relation.0 == rel)
            .map(|e| e.rank)
            .collect();
        per_relation.push(RelationBreakdown {
            relation: relation_name(rel),
            count: sub.len(),
            mrr: mrr(&sub)?,
            hits1: hits_at_k(&sub, 1)?,
            hits3: hits_at_k(&sub, 3)?,
            hits10: hits_at_k(&sub, 10)?,
        });
    }
    Ok(MetricsReport {
        mode,
        count: ranks.len(),
        mrr: mrr(&ranks)?,
        hits1: hits_at_k(&ranks, 1)?,
        hits3: hits_at_k(&ranks, 3)?,
        hits10: hits_at_k(&ranks, 10)?,
        per_relation,
    })
}

/// Evaluate link prediction over `triples`. `filter` enables filtered
/// ranking; pass `None` for raw mode.
pub fn evaluate(
    model: &ModelState,
    triples: &[Triple],
    filter: Option<&TripleFilter>,
) -> Result<MetricsReport> {
    if triples.is_empty() {
        return Err(Error::EmptyInput("evaluation triple set".into()));
    }
    let mode = if filter.is_some() { EvalMode::Filtered } else { EvalMode::Raw };
    let entries = collect_ranks(model, triples, filter)?;
    let names = |r: u32| {
        model
            .relation_names()
            .get(r as usize)
            .cloned()
            .unwrap_or_else(|| format!("rel{r}"))
    };
    metrics_from_ranks(&entries, mode, names)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{EntityId, KnowledgeGraph, RelationId};
    use crate::model::ModelState;
    use crate::scoring::ScorerKind;
    use approx::assert_relative_eq;

    fn toy_model(n_entities: usize, seed: u64) -> (KnowledgeGraph, ModelState) {
        let mut kg = KnowledgeGraph::new();
        for i in 0..n_entities {
            kg.add_triple_str(&format!("e{i}"), "r", &format!("e{}", (i + 1) % n_entities));
        }
        let model = ModelState::build_lookup_only(&kg, ScorerKind::TransE, 4, seed).unwrap();
        (kg, model)
    }

    #[test]
    fn mrr_examples() {
        assert_relative_eq!(mrr(&[1, 1, 1]).unwrap(), 1.0);
        assert_relative_eq!(mrr(&[1, 2, 4]).unwrap(), 7.0 / 12.0, epsilon = 1e-12);
        assert!(mrr(&[]).is_err());
    }

    #[test]
    fn hits_examples() {
        assert_relative_eq!(hits_at_k(&[1, 5, 20], 10).unwrap(), 2.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(hits_at_k(&[1, 5, 20], 20).unwrap(), 1.0);
        assert!(hits_at_k(&[], 10).is_err());
    }

    #[test]
    fn strictly_best_candidate_ranks_first() {
        let scores = vec![0.1, 0.9, 0.3];
        assert_eq!(rank_from_scores(&scores, 1, |_| false), 1);
    }

    #[test]
    fn all_ties_rank_at_midpoint() {
        // 5 candidates all tied, none filtered: rank = 1 + 4/2 = 3
        let scores = vec![0.5; 5];
        assert_eq!(rank_from_scores(&scores, 2, |_| false), 3);
        // with 2 filtered out: rank = 1 + 2/2 = 2
        assert_eq!(rank_from_scores(&scores, 2, |i| i == 0 || i == 4), 2);
        // odd tie count rounds half up: 1 + 3/2 = 2.5 -> 3
        let scores4 = vec![0.5; 4];
        assert_eq!(rank_from_scores(&scores4, 0, |_| false), 3);
    }

    #[test]
    fn filtered_rank_is_never_worse_than_raw() {
        let (kg, model) = toy_model(8, 3);
        let filter = TripleFilter::from_triples(kg.triples());
        for t in kg.triples() {
            for side in [Side::Head, Side::Tail] {
                let raw = rank_triple(&model, t, side, None).unwrap();
                let filtered = rank_triple(&model, t, side, Some(&filter)).unwrap();
                assert!(filtered <= raw);
            }
        }
    }

    #[test]
    fn evaluate_counts_both_sides() {
        let (kg, model) = toy_model(5, 4);
        let report = evaluate(&model, kg.triples(), None).unwrap();
        assert_eq!(report.count, 2 * kg.triples().len());
        assert_eq!(report.per_relation.len(), 1);
        assert_eq!(report.per_relation[0].count, report.count);
    }

    #[test]
    fn perfect_model_gets_perfect_metrics() {
        // 1 entity pair and a model forced to rank the truth first
        let mut kg = KnowledgeGraph::new();
        kg.add_triple_str("a", "r", "b");
        kg.add_triple_str("c", "r", "d");
        let mut model = ModelState::build_lookup_only(&kg, ScorerKind::TransE, 2, 9).unwrap();
        // place entities so that a + r = b exactly and c + r = d exactly
        let rows: Vec<(&str, [f64; 2])> =
            vec![("a", [0.0, 0.0]), ("b", [1.0, 0.0]), ("c", [5.0, 5.0]), ("d", [6.0, 5.0])];
        for (name, v) in rows {
            let e = kg.entity_id(name).unwrap();
            let row = model.lookup().entity_row(e).unwrap();
            set_row(&mut model, row, &v);
        }
        set_rel(&mut model, 0, &[1.0, 0.0]);
        let triples = vec![*kg.triples().first().unwrap()];
        let report = evaluate(&model, &triples, None).unwrap();
        assert_relative_eq!(report.mrr, 1.0);
        assert_relative_eq!(report.hits1, 1.0);
        assert_relative_eq!(report.hits10, 1.0);
    }

    fn set_row(model: &mut ModelState, row: usize, v: &[f64]) {
        let mut visited = false;
        model.visit_all_params(&mut |p| {
            if p.name == "we" {
                let cols = v.len();
                p.value[row * cols..(row + 1) * cols].copy_from_slice(v);
                visited = true;
            }
        });
        assert!(visited);
    }

    fn set_rel(model: &mut ModelState, row: usize, v: &[f64]) {
        model.visit_all_params(&mut |p| {
            if p.name == "wr" {
                let cols = v.len();
                p.value[row * cols..(row + 1) * cols].copy_from_slice(v);
            }
        });
    }

    /// Independent oracle: sort the scores and locate the true candidate,
    /// handling ties by averaging the tied positions (rounded half up).
    fn oracle_rank(scores: &[f64], true_idx: usize, excluded: &dyn Fn(usize) -> bool) -> u64 {
        let mut kept: Vec<(usize, f64)> = scores
            .iter()
            .enumerate()
            .filter(|&(i, _)| i == true_idx || !excluded(i))
            .map(|(i, &s)| (i, s))
            .collect();
        kept.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
        let pos = kept.iter().position(|&(i, _)| i == true_idx).unwrap();
        let s = kept[pos].1;
        let first = kept.iter().position(|&(_, v)| v == s).unwrap();
        let last = kept.iter().rposition(|&(_, v)| v == s).unwrap();
        // average of 1-based positions first..=last, rounded half up
        let doubled = (first + 1 + last + 1) as u64;
        (doubled + 1) / 2
    }

    #[test]
    fn rank_matches_sort_oracle_on_hand_scored_candidates() {
        let scores = vec![0.3, 0.9, 0.3, -0.2, 0.3];
        for true_idx in 0..scores.len() {
            assert_eq!(
                rank_from_scores(&scores, true_idx, |_| false),
                oracle_rank(&scores, true_idx, &|_| false),
                "true_idx {true_idx}"
            );
        }
        let excl = |i: usize| i == 1;
        for true_idx in 0..scores.len() {
            if true_idx == 1 {
                continue;
            }
            assert_eq!(
                rank_from_scores(&scores, true_idx, excl),
                oracle_rank(&scores, true_idx, &excl)
            );
        }
    }

    #[test]
    fn mrr_is_invariant_under_monotone_score_transforms() {
        let (kg, model) = toy_model(10, 6);
        let entity_params = model.all_entity_params().unwrap();
        let mut ranks_plain = Vec::new();
        let mut ranks_transformed = Vec::new();
        for t in kg.triples() {
            let scores = scores_for_side(&model, &entity_params, t, Side::Tail).unwrap();
            let transformed: Vec<f64> = scores.iter().map(|s| (s * 0.5).exp() + 3.0).collect();
            ranks_plain.push(rank_from_scores(&scores, t.tail.0 as usize, |_| false));
            ranks_transformed.push(rank_from_scores(&transformed, t.tail.0 as usize, |_| false));
        }
        assert_relative_eq!(mrr(&ranks_plain).unwrap(), mrr(&ranks_transformed).unwrap());
    }

    #[test]
    fn report_invariants_hold() {
        let (kg, model) = toy_model(12, 8);
        let filter = TripleFilter::from_triples(kg.triples());
        let report = evaluate(&model, kg.triples(), Some(&filter)).unwrap();
        assert!(report.hits1 <= report.hits3);
        assert!(report.hits3 <= report.hits10);
        assert!(report.hits10 <= 1.0);
        assert!(report.hits1 <= report.mrr && report.mrr <= 1.0);
    }

    #[test]
    fn unencodable_entity_is_an_error() {
        let (kg, model) = toy_model(4, 2);
        let bogus = Triple::new(EntityId(99), RelationId(0), EntityId(0));
        assert!(rank_triple(&model, &bogus, Side::Tail, None).is_err());
        let _ = kg;
    }
}
