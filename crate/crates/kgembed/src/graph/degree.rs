//! Node degree statistics per entity type.
//!
//! The degree of an entity is its incoming plus outgoing edge count; a
//! self-loop counts 2.

use crate::error::{Error, Result};
use crate::graph::{KnowledgeGraph, Triple};

/// Quantile row for one entity type (or "All").
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct DegreeRow {
    pub entity_type: String,
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub min: u64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub max: u64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct DegreeTable {
    pub rows: Vec<DegreeRow>,
}

/// Per-entity degree counts over a triple set.
pub fn degree_counts(triples: &[Triple], num_entities: usize) -> Vec<u64> {
    let mut deg = vec![0u64; num_entities];
    for t in triples {
        deg[t.head.0 as usize] += 1;
        deg[t.tail.0 as usize] += 1;
    }
    deg
}

/// Degree quantiles per entity type, with linear interpolation, plus an
/// "All" row aggregating every entity. When the graph carries no type
/// labels only the "All" row is emitted. Entities with no incident edges
/// are included with degree 0.
pub fn degree_table(kg: &KnowledgeGraph) -> Result<DegreeTable> {
    if kg.triples().is_empty() {
        return Err(Error::EmptyInput("graph has no triples".into()));
    }
    let deg = degree_counts(kg.triples(), kg.num_entities());

    let mut rows = Vec::new();
    if kg.has_entity_types() {
        let mut types: Vec<String> = kg
            .entities()
            .filter_map(|e| kg.entity_type(e).map(|t| t.to_string()))
            .collect();
        types.sort();
        types.dedup();
        for ty in types {
            let values: Vec<u64> = kg
                .entities()
                .filter(|&e| kg.entity_type(e) == Some(ty.as_str()))
                .map(|e| deg[e.0 as usize])
                .collect();
            rows.push(summarize(&ty, values));
        }
    }
    rows.push(summarize("All", deg));
    Ok(DegreeTable { rows })
}

fn summarize(entity_type: &str, mut values: Vec<u64>) -> DegreeRow {
    values.sort_unstable();
    let n = values.len();
    let mean = values.iter().map(|&v| v as f64).sum::<f64>() / n as f64;
    let var = values.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n as f64;
    DegreeRow {
        entity_type: entity_type.to_string(),
        count: n,
        mean,
        std: var.sqrt(),
        min: values[0],
        q25: quantile(&values, 0.25),
        q50: quantile(&values, 0.50),
        q75: quantile(&values, 0.75),
        max: values[n - 1],
    }
}

/// Linear-interpolation quantile of sorted values.
fn quantile(sorted: &[u64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0] as f64;
    }
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = h - lo as f64;
    sorted[lo] as f64 + frac * (sorted[hi] as f64 - sorted[lo] as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn star_graph_degrees() {
        let mut kg = KnowledgeGraph::new();
        for i in 0..4 {
            kg.add_triple_str("hub", "r", &format!("spoke{i}"));
        }
        let table = degree_table(&kg).unwrap();
        assert_eq!(table.rows.len(), 1);
        let all = &table.rows[0];
        assert_eq!(all.max, 4);
        assert_eq!(all.min, 1);
        assert_relative_eq!(all.q50, 1.0);
        // direct count: hub has degree 4, each spoke 1
        let deg = degree_counts(kg.triples(), kg.num_entities());
        assert_eq!(deg[kg.entity_id("hub").unwrap().0 as usize], 4);
        for i in 0..4 {
            let e = kg.entity_id(&format!("spoke{i}")).unwrap();
            assert_eq!(deg[e.0 as usize], 1);
        }
    }

    #[test]
    fn single_triple_both_endpoints_degree_one() {
        let kg = KnowledgeGraph::from_string_triples([("a", "r", "b")]);
        let deg = degree_counts(kg.triples(), kg.num_entities());
        assert_eq!(deg, vec![1, 1]);
    }

    #[test]
    fn self_loop_counts_two() {
        let kg = KnowledgeGraph::from_string_triples([("a", "r", "a")]);
        let deg = degree_counts(kg.triples(), kg.num_entities());
        assert_eq!(deg, vec![2]);
    }

    #[test]
    fn degree_sum_is_twice_triple_count() {
        let kg = KnowledgeGraph::from_string_triples([
            ("a", "r", "b"),
            ("b", "r", "c"),
            ("c", "s", "a"),
            ("a", "s", "a"),
        ]);
        let deg = degree_counts(kg.triples(), kg.num_entities());
        assert_eq!(deg.iter().sum::<u64>(), 2 * kg.triples().len() as u64);
    }

    #[test]
    fn typed_rows_precede_all_row() {
        let mut kg = KnowledgeGraph::from_string_triples([("a", "r", "b"), ("b", "r", "c")]);
        kg.set_entity_type(kg.entity_id("a").unwrap(), "drug");
        kg.set_entity_type(kg.entity_id("b").unwrap(), "protein");
        let table = degree_table(&kg).unwrap();
        let names: Vec<&str> = table.rows.iter().map(|r| r.entity_type.as_str()).collect();
        assert_eq!(names, vec!["drug", "protein", "All"]);
    }

    #[test]
    fn quantiles_use_linear_interpolation() {
        // values 1,2,3,4: q25 = 1.75, q50 = 2.5, q75 = 3.25
        let sorted = vec![1u64, 2, 3, 4];
        assert_relative_eq!(quantile(&sorted, 0.25), 1.75);
        assert_relative_eq!(quantile(&sorted, 0.50), 2.5);
        assert_relative_eq!(quantile(&sorted, 0.75), 3.25);
    }
}
