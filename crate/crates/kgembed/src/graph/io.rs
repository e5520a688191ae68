//! TSV ingestion and split serialization.
//!
//! File formats:
//! - triples: `head \t relation \t tail`
//! - attributes: `entity \t modality \t payload`
//! - entity types (sidecar): `entity \t type`
//! - benchmarks: `entity_a \t entity_b \t task`
//!
//! Splits are emitted as three TSV files plus a JSON manifest.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{BenchmarkPairs, KnowledgeGraph, SplitBundle, Triple};

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

fn read_tsv_rows(path: &Path, columns: usize) -> Result<Vec<Vec<String>>> {
    let file = File::open(path)?;
    let reader = BufReader::new(file);
    let mut rows = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != columns {
            return Err(parse_error(
                path,
                lineno + 1,
                format!("expected {} tab-separated columns, found {}", columns, fields.len()),
            ));
        }
        rows.push(fields.iter().map(|s| s.to_string()).collect());
    }
    Ok(rows)
}

/// Load a knowledge graph from a triples TSV. Vocabularies are built in
/// first-appearance order; exact duplicate lines are deduplicated and the
/// count is logged.
pub fn ingest_triples(path: impl AsRef<Path>) -> Result<KnowledgeGraph> {
    let path = path.as_ref();
    let rows = read_tsv_rows(path, 3)?;
    if rows.is_empty() {
        return Err(Error::EmptyInput(format!("{}: no triples", path.display())));
    }
    let mut kg = KnowledgeGraph::new();
    let mut duplicates = 0usize;
    for row in &rows {
        if !kg.add_triple_str(&row[0], &row[1], &row[2]) {
            duplicates += 1;
        }
    }
    if duplicates > 0 {
        log::info!("{}: deduplicated {} duplicate triple lines", path.display(), duplicates);
    }
    log::info!(
        "{}: {} triples, {} entities, {} relations",
        path.display(),
        kg.triples().len(),
        kg.num_entities(),
        kg.num_relations()
    );
    Ok(kg)
}

/// Load the optional entity-type sidecar (`entity \t type`). Types for
/// entities absent from the graph are skipped with a warning count.
pub fn load_entity_types(kg: &mut KnowledgeGraph, path: impl AsRef<Path>) -> Result<usize> {
    let path = path.as_ref();
    let rows = read_tsv_rows(path, 2)?;
    let mut skipped = 0usize;
    for row in &rows {
        match kg.entity_id(&row[0]) {
            Some(e) => kg.set_entity_type(e, &row[1]),
            None => skipped += 1,
        }
    }
    if skipped > 0 {
        log::warn!("{}: skipped {} type rows for unknown entities", path.display(), skipped);
    }
    Ok(skipped)
}

/// Outcome of attaching an attribute file.
#[derive(Debug, Clone, Default, Serialize)]
pub struct AttachStats {
    /// Rows whose entity is not in the graph.
    pub skipped_unknown_entities: usize,
    /// Rows for an entity that already had a record (first record kept).
    pub duplicate_records: usize,
    /// Entities that received a record.
    pub attached: usize,
    /// Per entity type: (covered, total). Entities without a type label are
    /// aggregated under "All" only.
    pub coverage: Vec<(String, usize, usize)>,
}

/// Attach attribute records from a TSV (`entity \t modality \t payload`).
/// Records for entities absent from the graph are skipped with a warning
/// count; an unknown modality name is an error listing the registered ones.
pub fn attach_attributes(kg: &mut KnowledgeGraph, path: impl AsRef<Path>) -> Result<AttachStats> {
    let path = path.as_ref();
    let file = File::open(path)?;
    let reader = BufReader::new(file);
    let mut stats = AttachStats::default();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(parse_error(
                path,
                lineno + 1,
                format!("expected 3 tab-separated columns, found {}", fields.len()),
            ));
        }
        let (entity, modality_name, payload) = (fields[0], fields[1], fields[2]);
        let modality = kg.modality_id(modality_name).ok_or_else(|| Error::UnknownModality {
            name: modality_name.to_string(),
            registered: kg.modalities().to_vec(),
        })?;
        if payload.is_empty() {
            return Err(parse_error(path, lineno + 1, "empty attribute payload"));
        }
        match kg.entity_id(entity) {
            Some(e) => {
                if kg.set_attribute(e, modality, payload)? {
                    stats.attached += 1;
                } else {
                    stats.duplicate_records += 1;
                }
            }
            None => stats.skipped_unknown_entities += 1,
        }
    }
    if stats.skipped_unknown_entities > 0 {
        log::warn!(
            "{}: skipped {} attribute rows for entities absent from the graph",
            path.display(),
            stats.skipped_unknown_entities
        );
    }
    stats.coverage = coverage_by_type(kg);
    Ok(stats)
}

fn coverage_by_type(kg: &KnowledgeGraph) -> Vec<(String, usize, usize)> {
    let mut per_type: HashMap<String, (usize, usize)> = HashMap::new();
    let mut all = (0usize, 0usize);
    for e in kg.entities() {
        let covered = kg.attribute(e).is_some();
        all.1 += 1;
        if covered {
            all.0 += 1;
        }
        if let Some(ty) = kg.entity_type(e) {
            let slot = per_type.entry(ty.to_string()).or_insert((0, 0));
            slot.1 += 1;
            if covered {
                slot.0 += 1;
            }
        }
    }
    let mut rows: Vec<(String, usize, usize)> =
        per_type.into_iter().map(|(ty, (c, n))| (ty, c, n)).collect();
    rows.sort();
    rows.push(("All".to_string(), all.0, all.1));
    rows
}

/// Load benchmark pairs (`entity_a \t entity_b \t task`). Unordered
/// duplicates are dropped.
pub fn load_benchmark_pairs(path: impl AsRef<Path>) -> Result<BenchmarkPairs> {
    let path = path.as_ref();
    let rows = read_tsv_rows(path, 3)?;
    let mut pairs = BenchmarkPairs::new();
    let mut duplicates = 0usize;
    for row in &rows {
        if !pairs.insert(&row[0], &row[1], &row[2]) {
            duplicates += 1;
        }
    }
    if duplicates > 0 {
        log::info!("{}: dropped {} duplicate benchmark pairs", path.display(), duplicates);
    }
    Ok(pairs)
}

/// JSON manifest written next to the split TSV files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub ratios: (f64, f64, f64),
    pub total_triples: usize,
    pub train: usize,
    pub validation: usize,
    pub test: usize,
    pub removed: usize,
    pub dropped_entities: Vec<String>,
}

fn write_triples_tsv(kg: &KnowledgeGraph, triples: &[Triple], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for t in triples {
        writeln!(
            w,
            "{}\t{}\t{}",
            kg.entity_name(t.head),
            kg.relation_name(t.relation),
            kg.entity_name(t.tail)
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Write `train.tsv`, `valid.tsv`, `test.tsv`, `removed.tsv` and
/// `manifest.json` into `dir`.
pub fn write_split_bundle(kg: &KnowledgeGraph, bundle: &SplitBundle, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    write_triples_tsv(kg, &bundle.train, &dir.join("train.tsv"))?;
    write_triples_tsv(kg, &bundle.validation, &dir.join("valid.tsv"))?;
    write_triples_tsv(kg, &bundle.test, &dir.join("test.tsv"))?;
    write_triples_tsv(kg, &bundle.removed, &dir.join("removed.tsv"))?;
    let manifest = SplitManifest {
        seed: bundle.seed,
        ratios: bundle.ratios,
        total_triples: bundle.train.len() + bundle.validation.len() + bundle.test.len() + bundle.removed.len(),
        train: bundle.train.len(),
        validation: bundle.validation.len(),
        test: bundle.test.len(),
        removed: bundle.removed.len(),
        dropped_entities: bundle
            .dropped_entities
            .iter()
            .map(|&e| kg.entity_name(e).to_string())
            .collect(),
    };
    let mut w = BufWriter::new(File::create(dir.join("manifest.json"))?);
    serde_json::to_writer_pretty(&mut w, &manifest)?;
    w.flush()?;
    Ok(())
}

fn read_triples_tsv(kg: &KnowledgeGraph, path: &Path) -> Result<Vec<Triple>> {
    let rows = read_tsv_rows(path, 3)?;
    let mut triples = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let head = kg.entity_id(&row[0]).ok_or_else(|| parse_error(path, i + 1, format!("unknown entity {:?}", row[0])))?;
        let relation = kg
            .relation_id(&row[1])
            .ok_or_else(|| parse_error(path, i + 1, format!("unknown relation {:?}", row[1])))?;
        let tail = kg.entity_id(&row[2]).ok_or_else(|| parse_error(path, i + 1, format!("unknown entity {:?}", row[2])))?;
        triples.push(Triple::new(head, relation, tail));
    }
    Ok(triples)
}

/// Read a split bundle previously written with [`write_split_bundle`],
/// resolving identifiers against `kg`.
pub fn read_split_bundle(kg: &KnowledgeGraph, dir: impl AsRef<Path>) -> Result<(SplitBundle, SplitManifest)> {
    let dir = dir.as_ref();
    let manifest: SplitManifest = serde_json::from_reader(File::open(dir.join("manifest.json"))?)?;
    let train = read_triples_tsv(kg, &dir.join("train.tsv"))?;
    let validation = read_triples_tsv(kg, &dir.join("valid.tsv"))?;
    let test = read_triples_tsv(kg, &dir.join("test.tsv"))?;
    let removed_path = dir.join("removed.tsv");
    let removed = if removed_path.exists() {
        read_triples_tsv(kg, &removed_path)?
    } else {
        Vec::new()
    };
    let dropped_entities = manifest
        .dropped_entities
        .iter()
        .filter_map(|name| kg.entity_id(name))
        .collect();
    let bundle = SplitBundle {
        train,
        validation,
        test,
        removed,
        dropped_entities,
        seed: manifest.seed,
        ratios: manifest.ratios,
    };
    Ok((bundle, manifest))
}
