//! Checkpoint serialization.
//!
//! A checkpoint is a directory holding a JSON manifest (architecture,
//! vocabularies, training config, step counter, validation history) and one
//! binary little-endian 64-bit-float blob per named parameter group under
//! `params/`. Round trips are bit-exact: a reloaded model scores any triple
//! identically.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoders::{AttributeEncoder, PMat, Tensor, TensorStore, TokenVocabulary};
use crate::error::{Error, Result};
use crate::model::{AdamState, EncoderSpec, LookupTable, ModelState, OptimizerKind};
use crate::scoring::ScorerKind;
use crate::training::{Checkpoint, EvalPoint, TrainConfig};

const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct ParamEntry {
    name: String,
    shape: Vec<usize>,
    file: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct EncoderEntry {
    modality_id: u8,
    spec: EncoderSpec,
    vocab: TokenVocabulary,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    version: u32,
    scorer: ScorerKind,
    dim: usize,
    token_dim: usize,
    optimizer: OptimizerKind,
    adam_t: u64,
    modalities: Vec<String>,
    entity_names: Vec<String>,
    relation_names: Vec<String>,
    entity_types: Vec<Option<String>>,
    /// entity index per lookup row, in row order
    lookup_row_entities: Vec<u32>,
    encoders: Vec<EncoderEntry>,
    /// (entity index, modality id, payload)
    attributes: Vec<(u32, u8, String)>,
    config: TrainConfig,
    step: u64,
    history: Vec<EvalPoint>,
    params: Vec<ParamEntry>,
}

fn write_blob(path: &Path, data: &[f64]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for &x in data {
        w.write_all(&x.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn read_blob(path: &Path, len: usize) -> Result<Vec<f64>> {
    let mut r = BufReader::new(File::open(path)?);
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != len * 8 {
        return Err(Error::Checkpoint(format!(
            "{}: expected {} bytes, found {}",
            path.display(),
            len * 8,
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

/// Write `checkpoint` into `dir` (created if needed).
pub fn save_checkpoint(dir: impl AsRef<Path>, checkpoint: &Checkpoint) -> Result<()> {
    let dir = dir.as_ref();
    let params_dir = dir.join("params");
    fs::create_dir_all(&params_dir)?;

    let model = &checkpoint.model;
    let store = model.export_tensors();
    let mut entries = Vec::with_capacity(store.entries.len());
    for (i, (name, tensor)) in store.entries.iter().enumerate() {
        let file = format!("p{i}.bin");
        write_blob(&params_dir.join(&file), &tensor.data)?;
        entries.push(ParamEntry { name: name.clone(), shape: tensor.shape.clone(), file });
    }

    let manifest = Manifest {
        version: FORMAT_VERSION,
        scorer: model.scorer,
        dim: model.dim,
        token_dim: model.token_dim,
        optimizer: model.optimizer,
        adam_t: model.adam.t,
        modalities: model.modalities.clone(),
        entity_names: model.entity_names.clone(),
        relation_names: model.relation_names.clone(),
        entity_types: model.entity_types.clone(),
        lookup_row_entities: model.lookup.row_entities.clone(),
        encoders: model
            .encoder_specs
            .iter()
            .map(|(&mid, spec)| EncoderEntry {
                modality_id: mid,
                spec: spec.clone(),
                vocab: model.encoders[&mid].vocab().clone(),
            })
            .collect(),
        attributes: model
            .attributes
            .iter()
            .map(|(&e, (m, p))| (e, *m, p.clone()))
            .collect(),
        config: checkpoint.config.clone(),
        step: checkpoint.step,
        history: checkpoint.history.clone(),
        params: entries,
    };
    let mut w = BufWriter::new(File::create(dir.join("manifest.json"))?);
    serde_json::to_writer_pretty(&mut w, &manifest)?;
    w.flush()?;
    Ok(())
}

/// Load a checkpoint previously written with [`save_checkpoint`].
pub fn load_checkpoint(dir: impl AsRef<Path>) -> Result<Checkpoint> {
    let dir = dir.as_ref();
    let manifest: Manifest = serde_json::from_reader(BufReader::new(File::open(dir.join("manifest.json"))?))?;
    if manifest.version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint version {}",
            manifest.version
        )));
    }

    let mut store = TensorStore::default();
    for entry in &manifest.params {
        let len: usize = entry.shape.iter().product();
        let data = read_blob(&dir.join("params").join(&entry.file), len)?;
        store.put(entry.name.clone(), Tensor { shape: entry.shape.clone(), data });
    }

    let entity_space = manifest.scorer.entity_space(manifest.dim);
    let relation_space = manifest.scorer.relation_space(manifest.dim);
    let we = PMat::new(store.take("we")?.to_mat()?);
    let wr = PMat::new(store.take("wr")?.to_mat()?);
    if we.v.ncols() != entity_space.param_len() || we.v.nrows() != manifest.lookup_row_entities.len() {
        return Err(Error::Checkpoint("entity table shape mismatch".into()));
    }
    let entity_rows: HashMap<u32, usize> = manifest
        .lookup_row_entities
        .iter()
        .enumerate()
        .map(|(row, &e)| (e, row))
        .collect();
    let lookup = LookupTable {
        we,
        wr,
        entity_rows,
        row_entities: manifest.lookup_row_entities.clone(),
        entity_space,
        relation_space,
        touched_entity_rows: HashSet::new(),
        touched_relation_rows: HashSet::new(),
    };

    let out_len = entity_space.param_len();
    let mut encoders = BTreeMap::new();
    let mut encoder_specs = BTreeMap::new();
    let mut encoder_touched = BTreeMap::new();
    // the builder RNG is immediately overwritten by the imported tensors
    let mut scratch_rng = ChaCha8Rng::seed_from_u64(0);
    for entry in manifest.encoders {
        let mut vocab = entry.vocab;
        vocab.rebuild_index();
        let mut encoder = AttributeEncoder::build(
            entry.spec.kind,
            vocab,
            manifest.token_dim,
            out_len,
            entry.spec.layers,
            entry.spec.max_len,
            &mut scratch_rng,
        );
        encoder.import_tensors(&format!("enc{}", entry.modality_id), &mut store)?;
        encoders.insert(entry.modality_id, encoder);
        encoder_specs.insert(entry.modality_id, entry.spec);
        encoder_touched.insert(entry.modality_id, false);
    }

    let mut adam = AdamState { t: manifest.adam_t, ..AdamState::default() };
    let moment_names: Vec<String> = store
        .entries
        .keys()
        .filter(|k| k.starts_with("adam_m.") || k.starts_with("adam_v."))
        .cloned()
        .collect();
    for name in moment_names {
        let tensor = store.take(&name)?;
        if let Some(key) = name.strip_prefix("adam_m.") {
            adam.m.insert(key.to_string(), tensor.data);
        } else if let Some(key) = name.strip_prefix("adam_v.") {
            adam.v.insert(key.to_string(), tensor.data);
        }
    }

    let model = ModelState {
        scorer: manifest.scorer,
        dim: manifest.dim,
        token_dim: manifest.token_dim,
        lookup,
        encoders,
        encoder_specs,
        encoder_touched,
        attributes: manifest
            .attributes
            .into_iter()
            .map(|(e, m, p)| (e, (m, p)))
            .collect(),
        modalities: manifest.modalities,
        entity_names: manifest.entity_names,
        relation_names: manifest.relation_names,
        entity_types: manifest.entity_types,
        optimizer: manifest.optimizer,
        adam,
    };

    Ok(Checkpoint {
        model,
        config: manifest.config,
        step: manifest.step,
        history: manifest.history,
    })
}
