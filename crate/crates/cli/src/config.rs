//! Run configuration: a TOML file with `[data]`, `[model]`, `[train]`, and
//! optional `[pretrain]` / `[hpo]` sections. Unknown keys are rejected.
//! Relative data paths resolve against `KGEMBED_DATA_ROOT` when that
//! variable is set.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use kgembed::encoders::{EncoderKind, TokenizerKind};
use kgembed::graph::KnowledgeGraph;
use kgembed::model::{EncoderSpec, ModelSpec, OptimizerKind};
use kgembed::scoring::ScorerKind;
use kgembed::training::{HpoSpace, LossKind, TrainConfig};

pub const DATA_ROOT_ENV: &str = "KGEMBED_DATA_ROOT";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub triples: PathBuf,
    pub attributes: Option<PathBuf>,
    pub entity_types: Option<PathBuf>,
    pub benchmarks: Option<PathBuf>,
    /// Directory produced by `kgembed split`.
    pub splits: Option<PathBuf>,
    #[serde(default)]
    pub modalities: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderSection {
    pub modality: String,
    pub kind: String,
    pub tokenizer: String,
    pub layers: Option<usize>,
    pub max_len: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub scorer: String,
    pub dim: usize,
    pub token_dim: Option<usize>,
    #[serde(default)]
    pub encoders: Vec<EncoderSection>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub learning_rate: Option<f64>,
    pub regularization: Option<f64>,
    pub batch_size: Option<usize>,
    pub loss: Option<String>,
    pub margin: Option<f64>,
    pub negatives_per_positive: Option<usize>,
    pub epochs: Option<usize>,
    pub eval_interval: Option<usize>,
    pub patience: Option<usize>,
    pub seed: Option<u64>,
    pub optimizer: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HpoSection {
    pub budget: Option<usize>,
    pub learning_rate: Option<(f64, f64)>,
    pub regularization: Option<(f64, f64)>,
    pub batch_sizes: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSection,
    pub model: ModelSection,
    #[serde(default)]
    pub train: TrainSection,
    /// Stage-1 overrides for `pretrain`; unset fields fall back to `[train]`.
    pub pretrain: Option<TrainSection>,
    pub hpo: Option<HpoSection>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let config: RunConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        Ok(config)
    }

    /// Resolve a data path against `KGEMBED_DATA_ROOT` when it is relative.
    pub fn resolve_path(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            return path.to_path_buf();
        }
        match std::env::var_os(DATA_ROOT_ENV) {
            Some(root) => PathBuf::from(root).join(path),
            None => path.to_path_buf(),
        }
    }

    pub fn model_spec(&self) -> Result<ModelSpec> {
        let scorer: ScorerKind = self.model.scorer.parse()?;
        let mut encoders = Vec::new();
        for section in &self.model.encoders {
            let kind: EncoderKind = section.kind.parse()?;
            let tokenizer = match section.tokenizer.to_ascii_lowercase().as_str() {
                "chars" => TokenizerKind::Chars,
                "words" => TokenizerKind::Words,
                other => bail!("unknown tokenizer {other:?} (expected chars or words)"),
            };
            encoders.push(EncoderSpec {
                modality: section.modality.clone(),
                kind,
                tokenizer,
                layers: section.layers.unwrap_or(1),
                max_len: section.max_len.unwrap_or(64),
            });
        }
        Ok(ModelSpec {
            scorer,
            dim: self.model.dim,
            token_dim: self.model.token_dim,
            encoders,
            seed: self.model.seed.unwrap_or(0),
        })
    }

    pub fn train_config(&self, seed_override: Option<u64>) -> Result<TrainConfig> {
        resolve_train(&self.train, &TrainConfig::default(), seed_override)
    }

    /// Stage-1 pretraining config: `[pretrain]` fields over `[train]`.
    pub fn pretrain_config(&self, seed_override: Option<u64>) -> Result<TrainConfig> {
        let base = self.train_config(seed_override)?;
        match &self.pretrain {
            Some(section) => resolve_train(section, &base, seed_override),
            None => Ok(base),
        }
    }

    pub fn hpo_space(&self) -> HpoSpace {
        let defaults = HpoSpace::default();
        match &self.hpo {
            None => defaults,
            Some(section) => HpoSpace {
                learning_rate: section.learning_rate.unwrap_or(defaults.learning_rate),
                regularization: section.regularization.unwrap_or(defaults.regularization),
                batch_sizes: section.batch_sizes.clone().unwrap_or(defaults.batch_sizes),
            },
        }
    }

    /// Load the knowledge graph per the `[data]` section.
    pub fn load_graph(&self) -> Result<KnowledgeGraph> {
        let triples = self.resolve_path(&self.data.triples);
        let mut kg = kgembed::graph::ingest_triples(&triples)?;
        for modality in &self.data.modalities {
            kg.register_modality(modality);
        }
        if let Some(types) = &self.data.entity_types {
            let path = self.resolve_path(types);
            if path.exists() {
                kgembed::graph::load_entity_types(&mut kg, &path)?;
            } else {
                log::warn!("entity type file {} not found; skipping", path.display());
            }
        }
        if let Some(attrs) = &self.data.attributes {
            let path = self.resolve_path(attrs);
            if path.exists() {
                let stats = kgembed::graph::attach_attributes(&mut kg, &path)?;
                log::info!(
                    "attached {} attribute records ({} rows skipped for unknown entities)",
                    stats.attached,
                    stats.skipped_unknown_entities
                );
            } else {
                log::warn!("attribute file {} not found; skipping", path.display());
            }
        }
        Ok(kg)
    }
}

fn resolve_train(
    section: &TrainSection,
    base: &TrainConfig,
    seed_override: Option<u64>,
) -> Result<TrainConfig> {
    let loss: LossKind = match &section.loss {
        Some(name) => name.parse()?,
        None => base.loss,
    };
    let optimizer: OptimizerKind = match section.optimizer.as_deref() {
        Some("sgd") => OptimizerKind::Sgd,
        Some("adam") => OptimizerKind::Adam,
        Some(other) => bail!("unknown optimizer {other:?} (expected sgd or adam)"),
        None => base.optimizer,
    };
    Ok(TrainConfig {
        learning_rate: section.learning_rate.unwrap_or(base.learning_rate),
        regularization: section.regularization.unwrap_or(base.regularization),
        batch_size: section.batch_size.unwrap_or(base.batch_size),
        loss,
        margin: section.margin.unwrap_or(base.margin),
        negatives_per_positive: section
            .negatives_per_positive
            .unwrap_or(base.negatives_per_positive),
        epochs: section.epochs.unwrap_or(base.epochs),
        eval_interval: section.eval_interval.unwrap_or(base.eval_interval),
        patience: section.patience.unwrap_or(base.patience),
        seed: seed_override.or(section.seed).unwrap_or(base.seed),
        optimizer,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[data]
triples = "triples.tsv"
modalities = ["protein"]

[model]
scorer = "rotate"
dim = 8

[train]
learning_rate = 0.1
epochs = 5
"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let config: RunConfig = toml::from_str(MINIMAL).unwrap();
        let train = config.train_config(None).unwrap();
        assert_eq!(train.learning_rate, 0.1);
        assert_eq!(train.epochs, 5);
        assert_eq!(train.patience, 5);
        let spec = config.model_spec().unwrap();
        assert_eq!(spec.dim, 8);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = format!("{MINIMAL}\nsurprise = 1\n");
        assert!(toml::from_str::<RunConfig>(&bad).is_err());
        let bad_nested = MINIMAL.replace("[train]", "[train]\nwarmup = 3");
        assert!(toml::from_str::<RunConfig>(&bad_nested).is_err());
    }

    #[test]
    fn seed_override_wins() {
        let config: RunConfig = toml::from_str(MINIMAL).unwrap();
        let train = config.train_config(Some(99)).unwrap();
        assert_eq!(train.seed, 99);
    }

    #[test]
    fn pretrain_section_falls_back_to_train() {
        let text = format!("{MINIMAL}\n[pretrain]\nepochs = 50\n");
        let config: RunConfig = toml::from_str(&text).unwrap();
        let stage1 = config.pretrain_config(None).unwrap();
        assert_eq!(stage1.epochs, 50);
        assert_eq!(stage1.learning_rate, 0.1);
    }
}
