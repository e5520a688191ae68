//! The optimization loop, two-stage pretraining, and hyperparameter search.
//!
//! Training iterates epochs over shuffled training triples in batches. Each
//! positive triple is paired with sampled corruptions, the batch-mean loss
//! is backpropagated through the embedding dispatch (frozen components
//! excluded), and validation MRR is evaluated periodically with early
//! stopping on a patience counter. Parameter updates are serialized (one
//! writer); evaluation reads a parameter snapshot.

mod checkpoint;
mod hpo;
mod loss;
mod negative;
mod sgd;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use hpo::{hpo_search, sample_config, HpoOutcome, HpoSpace, Trial};
pub use loss::{loss, loss_bce, loss_ce, loss_margin, loss_margin_multi, LossKind};
pub use negative::{corrupt, CorruptSide};
pub use sgd::{apply_step, sgd_step};

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{collect_ranks, mrr, TripleFilter};
use crate::graph::{KnowledgeGraph, SplitBundle};
use crate::model::{ModelSpec, ModelState, OptimizerKind};
use crate::scoring::ScorerKind;

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub regularization: f64,
    pub batch_size: usize,
    pub loss: LossKind,
    pub margin: f64,
    pub negatives_per_positive: usize,
    pub epochs: usize,
    /// Epochs between validation evaluations.
    pub eval_interval: usize,
    /// Evaluations without improvement before stopping early.
    pub patience: usize,
    pub seed: u64,
    #[serde(default)]
    pub optimizer: OptimizerKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            regularization: 0.0,
            batch_size: 128,
            loss: LossKind::Margin,
            margin: 1.0,
            negatives_per_positive: 1,
            epochs: 100,
            eval_interval: 10,
            patience: 5,
            seed: 0,
            optimizer: OptimizerKind::Sgd,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, scorer: ScorerKind) -> Result<()> {
        let mut problems = Vec::new();
        if self.learning_rate < 0.0 {
            problems.push("learning_rate must be >= 0".to_string());
        }
        if self.regularization < 0.0 {
            problems.push("regularization must be >= 0".to_string());
        }
        if self.batch_size == 0 {
            problems.push("batch_size must be >= 1".to_string());
        }
        if self.margin < 0.0 {
            problems.push("margin must be >= 0".to_string());
        }
        if self.negatives_per_positive == 0 {
            problems.push("negatives_per_positive must be >= 1".to_string());
        }
        if self.eval_interval == 0 {
            problems.push("eval_interval must be >= 1".to_string());
        }
        if self.patience == 0 {
            problems.push("patience must be >= 1".to_string());
        }
        if scorer == ScorerKind::TransE && self.loss != LossKind::Margin {
            problems.push(format!(
                "scorer transe only supports the margin ranking loss, got {}",
                self.loss.name()
            ));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(problems.join("; ")))
        }
    }
}

/// A validation evaluation during training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub epoch: usize,
    pub step: u64,
    pub mrr: f64,
}

/// One JSON-lines log record.
#[derive(Debug, Clone, Serialize)]
pub struct LogRecord {
    pub epoch: usize,
    pub step: u64,
    pub mean_loss: f64,
    pub val_mrr: Option<f64>,
    pub wall_secs: f64,
}

/// A trained model with its provenance. Round-trips bit-exactly through
/// [`save_checkpoint`] / [`load_checkpoint`].
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: ModelState,
    pub config: TrainConfig,
    pub step: u64,
    pub history: Vec<EvalPoint>,
}

/// Everything produced by one training run.
#[derive(Debug)]
pub struct TrainOutcome {
    /// Best-validation model (final model when no evaluation ran).
    pub checkpoint: Checkpoint,
    /// Validation MRR of the checkpoint, when validation data existed.
    pub best_val_mrr: Option<f64>,
    pub steps_total: u64,
    pub wall_secs: f64,
    pub log: Vec<LogRecord>,
}

impl TrainOutcome {
    /// First step at which validation MRR reached `target`, if ever.
    pub fn steps_to_reach(&self, target: f64) -> Option<u64> {
        self.checkpoint
            .history
            .iter()
            .find(|p| p.mrr >= target)
            .map(|p| p.step)
    }
}

fn validation_mrr(model: &ModelState, bundle: &SplitBundle, filter: &TripleFilter) -> Result<f64> {
    let entries = collect_ranks(model, &bundle.validation, Some(filter))?;
    let ranks: Vec<u64> = entries.iter().map(|e| e.rank).collect();
    mrr(&ranks)
}

/// Train `model` on the bundle's training triples. Keeps the
/// best-validation snapshot and stops early after `patience` evaluations
/// without improvement.
pub fn train(
    splits: &SplitBundle,
    kg: &KnowledgeGraph,
    config: &TrainConfig,
    model: ModelState,
) -> Result<TrainOutcome> {
    config.validate(model.scorer())?;
    // the model must resolve every modality carrying data in the graph
    for record in kg.attributes().values() {
        if model.attribute_of(record.entity).is_some() && model.encoder(record.modality.0).is_none() {
            return Err(Error::InvalidArgument(format!(
                "model has no encoder for modality id {}",
                record.modality.0
            )));
        }
    }
    let mut model = model;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let scorer = model.scorer();
    let num_entities = model.num_entities();
    let filter = TripleFilter::from_triples(splits.all_split_triples());
    let has_validation = !splits.validation.is_empty();

    let mut best: Option<(f64, ModelState, u64)> = None;
    let mut history: Vec<EvalPoint> = Vec::new();
    let mut log: Vec<LogRecord> = Vec::new();
    let mut step: u64 = 0;
    let mut stale_evals = 0usize;

    let mut order: Vec<usize> = (0..splits.train.len()).collect();
    'epochs: for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut epoch_samples = 0usize;
        for batch in order.chunks(config.batch_size) {
            let scale = 1.0 / batch.len() as f64;
            let mut batch_loss = 0.0;
            for &idx in batch {
                let triple = splits.train[idx];
                let (h_emb, h_src) = model.emb_with_source(triple.head)?;
                let (t_emb, t_src) = model.emb_with_source(triple.tail)?;
                let r_emb = model.rel_emb(triple.relation)?;
                let (pos_score, pos_grad) =
                    scorer.score_grad_params(h_emb.as_slice(), r_emb.as_slice(), t_emb.as_slice());

                // negatives reuse the unchanged side's forward pass
                let mut neg_scores = Vec::with_capacity(config.negatives_per_positive);
                let mut neg_parts = Vec::with_capacity(config.negatives_per_positive);
                for _ in 0..config.negatives_per_positive {
                    let neg = corrupt(&triple, num_entities, CorruptSide::Uniform, &mut rng)?;
                    let corrupted_head = neg.head != triple.head;
                    let (c_emb, c_src) = if corrupted_head {
                        model.emb_with_source(neg.head)?
                    } else {
                        model.emb_with_source(neg.tail)?
                    };
                    let (score, grad) = if corrupted_head {
                        scorer.score_grad_params(c_emb.as_slice(), r_emb.as_slice(), t_emb.as_slice())
                    } else {
                        scorer.score_grad_params(h_emb.as_slice(), r_emb.as_slice(), c_emb.as_slice())
                    };
                    neg_scores.push(score);
                    neg_parts.push((corrupted_head, c_src, grad));
                }

                let (value, d_pos, d_negs) = loss(config.loss, pos_score, &neg_scores, config.margin)?;
                if !value.is_finite() {
                    return Err(Error::NonFinite(format!("loss at epoch {epoch}, step {step}")));
                }
                batch_loss += value;

                // positive-triple backward
                let w = d_pos * scale;
                model.backward_entity(&h_src, &scaled(&pos_grad.d_head, w));
                model.backward_relation(triple.relation, &scaled(&pos_grad.d_relation, w));
                model.backward_entity(&t_src, &scaled(&pos_grad.d_tail, w));

                // corrupted-triple backward
                for ((corrupted_head, c_src, grad), &d_neg) in
                    neg_parts.iter().zip(d_negs.iter())
                {
                    let w = d_neg * scale;
                    if w == 0.0 {
                        continue;
                    }
                    if *corrupted_head {
                        model.backward_entity(c_src, &scaled(&grad.d_head, w));
                        model.backward_relation(triple.relation, &scaled(&grad.d_relation, w));
                        model.backward_entity(&t_src, &scaled(&grad.d_tail, w));
                    } else {
                        model.backward_entity(&h_src, &scaled(&grad.d_head, w));
                        model.backward_relation(triple.relation, &scaled(&grad.d_relation, w));
                        model.backward_entity(c_src, &scaled(&grad.d_tail, w));
                    }
                }
            }
            apply_step(&mut model, config.learning_rate, config.regularization)?;
            step += 1;
            epoch_loss += batch_loss;
            epoch_samples += batch.len();
        }
        let mean_loss = epoch_loss / epoch_samples.max(1) as f64;

        if has_validation && (epoch % config.eval_interval == 0 || epoch == config.epochs) {
            let v = validation_mrr(&model, splits, &filter)?;
            history.push(EvalPoint { epoch, step, mrr: v });
            let improved = best.as_ref().map_or(true, |(b, _, _)| v > *b);
            if improved {
                best = Some((v, model.clone(), step));
                stale_evals = 0;
            } else {
                stale_evals += 1;
            }
            log.push(LogRecord {
                epoch,
                step,
                mean_loss,
                val_mrr: Some(v),
                wall_secs: start.elapsed().as_secs_f64(),
            });
            if stale_evals >= config.patience {
                break 'epochs;
            }
        } else {
            log.push(LogRecord {
                epoch,
                step,
                mean_loss,
                val_mrr: None,
                wall_secs: start.elapsed().as_secs_f64(),
            });
        }
    }

    let (best_val_mrr, final_model, final_step) = match best {
        Some((v, m, s)) => (Some(v), m, s),
        None => {
            let v = if has_validation {
                Some(validation_mrr(&model, splits, &filter)?)
            } else {
                None
            };
            (v, model, step)
        }
    };

    Ok(TrainOutcome {
        checkpoint: Checkpoint {
            model: final_model,
            config: config.clone(),
            step: final_step,
            history,
        },
        best_val_mrr,
        steps_total: step,
        wall_secs: start.elapsed().as_secs_f64(),
        log,
    })
}

fn scaled(xs: &[f64], w: f64) -> Vec<f64> {
    xs.iter().map(|x| x * w).collect()
}

/// Timing and step counts for one pretraining stage.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct StageReport {
    pub steps: u64,
    pub wall_secs: f64,
    pub best_val_mrr: Option<f64>,
}

/// Result of the two-stage pretraining strategy.
#[derive(Debug)]
pub struct PretrainOutcome {
    /// Stage 1: lookup-table-only model over all entities.
    pub stage1: TrainOutcome,
    /// Stage 2: encoder model initialized from stage 1.
    pub stage2: TrainOutcome,
}

impl PretrainOutcome {
    pub fn stage_reports(&self) -> (StageReport, StageReport) {
        (
            StageReport {
                steps: self.stage1.steps_total,
                wall_secs: self.stage1.wall_secs,
                best_val_mrr: self.stage1.best_val_mrr,
            },
            StageReport {
                steps: self.stage2.steps_total,
                wall_secs: self.stage2.wall_secs,
                best_val_mrr: self.stage2.best_val_mrr,
            },
        )
    }
}

/// Two-stage pretraining: stage 1 trains a lookup-only model for all
/// entities (attributes ignored); stage 2 builds the encoder model, copies
/// the stage-1 rows into its lookup table (attribute-less entities) and
/// relation table, and trains encoders and lookups jointly.
pub fn pretrain_then_finetune(
    splits: &SplitBundle,
    kg: &KnowledgeGraph,
    config_stage1: &TrainConfig,
    config_stage2: &TrainConfig,
    spec: &ModelSpec,
) -> Result<PretrainOutcome> {
    let stage1_model = ModelState::build_lookup_only(kg, spec.scorer, spec.dim, spec.seed)?;
    let stage1 = train(splits, kg, config_stage1, stage1_model)?;

    let mut stage2_model = ModelState::build(kg, spec)?;
    stage2_model.transfer_lookup_from(&stage1.checkpoint.model)?;
    let stage2 = train(splits, kg, config_stage2, stage2_model)?;

    log::info!(
        "pretraining: stage1 {} steps in {:.2}s, stage2 {} steps in {:.2}s",
        stage1.steps_total,
        stage1.wall_secs,
        stage2.steps_total,
        stage2.wall_secs
    );
    Ok(PretrainOutcome { stage1, stage2 })
}
