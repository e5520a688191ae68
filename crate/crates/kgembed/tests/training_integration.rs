//! Integration tests for the training pipeline on the synthetic multimodal
//! graph: frozen-parameter invariants, checkpoint round trips, pretraining
//! transfer identity, hyperparameter search end to end.

mod common;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use kgembed::graph::{decouple_and_split, BenchmarkPairs, EntityId, RelationId, Triple};
use kgembed::model::{ModelState, OptimizerKind};
use kgembed::scoring::ScorerKind;
use kgembed::training::{
    hpo_search, load_checkpoint, pretrain_then_finetune, save_checkpoint, train, HpoSpace,
    LossKind, TrainConfig,
};

fn quick_config(seed: u64, epochs: usize) -> TrainConfig {
    TrainConfig {
        learning_rate: 0.2,
        loss: LossKind::Bce,
        negatives_per_positive: 2,
        batch_size: 16,
        epochs,
        eval_interval: 5,
        patience: 100,
        seed,
        ..TrainConfig::default()
    }
}

#[test]
fn frozen_token_embeddings_survive_training_bitwise() {
    let kg = common::synthetic_kg(42);
    let splits = decouple_and_split(&kg, &BenchmarkPairs::new(), (0.8, 0.1, 0.1), 1).unwrap();
    let spec = common::synthetic_spec(ScorerKind::RotatE, 8, 3);
    let model = ModelState::build(&kg, &spec).unwrap();
    let before: Vec<Vec<f64>> = (1..=2)
        .map(|m| model.encoder(m).unwrap().frozen_table().unwrap().iter().copied().collect())
        .collect();
    let outcome = train(&splits, &kg, &quick_config(5, 10), model).unwrap();
    let trained = &outcome.checkpoint.model;
    for (i, m) in (1..=2).enumerate() {
        let after: Vec<f64> =
            trained.encoder(m).unwrap().frozen_table().unwrap().iter().copied().collect();
        assert_eq!(before[i].len(), after.len());
        for (a, b) in before[i].iter().zip(after.iter()) {
            assert_eq!(a.to_bits(), b.to_bits(), "frozen table of modality {m} changed");
        }
    }
    // the text encoder has no frozen table: its token embeddings train
    assert!(trained.encoder(3).unwrap().frozen_table().is_none());
}

#[test]
fn checkpoint_round_trip_after_training() {
    let kg = common::synthetic_kg(42);
    let splits = decouple_and_split(&kg, &BenchmarkPairs::new(), (0.8, 0.1, 0.1), 2).unwrap();
    let spec = common::synthetic_spec(ScorerKind::ComplEx, 8, 9);
    let model = ModelState::build(&kg, &spec).unwrap();
    let outcome = train(&splits, &kg, &quick_config(7, 10), model).unwrap();

    let dir = tempfile::tempdir().unwrap();
    save_checkpoint(dir.path(), &outcome.checkpoint).unwrap();
    let loaded = load_checkpoint(dir.path()).unwrap();
    assert_eq!(loaded.step, outcome.checkpoint.step);
    assert_eq!(loaded.history, outcome.checkpoint.history);

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = kg.num_entities() as u32;
    for _ in 0..100 {
        let t = Triple::new(
            EntityId(rng.gen_range(0..n)),
            RelationId(rng.gen_range(0..3)),
            EntityId(rng.gen_range(0..n)),
        );
        let a = outcome.checkpoint.model.score_triple(&t).unwrap();
        let b = loaded.model.score_triple(&t).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn stage_two_with_zero_epochs_scores_like_stage_one_on_lookup_pairs() {
    let kg = common::synthetic_kg(42);
    let splits = decouple_and_split(&kg, &BenchmarkPairs::new(), (0.8, 0.1, 0.1), 3).unwrap();
    let spec = common::synthetic_spec(ScorerKind::RotatE, 8, 13);
    let stage1_cfg = quick_config(13, 20);
    let stage2_cfg = TrainConfig { epochs: 0, ..quick_config(13, 0) };
    let outcome = pretrain_then_finetune(&splits, &kg, &stage1_cfg, &stage2_cfg, &spec).unwrap();

    // e4 and e23 are attribute-less (index % 5 in {3, 4}); r2 connects them
    let h = kg.entity_id("e4").unwrap();
    let t = kg.entity_id("e23").unwrap();
    assert!(kg.attribute(h).is_none() && kg.attribute(t).is_none());
    let triple = Triple::new(h, kg.relation_id("r2").unwrap(), t);
    let s1 = outcome.stage1.checkpoint.model.score_triple(&triple).unwrap();
    let s2 = outcome.stage2.checkpoint.model.score_triple(&triple).unwrap();
    assert_eq!(s1.to_bits(), s2.to_bits());
}

#[test]
fn hpo_search_runs_real_trials_and_returns_argmax() {
    let kg = common::synthetic_kg(42);
    let splits = decouple_and_split(&kg, &BenchmarkPairs::new(), (0.8, 0.1, 0.1), 4).unwrap();
    let space = HpoSpace {
        batch_sizes: vec![8, 16],
        ..HpoSpace::default()
    };
    let base = quick_config(21, 5);
    let outcome = hpo_search(&space, ScorerKind::RotatE, &base, 3, 21, |config| {
        let model = ModelState::build_lookup_only(&kg, ScorerKind::RotatE, 8, 21)?;
        let run = train(&splits, &kg, config, model)?;
        Ok(run.best_val_mrr.unwrap_or(0.0))
    })
    .unwrap();
    assert_eq!(outcome.trials.len(), 3);
    let max = outcome.trials.iter().map(|t| t.objective).fold(f64::MIN, f64::max);
    assert_eq!(outcome.best.objective, max);
}

#[test]
fn early_stopping_halts_after_patience_without_improvement() {
    let kg = common::synthetic_kg(42);
    let splits = decouple_and_split(&kg, &BenchmarkPairs::new(), (0.8, 0.1, 0.1), 5).unwrap();
    let model = ModelState::build_lookup_only(&kg, ScorerKind::RotatE, 8, 2).unwrap();
    // zero learning rate: validation MRR can never improve after the first
    // evaluation, so training stops after `patience` further evaluations
    let config = TrainConfig {
        learning_rate: 0.0,
        epochs: 50,
        eval_interval: 1,
        patience: 2,
        ..quick_config(2, 50)
    };
    let outcome = train(&splits, &kg, &config, model).unwrap();
    let evals = outcome.log.iter().filter(|l| l.val_mrr.is_some()).count();
    assert_eq!(evals, 3, "expected 1 improving + 2 stale evaluations");
}

#[test]
fn adaptive_optimizer_also_learns() {
    let kg = common::synthetic_kg(42);
    let splits = decouple_and_split(&kg, &BenchmarkPairs::new(), (0.8, 0.1, 0.1), 6).unwrap();
    let mut model = ModelState::build_lookup_only(&kg, ScorerKind::RotatE, 8, 4).unwrap();
    model.set_optimizer(OptimizerKind::Adam);
    let config = TrainConfig {
        learning_rate: 0.01,
        epochs: 30,
        ..quick_config(4, 30)
    };
    let outcome = train(&splits, &kg, &config, model).unwrap();
    let first = outcome.log.first().unwrap().mean_loss;
    let last = outcome.log.last().unwrap().mean_loss;
    assert!(last < first, "adam loss did not decrease: {first} -> {last}");
}

#[test]
fn checkpoint_round_trips_adam_state() {
    let kg = common::synthetic_kg(42);
    let splits = decouple_and_split(&kg, &BenchmarkPairs::new(), (0.8, 0.1, 0.1), 7).unwrap();
    let mut model = ModelState::build_lookup_only(&kg, ScorerKind::TransE, 8, 4).unwrap();
    model.set_optimizer(OptimizerKind::Adam);
    let config = TrainConfig {
        learning_rate: 0.01,
        loss: LossKind::Margin,
        epochs: 5,
        ..quick_config(4, 5)
    };
    let outcome = train(&splits, &kg, &config, model).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_checkpoint(dir.path(), &outcome.checkpoint).unwrap();
    let loaded = load_checkpoint(dir.path()).unwrap();
    assert_eq!(loaded.model.optimizer(), OptimizerKind::Adam);
}
