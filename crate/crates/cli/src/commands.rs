//! Implementations of the CLI subcommands. Each command writes a
//! `resolved_config.json` (the parsed configuration plus argument values)
//! into its output directory so runs can be replayed exactly, and emits data
//! artifacts separately from logs.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};

use kgembed::benchmark::{run_benchmark, ClassifierSpec, FeatureSource};
use kgembed::eval::{degree_stratified_delta, evaluate, TripleFilter};
use kgembed::graph::{
    decouple_and_split, degree_counts, load_benchmark_pairs, read_split_bundle, write_split_bundle,
    BenchmarkPairs, KnowledgeGraph, SplitBundle, Triple,
};
use kgembed::model::ModelState;
use kgembed::training::{
    hpo_search, load_checkpoint, pretrain_then_finetune, save_checkpoint, train, Checkpoint,
    TrainConfig,
};

use crate::config::RunConfig;

const TUNING_BUDGET: usize = 10;

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.flush()?;
    Ok(())
}

fn write_resolved_config(out: &Path, command: &str, config: &RunConfig, extra: serde_json::Value) -> Result<()> {
    fs::create_dir_all(out)?;
    let record = serde_json::json!({
        "command": command,
        "arguments": extra,
        "config": config,
    });
    write_json(&out.join("resolved_config.json"), &record)
}

fn load_splits(config: &RunConfig, kg: &KnowledgeGraph) -> Result<SplitBundle> {
    let dir = config
        .data
        .splits
        .as_ref()
        .ok_or_else(|| anyhow!("config [data].splits is required for this command"))?;
    let dir = config.resolve_path(dir);
    let (bundle, _) = read_split_bundle(kg, &dir)
        .with_context(|| format!("reading splits from {}", dir.display()))?;
    Ok(bundle)
}

fn split_by_name<'a>(bundle: &'a SplitBundle, name: &str) -> Result<&'a [Triple]> {
    match name {
        "train" => Ok(&bundle.train),
        "valid" | "validation" => Ok(&bundle.validation),
        "test" => Ok(&bundle.test),
        other => bail!("unknown split {other:?} (expected train, valid, or test)"),
    }
}

fn load_model(config: &RunConfig, kg: &KnowledgeGraph, dir: &Path) -> Result<Checkpoint> {
    let checkpoint = load_checkpoint(dir)
        .with_context(|| format!("loading checkpoint from {}", dir.display()))?;
    let names: Vec<String> = kg.entity_vocab().names().to_vec();
    if checkpoint.model.num_entities() != names.len() {
        bail!(
            "checkpoint was trained on a different graph: {} entities vs {} in the data",
            checkpoint.model.num_entities(),
            names.len()
        );
    }
    let _ = config;
    Ok(checkpoint)
}

fn write_train_log(out: &Path, outcome: &kgembed::training::TrainOutcome) -> Result<()> {
    let mut w = BufWriter::new(File::create(out)?);
    for record in &outcome.log {
        serde_json::to_writer(&mut w, record)?;
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn split(config_path: &Path, ratios: &str, seed: Option<u64>, out: &Path) -> Result<()> {
    let config = RunConfig::load(config_path)?;
    let parts: Vec<f64> = ratios
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| anyhow!("bad ratio {p:?}: {e}")))
        .collect::<Result<_>>()?;
    if parts.len() != 3 {
        bail!("expected three comma-separated ratios, got {ratios:?}");
    }
    let ratios_tuple = (parts[0], parts[1], parts[2]);
    let seed = seed.unwrap_or(0);

    let kg = config.load_graph()?;
    let benchmarks = match &config.data.benchmarks {
        Some(path) => {
            let path = config.resolve_path(path);
            if path.exists() {
                load_benchmark_pairs(&path)?
            } else {
                log::warn!(
                    "benchmark file {} not found; decoupling skipped",
                    path.display()
                );
                BenchmarkPairs::new()
            }
        }
        None => {
            log::warn!("no benchmark file configured; decoupling skipped");
            BenchmarkPairs::new()
        }
    };
    let bundle = decouple_and_split(&kg, &benchmarks, ratios_tuple, seed)?;
    write_split_bundle(&kg, &bundle, out)?;
    write_resolved_config(
        out,
        "split",
        &config,
        serde_json::json!({ "ratios": ratios_tuple, "seed": seed }),
    )?;
    log::info!(
        "split: {} train / {} valid / {} test / {} removed ({} entities dropped)",
        bundle.train.len(),
        bundle.validation.len(),
        bundle.test.len(),
        bundle.removed.len(),
        bundle.dropped_entities.len()
    );
    Ok(())
}

pub fn train_cmd_inner(config: &RunConfig, seed: Option<u64>, out: &Path) -> Result<()> {
    let kg = config.load_graph()?;
    let splits = load_splits(config, &kg)?;
    let spec = config.model_spec()?;
    let train_config = config.train_config(seed)?;
    train_config
        .validate(spec.scorer)
        .context("invalid training configuration")?;
    let model = if spec.encoders.is_empty() {
        ModelState::build_lookup_only(&kg, spec.scorer, spec.dim, spec.seed)?
    } else {
        ModelState::build(&kg, &spec)?
    };
    let outcome = train(&splits, &kg, &train_config, model)?;
    save_checkpoint(out.join("checkpoint"), &outcome.checkpoint)?;
    write_train_log(&out.join("train_log.jsonl"), &outcome)?;
    write_json(
        &out.join("summary.json"),
        &serde_json::json!({
            "best_val_mrr": outcome.best_val_mrr,
            "steps": outcome.steps_total,
            "wall_secs": outcome.wall_secs,
        }),
    )?;
    log::info!(
        "training finished: {} steps, best validation MRR {:?}",
        outcome.steps_total,
        outcome.best_val_mrr
    );
    Ok(())
}

pub fn train(config_path: &Path, seed: Option<u64>, out: &Path) -> Result<()> {
    let config = RunConfig::load(config_path)?;
    write_resolved_config(
        out,
        "train",
        &config,
        serde_json::json!({ "seed": seed, "train": config.train_config(seed)? }),
    )?;
    train_cmd_inner(&config, seed, out)
}

pub fn pretrain(config_path: &Path, seed: Option<u64>, out: &Path) -> Result<()> {
    let config = RunConfig::load(config_path)?;
    let kg = config.load_graph()?;
    let splits = load_splits(&config, &kg)?;
    let spec = config.model_spec()?;
    if spec.encoders.is_empty() {
        bail!("pretrain requires at least one encoder in [model]: stage 2 trains encoders");
    }
    let stage1_cfg = config.pretrain_config(seed)?;
    let stage2_cfg = config.train_config(seed)?;
    stage1_cfg.validate(spec.scorer).context("invalid [pretrain] configuration")?;
    stage2_cfg.validate(spec.scorer).context("invalid [train] configuration")?;
    write_resolved_config(
        out,
        "pretrain",
        &config,
        serde_json::json!({ "seed": seed, "stage1": stage1_cfg, "stage2": stage2_cfg }),
    )?;

    let outcome = pretrain_then_finetune(&splits, &kg, &stage1_cfg, &stage2_cfg, &spec)?;
    save_checkpoint(out.join("stage1").join("checkpoint"), &outcome.stage1.checkpoint)?;
    save_checkpoint(out.join("stage2").join("checkpoint"), &outcome.stage2.checkpoint)?;
    write_train_log(&out.join("stage1").join("train_log.jsonl"), &outcome.stage1)?;
    write_train_log(&out.join("stage2").join("train_log.jsonl"), &outcome.stage2)?;
    let (s1, s2) = outcome.stage_reports();
    write_json(&out.join("timing.json"), &serde_json::json!({ "stage1": s1, "stage2": s2 }))?;
    log::info!(
        "pretraining finished: stage1 {} steps / {:.2}s, stage2 {} steps / {:.2}s",
        s1.steps,
        s1.wall_secs,
        s2.steps,
        s2.wall_secs
    );
    Ok(())
}

pub fn hpo(config_path: &Path, budget: Option<usize>, seed: Option<u64>, out: &Path) -> Result<()> {
    let config = RunConfig::load(config_path)?;
    let budget = budget
        .or(config.hpo.as_ref().and_then(|h| h.budget))
        .ok_or_else(|| anyhow!("hpo budget required (flag --budget or [hpo].budget)"))?;
    let seed = seed.unwrap_or(0);
    let kg = config.load_graph()?;
    let splits = load_splits(&config, &kg)?;
    let spec = config.model_spec()?;
    let base = config.train_config(None)?;
    let space = config.hpo_space();
    write_resolved_config(
        out,
        "hpo",
        &config,
        serde_json::json!({ "budget": budget, "seed": seed, "space": space }),
    )?;

    let outcome = hpo_search(&space, spec.scorer, &base, budget, seed, |trial_config| {
        let model = if spec.encoders.is_empty() {
            ModelState::build_lookup_only(&kg, spec.scorer, spec.dim, spec.seed)?
        } else {
            ModelState::build(&kg, &spec)?
        };
        let run = train(&splits, &kg, trial_config, model)?;
        Ok(run.best_val_mrr.unwrap_or(0.0))
    })?;

    let mut w = BufWriter::new(File::create(out.join("trials.jsonl"))?);
    for trial in &outcome.trials {
        serde_json::to_writer(&mut w, trial)?;
        writeln!(w)?;
    }
    w.flush()?;
    write_json(&out.join("best_config.json"), &outcome.best)?;
    log::info!(
        "hpo finished: best validation MRR {:.4} (trial {})",
        outcome.best.objective,
        outcome.best.index
    );
    Ok(())
}

pub fn evaluate(
    config_path: &Path,
    checkpoint_dir: &Path,
    split: &str,
    mode: &str,
    out: Option<&Path>,
) -> Result<()> {
    let config = RunConfig::load(config_path)?;
    let kg = config.load_graph()?;
    let splits = load_splits(&config, &kg)?;
    let checkpoint = load_model(&config, &kg, checkpoint_dir)?;
    let triples = split_by_name(&splits, split)?;
    let filter = match mode {
        "filtered" => Some(TripleFilter::from_triples(splits.all_split_triples())),
        "raw" => None,
        other => bail!("unknown mode {other:?} (expected raw or filtered)"),
    };
    let report = evaluate(&checkpoint.model, triples, filter.as_ref())?;
    match out {
        Some(path) => {
            write_json(path, &report)?;
            if let Some(dir) = path.parent() {
                write_resolved_config(
                    dir,
                    "evaluate",
                    &config,
                    serde_json::json!({ "checkpoint": checkpoint_dir, "split": split, "mode": mode }),
                )?;
            }
        }
        None => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    log::info!("{split} {mode} MRR {:.4}, H@10 {:.4}", report.mrr, report.hits10);
    Ok(())
}

pub fn analyze_degree(
    config_path: &Path,
    checkpoint_a: &Path,
    checkpoint_b: &Path,
    split: &str,
    entity_type: &str,
    out: Option<&Path>,
) -> Result<()> {
    let config = RunConfig::load(config_path)?;
    let kg = config.load_graph()?;
    let splits = load_splits(&config, &kg)?;
    let a = load_model(&config, &kg, checkpoint_a)?;
    let b = load_model(&config, &kg, checkpoint_b)?;
    let triples = split_by_name(&splits, split)?;
    let degrees = degree_counts(&splits.train, kg.num_entities());
    let filter = TripleFilter::from_triples(splits.all_split_triples());
    let report =
        degree_stratified_delta(&a.model, &b.model, triples, entity_type, &degrees, Some(&filter))?;

    let mut text = String::from("scope\tdegree\tdelta_mrr\tcount\n");
    for (scope, degree, delta, count) in report.tsv_rows() {
        text.push_str(&format!("{scope}\t{degree}\t{delta:.6}\t{count}\n"));
    }
    match out {
        Some(path) => {
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)?;
                write_resolved_config(
                    parent,
                    "analyze-degree",
                    &config,
                    serde_json::json!({
                        "checkpoint_a": checkpoint_a,
                        "checkpoint_b": checkpoint_b,
                        "split": split,
                        "type": entity_type,
                    }),
                )?;
            }
            fs::write(path, text)?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn benchmark(
    config_path: &Path,
    sources: &str,
    checkpoint_dir: Option<&Path>,
    extra_models: &[String],
    classifiers: &str,
    ratio: usize,
    k: usize,
    seed: Option<u64>,
    random_dim: usize,
    out: &Path,
) -> Result<()> {
    let config = RunConfig::load(config_path)?;
    let seed = seed.unwrap_or(0);
    let kg = config.load_graph()?;
    let pairs_path = config
        .data
        .benchmarks
        .as_ref()
        .ok_or_else(|| anyhow!("config [data].benchmarks is required for the benchmark command"))?;
    let pairs = load_benchmark_pairs(config.resolve_path(pairs_path))?;

    let main_checkpoint = match checkpoint_dir {
        Some(dir) => Some(load_model(&config, &kg, dir)?),
        None => None,
    };
    let mut extra: Vec<(String, Checkpoint)> = Vec::new();
    for entry in extra_models {
        let (name, dir) = entry
            .split_once('=')
            .ok_or_else(|| anyhow!("--extra-model expects NAME=CHECKPOINT_DIR, got {entry:?}"))?;
        extra.push((name.to_string(), load_model(&config, &kg, Path::new(dir))?));
    }

    let mut source_list: Vec<(String, FeatureSource<'_>)> = Vec::new();
    for name in sources.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match name {
            "random" => source_list.push(("random".into(), FeatureSource::Random { dim: random_dim })),
            "structural" => {
                let ckpt = main_checkpoint
                    .as_ref()
                    .ok_or_else(|| anyhow!("source {name:?} requires --checkpoint"))?;
                source_list.push(("structural".into(), FeatureSource::Structural(&ckpt.model)));
            }
            "model" => {
                let ckpt = main_checkpoint
                    .as_ref()
                    .ok_or_else(|| anyhow!("source {name:?} requires --checkpoint"))?;
                source_list.push(("model".into(), FeatureSource::Model(&ckpt.model)));
            }
            other => bail!("unknown source {other:?} (expected random, structural, or model)"),
        }
    }
    for (name, ckpt) in &extra {
        source_list.push((name.clone(), FeatureSource::Model(&ckpt.model)));
    }
    if source_list.is_empty() {
        bail!("no feature sources selected");
    }

    let mut spec_list = Vec::new();
    for name in classifiers.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match name {
            "lr" => spec_list.push(ClassifierSpec::logistic_regression()),
            "mlp" => spec_list.push(ClassifierSpec::mlp()),
            other => bail!("unknown classifier {other:?} (expected lr or mlp)"),
        }
    }

    let report = run_benchmark(&pairs, &kg, &source_list, &spec_list, k, ratio, seed, TUNING_BUDGET)?;
    write_resolved_config(
        out,
        "benchmark",
        &config,
        serde_json::json!({
            "sources": sources,
            "classifiers": classifiers,
            "ratio": ratio,
            "k": k,
            "seed": seed,
            "random_dim": random_dim,
        }),
    )?;
    write_json(&out.join("report.json"), &report)?;
    fs::write(out.join("summary.tsv"), report.tsv_summary())?;
    log::info!(
        "benchmark finished: {} positives, {} negatives, {} fold rows",
        report.num_positive,
        report.num_negative,
        report.folds.len()
    );
    Ok(())
}
