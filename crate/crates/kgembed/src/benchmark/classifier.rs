//! In-repo classifiers for the pair benchmark: logistic regression with
//! class weights, and a one-hidden-layer rectifier MLP trained on an
//! undersampled majority class.
//!
//! `train_classifier` reserves a stratified 10% of the training split for
//! validation, random-searches hyperparameters maximizing validation AUPRC,
//! and refits the best configuration on the full training split.

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::benchmark::metrics::auprc;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    LogisticRegression,
    Mlp,
}

/// How class imbalance is handled during fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Balancing {
    ClassWeights,
    Undersample,
}

/// Classifier selection. Logistic regression always uses class weights
/// inversely proportional to class frequency; the MLP always undersamples
/// the majority class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    pub kind: ClassifierKind,
    pub balancing: Balancing,
}

impl ClassifierSpec {
    pub fn logistic_regression() -> Self {
        Self { kind: ClassifierKind::LogisticRegression, balancing: Balancing::ClassWeights }
    }

    pub fn mlp() -> Self {
        Self { kind: ClassifierKind::Mlp, balancing: Balancing::Undersample }
    }

    pub fn validate(&self) -> Result<()> {
        match (self.kind, self.balancing) {
            (ClassifierKind::LogisticRegression, Balancing::ClassWeights) => Ok(()),
            (ClassifierKind::Mlp, Balancing::Undersample) => Ok(()),
            (kind, balancing) => Err(Error::InvalidArgument(format!(
                "classifier {kind:?} does not pair with balancing {balancing:?}"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ClassifierKind::LogisticRegression => "lr",
            ClassifierKind::Mlp => "mlp",
        }
    }
}

/// Tunable fit hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassifierHyper {
    pub learning_rate: f64,
    pub l2: f64,
    pub epochs: usize,
    pub hidden: usize,
}

fn sample_hyper(kind: ClassifierKind, rng: &mut impl Rng) -> ClassifierHyper {
    let learning_rate = (rng.gen_range((1e-2f64).ln()..(1.0f64).ln())).exp();
    let l2 = (rng.gen_range((1e-6f64).ln()..(1e-2f64).ln())).exp();
    let hidden = match kind {
        ClassifierKind::LogisticRegression => 0,
        ClassifierKind::Mlp => *[8usize, 16, 32].choose(rng).expect("non-empty"),
    };
    ClassifierHyper { learning_rate, l2, epochs: 200, hidden }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Feature standardization fitted on training rows.
#[derive(Debug, Clone)]
struct Standardizer {
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl Standardizer {
    fn fit(rows: &[&[f64]]) -> Self {
        let d = rows[0].len();
        let m = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for row in rows {
            for (s, &x) in mean.iter_mut().zip(row.iter()) {
                *s += x;
            }
        }
        for s in mean.iter_mut() {
            *s /= m;
        }
        let mut std = vec![0.0; d];
        for row in rows {
            for (j, &x) in row.iter().enumerate() {
                std[j] += (x - mean[j]).powi(2);
            }
        }
        for s in std.iter_mut() {
            *s = (*s / m).sqrt();
            if *s < 1e-12 {
                *s = 1.0;
            }
        }
        Self { mean, std }
    }

    fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(self.std.iter()))
            .map(|(&x, (&m, &s))| (x - m) / s)
            .collect()
    }
}

/// Weighted logistic-regression loss and gradient. The loss is
/// `(1/m) * sum_i w_i * (softplus(z_i) - y_i * z_i) + l2 * ||w||^2`,
/// with the bias unregularized.
pub fn logistic_loss_grad(
    weights: &[f64],
    bias: f64,
    rows: &[&[f64]],
    labels: &[bool],
    sample_weights: &[f64],
    l2: f64,
) -> (f64, Vec<f64>, f64) {
    let m = rows.len() as f64;
    let mut loss = 0.0;
    let mut grad_w = vec![0.0; weights.len()];
    let mut grad_b = 0.0;
    for ((row, &label), &w) in rows.iter().zip(labels.iter()).zip(sample_weights.iter()) {
        let z = bias + weights.iter().zip(row.iter()).map(|(a, b)| a * b).sum::<f64>();
        let y = if label { 1.0 } else { 0.0 };
        loss += w * (softplus(z) - y * z) / m;
        let dz = w * (sigmoid(z) - y) / m;
        for (g, &x) in grad_w.iter_mut().zip(row.iter()) {
            *g += dz * x;
        }
        grad_b += dz;
    }
    for (g, &w) in grad_w.iter_mut().zip(weights.iter()) {
        *g += 2.0 * l2 * w;
    }
    loss += l2 * weights.iter().map(|w| w * w).sum::<f64>();
    (loss, grad_w, grad_b)
}

/// Class weights inversely proportional to class frequency, normalized so
/// each class contributes equal total weight.
pub fn balanced_class_weights(labels: &[bool]) -> Result<Vec<f64>> {
    let m = labels.len() as f64;
    let pos = labels.iter().filter(|&&l| l).count() as f64;
    let neg = m - pos;
    if pos == 0.0 || neg == 0.0 {
        return Err(Error::InvalidArgument("both classes must be present".into()));
    }
    Ok(labels
        .iter()
        .map(|&l| if l { m / (2.0 * pos) } else { m / (2.0 * neg) })
        .collect())
}

#[derive(Debug, Clone)]
pub struct LogisticRegression {
    weights: Vec<f64>,
    bias: f64,
    standardizer: Standardizer,
}

impl LogisticRegression {
    fn fit(rows: &[&[f64]], labels: &[bool], hyper: &ClassifierHyper) -> Result<Self> {
        let standardizer = Standardizer::fit(rows);
        let std_rows: Vec<Vec<f64>> = rows.iter().map(|r| standardizer.apply(r)).collect();
        let refs: Vec<&[f64]> = std_rows.iter().map(|r| r.as_slice()).collect();
        let sample_weights = balanced_class_weights(labels)?;
        let d = rows[0].len();
        let mut weights = vec![0.0; d];
        let mut bias = 0.0;
        for _ in 0..hyper.epochs {
            let (_, grad_w, grad_b) =
                logistic_loss_grad(&weights, bias, &refs, labels, &sample_weights, hyper.l2);
            for (w, g) in weights.iter_mut().zip(grad_w.iter()) {
                *w -= hyper.learning_rate * g;
            }
            bias -= hyper.learning_rate * grad_b;
        }
        Ok(Self { weights, bias, standardizer })
    }

    fn predict_proba(&self, row: &[f64]) -> f64 {
        let x = self.standardizer.apply(row);
        sigmoid(self.bias + self.weights.iter().zip(x.iter()).map(|(a, b)| a * b).sum::<f64>())
    }
}

#[derive(Debug, Clone)]
pub struct Mlp {
    w1: Array2<f64>,
    b1: Array1<f64>,
    w2: Array1<f64>,
    b2: f64,
    standardizer: Standardizer,
}

impl Mlp {
    fn fit(rows: &[&[f64]], labels: &[bool], hyper: &ClassifierHyper, seed: u64) -> Result<Self> {
        let standardizer = Standardizer::fit(rows);
        let std_rows: Vec<Vec<f64>> = rows.iter().map(|r| standardizer.apply(r)).collect();
        let d = rows[0].len();
        let hidden = hyper.hidden.max(1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = 1.0 / (d as f64).sqrt();
        let mut w1 = Array2::from_shape_fn((hidden, d), |_| rng.gen_range(-bound..bound));
        let mut b1 = Array1::zeros(hidden);
        let hidden_bound = 1.0 / (hidden as f64).sqrt();
        let mut w2 = Array1::from_shape_fn(hidden, |_| rng.gen_range(-hidden_bound..hidden_bound));
        let mut b2 = 0.0;
        let m = std_rows.len() as f64;
        for _ in 0..hyper.epochs {
            let mut g_w1 = Array2::zeros((hidden, d));
            let mut g_b1 = Array1::zeros(hidden);
            let mut g_w2 = Array1::zeros(hidden);
            let mut g_b2 = 0.0;
            for (row, &label) in std_rows.iter().zip(labels.iter()) {
                let x = Array1::from_vec(row.clone());
                let z1 = w1.dot(&x) + &b1;
                let a1 = z1.mapv(|v| v.max(0.0));
                let z2 = w2.dot(&a1) + b2;
                let y = if label { 1.0 } else { 0.0 };
                let dz2 = (sigmoid(z2) - y) / m;
                g_w2 += &(a1.mapv(|v| v * dz2));
                g_b2 += dz2;
                let mut dz1 = w2.mapv(|v| v * dz2);
                for (g, &z) in dz1.iter_mut().zip(z1.iter()) {
                    if z <= 0.0 {
                        *g = 0.0;
                    }
                }
                for i in 0..hidden {
                    if dz1[i] != 0.0 {
                        for j in 0..d {
                            g_w1[[i, j]] += dz1[i] * x[j];
                        }
                    }
                }
                g_b1 += &dz1;
            }
            g_w1 += &w1.mapv(|v| 2.0 * hyper.l2 * v);
            g_w2 += &w2.mapv(|v| 2.0 * hyper.l2 * v);
            w1 -= &g_w1.mapv(|v| hyper.learning_rate * v);
            b1 -= &g_b1.mapv(|v| hyper.learning_rate * v);
            w2 -= &g_w2.mapv(|v| hyper.learning_rate * v);
            b2 -= hyper.learning_rate * g_b2;
        }
        Ok(Self { w1, b1, w2, b2, standardizer })
    }

    fn predict_proba(&self, row: &[f64]) -> f64 {
        let x = Array1::from_vec(self.standardizer.apply(row));
        let a1 = (self.w1.dot(&x) + &self.b1).mapv(|v| v.max(0.0));
        sigmoid(self.w2.dot(&a1) + self.b2)
    }
}

/// A fitted classifier ready to score pairs.
#[derive(Debug, Clone)]
pub enum FittedClassifier {
    LogisticRegression(LogisticRegression),
    Mlp(Mlp),
}

impl FittedClassifier {
    pub fn predict_proba(&self, row: &[f64]) -> f64 {
        match self {
            FittedClassifier::LogisticRegression(m) => m.predict_proba(row),
            FittedClassifier::Mlp(m) => m.predict_proba(row),
        }
    }

    pub fn predict_batch(&self, rows: &[Vec<f64>]) -> Vec<f64> {
        rows.iter().map(|r| self.predict_proba(r)).collect()
    }
}

/// Stratified holdout of roughly `fraction` of the indices, at least one
/// instance per class.
fn stratified_holdout(labels: &[bool], fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut val = Vec::new();
    for class in [true, false] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        let take = ((idx.len() as f64 * fraction).round() as usize).clamp(1, idx.len() - 1);
        val.extend_from_slice(&idx[..take]);
        train.extend_from_slice(&idx[take..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

fn undersample_majority(indices: &[usize], labels: &[bool], seed: u64) -> Vec<usize> {
    let mut pos: Vec<usize> = indices.iter().copied().filter(|&i| labels[i]).collect();
    let mut neg: Vec<usize> = indices.iter().copied().filter(|&i| !labels[i]).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let keep = pos.len().min(neg.len());
    let mut out: Vec<usize> = pos.into_iter().take(keep).chain(neg.into_iter().take(keep)).collect();
    out.sort_unstable();
    out
}

fn fit_on(
    spec: &ClassifierSpec,
    rows: &[Vec<f64>],
    labels: &[bool],
    indices: &[usize],
    hyper: &ClassifierHyper,
    seed: u64,
) -> Result<FittedClassifier> {
    let effective: Vec<usize> = match spec.balancing {
        Balancing::ClassWeights => indices.to_vec(),
        Balancing::Undersample => undersample_majority(indices, labels, seed),
    };
    let sub_rows: Vec<&[f64]> = effective.iter().map(|&i| rows[i].as_slice()).collect();
    let sub_labels: Vec<bool> = effective.iter().map(|&i| labels[i]).collect();
    if sub_labels.iter().all(|&l| l) || sub_labels.iter().all(|&l| !l) {
        return Err(Error::InvalidArgument("training data is single-class".into()));
    }
    match spec.kind {
        ClassifierKind::LogisticRegression => {
            Ok(FittedClassifier::LogisticRegression(LogisticRegression::fit(&sub_rows, &sub_labels, hyper)?))
        }
        ClassifierKind::Mlp => Ok(FittedClassifier::Mlp(Mlp::fit(&sub_rows, &sub_labels, hyper, seed)?)),
    }
}

/// Tune and fit a classifier on the training split. Ten percent of the
/// split is reserved for validation; `tuning_budget` random configurations
/// are scored by validation AUPRC and the best is refit on the full split.
pub fn train_classifier(
    spec: &ClassifierSpec,
    rows: &[Vec<f64>],
    labels: &[bool],
    tuning_budget: usize,
    seed: u64,
) -> Result<FittedClassifier> {
    spec.validate()?;
    if rows.len() != labels.len() {
        return Err(Error::DimensionMismatch("rows/labels length".into()));
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput("training data".into()));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    if pos == 0 || pos == labels.len() {
        return Err(Error::InvalidArgument("training data is single-class".into()));
    }

    let (train_idx, val_idx) = stratified_holdout(labels, 0.1, seed);
    let val_labels: Vec<bool> = val_idx.iter().map(|&i| labels[i]).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let mut best: Option<(f64, ClassifierHyper)> = None;
    for trial in 0..tuning_budget.max(1) {
        let hyper = sample_hyper(spec.kind, &mut rng);
        let fitted = fit_on(spec, rows, labels, &train_idx, &hyper, seed.wrapping_add(trial as u64))?;
        let val_scores: Vec<f64> = val_idx.iter().map(|&i| fitted.predict_proba(&rows[i])).collect();
        let score = auprc(&val_scores, &val_labels)?;
        if best.as_ref().map_or(true, |(b, _)| score > *b) {
            best = Some((score, hyper));
        }
    }
    let (_, hyper) = best.expect("at least one trial");
    let all: Vec<usize> = (0..rows.len()).collect();
    fit_on(spec, rows, labels, &all, &hyper, seed)
}
