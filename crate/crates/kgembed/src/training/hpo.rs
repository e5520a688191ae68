//! Seeded random search over the training hyperparameter space.
//!
//! Learning rate and regularization weight are sampled log-uniformly, batch
//! size from a fixed choice set, and the loss per scorer: the translational
//! scorer only admits the margin ranking loss, the complex-space scorers
//! draw between binary cross-entropy and cross-entropy.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scoring::ScorerKind;
use crate::training::{LossKind, TrainConfig};

/// Sampling ranges. The defaults are the canonical search space.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HpoSpace {
    /// Log-uniform range for the learning rate.
    pub learning_rate: (f64, f64),
    /// Log-uniform range for the regularization weight.
    pub regularization: (f64, f64),
    pub batch_sizes: Vec<usize>,
}

impl Default for HpoSpace {
    fn default() -> Self {
        Self {
            learning_rate: (1e-3, 1.0),
            regularization: (1e-6, 1e-3),
            batch_sizes: vec![128, 256, 512, 1024],
        }
    }
}

impl HpoSpace {
    fn validate(&self) -> Result<()> {
        if self.learning_rate.0 <= 0.0 || self.learning_rate.1 < self.learning_rate.0 {
            return Err(Error::InvalidArgument("invalid learning-rate range".into()));
        }
        if self.regularization.0 <= 0.0 || self.regularization.1 < self.regularization.0 {
            return Err(Error::InvalidArgument("invalid regularization range".into()));
        }
        if self.batch_sizes.is_empty() {
            return Err(Error::InvalidArgument("batch size choices are empty".into()));
        }
        Ok(())
    }
}

fn log_uniform(range: (f64, f64), rng: &mut impl Rng) -> f64 {
    let (lo, hi) = range;
    if lo == hi {
        return lo;
    }
    let x = rng.gen_range(lo.ln()..hi.ln());
    x.exp()
}

/// Draw one configuration from the space, inheriting every field the space
/// does not cover from `base`.
pub fn sample_config(
    space: &HpoSpace,
    scorer: ScorerKind,
    base: &TrainConfig,
    rng: &mut impl Rng,
) -> TrainConfig {
    let loss = match scorer {
        ScorerKind::TransE => LossKind::Margin,
        ScorerKind::ComplEx | ScorerKind::RotatE => {
            if rng.gen_bool(0.5) {
                LossKind::Bce
            } else {
                LossKind::Ce
            }
        }
    };
    TrainConfig {
        learning_rate: log_uniform(space.learning_rate, rng),
        regularization: log_uniform(space.regularization, rng),
        batch_size: space.batch_sizes[rng.gen_range(0..space.batch_sizes.len())],
        loss,
        ..base.clone()
    }
}

/// One evaluated configuration.
#[derive(Debug, Clone, serde::Serialize)]
pub struct Trial {
    pub index: usize,
    pub config: TrainConfig,
    /// Validation MRR.
    pub objective: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct HpoOutcome {
    pub best: Trial,
    pub trials: Vec<Trial>,
}

/// Random search: draw `budget` configurations, evaluate each with
/// `objective` (validation MRR), and return the argmax alongside the trial
/// log. Deterministic given `seed`.
pub fn hpo_search(
    space: &HpoSpace,
    scorer: ScorerKind,
    base: &TrainConfig,
    budget: usize,
    seed: u64,
    mut objective: impl FnMut(&TrainConfig) -> Result<f64>,
) -> Result<HpoOutcome> {
    if budget == 0 {
        return Err(Error::InvalidArgument("hpo budget must be >= 1".into()));
    }
    space.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trials = Vec::with_capacity(budget);
    for index in 0..budget {
        let config = sample_config(space, scorer, base, &mut rng);
        let objective_value = objective(&config)?;
        trials.push(Trial { index, config, objective: objective_value });
    }
    let best = trials
        .iter()
        .max_by(|a, b| a.objective.partial_cmp(&b.objective).expect("finite objectives"))
        .cloned()
        .expect("budget >= 1");
    Ok(HpoOutcome { best, trials })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budget_one_returns_the_single_sample() {
        let outcome = hpo_search(
            &HpoSpace::default(),
            ScorerKind::RotatE,
            &TrainConfig::default(),
            1,
            3,
            |_| Ok(0.5),
        )
        .unwrap();
        assert_eq!(outcome.trials.len(), 1);
        assert_eq!(outcome.best.index, 0);
    }

    #[test]
    fn samples_stay_inside_the_declared_ranges() {
        let space = HpoSpace::default();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..1000 {
            let c = sample_config(&space, ScorerKind::ComplEx, &TrainConfig::default(), &mut rng);
            assert!(c.learning_rate >= 1e-3 && c.learning_rate <= 1.0);
            assert!(c.regularization >= 1e-6 && c.regularization <= 1e-3);
            assert!(space.batch_sizes.contains(&c.batch_size));
            assert!(matches!(c.loss, LossKind::Bce | LossKind::Ce));
        }
    }

    #[test]
    fn transe_only_samples_margin_loss() {
        let space = HpoSpace::default();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..1000 {
            let c = sample_config(&space, ScorerKind::TransE, &TrainConfig::default(), &mut rng);
            assert_eq!(c.loss, LossKind::Margin);
        }
    }

    #[test]
    fn argmax_trial_is_returned() {
        let scores = [0.2, 0.9, 0.4];
        let mut i = 0;
        let outcome = hpo_search(
            &HpoSpace::default(),
            ScorerKind::RotatE,
            &TrainConfig::default(),
            3,
            4,
            |_| {
                let s = scores[i];
                i += 1;
                Ok(s)
            },
        )
        .unwrap();
        assert_eq!(outcome.best.index, 1);
        assert_eq!(outcome.best.objective, 0.9);
    }

    #[test]
    fn zero_budget_rejected() {
        assert!(hpo_search(
            &HpoSpace::default(),
            ScorerKind::RotatE,
            &TrainConfig::default(),
            0,
            0,
            |_| Ok(0.0)
        )
        .is_err());
    }

    #[test]
    fn search_is_deterministic_given_seed() {
        let run = || {
            hpo_search(
                &HpoSpace::default(),
                ScorerKind::RotatE,
                &TrainConfig::default(),
                5,
                11,
                |c| Ok(c.learning_rate),
            )
            .unwrap()
        };
        let a = run();
        let b = run();
        for (x, y) in a.trials.iter().zip(b.trials.iter()) {
            assert_eq!(x.config, y.config);
        }
    }
}
