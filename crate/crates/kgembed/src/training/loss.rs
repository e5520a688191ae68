//! Loss functions over positive and corrupted triple scores, with gradients
//! with respect to the scores.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Margin,
    Bce,
    Ce,
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "margin" => Ok(LossKind::Margin),
            "bce" => Ok(LossKind::Bce),
            "ce" => Ok(LossKind::Ce),
            other => Err(Error::InvalidArgument(format!("unknown loss {other:?}"))),
        }
    }
}

impl LossKind {
    pub fn name(&self) -> &'static str {
        match self {
            LossKind::Margin => "margin",
            LossKind::Bce => "bce",
            LossKind::Ce => "ce",
        }
    }
}

/// Margin ranking loss `max(0, neg - pos + m)` for one negative.
/// Returns (value, d_pos, d_neg); the gradient at the boundary is 0.
pub fn loss_margin(pos: f64, neg: f64, margin: f64) -> (f64, f64, f64) {
    let value = (neg - pos + margin).max(0.0);
    if value > 0.0 {
        (value, -1.0, 1.0)
    } else {
        (value, 0.0, 0.0)
    }
}

/// Margin ranking loss averaged over several negatives.
pub fn loss_margin_multi(pos: f64, negs: &[f64], margin: f64) -> Result<(f64, f64, Vec<f64>)> {
    if negs.is_empty() {
        return Err(Error::EmptyInput("negative scores".into()));
    }
    let k = negs.len() as f64;
    let mut value = 0.0;
    let mut d_pos = 0.0;
    let mut d_negs = vec![0.0; negs.len()];
    for (i, &neg) in negs.iter().enumerate() {
        let (v, dp, dn) = loss_margin(pos, neg, margin);
        value += v / k;
        d_pos += dp / k;
        d_negs[i] = dn / k;
    }
    Ok((value, d_pos, d_negs))
}

/// log(1 + exp(x)) computed stably.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy: `-log sigmoid(pos) - mean_j log(1 - sigmoid(neg_j))`.
/// Returns (value, d_pos, d_negs).
pub fn loss_bce(pos: f64, negs: &[f64]) -> Result<(f64, f64, Vec<f64>)> {
    if negs.is_empty() {
        return Err(Error::EmptyInput("negative scores".into()));
    }
    let k = negs.len() as f64;
    let value = softplus(-pos) + negs.iter().map(|&n| softplus(n)).sum::<f64>() / k;
    let d_pos = sigmoid(pos) - 1.0;
    let d_negs = negs.iter().map(|&n| sigmoid(n) / k).collect();
    Ok((value, d_pos, d_negs))
}

/// Softmax cross-entropy with the positive as the target class among
/// `{pos} ∪ negs`. Returns (value, d_pos, d_negs).
pub fn loss_ce(pos: f64, negs: &[f64]) -> Result<(f64, f64, Vec<f64>)> {
    if negs.is_empty() {
        return Err(Error::EmptyInput("negative scores".into()));
    }
    let max = negs.iter().copied().fold(pos, f64::max);
    let exp_pos = (pos - max).exp();
    let exp_negs: Vec<f64> = negs.iter().map(|&n| (n - max).exp()).collect();
    let z = exp_pos + exp_negs.iter().sum::<f64>();
    let value = -(pos - max) + z.ln();
    let d_pos = exp_pos / z - 1.0;
    let d_negs = exp_negs.iter().map(|&e| e / z).collect();
    Ok((value, d_pos, d_negs))
}

/// Dispatch by loss kind. `margin` is only used by [`LossKind::Margin`].
pub fn loss(kind: LossKind, pos: f64, negs: &[f64], margin: f64) -> Result<(f64, f64, Vec<f64>)> {
    match kind {
        LossKind::Margin => loss_margin_multi(pos, negs, margin),
        LossKind::Bce => loss_bce(pos, negs),
        LossKind::Ce => loss_ce(pos, negs),
    }
}
