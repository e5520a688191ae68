//! Triple scoring functions over real and complex embedding spaces,
//! with analytic gradients for every input coordinate.
//!
//! Three scorers are provided:
//!
//! - `TransE`: `-||h + r - t||` over real vectors.
//! - `ComplEx`: `Re(sum_i h_i * r_i * conj(t_i))` over complex vectors.
//! - `RotatE`: `-||h . e^{i theta} - t||` over complex vectors, with the
//!   relation stored as a vector of phases so the unit-modulus constraint
//!   holds by construction.
//!
//! Complex vectors are stored as interleaved `(re, im)` pairs, so a
//! dimension-`n` complex embedding occupies `2n` stored parameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The embedding space an embedding vector lives in.
///
/// `Real(n)` stores `n` parameters. `Complex(n)` stores `2n` parameters as
/// interleaved `(re, im)` pairs. `Phase(n)` stores `n` angles and is used for
/// RotatE relations only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Space {
    Real(usize),
    Complex(usize),
    Phase(usize),
}

impl Space {
    /// Model dimension `n`.
    pub fn dim(&self) -> usize {
        match *self {
            Space::Real(n) | Space::Complex(n) | Space::Phase(n) => n,
        }
    }

    /// Number of stored real parameters.
    pub fn param_len(&self) -> usize {
        match *self {
            Space::Real(n) | Space::Phase(n) => n,
            Space::Complex(n) => 2 * n,
        }
    }
}

/// A point in an embedding space.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    space: Space,
    data: Vec<f64>,
}

impl EmbeddingVector {
    pub fn new(space: Space, data: Vec<f64>) -> Result<Self> {
        if space.dim() == 0 {
            return Err(Error::InvalidArgument("embedding dimension must be > 0".into()));
        }
        if data.len() != space.param_len() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} parameters for {:?}, got {}",
                space.param_len(),
                space,
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("embedding vector".into()));
        }
        Ok(Self { space, data })
    }

    pub fn real(data: Vec<f64>) -> Result<Self> {
        let n = data.len();
        Self::new(Space::Real(n), data)
    }

    /// Complex vector from interleaved `(re, im)` pairs.
    pub fn complex(data: Vec<f64>) -> Result<Self> {
        if data.len() % 2 != 0 {
            return Err(Error::DimensionMismatch(
                "complex vector needs an even number of stored parameters".into(),
            ));
        }
        let n = data.len() / 2;
        Self::new(Space::Complex(n), data)
    }

    /// Phase vector (angles in radians), used for RotatE relations.
    pub fn phases(data: Vec<f64>) -> Result<Self> {
        let n = data.len();
        Self::new(Space::Phase(n), data)
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }
}

/// Gradient of a score with respect to every input coordinate, in the same
/// stored-parameter layout as the inputs (interleaved pairs for complex
/// vectors, angles for phase vectors).
#[derive(Debug, Clone)]
pub struct ScoreGradient {
    pub d_head: Vec<f64>,
    pub d_relation: Vec<f64>,
    pub d_tail: Vec<f64>,
}

/// Which scoring function a model uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScorerKind {
    TransE,
    ComplEx,
    RotatE,
}

impl ScorerKind {
    /// Space of entity embeddings for dimension `n`.
    pub fn entity_space(&self, n: usize) -> Space {
        match self {
            ScorerKind::TransE => Space::Real(n),
            ScorerKind::ComplEx | ScorerKind::RotatE => Space::Complex(n),
        }
    }

    /// Space of relation embeddings for dimension `n`.
    pub fn relation_space(&self, n: usize) -> Space {
        match self {
            ScorerKind::TransE => Space::Real(n),
            ScorerKind::ComplEx => Space::Complex(n),
            ScorerKind::RotatE => Space::Phase(n),
        }
    }

    /// Score a triple given raw parameter slices in this scorer's layout.
    ///
    /// Lengths must already agree with `entity_space` / `relation_space`.
    pub fn score_params(&self, h: &[f64], r: &[f64], t: &[f64]) -> f64 {
        match self {
            ScorerKind::TransE => transe_params(h, r, t),
            ScorerKind::ComplEx => complex_params(h, r, t),
            ScorerKind::RotatE => rotate_params(h, r, t),
        }
    }

    /// Score plus analytic gradients, on raw parameter slices.
    pub fn score_grad_params(&self, h: &[f64], r: &[f64], t: &[f64]) -> (f64, ScoreGradient) {
        match self {
            ScorerKind::TransE => transe_grad_params(h, r, t),
            ScorerKind::ComplEx => complex_grad_params(h, r, t),
            ScorerKind::RotatE => rotate_grad_params(h, r, t),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ScorerKind::TransE => "transe",
            ScorerKind::ComplEx => "complex",
            ScorerKind::RotatE => "rotate",
        }
    }
}

impl std::str::FromStr for ScorerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "transe" => Ok(ScorerKind::TransE),
            "complex" => Ok(ScorerKind::ComplEx),
            "rotate" => Ok(ScorerKind::RotatE),
            other => Err(Error::InvalidArgument(format!("unknown scorer {other:?}"))),
        }
    }
}

fn check_spaces(kind: ScorerKind, h: &EmbeddingVector, r: &EmbeddingVector, t: &EmbeddingVector) -> Result<usize> {
    let n = h.space().dim();
    let want_e = kind.entity_space(n);
    let want_r = kind.relation_space(n);
    if h.space() != want_e || t.space() != want_e || r.space() != want_r {
        return Err(Error::DimensionMismatch(format!(
            "{} expects h,t in {:?} and r in {:?}; got h {:?}, r {:?}, t {:?}",
            kind.name(),
            want_e,
            want_r,
            h.space(),
            r.space(),
            t.space()
        )));
    }
    Ok(n)
}

/// TransE score `-||h + r - t||_2`. Always <= 0.
pub fn score_transe(h: &EmbeddingVector, r: &EmbeddingVector, t: &EmbeddingVector) -> Result<f64> {
    check_spaces(ScorerKind::TransE, h, r, t)?;
    Ok(transe_params(h.as_slice(), r.as_slice(), t.as_slice()))
}

/// ComplEx score `Re(sum_i h_i r_i conj(t_i))`.
pub fn score_complex(h: &EmbeddingVector, r: &EmbeddingVector, t: &EmbeddingVector) -> Result<f64> {
    check_spaces(ScorerKind::ComplEx, h, r, t)?;
    Ok(complex_params(h.as_slice(), r.as_slice(), t.as_slice()))
}

/// RotatE score `-||h . e^{i theta} - t||_2` with `r` given as phases.
pub fn score_rotate(h: &EmbeddingVector, r: &EmbeddingVector, t: &EmbeddingVector) -> Result<f64> {
    check_spaces(ScorerKind::RotatE, h, r, t)?;
    Ok(rotate_params(h.as_slice(), r.as_slice(), t.as_slice()))
}

/// Score a triple with the given scorer.
pub fn score(kind: ScorerKind, h: &EmbeddingVector, r: &EmbeddingVector, t: &EmbeddingVector) -> Result<f64> {
    check_spaces(kind, h, r, t)?;
    Ok(kind.score_params(h.as_slice(), r.as_slice(), t.as_slice()))
}

/// Score plus analytic partial derivatives with respect to every input
/// coordinate. At the non-differentiable point of the norm-based scorers
/// (an exactly fit triple) the gradient is the zero vector.
pub fn score_grad(
    kind: ScorerKind,
    h: &EmbeddingVector,
    r: &EmbeddingVector,
    t: &EmbeddingVector,
) -> Result<(f64, ScoreGradient)> {
    check_spaces(kind, h, r, t)?;
    Ok(kind.score_grad_params(h.as_slice(), r.as_slice(), t.as_slice()))
}

fn transe_params(h: &[f64], r: &[f64], t: &[f64]) -> f64 {
    debug_assert!(h.len() == r.len() && h.len() == t.len());
    let mut sq = 0.0;
    for i in 0..h.len() {
        let d = h[i] + r[i] - t[i];
        sq += d * d;
    }
    -sq.sqrt()
}

fn transe_grad_params(h: &[f64], r: &[f64], t: &[f64]) -> (f64, ScoreGradient) {
    let n = h.len();
    let mut delta = vec![0.0; n];
    let mut sq = 0.0;
    for i in 0..n {
        let d = h[i] + r[i] - t[i];
        delta[i] = d;
        sq += d * d;
    }
    let norm = sq.sqrt();
    let mut d_head = vec![0.0; n];
    let mut d_tail = vec![0.0; n];
    if norm > 0.0 {
        for i in 0..n {
            d_head[i] = -delta[i] / norm;
            d_tail[i] = delta[i] / norm;
        }
    }
    let d_relation = d_head.clone();
    (-norm, ScoreGradient { d_head, d_relation, d_tail })
}

fn complex_params(h: &[f64], r: &[f64], t: &[f64]) -> f64 {
    debug_assert!(h.len() == r.len() && h.len() == t.len() && h.len() % 2 == 0);
    let mut acc = 0.0;
    for i in (0..h.len()).step_by(2) {
        let (a, b) = (h[i], h[i + 1]);
        let (c, d) = (r[i], r[i + 1]);
        let (e, f) = (t[i], t[i + 1]);
        acc += (a * c - b * d) * e + (a * d + b * c) * f;
    }
    acc
}

fn complex_grad_params(h: &[f64], r: &[f64], t: &[f64]) -> (f64, ScoreGradient) {
    let len = h.len();
    let mut d_head = vec![0.0; len];
    let mut d_relation = vec![0.0; len];
    let mut d_tail = vec![0.0; len];
    let mut acc = 0.0;
    for i in (0..len).step_by(2) {
        let (a, b) = (h[i], h[i + 1]);
        let (c, d) = (r[i], r[i + 1]);
        let (e, f) = (t[i], t[i + 1]);
        acc += (a * c - b * d) * e + (a * d + b * c) * f;
        d_head[i] = c * e + d * f;
        d_head[i + 1] = -d * e + c * f;
        d_relation[i] = a * e + b * f;
        d_relation[i + 1] = -b * e + a * f;
        d_tail[i] = a * c - b * d;
        d_tail[i + 1] = a * d + b * c;
    }
    (acc, ScoreGradient { d_head, d_relation, d_tail })
}

fn rotate_params(h: &[f64], theta: &[f64], t: &[f64]) -> f64 {
    debug_assert!(h.len() == 2 * theta.len() && h.len() == t.len());
    let mut sq = 0.0;
    for (k, &th) in theta.iter().enumerate() {
        let (a, b) = (h[2 * k], h[2 * k + 1]);
        let (cos, sin) = (th.cos(), th.sin());
        let u = a * cos - b * sin - t[2 * k];
        let v = a * sin + b * cos - t[2 * k + 1];
        sq += u * u + v * v;
    }
    -sq.sqrt()
}

fn rotate_grad_params(h: &[f64], theta: &[f64], t: &[f64]) -> (f64, ScoreGradient) {
    let n = theta.len();
    let mut u = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut sq = 0.0;
    for k in 0..n {
        let (a, b) = (h[2 * k], h[2 * k + 1]);
        let (cos, sin) = (theta[k].cos(), theta[k].sin());
        u[k] = a * cos - b * sin - t[2 * k];
        v[k] = a * sin + b * cos - t[2 * k + 1];
        sq += u[k] * u[k] + v[k] * v[k];
    }
    let norm = sq.sqrt();
    let mut d_head = vec![0.0; 2 * n];
    let mut d_relation = vec![0.0; n];
    let mut d_tail = vec![0.0; 2 * n];
    if norm > 0.0 {
        for k in 0..n {
            let (a, b) = (h[2 * k], h[2 * k + 1]);
            let (cos, sin) = (theta[k].cos(), theta[k].sin());
            d_head[2 * k] = -(u[k] * cos + v[k] * sin) / norm;
            d_head[2 * k + 1] = (u[k] * sin - v[k] * cos) / norm;
            // d(rotated head)/d(theta) = (-a sin - b cos, a cos - b sin)
            d_relation[k] = -(u[k] * (-a * sin - b * cos) + v[k] * (a * cos - b * sin)) / norm;
            d_tail[2 * k] = u[k] / norm;
            d_tail[2 * k + 1] = v[k] / norm;
        }
    }
    (-norm, ScoreGradient { d_head, d_relation, d_tail })
}
