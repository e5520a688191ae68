//! Trainable parameter containers: a value buffer with a colocated gradient
//! buffer, plus a named-tensor store used for checkpoint serialization.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2};
use rand::Rng;

use crate::error::{Error, Result};

/// Trainable matrix with accumulated gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct PMat {
    pub v: Array2<f64>,
    pub g: Array2<f64>,
}

impl PMat {
    pub fn new(v: Array2<f64>) -> Self {
        let g = Array2::zeros(v.raw_dim());
        Self { v, g }
    }

    /// U(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization.
    pub fn uniform(rows: usize, cols: usize, fan_in: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let v = Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-bound..bound));
        Self::new(v)
    }

    pub fn zero_grad(&mut self) {
        self.g.fill(0.0);
    }
}

/// Trainable vector with accumulated gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct PVec {
    pub v: Array1<f64>,
    pub g: Array1<f64>,
}

impl PVec {
    pub fn new(v: Array1<f64>) -> Self {
        let g = Array1::zeros(v.raw_dim());
        Self { v, g }
    }

    pub fn zeros(len: usize) -> Self {
        Self::new(Array1::zeros(len))
    }

    pub fn zero_grad(&mut self) {
        self.g.fill(0.0);
    }
}

/// One named parameter visited during a training step or a finite-difference
/// probe. `value` and `grad` alias the live buffers.
pub struct ParamView<'a> {
    pub name: String,
    pub value: &'a mut [f64],
    pub grad: &'a mut [f64],
}

impl PMat {
    pub fn visit(&mut self, name: &str, f: &mut dyn FnMut(ParamView<'_>)) {
        f(ParamView {
            name: name.to_string(),
            value: self.v.as_slice_mut().expect("standard layout"),
            grad: self.g.as_slice_mut().expect("standard layout"),
        });
    }
}

impl PVec {
    pub fn visit(&mut self, name: &str, f: &mut dyn FnMut(ParamView<'_>)) {
        f(ParamView {
            name: name.to_string(),
            value: self.v.as_slice_mut().expect("standard layout"),
            grad: self.g.as_slice_mut().expect("standard layout"),
        });
    }
}

/// A named f64 tensor, used for checkpoint export/import.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn from_mat(m: &Array2<f64>) -> Self {
        Self {
            shape: m.shape().to_vec(),
            data: m.as_slice().expect("standard layout").to_vec(),
        }
    }

    pub fn from_vec1(v: &Array1<f64>) -> Self {
        Self { shape: vec![v.len()], data: v.to_vec() }
    }

    pub fn to_mat(&self) -> Result<Array2<f64>> {
        if self.shape.len() != 2 {
            return Err(Error::Checkpoint(format!("expected rank-2 tensor, got shape {:?}", self.shape)));
        }
        Array2::from_shape_vec((self.shape[0], self.shape[1]), self.data.clone())
            .map_err(|e| Error::Checkpoint(e.to_string()))
    }

    pub fn to_vec1(&self) -> Result<Array1<f64>> {
        if self.shape.len() != 1 {
            return Err(Error::Checkpoint(format!("expected rank-1 tensor, got shape {:?}", self.shape)));
        }
        Ok(Array1::from_vec(self.data.clone()))
    }
}

/// Ordered named-tensor store.
#[derive(Debug, Clone, Default)]
pub struct TensorStore {
    pub entries: BTreeMap<String, Tensor>,
}

impl TensorStore {
    pub fn put(&mut self, name: impl Into<String>, tensor: Tensor) {
        self.entries.insert(name.into(), tensor);
    }

    pub fn take(&mut self, name: &str) -> Result<Tensor> {
        self.entries
            .remove(name)
            .ok_or_else(|| Error::Checkpoint(format!("missing tensor {name:?}")))
    }
}
