use std::collections::HashMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Named, ordered collection of trainable tensors.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
    index: HashMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> ParamStore {
        ParamStore::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Tensor) -> Result<usize> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::Config(format!("duplicate parameter {name}")));
        }
        let id = self.tensors.len();
        self.index.insert(name.clone(), id);
        self.names.push(name);
        self.tensors.push(t);
        Ok(id)
    }

    pub fn id(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::NotFound(format!("parameter {name}")))
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn name(&self, id: usize) -> &str {
        &self.names[id]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensor(&self, id: usize) -> &Tensor {
        &self.tensors[id]
    }

    pub fn tensor_mut(&mut self, id: usize) -> &mut Tensor {
        &mut self.tensors[id]
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.index.get(name).map(|&i| &self.tensors[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    /// Total number of scalars.
    pub fn size(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }
}

/// Gradient buffers aligned with a [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct Grads {
    bufs: Vec<Vec<f64>>,
}

impl Grads {
    pub fn zeros_like(store: &ParamStore) -> Grads {
        Grads {
            bufs: store.tensors.iter().map(|t| vec![0.0; t.len()]).collect(),
        }
    }

    pub(crate) fn accumulate(&mut self, id: usize, g: &[f64]) {
        self.bufs[id].iter_mut().zip(g).for_each(|(a, b)| *a += b);
    }

    pub fn get(&self, id: usize) -> &[f64] {
        &self.bufs[id]
    }

    pub fn scale(&mut self, c: f64) {
        self.bufs.iter_mut().flatten().for_each(|x| *x *= c);
    }

    pub fn zero(&mut self) {
        self.bufs.iter_mut().flatten().for_each(|x| *x = 0.0);
    }

    pub fn add(&mut self, other: &Grads) {
        for (a, b) in self.bufs.iter_mut().zip(&other.bufs) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    pub fn len(&self) -> usize {
        self.bufs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bufs.is_empty()
    }
}

/// How a freshly created parameter is filled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    /// Uniform in `±sqrt(6 / (fan_in + fan_out))`.
    Glorot,
    Zeros,
    Ones,
}

/// Deterministic parameter factory: the same seed and the same sequence of
/// `add` calls always yield identical tensors.
pub struct Initializer {
    rng: ChaCha8Rng,
    store: ParamStore,
}

impl Initializer {
    pub fn new(seed: u64) -> Initializer {
        Initializer {
            rng: ChaCha8Rng::seed_from_u64(seed),
            store: ParamStore::new(),
        }
    }

    pub fn add(&mut self, name: &str, rows: usize, cols: usize, init: Init) -> Result<usize> {
        let data = match init {
            Init::Zeros => vec![0.0; rows * cols],
            Init::Ones => vec![1.0; rows * cols],
            Init::Glorot => {
                let limit = (6.0 / (rows + cols) as f64).sqrt();
                (0..rows * cols)
                    .map(|_| self.rng.random_range(-limit..limit))
                    .collect()
            }
        };
        self.store.insert(name, Tensor::matrix(rows, cols, data)?)
    }

    pub fn finish(self) -> ParamStore {
        self.store
    }
}
