use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::{Real, Tensor};
use crate::error::{Error, Result};

/// Named trainable arrays in a fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore<R> {
    names: Vec<String>,
    tensors: Vec<Tensor<R>>,
}

impl<R: Real> Default for ParamStore<R> {
    fn default() -> Self {
        Self { names: Vec::new(), tensors: Vec::new() }
    }
}

impl<R: Real> ParamStore<R> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, t: Tensor<R>) -> usize {
        self.names.push(name.into());
        self.tensors.push(t);
        self.tensors.len() - 1
    }

    /// Xavier-uniform `rows × cols` matrix.
    pub fn push_xavier(&mut self, name: impl Into<String>, rows: usize, cols: usize, rng: &mut impl Rng) -> usize {
        let bound = libm::sqrt(6.0 / (rows + cols) as f64);
        let data = (0..rows * cols).map(|_| R::of(rng.random_range(-bound..bound))).collect();
        self.push(name, Tensor::from_vec(rows, cols, data))
    }

    pub fn push_const(&mut self, name: impl Into<String>, len: usize, value: f64) -> usize {
        self.push(name, Tensor::from_vec(1, len, vec![R::of(value); len]))
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensor(&self, i: usize) -> &Tensor<R> {
        &self.tensors[i]
    }

    pub fn tensor_mut(&mut self, i: usize) -> &mut Tensor<R> {
        &mut self.tensors[i]
    }

    pub fn tensors(&self) -> &[Tensor<R>] {
        &self.tensors
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.tensors.iter().map(|t| (t.rows, t.cols)).collect()
    }

    /// Total number of trainable scalars.
    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::all_finite)
    }

    pub fn cast<S: Real>(&self) -> ParamStore<S> {
        ParamStore {
            names: self.names.clone(),
            tensors: self
                .tensors
                .iter()
                .map(|t| Tensor::from_vec(t.rows, t.cols, t.data.iter().map(|v| S::of(v.f64())).collect()))
                .collect(),
        }
    }

    /// Little-endian bytes of every scalar, in store order.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.num_scalars() * R::BYTES);
        for t in &self.tensors {
            for &v in &t.data {
                v.write_le(&mut out);
            }
        }
        out
    }

    /// Overwrite every scalar from little-endian bytes; shapes stay.
    pub fn load_le_bytes(&mut self, bytes: &[u8]) -> Result<()> {
        let want = self.num_scalars() * R::BYTES;
        if bytes.len() != want {
            return Err(Error::Dimension(alloc::format!("parameter blob has {} bytes, expected {want}", bytes.len())));
        }
        let mut chunks = bytes.chunks_exact(R::BYTES);
        for t in &mut self.tensors {
            for v in &mut t.data {
                *v = R::read_le(chunks.next().expect("length checked"));
            }
        }
        if !self.all_finite() {
            return Err(Error::NumericFailure { layer: "checkpoint parameters".to_string() });
        }
        Ok(())
    }
}
