use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::tensor::{numel_of, Tensor};

/// A named, trainable parameter buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Param {
    pub fn numel(&self) -> usize {
        self.data.len()
    }
}

/// Ordered collection of uniquely named parameters.
///
/// Parameters live outside the autodiff graph as plain buffers, so a set can
/// be shared read-only across threads. Each forward pass binds them as fresh
/// leaf tensors with [`ParamSet::bind`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamSet {
    entries: Vec<Param>,
    index: HashMap<String, usize>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, shape: &[usize], data: Vec<f64>) -> Result<usize> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::InvalidArgument(format!("duplicate parameter name `{name}`")));
        }
        if shape.contains(&0) {
            return Err(Error::InvalidShape(shape.to_vec()));
        }
        if numel_of(shape) != data.len() {
            return Err(Error::DataLength {
                shape: shape.to_vec(),
                len: data.len(),
            });
        }
        let id = self.entries.len();
        self.index.insert(name.clone(), id);
        self.entries.push(Param {
            name,
            shape: shape.to_vec(),
            data,
        });
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.entries.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.entries.iter_mut()
    }

    pub fn get(&self, name: &str) -> Option<&Param> {
        self.index.get(name).map(|&i| &self.entries[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Param> {
        self.index.get(name).map(|&i| &mut self.entries[i])
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    /// Total number of scalar parameters.
    pub fn scalar_count(&self) -> usize {
        self.entries.iter().map(Param::numel).sum()
    }

    /// Rounds every value to the nearest float32 so the set survives a
    /// float32 checkpoint round-trip unchanged.
    pub fn round_to_f32(&mut self) {
        for p in &mut self.entries {
            p.data.iter_mut().for_each(|v| *v = *v as f32 as f64);
        }
    }

    /// Fresh leaf tensors for every parameter, in insertion order.
    pub fn bind(&self, requires_grad: bool) -> Vec<Tensor> {
        self.entries
            .iter()
            .map(|p| {
                let t = Tensor::new(&p.shape, p.data.clone()).expect("validated on insert");
                if requires_grad {
                    t.requires_grad()
                } else {
                    t
                }
            })
            .collect()
    }
}
