//! Named parameter collections and their gradient mirrors.
//!
//! Parameters keep insertion order so that flattening, checkpointing, and
//! optimizer traversal all walk the same stable sequence.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::Matrix;

/// Ordered set of named parameter matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    entries: Vec<(String, Matrix)>,
}

impl ParamSet {
    pub fn new() -> Self {
        ParamSet { entries: Vec::new() }
    }

    /// Inserts a parameter at the end; rejects duplicate names.
    pub fn insert(&mut self, name: &str, value: Matrix) -> Result<()> {
        if self.entries.iter().any(|(n, _)| n == name) {
            return Err(Error::Contract(format!(
                "parameter {name:?} inserted twice"
            )));
        }
        self.entries.push((name.to_string(), value));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Matrix> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, m)| m)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Matrix> {
        self.entries
            .iter_mut()
            .find(|(n, _)| n == name)
            .map(|(_, m)| m)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Matrix)> {
        self.entries.iter().map(|(n, m)| (n.as_str(), m))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Matrix)> {
        self.entries.iter_mut().map(|(n, m)| (n.as_str(), m))
    }

    pub fn names(&self) -> Vec<String> {
        self.entries.iter().map(|(n, _)| n.clone()).collect()
    }

    /// Total number of scalar entries across all parameters.
    pub fn scalar_count(&self) -> usize {
        self.entries.iter().map(|(_, m)| m.data().len()).sum()
    }

    /// Flattens every parameter, in order, into one vector.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.scalar_count());
        for (_, m) in &self.entries {
            out.extend_from_slice(m.data());
        }
        out
    }

    /// Writes a flat vector back into the parameters. The vector length must
    /// match `scalar_count` exactly.
    pub fn unflatten_into(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.scalar_count() {
            return Err(Error::Contract(format!(
                "flat vector has {} entries, parameters hold {}",
                flat.len(),
                self.scalar_count()
            )));
        }
        let mut off = 0;
        for (_, m) in &mut self.entries {
            let n = m.data().len();
            m.data_mut().copy_from_slice(&flat[off..off + n]);
            off += n;
        }
        Ok(())
    }
}

impl Default for ParamSet {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradient accumulator keyed by parameter name.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    entries: Vec<(String, Matrix)>,
}

impl Gradients {
    /// Zero gradients shaped like the given parameters, same order.
    pub fn zeros_like(params: &ParamSet) -> Self {
        let entries = params
            .iter()
            .map(|(n, m)| (n.to_string(), Matrix::zeros(m.rows(), m.cols())))
            .collect();
        Gradients { entries }
    }

    pub fn get(&self, name: &str) -> Option<&Matrix> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, m)| m)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Matrix> {
        self.entries
            .iter_mut()
            .find(|(n, _)| n == name)
            .map(|(_, m)| m)
    }

    /// Adds `delta` into the gradient for `name`; the entry must exist and
    /// match shape.
    pub fn accumulate(&mut self, name: &str, delta: &Matrix) -> Result<()> {
        let slot = self.get_mut(name).ok_or_else(|| {
            Error::Contract(format!("gradient accumulate: unknown parameter {name:?}"))
        })?;
        slot.axpy(1.0, delta)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Matrix)> {
        self.entries.iter().map(|(n, m)| (n.as_str(), m))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Matrix)> {
        self.entries.iter_mut().map(|(n, m)| (n.as_str(), m))
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (_, m) in &self.entries {
            out.extend_from_slice(m.data());
        }
        out
    }

    /// Largest absolute gradient entry, 0 for an empty set.
    pub fn max_abs(&self) -> f64 {
        self.entries
            .iter()
            .flat_map(|(_, m)| m.data().iter())
            .fold(0.0f64, |acc, &x| acc.max(x.abs()))
    }

    pub fn check_finite(&self) -> Result<()> {
        for (n, m) in &self.entries {
            m.check_finite(&format!("gradient of {n}"))?;
        }
        Ok(())
    }
}
