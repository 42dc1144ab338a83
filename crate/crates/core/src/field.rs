use std::sync::Arc;

use crate::domain::DiscreteDomain;
use crate::error::{Error, Result};

/// Per-node real values on a domain with a support mask.
///
/// Invariant: values are finite and `support[i] == false` implies `values[i] == 0`.
#[derive(Debug, Clone)]
pub struct ScalarField {
    domain: Arc<DiscreteDomain>,
    values: Vec<f64>,
    support: Vec<bool>,
    /// Chart the values are expressed in, when they come from a partition piece.
    pub chart: Option<usize>,
}

impl ScalarField {
    /// Support is inferred as the nonzero set.
    pub fn new(domain: Arc<DiscreteDomain>, values: Vec<f64>) -> Result<Self> {
        let support = values.iter().map(|v| *v != 0.0).collect();
        Self::with_support(domain, values, support)
    }

    pub fn with_support(domain: Arc<DiscreteDomain>, values: Vec<f64>, support: Vec<bool>) -> Result<Self> {
        let n = domain.node_count();
        if values.len() != n || support.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: values.len().min(support.len()) });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite value at node {i}")));
        }
        if let Some(i) = (0..n).find(|&i| !support[i] && values[i] != 0.0) {
            return Err(Error::InvalidInput(format!("nonzero value outside support at node {i}")));
        }
        Ok(Self { domain, values, support, chart: None })
    }

    pub fn from_fn<F: Fn(&[f64]) -> f64>(domain: Arc<DiscreteDomain>, f: F) -> Result<Self> {
        let values = (0..domain.node_count()).map(|i| f(&domain.point(i))).collect();
        Self::new(domain, values)
    }

    pub fn constant(domain: Arc<DiscreteDomain>, c: f64) -> Result<Self> {
        let n = domain.node_count();
        Self::new(domain, vec![c; n])
    }

    pub fn domain(&self) -> &Arc<DiscreteDomain> {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn support(&self) -> &[bool] {
        &self.support
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Replaces values, keeping the domain; support is re-inferred.
    pub fn replace_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.domain.clone(), values)
    }

    pub fn same_domain(&self, other: &DiscreteDomain) -> bool {
        self.domain.id() == other.id()
    }

    pub(crate) fn ensure_domain(&self, other: &DiscreteDomain) -> Result<()> {
        if self.same_domain(other) {
            Ok(())
        } else {
            Err(Error::DomainMismatch)
        }
    }

    /// Pointwise `a·self + b·other`.
    pub fn linear_combination(&self, a: f64, other: &ScalarField, b: f64) -> Result<Self> {
        other.ensure_domain(&self.domain)?;
        let values = self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect();
        let support: Vec<bool> = self.support.iter().zip(&other.support).map(|(s, t)| *s || *t).collect();
        let mut values: Vec<f64> = values;
        for (v, s) in values.iter_mut().zip(&support) {
            if !*s {
                *v = 0.0;
            }
        }
        Self::with_support(self.domain.clone(), values, support)
    }

    /// Largest absolute value.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}
