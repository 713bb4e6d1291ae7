//! Uncensored lifetime samples.

use serde::Serialize;

use crate::error::{Error, Result};

/// A validated sample of positive, finite lifetimes with a cached sorted
/// copy.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    values: Vec<f64>,
    sorted: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub n: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

impl Dataset {
    /// Fails with a validation error naming the first offending position
    /// (0-based) when a value is not strictly positive and finite.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Validation("dataset is empty".into()));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(Error::Validation(format!(
                "value {v} at position {i} is not a positive finite lifetime"
            )));
        }
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        Ok(Self { values, sorted })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn summary(&self) -> Summary {
        let n = self.len();
        Summary {
            n,
            min: self.sorted[0],
            max: self.sorted[n - 1],
            mean: self.values.iter().sum::<f64>() / n as f64,
        }
    }

    /// Fitting four-parameter models needs at least this many observations.
    pub const MIN_FIT_SIZE: usize = 5;

    pub(crate) fn require_fit_size(&self) -> Result<()> {
        if self.len() < Self::MIN_FIT_SIZE {
            return Err(Error::Validation(format!(
                "fitting needs at least {} observations, got {}",
                Self::MIN_FIT_SIZE,
                self.len()
            )));
        }
        Ok(())
    }
}
