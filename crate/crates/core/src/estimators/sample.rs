use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Observations `(Y_i, X_i)` with optional weights and group labels.
///
/// Each row carries one or more outcomes (all bids of one auction share a
/// row), a covariate vector of common dimension `d`, a nonnegative weight
/// and optionally an integer group label such as the number of bidders or a
/// survey period.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    outcomes: Vec<f64>,
    offsets: Vec<usize>,
    x: Vec<f64>,
    dim: usize,
    weights: Vec<f64>,
    groups: Option<Vec<i64>>,
}

impl Sample {
    /// One outcome per row.
    pub fn scalar(y: Vec<f64>, x: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(y.into_iter().map(|v| vec![v]).collect(), x)
    }

    /// One covariate, one outcome per row.
    pub fn univariate(y: Vec<f64>, x: Vec<f64>) -> Result<Self> {
        Self::scalar(y, x.into_iter().map(|v| vec![v]).collect())
    }

    pub fn new(outcomes: Vec<Vec<f64>>, x: Vec<Vec<f64>>) -> Result<Self> {
        if outcomes.is_empty() {
            return Err(Error::EmptyInput("sample has no rows".into()));
        }
        if outcomes.len() != x.len() {
            return Err(Error::ShapeMismatch {
                expected: outcomes.len(),
                actual: x.len(),
            });
        }
        let dim = x[0].len();
        if dim == 0 {
            return Err(Error::InvalidSample("covariate dimension is zero".into()));
        }
        let mut flat_y = Vec::new();
        let mut offsets = Vec::with_capacity(outcomes.len() + 1);
        offsets.push(0);
        for (i, row) in outcomes.iter().enumerate() {
            if row.is_empty() {
                return Err(Error::InvalidSample(format!("row {i} has no outcomes")));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidSample(format!("row {i} has a non-finite outcome")));
            }
            flat_y.extend_from_slice(row);
            offsets.push(flat_y.len());
        }
        let mut flat_x = Vec::with_capacity(x.len() * dim);
        for (i, row) in x.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::InvalidSample(format!(
                    "row {i} has covariate dimension {}, expected {dim}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidSample(format!("row {i} has a non-finite covariate")));
            }
            flat_x.extend_from_slice(row);
        }
        let n = outcomes.len();
        Ok(Self {
            outcomes: flat_y,
            offsets,
            x: flat_x,
            dim,
            weights: vec![1.0; n],
            groups: None,
        })
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.len() {
            return Err(Error::ShapeMismatch {
                expected: self.len(),
                actual: weights.len(),
            });
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidSample("weights must be finite and nonnegative".into()));
        }
        if !weights.iter().any(|w| *w > 0.0) {
            return Err(Error::InvalidSample("at least one weight must be positive".into()));
        }
        self.weights = weights;
        Ok(self)
    }

    pub fn with_groups(mut self, groups: Vec<i64>) -> Result<Self> {
        if groups.len() != self.len() {
            return Err(Error::ShapeMismatch {
                expected: self.len(),
                actual: groups.len(),
            });
        }
        self.groups = Some(groups);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn outcomes(&self, i: usize) -> &[f64] {
        &self.outcomes[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn all_outcomes(&self) -> &[f64] {
        &self.outcomes
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    /// Values of covariate `m` across rows.
    pub fn covariate(&self, m: usize) -> Vec<f64> {
        (0..self.len()).map(|i| self.x(i)[m]).collect()
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn max_weight(&self) -> f64 {
        self.weights.iter().copied().fold(0.0, f64::max)
    }

    pub fn group(&self, i: usize) -> Option<i64> {
        self.groups.as_ref().map(|g| g[i])
    }

    pub fn groups(&self) -> Option<&[i64]> {
        self.groups.as_deref()
    }

    /// Row counts per group label.
    pub fn group_counts(&self) -> BTreeMap<i64, usize> {
        let mut counts = BTreeMap::new();
        if let Some(groups) = &self.groups {
            for g in groups {
                *counts.entry(*g).or_insert(0) += 1;
            }
        }
        counts
    }

    /// Smallest outcome over all rows.
    pub fn min_outcome(&self) -> f64 {
        self.outcomes.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Rows `indices[0], indices[1], …` in that order (repeats allowed).
    pub fn select(&self, indices: &[usize]) -> Sample {
        let mut outcomes = Vec::with_capacity(indices.len());
        let mut offsets = Vec::with_capacity(indices.len() + 1);
        let mut x = Vec::with_capacity(indices.len() * self.dim);
        let mut weights = Vec::with_capacity(indices.len());
        offsets.push(0);
        for &i in indices {
            outcomes.extend_from_slice(self.outcomes(i));
            offsets.push(outcomes.len());
            x.extend_from_slice(self.x(i));
            weights.push(self.weights[i]);
        }
        Sample {
            outcomes,
            offsets,
            x,
            dim: self.dim,
            weights,
            groups: self
                .groups
                .as_ref()
                .map(|g| indices.iter().map(|&i| g[i]).collect()),
        }
    }

    /// Indices of rows carrying group label `label`.
    pub fn group_indices(&self, label: i64) -> Vec<usize> {
        match &self.groups {
            Some(g) => (0..self.len()).filter(|&i| g[i] == label).collect(),
            None => Vec::new(),
        }
    }

    /// Applies `f` to every outcome.
    pub fn map_outcomes(&self, f: impl Fn(f64) -> f64) -> Sample {
        let mut out = self.clone();
        for v in &mut out.outcomes {
            *v = f(*v);
        }
        out
    }

    /// Applies `f` to every covariate vector.
    pub fn map_covariates(&self, f: impl Fn(usize, f64) -> f64) -> Sample {
        let mut out = self.clone();
        for (k, v) in out.x.iter_mut().enumerate() {
            *v = f(k % self.dim, *v);
        }
        out
    }
}
