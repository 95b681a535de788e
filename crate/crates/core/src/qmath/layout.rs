use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered tensor factorisation of a Hilbert space.
///
/// Subsystem 0 is the most significant digit of a row-major basis index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsystemLayout {
    labels: Vec<String>,
    dims: Vec<usize>,
}

impl SubsystemLayout {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>, dims: impl IntoIterator<Item = usize>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        let dims: Vec<usize> = dims.into_iter().collect();
        if labels.len() != dims.len() {
            return Err(Error::InvalidLayout(format!("{} labels but {} dims", labels.len(), dims.len())));
        }
        if let Some(d) = dims.iter().position(|&d| d == 0) {
            return Err(Error::InvalidLayout(format!("subsystem `{}` has dimension 0", labels[d])));
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Error::InvalidLayout(format!("duplicate label `{l}`")));
            }
        }
        Ok(Self { labels, dims })
    }

    /// Single-subsystem layout.
    pub fn single(label: &str, dim: usize) -> Result<Self> {
        Self::new([label], [dim])
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn contains(&self, label: &str) -> bool {
        self.labels.iter().any(|l| l == label)
    }

    pub fn position(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn dim_of(&self, label: &str) -> Result<usize> {
        Ok(self.dims[self.position(label)?])
    }

    /// Positions of `labels`, in the given order. Rejects duplicates.
    pub fn positions<S: AsRef<str>>(&self, labels: &[S]) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(labels.len());
        for l in labels {
            let p = self.position(l.as_ref())?;
            if out.contains(&p) {
                return Err(Error::OverlappingLabels(l.as_ref().to_string()));
            }
            out.push(p);
        }
        Ok(out)
    }

    /// Product of the dimensions of `labels`.
    pub fn dim_of_all<S: AsRef<str>>(&self, labels: &[S]) -> Result<usize> {
        Ok(self.positions(labels)?.iter().map(|&p| self.dims[p]).product())
    }

    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.dims.len()];
        for k in (0..self.dims.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * self.dims[k + 1];
        }
        strides
    }

    /// Full-space index offsets for every basis state of the subsystems at
    /// `positions`, enumerated row-major in the given position order.
    ///
    /// Any full index splits uniquely as `offsets(P)[p] + offsets(Q)[q]`
    /// when `P` and `Q` partition the subsystems.
    pub fn offsets(&self, positions: &[usize]) -> Vec<usize> {
        let strides = self.strides();
        let mut out = vec![0usize];
        for &p in positions {
            let mut next = Vec::with_capacity(out.len() * self.dims[p]);
            for &base in &out {
                for d in 0..self.dims[p] {
                    next.push(base + d * strides[p]);
                }
            }
            out = next;
        }
        out
    }

    /// Positions not contained in `positions`, in layout order.
    pub fn complement(&self, positions: &[usize]) -> Vec<usize> {
        (0..self.len()).filter(|p| !positions.contains(p)).collect()
    }

    /// Sub-layout made of the subsystems at `positions`, in that order.
    pub fn select(&self, positions: &[usize]) -> Self {
        Self {
            labels: positions.iter().map(|&p| self.labels[p].clone()).collect(),
            dims: positions.iter().map(|&p| self.dims[p]).collect(),
        }
    }

    pub fn concat(&self, other: &Self) -> Result<Self> {
        Self::new(
            self.labels.iter().chain(other.labels.iter()).cloned(),
            self.dims.iter().chain(other.dims.iter()).copied(),
        )
    }

    /// Layout with subsystem `label` given a new dimension.
    pub fn with_dim(&self, label: &str, dim: usize) -> Result<Self> {
        let p = self.position(label)?;
        let mut dims = self.dims.clone();
        dims[p] = dim;
        Self::new(self.labels.clone(), dims)
    }

    /// Layout where consecutive runs given by `groups` are merged into one
    /// subsystem each. `groups` must list `(new_label, run_length)` covering
    /// every subsystem in order.
    pub fn merge_runs(&self, groups: &[(String, usize)]) -> Result<Self> {
        let covered: usize = groups.iter().map(|g| g.1).sum();
        if covered != self.len() {
            return Err(Error::InvalidLayout(format!("groups cover {covered} of {} subsystems", self.len())));
        }
        let mut dims = Vec::with_capacity(groups.len());
        let mut at = 0;
        for (_, run) in groups {
            dims.push(self.dims[at..at + run].iter().product());
            at += run;
        }
        Self::new(groups.iter().map(|g| g.0.clone()), dims)
    }

    /// Digits of a full basis index.
    pub fn digits(&self, mut index: usize) -> Vec<usize> {
        let mut digits = vec![0; self.len()];
        for k in (0..self.len()).rev() {
            digits[k] = index % self.dims[k];
            index /= self.dims[k];
        }
        digits
    }
}
