use std::collections::HashSet;

use crate::error::{Error, Result};

/// An n×d feature matrix with per-row ids and optional subgroup/region labels.
///
/// Construction checks shape, id uniqueness and label lengths. Finiteness is
/// reported by [`EmbeddingSet::non_finite_cells`] and enforced by input
/// validation, so a set holding a NaN can still be inspected and reported.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    ids: Vec<String>,
    data: Vec<f64>,
    dim: usize,
    subgroup: Option<Vec<String>>,
    region: Option<Vec<String>>,
}

impl EmbeddingSet {
    pub fn new(ids: Vec<String>, data: Vec<f64>, dim: usize) -> Result<Self> {
        if ids.is_empty() {
            return Err(Error::InvalidData("embedding set has no rows".into()));
        }
        if dim == 0 {
            return Err(Error::InvalidData("embedding set has no feature columns".into()));
        }
        if data.len() != ids.len() * dim {
            return Err(Error::InvalidData(format!(
                "matrix has {} values, expected {} rows x {} columns",
                data.len(),
                ids.len(),
                dim
            )));
        }
        let mut seen = HashSet::with_capacity(ids.len());
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::DuplicateId(id.clone()));
            }
        }
        Ok(Self {
            ids,
            data,
            dim,
            subgroup: None,
            region: None,
        })
    }

    /// Builds a set from rows with ids `0..n`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidData("rows have differing lengths".into()));
        }
        let ids = (0..rows.len()).map(|i| i.to_string()).collect();
        Self::new(ids, rows.concat(), dim)
    }

    pub fn with_subgroups(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(Error::InvalidData(format!(
                "{} subgroup labels for {} rows",
                labels.len(),
                self.len()
            )));
        }
        self.subgroup = Some(labels);
        Ok(self)
    }

    pub fn with_regions(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(Error::InvalidData(format!(
                "{} region labels for {} rows",
                labels.len(),
                self.len()
            )));
        }
        self.region = Some(labels);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn subgroups(&self) -> Option<&[String]> {
        self.subgroup.as_deref()
    }

    pub fn regions(&self) -> Option<&[String]> {
        self.region.as_deref()
    }

    /// `(row id, column index)` of every NaN or infinite value.
    pub fn non_finite_cells(&self) -> Vec<(String, usize)> {
        self.data
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.is_finite())
            .map(|(i, _)| (self.ids[i / self.dim].clone(), i % self.dim))
            .collect()
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.dim];
        for r in self.rows() {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        let n = self.len() as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        mean
    }

    /// Rows at `indices`, in that order. Duplicated indices get suffixed ids
    /// (`id#2`, `id#3`, ...) so the result still has unique ids.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut counts = vec![0usize; self.len()];
        let mut ids = Vec::with_capacity(indices.len());
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            counts[i] += 1;
            ids.push(if counts[i] == 1 {
                self.ids[i].clone()
            } else {
                format!("{}#{}", self.ids[i], counts[i])
            });
            data.extend_from_slice(self.row(i));
        }
        let pick = |labels: &Option<Vec<String>>| {
            labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i].clone()).collect())
        };
        Self {
            ids,
            data,
            dim: self.dim,
            subgroup: pick(&self.subgroup),
            region: pick(&self.region),
        }
    }

    /// Indices of rows whose subgroup label equals `label`.
    pub fn subgroup_indices(&self, label: &str) -> Vec<usize> {
        label_indices(self.subgroup.as_deref(), label)
    }

    pub fn region_indices(&self, label: &str) -> Vec<usize> {
        label_indices(self.region.as_deref(), label)
    }

    /// Returns a copy with every value replaced by `f(row, column, value)`.
    pub fn map_values(&self, mut f: impl FnMut(usize, usize, f64) -> f64) -> Self {
        let mut out = self.clone();
        for (i, v) in out.data.iter_mut().enumerate() {
            *v = f(i / self.dim, i % self.dim, *v);
        }
        out
    }

    pub(crate) fn with_data(&self, data: Vec<f64>, dim: usize) -> Self {
        debug_assert_eq!(data.len(), self.len() * dim);
        Self {
            ids: self.ids.clone(),
            data,
            dim,
            subgroup: self.subgroup.clone(),
            region: self.region.clone(),
        }
    }
}

fn label_indices(labels: Option<&[String]>, label: &str) -> Vec<usize> {
    labels
        .map(|l| {
            l.iter()
                .enumerate()
                .filter(|(_, v)| v.as_str() == label)
                .map(|(i, _)| i)
                .collect()
        })
        .unwrap_or_default()
}

/// Distinct labels in first-appearance order.
pub fn distinct_labels(labels: &[String]) -> Vec<String> {
    let mut seen = HashSet::new();
    labels
        .iter()
        .filter(|l| seen.insert(l.as_str()))
        .cloned()
        .collect()
}
