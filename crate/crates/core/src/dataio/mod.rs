//! Datasets, CSV and model-file persistence, synthetic data generation and
//! named curve presets.

mod csvio;
mod generate;
mod model_file;
pub mod presets;

pub use csvio::{read_csv, write_csv};
pub use generate::{curve_rng, generate, CurveSpec};
pub use model_file::{
    load_any_model, load_model, model_from_json, model_to_json, save_gaussian_mixture,
    save_model, ModelFile, SCHEMA_VERSION,
};
pub use presets::{preset, CurvePreset, PRESET_NAMES};

use crate::error::{Error, Result};

/// `N` points in `R^n`, optionally labelled.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    points: Vec<f64>,
    labels: Option<Vec<usize>>,
    pub name: String,
}

impl Dataset {
    /// Builds a dataset from row-major coordinates.
    pub fn new(dim: usize, points: Vec<f64>, labels: Option<Vec<usize>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        if !points.len().is_multiple_of(dim) {
            return Err(Error::InvalidArgument(format!(
                "{} coordinates do not split into rows of {dim}",
                points.len()
            )));
        }
        if let Some(pos) = points.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "row {} has a non-finite coordinate",
                pos / dim
            )));
        }
        let n = points.len() / dim;
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(Error::InvalidArgument(format!(
                    "{} labels for {n} points",
                    l.len()
                )));
            }
        }
        Ok(Dataset {
            dim,
            points,
            labels,
            name: String::new(),
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidArgument("ragged rows".into()));
        }
        Self::new(dim, rows.concat(), None)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(Error::InvalidArgument(format!(
                "{} labels for {} points",
                labels.len(),
                self.len()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.points.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.points
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    /// The rows selected by `indices`, labels carried along.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut points = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            points.extend_from_slice(self.point(i));
        }
        Dataset {
            dim: self.dim,
            points,
            labels: self
                .labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i]).collect()),
            name: self.name.clone(),
        }
    }

    /// Appends `other`'s rows. Labels survive only if both sides have them.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        let mut points = self.points.clone();
        points.extend_from_slice(&other.points);
        let labels = match (&self.labels, &other.labels) {
            (Some(a), Some(b)) => Some(a.iter().chain(b).copied().collect()),
            _ => None,
        };
        Ok(Dataset {
            dim: self.dim,
            points,
            labels,
            name: self.name.clone(),
        })
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for p in self.iter() {
            for (a, b) in m.iter_mut().zip(p) {
                *a += b;
            }
        }
        let n = self.len().max(1) as f64;
        m.iter_mut().for_each(|v| *v /= n);
        m
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for p in self.iter() {
            for m in 0..self.dim {
                lo[m] = lo[m].min(p[m]);
                hi[m] = hi[m].max(p[m]);
            }
        }
        (lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_and_bad_labels() {
        assert!(Dataset::new(2, vec![0.0, f64::NAN], None).is_err());
        assert!(Dataset::new(2, vec![0.0, 1.0, 2.0], None).is_err());
        assert!(Dataset::new(2, vec![0.0, 1.0], Some(vec![0, 1])).is_err());
    }

    #[test]
    fn subset_keeps_labels() {
        let d = Dataset::new(1, vec![1.0, 2.0, 3.0], Some(vec![0, 1, 2])).unwrap();
        let s = d.subset(&[2, 0]);
        assert_eq!(s.coords(), &[3.0, 1.0]);
        assert_eq!(s.labels(), Some(&[2, 0][..]));
    }
}
