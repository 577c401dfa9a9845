//! Subjects, cohorts, on-disk formats, synthetic cohorts and fold splitting.

pub mod aal;
mod io;
mod split;
mod synth;

pub(crate) use io::{io_err, read_json, write_json_atomic};
pub use io::{
    load_dataset, read_matrix_csv, save_dataset, write_matrix_csv, Manifest, SubjectEntry,
};
pub use split::{kfold_split, Fold};
pub use synth::{ablate_sc_fv, functional_connectivity, synthesize_cohort, SynthConfig};

use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use thiserror::Error;

use crate::tensor::Matrix;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("missing file {path}")]
    MissingFile { path: PathBuf },
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed json in {path}: {message}")]
    Json { path: PathBuf, message: String },
    #[error("{path}: row {row} column {col}: cannot parse {text:?} as a number")]
    Parse {
        path: PathBuf,
        row: usize,
        col: usize,
        text: String,
    },
    #[error("{what}: expected shape {expected:?}, found {found:?}")]
    ShapeMismatch {
        what: String,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("subject {subject}: structural connectivity is asymmetric at ({i}, {j})")]
    AsymmetricSc { subject: String, i: usize, j: usize },
    #[error("subject {subject}: structural connectivity entry ({i}, {j}) = {value} (must be binary with zero diagonal)")]
    InvalidSc {
        subject: String,
        i: usize,
        j: usize,
        value: f64,
    },
    #[error("{what}: non-finite value at ({row}, {col})")]
    NonFinite {
        what: String,
        row: usize,
        col: usize,
    },
    #[error("invalid dataset: {0}")]
    Invalid(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("too few subjects: {0}")]
    TooFewSubjects(String),
}

/// One multimodal sample.
#[derive(Clone, Debug, PartialEq)]
pub struct Subject {
    pub id: String,
    /// Binary symmetric structural adjacency (N x N).
    pub sc: Matrix,
    /// Functional time-series features (N x d), min-max normalized to [0, 1].
    pub fts: Matrix,
    /// Image-derived semantic feature vector (length q).
    pub fv: Vec<f64>,
    /// 0 = control, 1 = patient.
    pub label: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Increased,
    Decreased,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PlantedEdge {
    pub i: usize,
    pub j: usize,
    pub direction: Direction,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub subjects: Vec<Subject>,
    pub n_rois: usize,
    pub fts_dim: usize,
    pub latent_dim: usize,
    pub roi_names: Vec<String>,
    /// Coarse region id per ROI, contiguous from 0.
    pub partition: Vec<usize>,
    pub planted_edges: Option<Vec<PlantedEdge>>,
}

impl Dataset {
    pub fn n_regions(&self) -> usize {
        self.partition.iter().max().map_or(0, |m| m + 1)
    }

    pub fn labels(&self) -> Vec<usize> {
        self.subjects.iter().map(|s| s.label).collect()
    }

    /// Copy restricted to the given subject indices (metadata kept).
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            subjects: indices.iter().map(|&i| self.subjects[i].clone()).collect(),
            ..self.clone_meta()
        }
    }

    /// Metadata with an empty subject list.
    pub fn clone_meta(&self) -> Dataset {
        Dataset {
            subjects: Vec::new(),
            n_rois: self.n_rois,
            fts_dim: self.fts_dim,
            latent_dim: self.latent_dim,
            roi_names: self.roi_names.clone(),
            partition: self.partition.clone(),
            planted_edges: self.planted_edges.clone(),
        }
    }

    /// Checks every structural invariant of the cohort and its subjects.
    pub fn validate(&self) -> Result<(), DataError> {
        let n = self.n_rois;
        if self.roi_names.len() != n {
            return Err(DataError::Invalid(format!(
                "{} roi names for {n} rois",
                self.roi_names.len()
            )));
        }
        validate_partition(&self.partition, n)?;
        if let Some(edges) = &self.planted_edges {
            for e in edges {
                if !(e.i < e.j && e.j < n) {
                    return Err(DataError::Invalid(format!(
                        "planted edge ({}, {}) must satisfy i < j < {n}",
                        e.i, e.j
                    )));
                }
            }
        }
        for s in &self.subjects {
            validate_subject(s, n, self.fts_dim, self.latent_dim)?;
        }
        Ok(())
    }
}

pub(crate) fn validate_partition(partition: &[usize], n: usize) -> Result<(), DataError> {
    if partition.len() != n {
        return Err(DataError::Invalid(format!(
            "partition covers {} rois, expected {n}",
            partition.len()
        )));
    }
    let regions = partition.iter().max().map_or(0, |m| m + 1);
    for r in 0..regions {
        if !partition.contains(&r) {
            return Err(DataError::Invalid(format!(
                "partition region ids are not contiguous: {r} unused"
            )));
        }
    }
    Ok(())
}

fn check_finite(what: &str, m: &Matrix) -> Result<(), DataError> {
    for i in 0..m.rows() {
        for (j, v) in m.row(i).iter().enumerate() {
            if !v.is_finite() {
                return Err(DataError::NonFinite {
                    what: what.to_string(),
                    row: i,
                    col: j,
                });
            }
        }
    }
    Ok(())
}

pub(crate) fn validate_subject(s: &Subject, n: usize, d: usize, q: usize) -> Result<(), DataError> {
    let shape = |what: &str, expected, found| {
        if expected != found {
            Err(DataError::ShapeMismatch {
                what: format!("subject {} {what}", s.id),
                expected,
                found,
            })
        } else {
            Ok(())
        }
    };
    shape("sc", (n, n), s.sc.shape())?;
    shape("fts", (n, d), s.fts.shape())?;
    shape("fv", (1, q), (1, s.fv.len()))?;
    check_finite(&format!("subject {} sc", s.id), &s.sc)?;
    check_finite(&format!("subject {} fts", s.id), &s.fts)?;
    check_finite(&format!("subject {} fv", s.id), &Matrix::row_vector(&s.fv))?;
    for i in 0..n {
        for j in 0..n {
            let v = s.sc.get(i, j);
            if v != s.sc.get(j, i) {
                return Err(DataError::AsymmetricSc {
                    subject: s.id.clone(),
                    i: i.min(j),
                    j: i.max(j),
                });
            }
            if (i == j && v != 0.0) || (v != 0.0 && v != 1.0) {
                return Err(DataError::InvalidSc {
                    subject: s.id.clone(),
                    i,
                    j,
                    value: v,
                });
            }
        }
    }
    if let Some(v) = s.fv.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(DataError::Invalid(format!(
            "subject {}: fv entry {v} outside [0, 1]",
            s.id
        )));
    }
    if s.label > 1 {
        return Err(DataError::Invalid(format!(
            "subject {}: label {} not in {{0, 1}}",
            s.id, s.label
        )));
    }
    Ok(())
}

/// Per-subject min-max scaling to [0, 1]. A constant matrix maps to zeros.
pub fn min_max_normalize(m: &Matrix) -> Matrix {
    let (lo, hi) = m
        .as_slice()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    let range = hi - lo;
    if range.is_nan() || range <= 0.0 {
        return Matrix::zeros(m.rows(), m.cols());
    }
    m.map(|x| (x - lo) / range)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_max_maps_to_unit_interval() {
        let m = Matrix::from_vec(2, 2, vec![-1.0, 7.3, 2.0, 0.5]);
        let n = min_max_normalize(&m);
        assert_eq!(n.as_slice().iter().cloned().fold(f64::MIN, f64::max), 1.0);
        assert_eq!(n.as_slice().iter().cloned().fold(f64::MAX, f64::min), 0.0);
        // Idempotent on already-normalized data, bit for bit.
        assert_eq!(min_max_normalize(&n), n);
        assert_eq!(
            min_max_normalize(&Matrix::filled(2, 2, 3.0)),
            Matrix::zeros(2, 2)
        );
    }

    #[test]
    fn partition_must_be_contiguous() {
        assert!(validate_partition(&[0, 1, 1, 0], 4).is_ok());
        assert!(validate_partition(&[0, 2, 2, 0], 4).is_err());
        assert!(validate_partition(&[0, 1], 4).is_err());
    }
}
