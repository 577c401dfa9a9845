use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{
    aal, min_max_normalize, validate_partition, validate_subject, DataError, Dataset, PlantedEdge,
    Subject,
};
use crate::tensor::Matrix;

pub const MANIFEST_FILE: &str = "manifest.json";

/// On-disk cohort description. Matrix paths are relative to the manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub n_rois: usize,
    pub fts_dim: usize,
    pub latent_dim: usize,
    pub roi_names: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition: Option<Vec<usize>>,
    pub subjects: Vec<SubjectEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planted_edges: Option<Vec<PlantedEdge>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubjectEntry {
    pub id: String,
    pub label: usize,
    pub sc_csv: String,
    pub fts_csv: String,
    pub fv_csv: String,
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| {
        if source.kind() == std::io::ErrorKind::NotFound {
            DataError::MissingFile {
                path: path.to_path_buf(),
            }
        } else {
            DataError::Io {
                path: path.to_path_buf(),
                source,
            }
        }
    }
}

/// Reads a headerless comma-separated matrix.
pub fn read_matrix_csv(path: &Path) -> Result<Matrix, DataError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut rows = Vec::new();
    for (r, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .enumerate()
            .map(|(c, cell)| {
                let cell = cell.trim();
                cell.parse::<f64>().map_err(|_| DataError::Parse {
                    path: path.to_path_buf(),
                    row: r,
                    col: c,
                    text: cell.to_string(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Matrix::from_rows(&rows)
        .ok_or_else(|| DataError::Invalid(format!("{}: ragged rows", path.display())))
}

/// Writes a headerless comma-separated matrix using shortest round-trip
/// decimal formatting, so a read gives back identical bits.
pub fn write_matrix_csv(path: &Path, m: &Matrix) -> Result<(), DataError> {
    let mut out = String::with_capacity(m.len() * 20);
    for i in 0..m.rows() {
        for (j, v) in m.row(i).iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&format!("{v:?}"));
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(io_err(path))
}

/// Serializes `value` as pretty JSON, writing through a temporary file and a
/// rename so readers never observe a partial file.
pub(crate) fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<(), DataError> {
    let mut json = serde_json::to_string_pretty(value).map_err(|e| DataError::Json {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    json.push('\n');
    let name = path
        .file_name()
        .map_or_else(|| "out".into(), |n| n.to_string_lossy().into_owned());
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    fs::write(&tmp, json).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, DataError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| DataError::Json {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn resolve(dir: &Path, rel: &str) -> PathBuf {
    let p = Path::new(rel);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        dir.join(p)
    }
}

/// Loads and validates a cohort. FTS matrices are min-max normalized per subject.
pub fn load_dataset(manifest_path: &Path) -> Result<Dataset, DataError> {
    let text = fs::read_to_string(manifest_path).map_err(io_err(manifest_path))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| DataError::Json {
        path: manifest_path.to_path_buf(),
        message: e.to_string(),
    })?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let (n, d, q) = (manifest.n_rois, manifest.fts_dim, manifest.latent_dim);

    let partition = match manifest.partition {
        Some(p) => p,
        None if n == aal::AAL90_SIZE => aal::aal90_partition(),
        None => {
            return Err(DataError::Invalid(format!(
                "manifest has no partition and {n} rois is not the AAL-90 layout"
            )))
        }
    };
    validate_partition(&partition, n)?;

    let mut subjects = Vec::with_capacity(manifest.subjects.len());
    for entry in &manifest.subjects {
        let sc = read_matrix_csv(&resolve(dir, &entry.sc_csv))?;
        let fts = read_matrix_csv(&resolve(dir, &entry.fts_csv))?;
        let fv = read_matrix_csv(&resolve(dir, &entry.fv_csv))?;
        if fv.rows() != 1 || fv.cols() != q {
            return Err(DataError::ShapeMismatch {
                what: format!("subject {} fv", entry.id),
                expected: (1, q),
                found: fv.shape(),
            });
        }
        if fts.shape() != (n, d) {
            return Err(DataError::ShapeMismatch {
                what: format!("subject {} fts", entry.id),
                expected: (n, d),
                found: fts.shape(),
            });
        }
        if let Some(idx) = fts.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(DataError::NonFinite {
                what: format!("subject {} fts", entry.id),
                row: idx / d,
                col: idx % d,
            });
        }
        let subject = Subject {
            id: entry.id.clone(),
            sc,
            fts: min_max_normalize(&fts),
            fv: fv.into_vec(),
            label: entry.label,
        };
        validate_subject(&subject, n, d, q)?;
        subjects.push(subject);
    }

    let ds = Dataset {
        subjects,
        n_rois: n,
        fts_dim: d,
        latent_dim: q,
        roi_names: manifest.roi_names,
        partition,
        planted_edges: manifest.planted_edges,
    };
    ds.validate()?;
    Ok(ds)
}

/// Writes one CSV triple per subject plus `manifest.json` into `dir`.
///
/// The manifest is written last through a temporary file and a rename, so a
/// failed save never leaves a manifest behind.
pub fn save_dataset(ds: &Dataset, dir: &Path) -> Result<PathBuf, DataError> {
    ds.validate()?;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let subjects_dir = dir.join("subjects");
    fs::create_dir_all(&subjects_dir).map_err(io_err(&subjects_dir))?;

    let mut entries = Vec::with_capacity(ds.subjects.len());
    for s in &ds.subjects {
        let stem = sanitize(&s.id);
        let entry = SubjectEntry {
            id: s.id.clone(),
            label: s.label,
            sc_csv: format!("subjects/{stem}_sc.csv"),
            fts_csv: format!("subjects/{stem}_fts.csv"),
            fv_csv: format!("subjects/{stem}_fv.csv"),
        };
        write_matrix_csv(&dir.join(&entry.sc_csv), &s.sc)?;
        write_matrix_csv(&dir.join(&entry.fts_csv), &s.fts)?;
        write_matrix_csv(&dir.join(&entry.fv_csv), &Matrix::row_vector(&s.fv))?;
        entries.push(entry);
    }

    let manifest = Manifest {
        n_rois: ds.n_rois,
        fts_dim: ds.fts_dim,
        latent_dim: ds.latent_dim,
        roi_names: ds.roi_names.clone(),
        partition: Some(ds.partition.clone()),
        subjects: entries,
        planted_edges: ds.planted_edges.clone(),
    };
    let path = dir.join(MANIFEST_FILE);
    let tmp = dir.join(".manifest.json.tmp");
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    {
        let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
        f.write_all(json.as_bytes()).map_err(io_err(&tmp))?;
        f.write_all(b"\n").map_err(io_err(&tmp))?;
    }
    fs::rename(&tmp, &path).map_err(io_err(&path))?;
    Ok(path)
}

fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}
