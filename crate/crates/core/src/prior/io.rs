use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

use super::{PriorError, PriorModel};
use crate::data::{
    io_err, read_json, read_matrix_csv, write_json_atomic, write_matrix_csv, DataError,
};
use crate::tensor::Matrix;

pub const PRIOR_FILE: &str = "prior.json";
const BASIS_FILE: &str = "pca_basis.csv";
const CENTERS_FILE: &str = "kde_centers.csv";
const MEAN_FILE: &str = "pca_mean.csv";
const BANDWIDTH_FILE: &str = "bandwidth.csv";

#[derive(Serialize, Deserialize)]
struct PriorIndex {
    prototypes: Vec<usize>,
    seed_rois: Vec<usize>,
    fts_dim: usize,
    latent_dim: usize,
    n_centers: usize,
    pca_basis: String,
    kde_centers: String,
    pca_mean: String,
    bandwidth: String,
}

/// Writes `prior.json` plus one CSV per array into `dir`. Values round-trip
/// bit for bit.
pub fn save_prior(p: &PriorModel, dir: &Path) -> Result<(), PriorError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_matrix_csv(&dir.join(BASIS_FILE), &p.pca_basis)?;
    write_matrix_csv(&dir.join(CENTERS_FILE), &p.kde_centers)?;
    write_matrix_csv(&dir.join(MEAN_FILE), &Matrix::row_vector(&p.pca_mean))?;
    write_matrix_csv(&dir.join(BANDWIDTH_FILE), &Matrix::row_vector(&p.bandwidth))?;
    let index = PriorIndex {
        prototypes: p.prototypes.clone(),
        seed_rois: p.seed_rois.clone(),
        fts_dim: p.pca_basis.rows(),
        latent_dim: p.pca_basis.cols(),
        n_centers: p.kde_centers.rows(),
        pca_basis: BASIS_FILE.into(),
        kde_centers: CENTERS_FILE.into(),
        pca_mean: MEAN_FILE.into(),
        bandwidth: BANDWIDTH_FILE.into(),
    };
    write_json_atomic(&dir.join(PRIOR_FILE), &index)?;
    Ok(())
}

pub fn load_prior(dir: &Path) -> Result<PriorModel, PriorError> {
    let index: PriorIndex = read_json(&dir.join(PRIOR_FILE))?;
    let (d, q) = (index.fts_dim, index.latent_dim);
    let expect = |what: &str, m: Matrix, shape: (usize, usize)| -> Result<Matrix, PriorError> {
        if m.shape() != shape {
            return Err(DataError::ShapeMismatch {
                what: format!("prior {what}"),
                expected: shape,
                found: m.shape(),
            }
            .into());
        }
        Ok(m)
    };
    let basis = expect(
        "pca_basis",
        read_matrix_csv(&dir.join(&index.pca_basis))?,
        (d, q),
    )?;
    let centers = expect(
        "kde_centers",
        read_matrix_csv(&dir.join(&index.kde_centers))?,
        (index.n_centers, q),
    )?;
    let mean = expect(
        "pca_mean",
        read_matrix_csv(&dir.join(&index.pca_mean))?,
        (1, d),
    )?;
    let bandwidth = expect(
        "bandwidth",
        read_matrix_csv(&dir.join(&index.bandwidth))?,
        (1, q),
    )?;
    if bandwidth.as_slice().iter().any(|&b| b.is_nan() || b <= 0.0) {
        return Err(PriorError::InvalidArgument(
            "bandwidth entries must be positive".into(),
        ));
    }
    if index.n_centers == 0 {
        return Err(PriorError::InvalidArgument(
            "prior has no KDE centers".into(),
        ));
    }
    Ok(PriorModel {
        prototypes: index.prototypes,
        seed_rois: index.seed_rois,
        pca_mean: mean.into_vec(),
        pca_basis: basis,
        kde_centers: centers,
        bandwidth: bandwidth.into_vec(),
    })
}
