//! Prior over latent node representations: DPP prototype selection on the
//! mean structural graph, PCA of the prototypes' functional features, and a
//! diagonal-bandwidth Gaussian KDE in the projected space.

mod dpp;
mod io;
mod pca;

pub use dpp::{dpp_select, greedy_map, subset_det};
pub use io::{load_prior, save_prior};
pub use pca::{fit_pca, Pca};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;
use thiserror::Error;

use crate::data::{DataError, Dataset};
use crate::tensor::Matrix;

/// Ridge added to the DPP kernel so every principal minor is positive.
pub const KERNEL_RIDGE: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum PriorError {
    #[error("invalid DPP kernel: {0}")]
    InvalidKernel(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("latent dim {q} exceeds the rank available from {rows} rows of dimension {d}")]
    Rank { q: usize, rows: usize, d: usize },
    #[error("training set is empty")]
    EmptyTrain,
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PriorModel {
    /// Selected prototype ROIs, ascending.
    pub prototypes: Vec<usize>,
    pub seed_rois: Vec<usize>,
    pub pca_mean: Vec<f64>,
    /// d x q, orthonormal columns.
    pub pca_basis: Matrix,
    /// One projected prototype row per (subject, prototype).
    pub kde_centers: Matrix,
    pub bandwidth: Vec<f64>,
}

impl PriorModel {
    pub fn latent_dim(&self) -> usize {
        self.bandwidth.len()
    }

    pub fn n_centers(&self) -> usize {
        self.kde_centers.rows()
    }

    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        let (d, q) = self.pca_basis.shape();
        (0..q)
            .map(|c| {
                (0..d)
                    .map(|r| (x[r] - self.pca_mean[r]) * self.pca_basis.get(r, c))
                    .sum()
            })
            .collect()
    }
}

/// Mean of (A + I) over subjects, projected onto the PSD cone by clamping
/// negative eigenvalues, plus a small ridge.
pub fn dpp_kernel(train: &Dataset) -> Result<Matrix, PriorError> {
    if train.subjects.is_empty() {
        return Err(PriorError::EmptyTrain);
    }
    let n = train.n_rois;
    let mut mean = Matrix::zeros(n, n);
    for s in &train.subjects {
        mean.add_assign(&s.sc);
    }
    let mean = mean
        .scale(1.0 / train.subjects.len() as f64)
        .add(&Matrix::identity(n));
    let eig = SymmetricEigen::new(DMatrix::from_row_slice(n, n, mean.as_slice()));
    let clamped = eig.eigenvalues.map(|l| l.max(0.0));
    let psd = &eig.eigenvectors * DMatrix::from_diagonal(&clamped) * eig.eigenvectors.transpose();
    Ok(Matrix::from_fn(n, n, |i, j| {
        let sym = 0.5 * (psd[(i, j)] + psd[(j, i)]);
        if i == j {
            sym + KERNEL_RIDGE
        } else {
            sym
        }
    }))
}

/// Scott's rule per dimension: b_j = sd_j * n^(-1/(q+4)), with sd_j taken
/// as 1 when it cannot be estimated (one center, or zero spread).
pub fn scott_bandwidth(centers: &Matrix) -> Vec<f64> {
    let (n, q) = centers.shape();
    let factor = (n as f64).powf(-1.0 / (q as f64 + 4.0));
    (0..q)
        .map(|j| {
            let col = centers.column(j);
            let sd = if n < 2 {
                1.0
            } else {
                let mean = col.iter().sum::<f64>() / n as f64;
                (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt()
            };
            if sd > 0.0 {
                sd * factor
            } else {
                factor
            }
        })
        .collect()
}

/// Fits the prior on a training split. Prototype rows of every training
/// subject are pooled for both the PCA and the KDE.
pub fn fit_prior(
    train: &Dataset,
    m: usize,
    q: usize,
    seed_rois: &[usize],
) -> Result<PriorModel, PriorError> {
    let kernel = dpp_kernel(train)?;
    let prototypes = dpp_select(&kernel, seed_rois, m)?;
    let d = train.fts_dim;
    let rows: Vec<&[f64]> = train
        .subjects
        .iter()
        .flat_map(|s| prototypes.iter().map(move |&p| s.fts.row(p)))
        .collect();
    let stacked = Matrix::from_fn(rows.len(), d, |i, j| rows[i][j]);
    let pca = fit_pca(&stacked, q)?;
    let centers = pca.transform(&stacked);
    Ok(PriorModel {
        prototypes,
        seed_rois: seed_rois.to_vec(),
        pca_mean: pca.mean,
        pca_basis: pca.basis,
        bandwidth: scott_bandwidth(&centers),
        kde_centers: centers,
    })
}

/// KDE value (1/n) sum_i prod_j phi((z_j - c_ij) / b_j) / b_j.
pub fn density(p: &PriorModel, z: &[f64]) -> f64 {
    let norm: f64 = p.bandwidth.iter().map(|b| b * (2.0 * PI).sqrt()).product();
    let total: f64 = (0..p.n_centers())
        .map(|i| {
            let c = p.kde_centers.row(i);
            let e: f64 = z
                .iter()
                .zip(c)
                .zip(&p.bandwidth)
                .map(|((zj, cj), bj)| ((zj - cj) / bj).powi(2))
                .sum();
            (-0.5 * e).exp()
        })
        .sum();
    total / (p.n_centers() as f64 * norm)
}

/// Draws `n_rows` latent rows: a uniformly chosen center plus N(0, b_j^2)
/// noise in each dimension.
pub fn sample_z<R: Rng>(p: &PriorModel, n_rows: usize, rng: &mut R) -> Matrix {
    let q = p.latent_dim();
    let mut out = Matrix::zeros(n_rows, q);
    for r in 0..n_rows {
        let c = rng.random_range(0..p.n_centers());
        for j in 0..q {
            let noise: f64 = rng.sample(StandardNormal);
            out.set(r, j, p.kde_centers.get(c, j) + p.bandwidth[j] * noise);
        }
    }
    out
}
