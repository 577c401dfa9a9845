use nalgebra::{DMatrix, SymmetricEigen};

use super::PriorError;
use crate::tensor::Matrix;

#[derive(Clone, Debug, PartialEq)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// d x q; columns are unit eigenvectors of the sample covariance in
    /// decreasing eigenvalue order, each signed so its largest-magnitude
    /// entry is positive.
    pub basis: Matrix,
    pub explained_variance: Vec<f64>,
}

impl Pca {
    pub fn transform(&self, x: &Matrix) -> Matrix {
        let centered = Matrix::from_fn(x.rows(), x.cols(), |i, j| x.get(i, j) - self.mean[j]);
        centered.matmul(&self.basis)
    }

    pub fn inverse_transform(&self, z: &Matrix) -> Matrix {
        let back = z.matmul_t(&self.basis);
        Matrix::from_fn(back.rows(), back.cols(), |i, j| {
            back.get(i, j) + self.mean[j]
        })
    }
}

/// Top-`q` principal components of the rows of `x`. More than n - 1
/// components are only available when there is a single row, in which case
/// the basis is the leading coordinate axes.
pub fn fit_pca(x: &Matrix, q: usize) -> Result<Pca, PriorError> {
    let (n, d) = x.shape();
    if n == 0 {
        return Err(PriorError::EmptyTrain);
    }
    if q == 0 || q > d || (n > 1 && q > n - 1) {
        return Err(PriorError::Rank { q, rows: n, d });
    }
    let mean: Vec<f64> = (0..d)
        .map(|j| x.column(j).iter().sum::<f64>() / n as f64)
        .collect();
    let centered = Matrix::from_fn(n, d, |i, j| x.get(i, j) - mean[j]);
    let denom = (n as f64 - 1.0).max(1.0);
    let cov = centered.t_matmul(&centered).scale(1.0 / denom);
    let eig = SymmetricEigen::new(DMatrix::from_row_slice(d, d, cov.as_slice()));

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let mut basis = Matrix::zeros(d, q);
    let mut explained = Vec::with_capacity(q);
    for (c, &k) in order.iter().take(q).enumerate() {
        let v = eig.eigenvectors.column(k);
        let lead = (0..d).fold(
            0,
            |best, r| if v[r].abs() > v[best].abs() { r } else { best },
        );
        let sign = if v[lead] < 0.0 { -1.0 } else { 1.0 };
        for r in 0..d {
            basis.set(r, c, sign * v[r]);
        }
        explained.push(eig.eigenvalues[k].max(0.0));
    }
    Ok(Pca {
        mean,
        basis,
        explained_variance: explained,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn affine_rank_q_data_reconstructs_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (n, d, q) = (30, 7, 3);
        let span = Matrix::from_fn(q, d, |_, _| rng.random::<f64>() - 0.5);
        let offset: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
        let coords = Matrix::from_fn(n, q, |_, _| rng.random::<f64>() * 4.0 - 2.0);
        let x = coords.matmul(&span);
        let x = Matrix::from_fn(n, d, |i, j| x.get(i, j) + offset[j]);
        let pca = fit_pca(&x, q).unwrap();
        let back = pca.inverse_transform(&pca.transform(&x));
        assert!(back.max_abs_diff(&x) < 1e-8);
        assert!(
            pca.basis
                .t_matmul(&pca.basis)
                .max_abs_diff(&Matrix::identity(q))
                < 1e-8
        );
    }

    #[test]
    fn components_follow_variance_order() {
        // Axis-aligned data with spreads 3, 1 and 2 along the three axes.
        let x = Matrix::from_vec(
            4,
            3,
            vec![
                3.0, 1.0, 2.0, -3.0, 1.0, -2.0, 3.0, -1.0, -2.0, -3.0, -1.0, 2.0,
            ],
        );
        let pca = fit_pca(&x, 2).unwrap();
        assert!((pca.basis.get(0, 0) - 1.0).abs() < 1e-12);
        assert!((pca.basis.get(2, 1) - 1.0).abs() < 1e-12);
        assert!(pca.explained_variance[0] > pca.explained_variance[1]);
    }
}
