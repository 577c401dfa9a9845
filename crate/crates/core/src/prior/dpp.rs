use super::PriorError;
use crate::tensor::Matrix;

const SYMMETRY_TOL: f64 = 1e-10;

/// Largest number of candidate subsets searched exhaustively before
/// falling back to greedy inference.
pub const EXACT_SEARCH_LIMIT: u128 = 200_000;

/// MAP inference for an L-ensemble DPP constrained to contain `seeds`:
/// returns the size-`m` superset of `seeds` with the largest kernel
/// subdeterminant. When at most [`EXACT_SEARCH_LIMIT`] completions exist
/// they are searched exhaustively (ties to the lexicographically smallest
/// set); otherwise [`greedy_map`] is used. The result is sorted ascending.
pub fn dpp_select(kernel: &Matrix, seeds: &[usize], m: usize) -> Result<Vec<usize>, PriorError> {
    validate(kernel, seeds, m)?;
    let free = kernel.rows() - seeds.len();
    if binomial(free, m - seeds.len()) <= EXACT_SEARCH_LIMIT {
        Ok(exact_map(kernel, seeds, m))
    } else {
        Ok(greedy_map(kernel, seeds, m))
    }
}

fn validate(kernel: &Matrix, seeds: &[usize], m: usize) -> Result<(), PriorError> {
    let n = kernel.rows();
    if kernel.cols() != n {
        return Err(PriorError::InvalidKernel(format!(
            "kernel is {}x{}, not square",
            n,
            kernel.cols()
        )));
    }
    if !kernel.is_symmetric(SYMMETRY_TOL) {
        return Err(PriorError::InvalidKernel("kernel is not symmetric".into()));
    }
    if m > n {
        return Err(PriorError::InvalidArgument(format!(
            "m = {m} exceeds kernel size {n}"
        )));
    }
    let mut distinct = seeds.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() != seeds.len() || distinct.iter().any(|&s| s >= n) {
        return Err(PriorError::InvalidArgument(format!(
            "seed indices {seeds:?} must be distinct and below {n}"
        )));
    }
    if m < seeds.len() {
        return Err(PriorError::InvalidArgument(format!(
            "m = {m} is smaller than the {} seeds",
            seeds.len()
        )));
    }
    Ok(())
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u128::from(u64::MAX) {
            return u128::MAX;
        }
    }
    acc
}

/// Log-determinant of the principal submatrix on `subset` by Cholesky;
/// `-inf` when the submatrix is not positive definite.
fn log_det(kernel: &Matrix, subset: &[usize]) -> f64 {
    let k = subset.len();
    let mut l = vec![0.0; k * k];
    let mut total = 0.0;
    for i in 0..k {
        for j in 0..=i {
            let mut s = kernel.get(subset[i], subset[j]);
            for p in 0..j {
                s -= l[i * k + p] * l[j * k + p];
            }
            if i == j {
                if s.is_nan() || s <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                l[i * k + i] = s.sqrt();
                total += s.ln();
            } else {
                l[i * k + j] = s / l[j * k + j];
            }
        }
    }
    total
}

fn exact_map(kernel: &Matrix, seeds: &[usize], m: usize) -> Vec<usize> {
    let n = kernel.rows();
    let pool: Vec<usize> = (0..n).filter(|i| !seeds.contains(i)).collect();
    let extra = m - seeds.len();
    let mut pick: Vec<usize> = (0..extra).collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    loop {
        let mut subset: Vec<usize> = seeds
            .iter()
            .copied()
            .chain(pick.iter().map(|&p| pool[p]))
            .collect();
        subset.sort_unstable();
        let ld = log_det(kernel, &subset);
        // Earlier (lexicographically smaller) subsets win unless clearly beaten.
        if best
            .as_ref()
            .is_none_or(|(b, _)| ld > b + 1e-12 * b.abs().max(1.0))
        {
            best = Some((ld, subset));
        }
        // Advance to the next combination of `extra` pool positions.
        let mut i = extra;
        loop {
            if i == 0 {
                let mut out = best.map(|(_, s)| s).unwrap_or_default();
                out.sort_unstable();
                return out;
            }
            i -= 1;
            if pick[i] < pool.len() - extra + i {
                pick[i] += 1;
                for j in (i + 1)..extra {
                    pick[j] = pick[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Greedy MAP: starting from `seeds`, repeatedly add the index with the
/// largest determinant gain (ties to the lowest index). Gains come from an
/// incremental Cholesky factorization. Inputs must already be validated.
pub fn greedy_map(kernel: &Matrix, seeds: &[usize], m: usize) -> Vec<usize> {
    let n = kernel.rows();
    // chol[i] holds row i of the partial Cholesky factor restricted to the
    // chosen columns; gain[i] is the Schur complement K_ii - |chol[i]|^2,
    // the factor by which det grows when i is added.
    let mut chol: Vec<Vec<f64>> = vec![Vec::with_capacity(m); n];
    let mut gain: Vec<f64> = (0..n).map(|i| kernel.get(i, i)).collect();
    let mut chosen = vec![false; n];
    for &s in seeds {
        absorb(kernel, s, &mut chol, &mut gain, &mut chosen);
    }
    for _ in seeds.len()..m {
        let mut best: Option<usize> = None;
        for i in (0..n).filter(|&i| !chosen[i]) {
            if best.is_none_or(|b| gain[i] > gain[b]) {
                best = Some(i);
            }
        }
        let j = best.expect("m <= n leaves a candidate");
        absorb(kernel, j, &mut chol, &mut gain, &mut chosen);
    }
    (0..n).filter(|&i| chosen[i]).collect()
}

fn absorb(kernel: &Matrix, j: usize, chol: &mut [Vec<f64>], gain: &mut [f64], chosen: &mut [bool]) {
    chosen[j] = true;
    let dj = gain[j].max(0.0).sqrt();
    let cj = chol[j].clone();
    for i in 0..kernel.rows() {
        if chosen[i] {
            continue;
        }
        let dot: f64 = chol[i].iter().zip(&cj).map(|(a, b)| a * b).sum();
        let e = if dj > 0.0 {
            (kernel.get(j, i) - dot) / dj
        } else {
            0.0
        };
        chol[i].push(e);
        gain[i] -= e * e;
    }
}

/// Determinant of the principal submatrix indexed by `subset`, by Gaussian
/// elimination with partial pivoting. The empty subset has determinant 1.
pub fn subset_det(kernel: &Matrix, subset: &[usize]) -> f64 {
    let k = subset.len();
    let mut a: Vec<f64> = subset
        .iter()
        .flat_map(|&i| subset.iter().map(move |&j| kernel.get(i, j)))
        .collect();
    let mut det = 1.0;
    for c in 0..k {
        let p = (c..k)
            .max_by(|&x, &y| a[x * k + c].abs().total_cmp(&a[y * k + c].abs()))
            .unwrap();
        if a[p * k + c] == 0.0 {
            return 0.0;
        }
        if p != c {
            for j in 0..k {
                a.swap(c * k + j, p * k + j);
            }
            det = -det;
        }
        let pivot = a[c * k + c];
        det *= pivot;
        for r in (c + 1)..k {
            let f = a[r * k + c] / pivot;
            for j in c..k {
                a[r * k + j] -= f * a[c * k + j];
            }
        }
    }
    det
}
