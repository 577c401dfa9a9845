//! Seeded two-group cohorts with planted abnormal connections.
//!
//! Structural graphs come from a stochastic block model whose planted edges
//! have their connection probability shifted in the patient group. Functional
//! features follow a block factor model; patients additionally share a
//! random signal between the endpoints of every planted edge (same sign for
//! increased edges, opposite sign for decreased ones), which moves the
//! endpoints' functional correlation. Image features are class-conditional
//! Gaussians squashed into (0, 1).

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{min_max_normalize, DataError, Dataset, Direction, PlantedEdge, Subject};
use crate::tensor::Matrix;

pub const WITHIN_BLOCK_PROB: f64 = 0.6;
pub const BETWEEN_BLOCK_PROB: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_per_group: usize,
    pub seed: u64,
    pub n_altered: usize,
    /// Group separation; 0 yields two identically distributed groups.
    pub effect_size: f64,
    pub block_sizes: Vec<usize>,
    pub noise_level: f64,
    pub fts_dim: usize,
    pub latent_dim: usize,
    /// ROIs left isolated with all-zero features in every subject.
    pub null_rois: Vec<usize>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_per_group: 40,
            seed: 7,
            n_altered: 20,
            effect_size: 1.5,
            block_sizes: vec![4, 4, 4, 4],
            noise_level: 0.5,
            fts_dim: 24,
            latent_dim: 8,
            null_rois: Vec::new(),
        }
    }
}

impl SynthConfig {
    pub fn n_rois(&self) -> usize {
        self.block_sizes.iter().sum()
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |msg: String| Err(DataError::InvalidConfig(msg));
        let n = self.n_rois();
        if self.block_sizes.is_empty() || self.block_sizes.contains(&0) {
            return bad("block sizes must be non-empty and positive".into());
        }
        if n < 2 {
            return bad(format!("{n} rois; need at least 2"));
        }
        if self.n_per_group == 0 {
            return bad("n_per_group must be positive".into());
        }
        if !(self.effect_size >= 0.0 && self.effect_size.is_finite()) {
            return bad(format!(
                "effect_size {} must be finite and >= 0",
                self.effect_size
            ));
        }
        if !(self.noise_level >= 0.0 && self.noise_level.is_finite()) {
            return bad(format!(
                "noise_level {} must be finite and >= 0",
                self.noise_level
            ));
        }
        if self.fts_dim < 2 || self.latent_dim == 0 {
            return bad("fts_dim must be >= 2 and latent_dim >= 1".into());
        }
        let mut nulls = self.null_rois.clone();
        nulls.sort_unstable();
        nulls.dedup();
        if nulls.len() != self.null_rois.len() || nulls.iter().any(|&r| r >= n) {
            return bad("null_rois must be distinct valid indices".into());
        }
        let live = n - nulls.len();
        let pairs = live * live.saturating_sub(1) / 2;
        if self.n_altered > pairs {
            return bad(format!(
                "n_altered {} exceeds the {pairs} available pairs",
                self.n_altered
            ));
        }
        Ok(())
    }

    fn block_of(&self) -> Vec<usize> {
        self.block_sizes
            .iter()
            .enumerate()
            .flat_map(|(b, &size)| std::iter::repeat_n(b, size))
            .collect()
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn squash(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Generates a cohort: `n_per_group` controls (label 0) followed by the same
/// number of patients (label 1). A pure function of `cfg`.
pub fn synthesize_cohort(cfg: &SynthConfig) -> Result<Dataset, DataError> {
    cfg.validate()?;
    let n = cfg.n_rois();
    let d = cfg.fts_dim;
    let q = cfg.latent_dim;
    let blocks = cfg.block_of();
    let n_blocks = cfg.block_sizes.len();
    let is_null = |i: usize| cfg.null_rois.contains(&i);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let eligible: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .filter(|&(i, j)| !is_null(i) && !is_null(j))
        .collect();
    let chosen = sample(&mut rng, eligible.len(), cfg.n_altered);
    let n_increased = cfg.n_altered.div_ceil(2);
    let mut planted: Vec<PlantedEdge> = chosen
        .iter()
        .enumerate()
        .map(|(rank, idx)| {
            let (i, j) = eligible[idx];
            let direction = if rank < n_increased {
                Direction::Increased
            } else {
                Direction::Decreased
            };
            PlantedEdge { i, j, direction }
        })
        .collect();
    planted.sort_by_key(|e| (e.i, e.j));

    let base = Matrix::from_fn(n, n, |i, j| {
        if i == j || is_null(i) || is_null(j) {
            0.0
        } else if blocks[i] == blocks[j] {
            WITHIN_BLOCK_PROB
        } else {
            BETWEEN_BLOCK_PROB
        }
    });
    let mut patient = base.clone();
    let shift = 0.5 * cfg.effect_size;
    for e in &planted {
        let p = base.get(e.i, e.j);
        let shifted = match e.direction {
            Direction::Increased => (p + shift).min(1.0),
            Direction::Decreased => (p - shift).max(0.0),
        };
        patient.set(e.i, e.j, shifted);
        patient.set(e.j, e.i, shifted);
    }

    let mut subjects = Vec::with_capacity(2 * cfg.n_per_group);
    for s in 0..2 * cfg.n_per_group {
        let label = usize::from(s >= cfg.n_per_group);
        let probs = if label == 1 { &patient } else { &base };

        let mut sc = Matrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                let edge = rng.random::<f64>() < probs.get(i, j);
                if edge {
                    sc.set(i, j, 1.0);
                    sc.set(j, i, 1.0);
                }
            }
        }

        let factors = Matrix::from_fn(n_blocks, d, |_, _| normal(&mut rng));
        let mut fts = Matrix::from_fn(n, d, |i, t| {
            factors.get(blocks[i], t) + cfg.noise_level * normal(&mut rng)
        });
        if label == 1 && cfg.effect_size > 0.0 {
            for e in &planted {
                let sign = match e.direction {
                    Direction::Increased => 1.0,
                    Direction::Decreased => -1.0,
                };
                for t in 0..d {
                    let signal = cfg.effect_size * normal(&mut rng);
                    let a = fts.get(e.i, t);
                    let b = fts.get(e.j, t);
                    fts.set(e.i, t, a + signal);
                    fts.set(e.j, t, b + sign * signal);
                }
            }
        }
        let mut fts = min_max_normalize(&fts);
        for &r in &cfg.null_rois {
            fts.row_mut(r).fill(0.0);
        }

        let mean = if label == 1 { 0.5 } else { -0.5 } * cfg.effect_size;
        let fv = (0..q).map(|_| squash(mean + normal(&mut rng))).collect();

        subjects.push(Subject {
            id: format!("sub-{s:03}"),
            sc,
            fts,
            fv,
            label,
        });
    }

    let ds = Dataset {
        subjects,
        n_rois: n,
        fts_dim: d,
        latent_dim: q,
        roi_names: (0..n).map(|i| format!("ROI{i:02}")).collect(),
        partition: blocks,
        planted_edges: Some(planted),
    };
    ds.validate()?;
    Ok(ds)
}

/// Copy of `ds` with the structural and image channels replaced by noise:
/// each SC becomes an Erdős–Rényi graph of the same edge count and each FV
/// is drawn from U(0, 1). FTS is kept.
pub fn ablate_sc_fv(ds: &Dataset, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = ds.n_rois;
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    let mut out = ds.clone();
    for s in &mut out.subjects {
        let edges = (s.sc.sum() / 2.0).round() as usize;
        let mut sc = Matrix::zeros(n, n);
        for idx in sample(&mut rng, pairs.len(), edges) {
            let (i, j) = pairs[idx];
            sc.set(i, j, 1.0);
            sc.set(j, i, 1.0);
        }
        s.sc = sc;
        s.fv = (0..ds.latent_dim).map(|_| rng.random::<f64>()).collect();
    }
    out
}

/// Pearson correlation between every pair of FTS rows (zero for constant rows).
pub fn functional_connectivity(fts: &Matrix) -> Matrix {
    let (n, d) = fts.shape();
    let centered: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let row = fts.row(i);
            let mean = row.iter().sum::<f64>() / d as f64;
            row.iter().map(|x| x - mean).collect()
        })
        .collect();
    let norms: Vec<f64> = centered
        .iter()
        .map(|r| r.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    Matrix::from_fn(n, n, |i, j| {
        if i == j {
            return 1.0;
        }
        let denom = norms[i] * norms[j];
        if denom == 0.0 {
            0.0
        } else {
            centered[i]
                .iter()
                .zip(&centered[j])
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / denom
        }
    })
}
