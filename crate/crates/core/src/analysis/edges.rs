use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{roc_auc, welch_t_test, AnalysisError};
use crate::data::PlantedEdge;
use crate::tensor::Matrix;

pub const ALPHA: f64 = 0.05;
pub const ALPHA_STRICT: f64 = 0.001;

/// Per-edge two-group statistics over united-connectivity matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeStats {
    /// Symmetric, unit diagonal.
    pub p_values: Matrix,
    /// Welch t, positive where group A has the larger mean.
    pub t_values: Matrix,
    /// Upper-triangle (i < j) edges with p < 0.05, in row-major order.
    pub significant_005: Vec<(usize, usize)>,
    pub significant_0001: Vec<(usize, usize)>,
    /// mean(A) − mean(B) on significant_005 edges, 0 elsewhere.
    pub altered: Matrix,
    /// Significant (p < 0.05) edges touching each ROI.
    pub roi_frequency: Vec<usize>,
    /// Edges where both groups had zero variance.
    pub degenerate: Vec<(usize, usize)>,
}

fn check_group(name: &str, g: &[Matrix], n: usize) -> Result<(), AnalysisError> {
    if g.len() < 2 {
        return Err(AnalysisError::Group(format!(
            "group {name} has {} subjects, needs at least 2",
            g.len()
        )));
    }
    for (s, m) in g.iter().enumerate() {
        if m.shape() != (n, n) {
            return Err(AnalysisError::Group(format!(
                "group {name} subject {s} has shape {:?}, expected ({n}, {n})",
                m.shape()
            )));
        }
        if !m.is_finite() {
            return Err(AnalysisError::NonFinite(format!(
                "group {name} subject {s}"
            )));
        }
    }
    Ok(())
}

fn mean_matrix(g: &[Matrix]) -> Matrix {
    let mut acc = Matrix::zeros(g[0].rows(), g[0].cols());
    for m in g {
        acc.add_assign(m);
    }
    acc.scale(1.0 / g.len() as f64)
}

/// Welch two-sample t-test on every upper-triangle edge. Group A is
/// conventionally the patient group.
pub fn edge_ttest(group_a: &[Matrix], group_b: &[Matrix]) -> Result<EdgeStats, AnalysisError> {
    let n = group_a.first().map_or(0, |m| m.rows());
    check_group("a", group_a, n)?;
    check_group("b", group_b, n)?;
    let mut p_values = Matrix::identity(n);
    let mut t_values = Matrix::zeros(n, n);
    let mut degenerate = Vec::new();
    let mut a = vec![0.0; group_a.len()];
    let mut b = vec![0.0; group_b.len()];
    for i in 0..n {
        for j in (i + 1)..n {
            for (dst, m) in a.iter_mut().zip(group_a) {
                *dst = m.get(i, j);
            }
            for (dst, m) in b.iter_mut().zip(group_b) {
                *dst = m.get(i, j);
            }
            let r = welch_t_test(&a, &b);
            if r.degenerate {
                degenerate.push((i, j));
            }
            for (x, y) in [(i, j), (j, i)] {
                p_values.set(x, y, r.p_value);
                t_values.set(x, y, r.t);
            }
        }
    }
    let delta = mean_matrix(group_a).sub(&mean_matrix(group_b));
    Ok(stats_from(p_values, t_values, &delta, degenerate))
}

fn stats_from(
    p_values: Matrix,
    t_values: Matrix,
    delta: &Matrix,
    degenerate: Vec<(usize, usize)>,
) -> EdgeStats {
    let n = p_values.rows();
    let below = |alpha: f64| -> Vec<(usize, usize)> {
        (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .filter(|&(i, j)| p_values.get(i, j) < alpha)
            .collect()
    };
    let significant_005 = below(ALPHA);
    let significant_0001 = below(ALPHA_STRICT);
    let mut altered = Matrix::zeros(n, n);
    let mut roi_frequency = vec![0; n];
    for &(i, j) in &significant_005 {
        let d = 0.5 * (delta.get(i, j) + delta.get(j, i));
        altered.set(i, j, d);
        altered.set(j, i, d);
        roi_frequency[i] += 1;
        roi_frequency[j] += 1;
    }
    EdgeStats {
        p_values,
        t_values,
        significant_005,
        significant_0001,
        altered,
        roi_frequency,
        degenerate,
    }
}

/// Altered-connection strength split by direction and by whether the edge
/// stays inside one region.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NetworkStrength {
    pub intra_increased: f64,
    pub intra_decreased: f64,
    pub inter_increased: f64,
    pub inter_decreased: f64,
}

impl NetworkStrength {
    pub fn cells(&self) -> [f64; 4] {
        [
            self.intra_increased,
            self.intra_decreased,
            self.inter_increased,
            self.inter_decreased,
        ]
    }

    fn scaled(&self, s: f64) -> Self {
        NetworkStrength {
            intra_increased: self.intra_increased * s,
            intra_decreased: self.intra_decreased * s,
            inter_increased: self.inter_increased * s,
            inter_decreased: self.inter_decreased * s,
        }
    }

    /// Sums of positive and (absolute) negative entries of the upper
    /// triangle of `altered`.
    pub fn raw(altered: &Matrix, partition: &[usize]) -> Self {
        let n = altered.rows();
        let mut s = NetworkStrength::default();
        for i in 0..n {
            for j in (i + 1)..n {
                let d = altered.get(i, j);
                let intra = partition[i] == partition[j];
                match (intra, d > 0.0) {
                    (true, true) => s.intra_increased += d,
                    (true, false) => s.intra_decreased -= d,
                    (false, true) => s.inter_increased += d,
                    (false, false) => s.inter_decreased -= d,
                }
            }
        }
        s
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    /// One scale for every stage: the largest cell across all of them.
    #[default]
    Global,
    /// Each stage scaled by its own largest cell.
    PerStage,
}

/// Scales strengths so the largest cell is 1 (all-zero input stays zero).
pub fn normalize_strengths(
    stages: &[NetworkStrength],
    mode: Normalization,
) -> Vec<NetworkStrength> {
    let scale = |m: f64| if m > 0.0 { 1.0 / m } else { 0.0 };
    let max_of = |s: &NetworkStrength| s.cells().into_iter().fold(0.0f64, f64::max);
    match mode {
        Normalization::Global => {
            let m = stages.iter().map(max_of).fold(0.0, f64::max);
            stages.iter().map(|s| s.scaled(scale(m))).collect()
        }
        Normalization::PerStage => stages.iter().map(|s| s.scaled(scale(max_of(s)))).collect(),
    }
}

/// mean(patients) − mean(controls) masked to the p < 0.05 edges of
/// `stats`, and its normalized strength summary.
pub fn altered_connections(
    patients: &[Matrix],
    controls: &[Matrix],
    stats: &EdgeStats,
    partition: &[usize],
) -> Result<(Matrix, NetworkStrength), AnalysisError> {
    let n = stats.p_values.rows();
    if partition.len() != n {
        return Err(AnalysisError::Group(format!(
            "partition covers {} ROIs, expected {n}",
            partition.len()
        )));
    }
    check_group("patients", patients, n)?;
    check_group("controls", controls, n)?;
    let delta = mean_matrix(patients).sub(&mean_matrix(controls));
    let mut altered = Matrix::zeros(n, n);
    for &(i, j) in &stats.significant_005 {
        let d = 0.5 * (delta.get(i, j) + delta.get(j, i));
        altered.set(i, j, d);
        altered.set(j, i, d);
    }
    let strength = normalize_strengths(
        &[NetworkStrength::raw(&altered, partition)],
        Normalization::Global,
    )[0];
    Ok((altered, strength))
}

/// One exported edge.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeRow {
    pub roi_i: usize,
    pub roi_j: usize,
    pub p: f64,
    pub delta: f64,
}

/// Upper-triangle edges with p < `threshold`, by ascending p, then (i, j).
pub fn edges_below(stats: &EdgeStats, threshold: f64) -> Vec<EdgeRow> {
    let n = stats.p_values.rows();
    let mut rows: Vec<EdgeRow> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .filter(|&(i, j)| stats.p_values.get(i, j) < threshold)
        .map(|(i, j)| EdgeRow {
            roi_i: i,
            roi_j: j,
            p: stats.p_values.get(i, j),
            delta: stats.altered.get(i, j),
        })
        .collect();
    rows.sort_by(|a, b| {
        a.p.total_cmp(&b.p)
            .then((a.roi_i, a.roi_j).cmp(&(b.roi_i, b.roi_j)))
    });
    rows
}

pub const EDGE_HEADER: &str = "roi_i,roi_j,p,delta";

/// Writes the `edges_below(stats, threshold)` list as CSV.
pub fn export_edges(stats: &EdgeStats, threshold: f64, path: &Path) -> Result<(), AnalysisError> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(AnalysisError::Group(format!(
            "threshold {threshold} must lie in (0, 1)"
        )));
    }
    let mut out = String::from(EDGE_HEADER);
    out.push('\n');
    for r in edges_below(stats, threshold) {
        writeln!(out, "{},{},{:?},{:?}", r.roi_i, r.roi_j, r.p, r.delta).expect("string write");
    }
    fs::write(path, out).map_err(|e| AnalysisError::Io(format!("{}: {e}", path.display())))
}

pub fn read_edges(path: &Path) -> Result<Vec<EdgeRow>, AnalysisError> {
    let text = fs::read_to_string(path)
        .map_err(|e| AnalysisError::Io(format!("{}: {e}", path.display())))?;
    let mut lines = text.lines();
    if lines.next() != Some(EDGE_HEADER) {
        return Err(AnalysisError::Io(format!(
            "{}: missing header {EDGE_HEADER:?}",
            path.display()
        )));
    }
    lines
        .enumerate()
        .map(|(k, line)| {
            let bad = || {
                AnalysisError::Io(format!(
                    "{}: malformed row {}: {line:?}",
                    path.display(),
                    k + 2
                ))
            };
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return Err(bad());
            }
            Ok(EdgeRow {
                roi_i: f[0].parse().map_err(|_| bad())?,
                roi_j: f[1].parse().map_err(|_| bad())?,
                p: f[2].parse().map_err(|_| bad())?,
                delta: f[3].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}

/// AUROC of ranking upper-triangle edges by ascending p against the planted
/// edge set. Lower p is a stronger positive call.
pub fn edge_recovery_auroc(
    stats: &EdgeStats,
    planted: &[PlantedEdge],
) -> Result<f64, AnalysisError> {
    let n = stats.p_values.rows();
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            scores.push(-stats.p_values.get(i, j));
            labels.push(usize::from(
                planted
                    .iter()
                    .any(|e| (e.i.min(e.j), e.i.max(e.j)) == (i, j)),
            ));
        }
    }
    roc_auc(&scores, &labels)
}
