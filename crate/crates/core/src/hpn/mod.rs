//! Hypergraph perceptual network: KNN hypergraphs over the learned
//! representations, hyperedge aggregation, fusion into united connectivity
//! M = σ(F Fᵀ), and classifier C2 on the flattened M.

use thiserror::Error;

use crate::model::{reconstruct_adj, Bound, Networks};
use crate::tensor::{Graph, Matrix, TensorError, Var};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HpnError {
    #[error("k = {k} must be smaller than the {n} nodes")]
    KTooLarge { k: usize, n: usize },
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Incidence matrix with one hyperedge per node: column e is node e plus its
/// k nearest neighbours.
#[derive(Clone, Debug, PartialEq)]
pub struct Hypergraph {
    /// N x N, H[v][e] = 1 iff v belongs to hyperedge e.
    pub incidence: Matrix,
    /// Column sums of the incidence.
    pub edge_degree: Vec<f64>,
    /// Row sums of the incidence.
    pub vertex_degree: Vec<f64>,
}

impl Hypergraph {
    pub fn from_incidence(incidence: Matrix) -> Self {
        Hypergraph {
            edge_degree: incidence.col_sums().into_vec(),
            vertex_degree: incidence.row_sums(),
            incidence,
        }
    }

    /// Members of hyperedge `e`, ascending.
    pub fn members(&self, e: usize) -> Vec<usize> {
        (0..self.incidence.rows())
            .filter(|&v| self.incidence.get(v, e) != 0.0)
            .collect()
    }
}

/// KNN hypergraph by Euclidean distance between rows of `rep`. The center
/// never counts towards its own k; distance ties go to the lower index.
pub fn build_hypergraph(rep: &Matrix, k: usize) -> Result<Hypergraph, HpnError> {
    let n = rep.rows();
    if k >= n {
        return Err(HpnError::KTooLarge { k, n });
    }
    let dist2 = |a: usize, b: usize| -> f64 {
        rep.row(a)
            .iter()
            .zip(rep.row(b))
            .map(|(x, y)| (x - y) * (x - y))
            .sum()
    };
    let mut h = Matrix::zeros(n, n);
    for e in 0..n {
        h.set(e, e, 1.0);
        let mut others: Vec<(f64, usize)> = (0..n)
            .filter(|&v| v != e)
            .map(|v| (dist2(e, v), v))
            .collect();
        others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, v) in others.iter().take(k) {
            h.set(v, e, 1.0);
        }
    }
    Ok(Hypergraph::from_incidence(h))
}

/// D_e^{-1/2} Hᵀ D_e^{-1/2}: entry (e, v) is H[v][e] / sqrt(d_e d_v), using
/// edge degrees on both sides (there are as many hyperedges as nodes).
pub fn aggregation_operator(hg: &Hypergraph) -> Matrix {
    let n = hg.incidence.rows();
    let inv: Vec<f64> = hg.edge_degree.iter().map(|d| 1.0 / d.sqrt()).collect();
    Matrix::from_fn(n, n, |e, v| inv[e] * hg.incidence.get(v, e) * inv[v])
}

/// Hyperedge features from node features; gradients flow into `rep` only.
pub fn hyperedge_aggregate(g: &mut Graph, hg: &Hypergraph, rep: Var) -> Result<Var, HpnError> {
    let op = g.constant(aggregation_operator(hg));
    Ok(g.matmul(op, rep)?)
}

/// D_v^{-1/2} H D_v^{-1/2} for the averaged incidence H = (H1 + H2) / 2.
pub fn fusion_operator(hz: &Hypergraph, hv: &Hypergraph) -> Matrix {
    let h = hz.incidence.add(&hv.incidence).scale(0.5);
    let inv: Vec<f64> = h.row_sums().iter().map(|d| 1.0 / d.sqrt()).collect();
    let n = h.rows();
    Matrix::from_fn(n, n, |i, j| inv[i] * h.get(i, j) * inv[j])
}

/// F = D_v^{-1/2} H D_v^{-1/2} ((zE ‖ vE) W).
pub fn fuse(
    g: &mut Graph,
    hz: &Hypergraph,
    hv: &Hypergraph,
    z_e: Var,
    v_e: Var,
    w: Var,
) -> Result<Var, HpnError> {
    let cat = g.concat_cols(z_e, v_e)?;
    let mixed = g.matmul(cat, w)?;
    let op = g.constant(fusion_operator(hz, hv));
    Ok(g.matmul(op, mixed)?)
}

/// M = σ(F Fᵀ): symmetric with entries in (0, 1).
pub fn united_connectivity(g: &mut Graph, f: Var) -> Result<Var, HpnError> {
    Ok(reconstruct_adj(g, f)?)
}

/// C2 logits (1 x 2) on M flattened row-major.
pub fn classify_c2(g: &mut Graph, p: &Bound, nets: &Networks, m: Var) -> Result<Var, HpnError> {
    let (r, c) = g.shape(m);
    let flat = g.reshape(m, 1, r * c)?;
    Ok(nets.c2.forward(g, p, flat)?)
}

#[derive(Clone, Debug)]
pub struct HpnOutput {
    pub hz: Hypergraph,
    pub hv: Hypergraph,
    pub f: Var,
    pub m: Var,
    pub logits: Var,
}

/// Full HPN pass. Hypergraphs are built from the current values of `zhat`
/// and `vhat` and enter the tape as constants.
pub fn hpn_forward(
    g: &mut Graph,
    p: &Bound,
    nets: &Networks,
    zhat: Var,
    vhat: Var,
    k: usize,
) -> Result<HpnOutput, HpnError> {
    let hz = build_hypergraph(g.value(zhat), k)?;
    let hv = build_hypergraph(g.value(vhat), k)?;
    let z_e = hyperedge_aggregate(g, &hz, zhat)?;
    let v_e = hyperedge_aggregate(g, &hv, vhat)?;
    let f = fuse(g, &hz, &hv, z_e, v_e, p.var(nets.fusion_w))?;
    let m = united_connectivity(g, f)?;
    let logits = classify_c2(g, p, nets, m)?;
    Ok(HpnOutput {
        hz,
        hv,
        f,
        m,
        logits,
    })
}

#[cfg(test)]
mod tests;
