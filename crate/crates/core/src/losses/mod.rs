//! Adversarial, reconstruction, classification and sparsity losses.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor::{Graph, Matrix, TensorError, Var};

/// Predictions are clamped to [EPS, 1 - EPS] before taking logs.
pub const EPS: f64 = 1e-7;

/// Weight of the discriminator objective inside the adversarial loss.
pub const ADV_DISC_WEIGHT: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LossError {
    #[error("{what}: target {value} at ({row}, {col}) is outside [0, 1]")]
    Target {
        what: &'static str,
        row: usize,
        col: usize,
        value: f64,
    },
    #[error("label {0} is not a class index")]
    Label(usize),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Batch-mean discriminator scores of the five pairs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AdvScores {
    /// Real pair scored once as the latent-domain sample.
    pub d_z: f64,
    /// Real pair scored as the data-domain sample (counted twice).
    pub d_x: f64,
    /// (G2(Z), Z).
    pub d_gz: f64,
    /// (X, G1(X)).
    pub d_g1: f64,
    /// (X, S(V)).
    pub d_s: f64,
}

/// (L_D, L_G, L_Adv) from scalar scores.
pub fn adv_values(s: &AdvScores) -> (f64, f64, f64) {
    let l_d = -s.d_z - 2.0 * s.d_x + s.d_gz + s.d_g1 + s.d_s;
    let l_g = -(s.d_gz + s.d_g1 + s.d_s);
    (l_d, l_g, l_g + ADV_DISC_WEIGHT * l_d)
}

/// Tape version of [`adv_values`]: `scores` are 1 x 1 nodes in the order
/// d_z, d_x, d_gz, d_g1, d_s. Returns (L_D, L_G, L_Adv).
pub fn adv_losses(g: &mut Graph, scores: [Var; 5]) -> Result<(Var, Var, Var), LossError> {
    let [d_z, d_x, d_gz, d_g1, d_s] = scores;
    let fake = g.add(d_gz, d_g1)?;
    let fake = g.add(fake, d_s)?;
    let twice_x = g.scale(d_x, 2.0);
    let real = g.add(d_z, twice_x)?;
    let l_d = g.sub(fake, real)?;
    let l_g = g.scale(fake, -1.0);
    let weighted = g.scale(l_d, ADV_DISC_WEIGHT);
    let l_adv = g.add(l_g, weighted)?;
    Ok((l_d, l_g, l_adv))
}

fn check_targets(what: &'static str, t: &Matrix) -> Result<(), LossError> {
    for i in 0..t.rows() {
        for (j, &v) in t.row(i).iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(LossError::Target {
                    what,
                    row: i,
                    col: j,
                    value: v,
                });
            }
        }
    }
    Ok(())
}

/// Mean binary cross-entropy -mean(t log p + (1 - t) log(1 - p)).
pub fn bce_mean(
    g: &mut Graph,
    what: &'static str,
    target: &Matrix,
    pred: Var,
) -> Result<Var, LossError> {
    check_targets(what, target)?;
    let p = g.clamp(pred, EPS, 1.0 - EPS);
    let log_p = g.log(p)?;
    let neg = g.scale(p, -1.0);
    let one_minus = g.add_scalar(neg, 1.0);
    let log_q = g.log(one_minus)?;
    let t = g.constant(target.clone());
    let u = g.constant(target.map(|v| 1.0 - v));
    let a = g.mul(t, log_p)?;
    let b = g.mul(u, log_q)?;
    let ll = g.add(a, b)?;
    let mean = g.mean(ll);
    Ok(g.scale(mean, -1.0))
}

/// Reconstruction loss split into its FTS + SC part and its FV part.
pub struct RecLoss {
    pub rec1: Var,
    pub rec2: Var,
    pub total: Var,
}

pub fn rec_loss(
    g: &mut Graph,
    x: &Matrix,
    x_rec: Var,
    a: &Matrix,
    a_rec: Var,
    v: &Matrix,
    v_rec: Var,
) -> Result<RecLoss, LossError> {
    let lx = bce_mean(g, "fts", x, x_rec)?;
    let la = bce_mean(g, "sc", a, a_rec)?;
    let lv = bce_mean(g, "fv", v, v_rec)?;
    let rec1 = g.add(lx, la)?;
    let total = g.add(rec1, lv)?;
    Ok(RecLoss {
        rec1,
        rec2: lv,
        total,
    })
}

/// Softmax cross-entropy of 1 x C logits against `label`.
pub fn cross_entropy(g: &mut Graph, logits: Var, label: usize) -> Result<Var, LossError> {
    let (_, c) = g.shape(logits);
    if label >= c {
        return Err(LossError::Label(label));
    }
    let ls = g.log_softmax_rows(logits)?;
    let pick = g.constant(Matrix::from_fn(
        1,
        c,
        |_, j| if j == label { -1.0 } else { 0.0 },
    ));
    let picked = g.mul(ls, pick)?;
    Ok(g.sum(picked))
}

/// Sum of the three classifier cross-entropies.
pub fn cls_loss(
    g: &mut Graph,
    c1_z: Var,
    c1_v: Var,
    c2: Var,
    label: usize,
) -> Result<Var, LossError> {
    let a = cross_entropy(g, c1_z, label)?;
    let b = cross_entropy(g, c1_v, label)?;
    let c = cross_entropy(g, c2, label)?;
    let ab = g.add(a, b)?;
    Ok(g.add(ab, c)?)
}

/// L1 norm of M.
pub fn sparse_loss(g: &mut Graph, m: Var) -> Var {
    g.abs_sum(m)
}

/// Per-term losses of one step or epoch.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub d_loss: f64,
    pub g_loss: f64,
    pub adv: f64,
    pub rec1: f64,
    pub rec2: f64,
    pub cls1: f64,
    pub cls2: f64,
    pub cls3: f64,
    pub sparse: f64,
    pub total: f64,
}

impl LossReport {
    /// adv + rec1 + rec2 + cls1 + cls2 + cls3 + lambda * sparse.
    pub fn compute_total(&self, lambda: f64) -> f64 {
        self.adv + self.rec1 + self.rec2 + self.cls1 + self.cls2 + self.cls3 + lambda * self.sparse
    }

    pub fn with_total(mut self, lambda: f64) -> Self {
        self.total = self.compute_total(lambda);
        self
    }

    /// Field-wise mean of several reports.
    pub fn mean(reports: &[LossReport]) -> LossReport {
        let n = reports.len().max(1) as f64;
        let mut out = LossReport::default();
        for r in reports {
            out.d_loss += r.d_loss / n;
            out.g_loss += r.g_loss / n;
            out.adv += r.adv / n;
            out.rec1 += r.rec1 / n;
            out.rec2 += r.rec2 / n;
            out.cls1 += r.cls1 / n;
            out.cls2 += r.cls2 / n;
            out.cls3 += r.cls3 / n;
            out.sparse += r.sparse / n;
            out.total += r.total / n;
        }
        out
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests;
