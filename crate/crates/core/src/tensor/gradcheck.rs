//! Central finite-difference gradient checking.
//!
//! The numeric side only evaluates forward values, so it is independent of
//! the VJP rules it verifies.

use super::{Graph, Matrix, TensorError, Var};

#[derive(Clone, Debug)]
pub struct GradCheckConfig {
    /// Central-difference step.
    pub step: f64,
    /// Entries with both gradients below this magnitude are compared
    /// absolutely against it instead of relatively.
    pub floor: f64,
    /// Maximum number of entries probed per input matrix (`None` = all).
    pub max_entries: Option<usize>,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            step: 1e-5,
            floor: 1e-6,
            max_entries: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// `(input index, flat entry, analytic, numeric)` of the worst entry.
    pub worst: Option<(usize, usize, f64, f64)>,
    pub entries_checked: usize,
}

/// Relative error `|a - n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Builds `f` on fresh graphs with `inputs` as trainable leaves and compares
/// the backward gradients with central differences.
pub fn check_gradients<F>(
    inputs: &[Matrix],
    f: F,
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport, TensorError>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var, TensorError>,
{
    let eval = |values: &[Matrix]| -> Result<f64, TensorError> {
        let mut g = Graph::new();
        let vars: Vec<Var> = values.iter().map(|m| g.param(m.clone())).collect();
        let out = f(&mut g, &vars)?;
        Ok(g.value(out).item())
    };

    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|m| g.param(m.clone())).collect();
    let out = f(&mut g, &vars)?;
    g.backward(out)?;
    let analytic: Vec<Matrix> = vars.iter().map(|&v| g.grad(v).cloned().unwrap()).collect();

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        entries_checked: 0,
    };
    let mut work = inputs.to_vec();
    for (k, input) in inputs.iter().enumerate() {
        let n = input.len();
        let picks: Vec<usize> = match cfg.max_entries {
            Some(limit) if limit < n => {
                // Evenly spread, deterministic, always including both ends.
                (0..limit)
                    .map(|t| t * (n - 1) / (limit - 1).max(1))
                    .collect()
            }
            _ => (0..n).collect(),
        };
        for idx in picks {
            let orig = input.as_slice()[idx];
            work[k].as_mut_slice()[idx] = orig + cfg.step;
            let plus = eval(&work)?;
            work[k].as_mut_slice()[idx] = orig - cfg.step;
            let minus = eval(&work)?;
            work[k].as_mut_slice()[idx] = orig;
            let numeric = (plus - minus) / (2.0 * cfg.step);
            let a = analytic[k].as_slice()[idx];
            let err = relative_error(a, numeric, cfg.floor);
            report.entries_checked += 1;
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(err);
                if err >= report.max_rel_error {
                    report.worst = Some((k, idx, a, numeric));
                }
            }
        }
    }
    Ok(report)
}
