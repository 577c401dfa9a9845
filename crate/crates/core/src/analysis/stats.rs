use statrs::function::beta::beta_reg;

use super::AnalysisError;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WelchResult {
    pub t: f64,
    pub df: f64,
    pub p_value: f64,
    /// Both samples had zero variance; `p_value` is forced to 1.
    pub degenerate: bool,
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Two-sided p-value of a Student-t statistic with `df` degrees of freedom.
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    if !t.is_finite() {
        return 0.0;
    }
    beta_reg(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0)
}

/// Welch's unequal-variance two-sample t-test; `t` is positive when `a`
/// has the larger mean. Samples need at least two values each.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> WelchResult {
    assert!(
        a.len() >= 2 && b.len() >= 2,
        "welch_t_test needs two values per group"
    );
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (sa, sb) = (va / na, vb / nb);
    let se2 = sa + sb;
    if se2 == 0.0 {
        return WelchResult {
            t: 0.0,
            df: na + nb - 2.0,
            p_value: 1.0,
            degenerate: true,
        };
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    WelchResult {
        t,
        df,
        p_value: student_t_two_sided(t, df),
        degenerate: false,
    }
}

/// Area under the ROC curve by trapezoidal integration over every distinct
/// score threshold. Tied scores form one diagonal ROC segment. The area is
/// accumulated in integer units of 1 / (2 * pos * neg), so only the final
/// division rounds.
pub fn roc_auc(scores: &[f64], labels: &[usize]) -> Result<f64, AnalysisError> {
    assert_eq!(scores.len(), labels.len());
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(AnalysisError::SingleClass);
    }
    if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(AnalysisError::NonFinite(format!("score {s}")));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]));

    let (mut tp, mut fp) = (0u64, 0u64);
    let (mut prev_tp, mut prev_fp) = (0u64, 0u64);
    let mut twice_area = 0u64;
    let mut k = 0;
    while k < order.len() {
        let threshold = scores[order[k]];
        while k < order.len() && scores[order[k]] == threshold {
            if labels[order[k]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        twice_area += (fp - prev_fp) * (tp + prev_tp);
        prev_tp = tp;
        prev_fp = fp;
    }
    Ok(twice_area as f64 / (2 * pos * neg) as f64)
}
