use super::AnalysisError;
use crate::data::{Dataset, Subject};
use crate::model::{GraphInput, Model};
use crate::trainer::{cross_validate, infer, CvConfig, CvResult, TrainConfig};

/// Copy of `s` with ROI `roi` cut out: row and column of A and row of X
/// set to zero.
pub fn shield(s: &Subject, roi: usize) -> Subject {
    let mut out = s.clone();
    let n = out.sc.rows();
    for j in 0..n {
        out.sc.set(roi, j, 0.0);
        out.sc.set(j, roi, 0.0);
    }
    out.fts.row_mut(roi).fill(0.0);
    out
}

fn check_roi(ds: &Dataset, roi: usize) -> Result<(), AnalysisError> {
    if roi >= ds.n_rois {
        return Err(AnalysisError::InvalidRoi { roi, n: ds.n_rois });
    }
    Ok(())
}

fn fold_accuracy(model: &Model, k: usize, subjects: &[Subject]) -> Result<f64, AnalysisError> {
    let mut probs = Vec::with_capacity(subjects.len());
    for s in subjects {
        probs.push(infer(model, k, &GraphInput::from_subject(s))?.prob);
    }
    let labels: Vec<usize> = subjects.iter().map(|s| s.label).collect();
    let hits = probs
        .iter()
        .zip(&labels)
        .filter(|(&p, &l)| (p >= 0.5) == (l == 1))
        .count();
    Ok(hits as f64 / labels.len() as f64)
}

/// 1 − mean test accuracy across folds when `roi` is shielded in every
/// held-out subject. The trained fold models are reused.
pub fn roi_importance(
    cv: &CvResult,
    ds: &Dataset,
    roi: usize,
    k: usize,
) -> Result<f64, AnalysisError> {
    let folds: Vec<(&Model, &[usize])> = cv
        .folds
        .iter()
        .map(|f| (&f.model, &f.fold.test[..]))
        .collect();
    roi_importance_with(&folds, ds, roi, k)
}

/// [`roi_importance`] over (model, held-out subject indices) pairs.
pub fn roi_importance_with(
    folds: &[(&Model, &[usize])],
    ds: &Dataset,
    roi: usize,
    k: usize,
) -> Result<f64, AnalysisError> {
    check_roi(ds, roi)?;
    let mut total = 0.0;
    for (model, test) in folds {
        let test: Vec<Subject> = test.iter().map(|&i| shield(&ds.subjects[i], roi)).collect();
        total += fold_accuracy(model, k, &test)?;
    }
    Ok(1.0 - total / folds.len() as f64)
}

/// Importance of every ROI, in index order.
pub fn roi_importance_all(
    cv: &CvResult,
    ds: &Dataset,
    k: usize,
) -> Result<Vec<f64>, AnalysisError> {
    (0..ds.n_rois)
        .map(|r| roi_importance(cv, ds, r, k))
        .collect()
}

/// Importance under full retraining: `roi` is shielded in every subject and
/// the whole cross-validation is rerun.
pub fn roi_importance_retrain(
    ds: &Dataset,
    roi: usize,
    cfg: &TrainConfig,
    cv: &CvConfig,
) -> Result<f64, AnalysisError> {
    check_roi(ds, roi)?;
    let mut masked = ds.clone();
    for s in &mut masked.subjects {
        *s = shield(s, roi);
    }
    let result = cross_validate(&masked, cfg, cv)?;
    let accs = result.fold_accuracies();
    Ok(1.0 - accs.iter().sum::<f64>() / accs.len() as f64)
}

/// Indices of the `n` largest scores, descending; ties go to the lower index.
pub fn top_rois(scores: &[f64], n: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx.truncate(n);
    idx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Matrix;

    #[test]
    fn shield_zeroes_row_and_column() {
        let s = Subject {
            id: "s".into(),
            sc: Matrix::from_fn(3, 3, |i, j| (i != j) as u8 as f64),
            fts: Matrix::filled(3, 2, 0.5),
            fv: vec![0.1, 0.2],
            label: 1,
        };
        let out = shield(&s, 1);
        assert_eq!(
            out.sc,
            Matrix::from_vec(3, 3, vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0])
        );
        assert_eq!(out.fts.row(1), &[0.0, 0.0]);
        assert_eq!(out.fts.row(0), &[0.5, 0.5]);
        assert_eq!(out.fv, s.fv);
    }

    #[test]
    fn top_rois_sorted_with_index_ties() {
        let scores = [0.1, 0.3, 0.3, 0.0, 0.5];
        assert_eq!(top_rois(&scores, 3), vec![4, 1, 2]);
        assert_eq!(top_rois(&scores, 10).len(), 5);
    }
}
