use serde::{Deserialize, Serialize};

use super::{roc_auc, AnalysisError};
use crate::data::Subject;
use crate::model::{GraphInput, Model};
use crate::trainer::{infer, CvResult};

/// Threshold on the positive-class probability.
pub const DECISION_THRESHOLD: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub acc: f64,
    pub sen: f64,
    pub spe: f64,
    pub auc: f64,
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

/// Metrics from positive-class scores; a score at or above 0.5 predicts
/// class 1.
pub fn metrics_from_scores(scores: &[f64], labels: &[usize]) -> Result<Metrics, AnalysisError> {
    let auc = roc_auc(scores, labels)?;
    let (mut tp, mut tn, mut fp, mut fn_) = (0, 0, 0, 0);
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= DECISION_THRESHOLD, l == 1) {
            (true, true) => tp += 1,
            (false, false) => tn += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
        }
    }
    let ratio = |a: usize, b: usize| a as f64 / (a + b) as f64;
    Ok(Metrics {
        acc: ratio(tp + tn, fp + fn_),
        sen: ratio(tp, fn_),
        spe: ratio(tn, fp),
        auc,
        tp,
        tn,
        fp,
        fn_,
    })
}

/// C2 positive-class probability for each subject.
pub fn scores(model: &Model, k: usize, subjects: &[Subject]) -> Result<Vec<f64>, AnalysisError> {
    subjects
        .iter()
        .map(|s| Ok(infer(model, k, &GraphInput::from_subject(s))?.prob))
        .collect()
}

pub fn evaluate(model: &Model, k: usize, subjects: &[Subject]) -> Result<Metrics, AnalysisError> {
    let labels: Vec<usize> = subjects.iter().map(|s| s.label).collect();
    metrics_from_scores(&scores(model, k, subjects)?, &labels)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    pub folds: Vec<Metrics>,
    pub mean_acc: f64,
    pub mean_sen: f64,
    pub mean_spe: f64,
    pub mean_auc: f64,
    /// Metrics over all out-of-fold scores at once.
    pub pooled: Metrics,
}

/// Per-fold test metrics and their means. Each fold needs both classes in
/// its test set (stratified splits guarantee this).
pub fn summarize_cv(cv: &CvResult) -> Result<CvSummary, AnalysisError> {
    let folds: Vec<(&[f64], &[usize])> = cv
        .folds
        .iter()
        .map(|f| (&f.test_probs[..], &f.test_labels[..]))
        .collect();
    summarize_scores(&folds)
}

/// [`summarize_cv`] from raw (scores, labels) pairs, one per fold.
pub fn summarize_scores(folds: &[(&[f64], &[usize])]) -> Result<CvSummary, AnalysisError> {
    let metrics = folds
        .iter()
        .map(|(s, l)| metrics_from_scores(s, l))
        .collect::<Result<Vec<_>, _>>()?;
    let n = metrics.len() as f64;
    let mean = |f: fn(&Metrics) -> f64| metrics.iter().map(f).sum::<f64>() / n;
    let all_scores: Vec<f64> = folds.iter().flat_map(|(s, _)| s.iter().copied()).collect();
    let all_labels: Vec<usize> = folds.iter().flat_map(|(_, l)| l.iter().copied()).collect();
    Ok(CvSummary {
        mean_acc: mean(|m| m.acc),
        mean_sen: mean(|m| m.sen),
        mean_spe: mean(|m| m.spe),
        mean_auc: mean(|m| m.auc),
        pooled: metrics_from_scores(&all_scores, &all_labels)?,
        folds: metrics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_separation() {
        let m = metrics_from_scores(&[0.9, 0.8, 0.2, 0.1], &[1, 1, 0, 0]).unwrap();
        assert_eq!((m.acc, m.sen, m.spe, m.auc), (1.0, 1.0, 1.0, 1.0));
        assert_eq!((m.tp, m.tn, m.fp, m.fn_), (2, 2, 0, 0));
    }

    #[test]
    fn constant_scores_are_a_random_classifier() {
        let m = metrics_from_scores(&[0.5; 6], &[1, 0, 1, 0, 1, 0]).unwrap();
        assert_eq!(m.auc, 0.5);
        assert_eq!((m.tp, m.fp), (3, 3));
        assert_eq!(m.sen, 1.0);
        assert_eq!(m.spe, 0.0);
    }

    #[test]
    fn confusion_identities() {
        let scores = [0.7, 0.4, 0.55, 0.3, 0.9, 0.45, 0.6];
        let labels = [1, 1, 0, 0, 1, 0, 0];
        let m = metrics_from_scores(&scores, &labels).unwrap();
        assert_eq!((m.tp, m.tn, m.fp, m.fn_), (2, 2, 2, 1));
        assert_eq!(m.acc, 4.0 / 7.0);
        assert_eq!(m.sen, 2.0 / 3.0);
        assert_eq!(m.spe, 0.5);
        let json = serde_json::to_string(&m).unwrap();
        assert!(json.contains("\"fn\":1"));
    }

    #[test]
    fn single_class_is_an_error() {
        assert!(matches!(
            metrics_from_scores(&[0.2, 0.9], &[1, 1]),
            Err(AnalysisError::SingleClass)
        ));
    }
}
