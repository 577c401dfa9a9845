//! Classification metrics, ROI importance, per-edge group statistics and
//! altered-connection summaries.

mod edges;
mod importance;
mod metrics;
mod stats;

pub use edges::{
    altered_connections, edge_recovery_auroc, edge_ttest, edges_below, export_edges,
    normalize_strengths, read_edges, EdgeRow, EdgeStats, NetworkStrength, Normalization, ALPHA,
    ALPHA_STRICT, EDGE_HEADER,
};
pub use importance::{
    roi_importance, roi_importance_all, roi_importance_retrain, roi_importance_with, shield,
    top_rois,
};
pub use metrics::{
    evaluate, metrics_from_scores, scores, summarize_cv, summarize_scores, CvSummary, Metrics,
    DECISION_THRESHOLD,
};
pub use stats::{roc_auc, student_t_two_sided, welch_t_test, WelchResult};

use thiserror::Error;

use crate::trainer::TrainError;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("AUC is undefined when only one class is present")]
    SingleClass,
    #[error("non-finite input: {0}")]
    NonFinite(String),
    #[error("ROI {roi} is out of range for {n} ROIs")]
    InvalidRoi { roi: usize, n: usize },
    #[error("{0}")]
    Group(String),
    #[error("io error: {0}")]
    Io(String),
    #[error(transparent)]
    Train(#[from] TrainError),
}
