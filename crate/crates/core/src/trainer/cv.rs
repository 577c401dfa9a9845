use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use super::{infer, train_fold, PriorMode, TrainConfig, TrainError};
use crate::data::{kfold_split, Dataset, Fold};
use crate::losses::LossReport;
use crate::model::{GraphInput, Model};
use crate::prior::{fit_prior, PriorModel};

#[derive(Clone, Debug, PartialEq)]
pub struct CvConfig {
    pub folds: usize,
    /// Worker threads; folds beyond this count queue up.
    pub jobs: usize,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig { folds: 10, jobs: 1 }
    }
}

#[derive(Clone, Debug)]
pub struct FoldResult {
    pub fold: Fold,
    pub seed: u64,
    /// Retained (best) model.
    pub model: Model,
    pub best_epoch: Option<usize>,
    pub prior: Option<PriorModel>,
    pub epoch_losses: Vec<LossReport>,
    /// Positive-class probability per test subject, in `fold.test` order.
    pub test_probs: Vec<f64>,
    pub test_labels: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct CvResult {
    pub folds: Vec<FoldResult>,
}

impl CvResult {
    /// Test accuracy per fold at threshold 0.5.
    pub fn fold_accuracies(&self) -> Vec<f64> {
        self.folds
            .iter()
            .map(|f| {
                let hits = f
                    .test_probs
                    .iter()
                    .zip(&f.test_labels)
                    .filter(|(&p, &l)| (p >= 0.5) == (l == 1))
                    .count();
                hits as f64 / f.test_labels.len() as f64
            })
            .collect()
    }
}

/// Per-fold training seeds derived from the master seed.
pub fn fold_seeds(master: u64, n: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(master ^ 0x9e37_79b9_7f4a_7c15);
    (0..n).map(|_| rng.random()).collect()
}

/// Trains and evaluates one fold: fits the prior on the training subjects
/// only (unless `shared` is given), trains, and scores the held-out subjects
/// with the best checkpoint.
pub fn run_fold(
    ds: &Dataset,
    fold: &Fold,
    cfg: &TrainConfig,
    seed: u64,
    shared: Option<&PriorModel>,
) -> Result<FoldResult, TrainError> {
    let train = ds.subset(&fold.train);
    let prior = match (cfg.prior_mode, shared) {
        (PriorMode::Estimated, Some(p)) => Some(p.clone()),
        (PriorMode::Estimated, None) => Some(fit_prior(
            &train,
            cfg.prior_m,
            ds.latent_dim,
            &cfg.seed_rois,
        )?),
        _ => None,
    };
    let fold_cfg = TrainConfig {
        seed,
        ..cfg.clone()
    };
    let state = train_fold(&fold_cfg, &train, prior.as_ref(), |_, _| {})?;
    let model = state.best_model();
    let mut test_probs = Vec::with_capacity(fold.test.len());
    let mut test_labels = Vec::with_capacity(fold.test.len());
    for &i in &fold.test {
        let s = &ds.subjects[i];
        test_probs.push(infer(&model, cfg.k, &GraphInput::from_subject(s))?.prob);
        test_labels.push(s.label);
    }
    Ok(FoldResult {
        fold: fold.clone(),
        seed,
        model,
        best_epoch: state.best.as_ref().map(|b| b.epoch),
        prior,
        epoch_losses: state.epoch_losses,
        test_probs,
        test_labels,
    })
}

/// Stratified k-fold cross-validation. Folds run on up to `cv.jobs`
/// threads; results do not depend on the thread count.
pub fn cross_validate(
    ds: &Dataset,
    cfg: &TrainConfig,
    cv: &CvConfig,
) -> Result<CvResult, TrainError> {
    cross_validate_with(ds, cfg, cv, None)
}

/// [`cross_validate`] with one prior shared by every fold instead of a
/// per-fold fit.
pub fn cross_validate_with(
    ds: &Dataset,
    cfg: &TrainConfig,
    cv: &CvConfig,
    shared: Option<&PriorModel>,
) -> Result<CvResult, TrainError> {
    cfg.validate().map_err(TrainError::Config)?;
    let folds = kfold_split(ds, cv.folds, cfg.seed)?;
    let seeds = fold_seeds(cfg.seed, folds.len());
    let slots: Vec<Mutex<Option<Result<FoldResult, TrainError>>>> =
        folds.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = cv.jobs.clamp(1, folds.len());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= folds.len() {
                    break;
                }
                let r = run_fold(ds, &folds[i], cfg, seeds[i], shared);
                *slots[i].lock().expect("fold slot") = Some(r);
            });
        }
    });
    let folds = slots
        .into_iter()
        .map(|s| s.into_inner().expect("fold slot").expect("every fold ran"))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CvResult { folds })
}
