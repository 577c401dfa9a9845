use std::fs;
use std::path::Path;

use uniconn::analysis::summarize_scores;
use uniconn::data::{
    kfold_split, load_dataset, save_dataset, synthesize_cohort, Dataset, Fold, SynthConfig,
};
use uniconn::losses::LossReport;
use uniconn::prior::{fit_prior, load_prior, save_prior, PriorModel};
use uniconn::trainer::{
    cross_validate_with, save_checkpoint, train_fold, Checkpoint, CvConfig, FoldResult, PriorMode,
    TrainConfig,
};

use crate::error::{CliError, CliResult};
use crate::provenance::RunRecord;
use crate::runs::{
    create_dir, load_run, read_json_file, sidecar_record, write_json_file, FoldEntry, RunIndex,
    CONFIG_FILE, FOLDS_FILE, LOSS_LOG, RUN_RECORD,
};

pub fn synth(
    config: Option<&Path>,
    seed: Option<u64>,
    out: &Path,
    record: RunRecord,
) -> CliResult<()> {
    let mut cfg: SynthConfig = match config {
        Some(p) => read_json_file(p)?,
        None => SynthConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let ds = synthesize_cohort(&cfg)?;
    let mut record = record.with_config(&cfg, cfg.seed);
    if let Some(p) = config {
        record = record.input(p)?;
    }
    save_dataset(&ds, out)?;
    record.write(&out.join(RUN_RECORD))
}

pub fn estimate_prior(
    data: &Path,
    m: usize,
    seeds: &[usize],
    out: &Path,
    record: RunRecord,
) -> CliResult<()> {
    let record = record.input_dataset(data)?;
    let ds = load_dataset(data)?;
    let prior = fit_prior(&ds, m, ds.latent_dim, seeds)?;
    save_prior(&prior, out)?;
    record.write(&out.join(RUN_RECORD))
}

/// Training config from a JSON file (defaults for absent fields) with the
/// seed flag applied on top.
pub fn load_train_config(path: Option<&Path>, seed: Option<u64>) -> CliResult<TrainConfig> {
    let mut cfg: TrainConfig = match path {
        Some(p) => read_json_file(p)?,
        None => TrainConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate().map_err(CliError::config)?;
    Ok(cfg)
}

pub struct TrainRequest<'a> {
    pub data: &'a Path,
    pub prior: Option<&'a Path>,
    pub config: Option<&'a Path>,
    pub folds: usize,
    pub jobs: usize,
    pub seed: Option<u64>,
    pub out: &'a Path,
}

fn check_prior(prior: &PriorModel, ds: &Dataset) -> CliResult<()> {
    if prior.latent_dim() != ds.latent_dim || prior.pca_basis.rows() != ds.fts_dim {
        return Err(CliError::config(format!(
            "prior maps {} -> {} but the data has fts_dim {} and latent_dim {}",
            prior.pca_basis.rows(),
            prior.latent_dim(),
            ds.fts_dim,
            ds.latent_dim
        )));
    }
    Ok(())
}

/// Rejects configurations that cannot train on the given cohort, before any
/// computation starts.
fn check_trainable(cfg: &TrainConfig, ds: &Dataset, folds: &[Fold]) -> CliResult<()> {
    if cfg.k >= ds.n_rois {
        return Err(CliError::config(format!(
            "k = {} must be below the {} ROIs",
            cfg.k, ds.n_rois
        )));
    }
    if let Some(&r) = cfg.seed_rois.iter().find(|&&r| r >= ds.n_rois) {
        return Err(CliError::config(format!(
            "seed ROI {r} out of range for {} ROIs",
            ds.n_rois
        )));
    }
    let smallest = folds.iter().map(|f| f.train.len()).min().unwrap_or(0);
    if smallest < cfg.batch_size {
        return Err(CliError::config(format!(
            "smallest training fold has {smallest} subjects, fewer than batch_size {}",
            cfg.batch_size
        )));
    }
    Ok(())
}

fn train_all(
    ds: &Dataset,
    cfg: &TrainConfig,
    shared: Option<&PriorModel>,
) -> CliResult<FoldResult> {
    let fold = Fold {
        train: (0..ds.subjects.len()).collect(),
        test: Vec::new(),
    };
    let prior = match (cfg.prior_mode, shared) {
        (PriorMode::Estimated, Some(p)) => Some(p.clone()),
        (PriorMode::Estimated, None) => {
            Some(fit_prior(ds, cfg.prior_m, ds.latent_dim, &cfg.seed_rois)?)
        }
        _ => None,
    };
    let state = train_fold(cfg, ds, prior.as_ref(), |_, _| {})?;
    Ok(FoldResult {
        fold,
        seed: cfg.seed,
        model: state.best_model(),
        best_epoch: state.best.as_ref().map(|b| b.epoch),
        prior,
        epoch_losses: state.epoch_losses,
        test_probs: Vec::new(),
        test_labels: Vec::new(),
    })
}

#[derive(serde::Serialize)]
struct LossLine<'a> {
    fold: usize,
    epoch: usize,
    #[serde(flatten)]
    report: &'a LossReport,
}

pub fn train(req: &TrainRequest, record: RunRecord) -> CliResult<()> {
    let cfg = load_train_config(req.config, req.seed)?;
    if req.folds == 0 {
        return Err(CliError::config("--folds must be at least 1"));
    }
    let mut record = record.with_config(&cfg, cfg.seed).input_dataset(req.data)?;
    if let Some(p) = req.config {
        record = record.input(p)?;
    }
    let ds = load_dataset(req.data)?;
    let shared = match req.prior {
        Some(p) => {
            record = record.input(p)?;
            let prior = load_prior(p)?;
            check_prior(&prior, &ds)?;
            Some(prior)
        }
        None => None,
    };
    let folds = if req.folds == 1 {
        vec![Fold {
            train: (0..ds.subjects.len()).collect(),
            test: Vec::new(),
        }]
    } else {
        kfold_split(&ds, req.folds, cfg.seed)?
    };
    check_trainable(&cfg, &ds, &folds)?;

    let results = if req.folds == 1 {
        vec![train_all(&ds, &cfg, shared.as_ref())?]
    } else {
        let cv = CvConfig {
            folds: req.folds,
            jobs: req.jobs.max(1),
        };
        cross_validate_with(&ds, &cfg, &cv, shared.as_ref())?.folds
    };
    write_run(req.out, &ds, &cfg, &results, shared.is_some(), &record)
}

fn write_run(
    out: &Path,
    ds: &Dataset,
    cfg: &TrainConfig,
    results: &[FoldResult],
    shared: bool,
    record: &RunRecord,
) -> CliResult<()> {
    create_dir(out)?;
    let mut entries = Vec::with_capacity(results.len());
    let log_path = out.join(LOSS_LOG);
    let mut log = Vec::new();
    for (i, r) in results.iter().enumerate() {
        let dir = format!("fold_{i:02}");
        let checkpoint = format!("{dir}/checkpoint");
        save_checkpoint(
            &out.join(&checkpoint),
            &Checkpoint {
                model: r.model.clone(),
                train: TrainConfig {
                    seed: r.seed,
                    ..cfg.clone()
                },
                epoch: r.best_epoch,
            },
        )?;
        // a shared prior is already recorded as an input
        let prior = match (&r.prior, shared) {
            (Some(p), false) => {
                let rel = format!("{dir}/prior");
                save_prior(p, &out.join(&rel))?;
                Some(rel)
            }
            _ => None,
        };
        for (epoch, report) in r.epoch_losses.iter().enumerate() {
            let line = LossLine {
                fold: i,
                epoch,
                report,
            };
            log.extend(serde_json::to_vec(&line).expect("loss line serializes"));
            log.push(b'\n');
        }
        entries.push(FoldEntry {
            fold: i,
            seed: r.seed,
            train: r.fold.train.clone(),
            test: r.fold.test.clone(),
            best_epoch: r.best_epoch,
            checkpoint,
            prior,
        });
    }
    fs::write(&log_path, log).map_err(|e| CliError::io(&log_path, e))?;
    let index = RunIndex {
        subjects: ds.subjects.iter().map(|s| s.id.clone()).collect(),
        folds: entries,
    };
    write_json_file(&out.join(FOLDS_FILE), &index)?;
    write_json_file(&out.join(CONFIG_FILE), cfg)?;
    record.write(&out.join(RUN_RECORD))
}

/// Out-of-fold metrics of a run; a train-on-all run is scored in-sample.
pub fn evaluate(run_dir: &Path, data: &Path, out: &Path, record: RunRecord) -> CliResult<()> {
    let record = record.input(run_dir)?.input_dataset(data)?;
    let ds = load_dataset(data)?;
    let run = load_run(run_dir, &ds)?;
    let mut per_fold = Vec::with_capacity(run.models.len());
    for (model, idx) in run.pairs() {
        let subjects: Vec<_> = idx.iter().map(|&i| ds.subjects[i].clone()).collect();
        let labels: Vec<usize> = subjects.iter().map(|s| s.label).collect();
        per_fold.push((
            uniconn::analysis::scores(model, run.k(), &subjects)?,
            labels,
        ));
    }
    let views: Vec<(&[f64], &[usize])> = per_fold.iter().map(|(s, l)| (&s[..], &l[..])).collect();
    let summary = summarize_scores(&views)?;
    let record = record.with_config(&run.train, run.train.seed);
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_json_file(out, &summary)?;
    record.write(&sidecar_record(out))
}
