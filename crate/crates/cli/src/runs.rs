use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

use uniconn::data::Dataset;
use uniconn::model::{GraphInput, Model};
use uniconn::tensor::Matrix;
use uniconn::trainer::{infer, load_checkpoint, TrainConfig};

use crate::error::{CliError, CliResult};

pub const RUN_RECORD: &str = "run.json";
pub const CONFIG_FILE: &str = "config.json";
pub const FOLDS_FILE: &str = "folds.json";
pub const LOSS_LOG: &str = "loss_log.jsonl";

/// One trained fold inside a run directory.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FoldEntry {
    pub fold: usize,
    pub seed: u64,
    pub train: Vec<usize>,
    /// Held-out subject indices; empty when the run trained on everything.
    pub test: Vec<usize>,
    pub best_epoch: Option<usize>,
    /// Checkpoint directory relative to the run directory.
    pub checkpoint: String,
    /// Prior directory relative to the run directory, when one was used.
    pub prior: Option<String>,
}

impl FoldEntry {
    /// Subjects this fold's model should be scored on.
    pub fn held_out(&self) -> &[usize] {
        if self.test.is_empty() {
            &self.train
        } else {
            &self.test
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunIndex {
    /// Subject ids in dataset order, to catch a mismatched --data.
    pub subjects: Vec<String>,
    pub folds: Vec<FoldEntry>,
}

pub struct LoadedRun {
    pub index: RunIndex,
    pub models: Vec<Model>,
    pub train: TrainConfig,
}

impl LoadedRun {
    pub fn k(&self) -> usize {
        self.train.k
    }

    pub fn pairs(&self) -> Vec<(&Model, &[usize])> {
        self.models
            .iter()
            .zip(&self.index.folds)
            .map(|(m, f)| (m, f.held_out()))
            .collect()
    }
}

/// Reads a JSON file: a missing file is exit 3, malformed content exit 4.
pub fn read_json_file<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| {
        let mut err = CliError::config(format!("{}: {e}", path.display()));
        err.path = Some(path.to_path_buf());
        err
    })
}

pub fn write_json_file<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).expect("value serializes") + "\n";
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

/// `<stem>.run.json` next to a file output.
pub fn sidecar_record(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map_or("out".into(), |s| s.to_string_lossy().into_owned());
    out.with_file_name(format!("{stem}.run.json"))
}

pub fn load_run(dir: &Path, ds: &Dataset) -> CliResult<LoadedRun> {
    let index: RunIndex = read_json_file(&dir.join(FOLDS_FILE))?;
    let ids: Vec<&str> = ds.subjects.iter().map(|s| s.id.as_str()).collect();
    if index.subjects != ids {
        return Err(CliError::config(format!(
            "run {} was trained on a different cohort than the given data",
            dir.display()
        )));
    }
    if index.folds.is_empty() {
        return Err(CliError::config(format!(
            "run {} has no folds",
            dir.display()
        )));
    }
    let mut models = Vec::with_capacity(index.folds.len());
    let mut train = None;
    for f in &index.folds {
        let ckpt = load_checkpoint(&dir.join(&f.checkpoint))?;
        train.get_or_insert(ckpt.train);
        models.push(ckpt.model);
    }
    Ok(LoadedRun {
        index,
        models,
        train: train.expect("at least one fold"),
    })
}

/// United connectivity of every subject, each taken from the model that
/// held it out (or the single model of a train-on-all run).
pub fn united_connectivity(run: &LoadedRun, ds: &Dataset) -> CliResult<Vec<Matrix>> {
    let mut out: Vec<Option<Matrix>> = vec![None; ds.subjects.len()];
    for (model, idx) in run.pairs() {
        for &i in idx {
            let inp = GraphInput::from_subject(&ds.subjects[i]);
            out[i] = Some(infer(model, run.k(), &inp)?.m);
        }
    }
    out.into_iter()
        .enumerate()
        .map(|(i, m)| {
            m.ok_or_else(|| {
                CliError::config(format!(
                    "subject {} is held out by no fold",
                    ds.subjects[i].id
                ))
            })
        })
        .collect()
}

/// File-system friendly subject id.
pub fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}
