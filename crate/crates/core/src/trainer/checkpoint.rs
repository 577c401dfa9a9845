use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

use super::{TrainConfig, TrainError};
use crate::data::{
    io_err, read_json, read_matrix_csv, write_json_atomic, write_matrix_csv, DataError,
};
use crate::model::{Model, ModelConfig, ParamGroup};

pub const CHECKPOINT_FILE: &str = "checkpoint.json";

#[derive(Serialize, Deserialize)]
struct ParamEntry {
    name: String,
    group: ParamGroup,
    rows: usize,
    cols: usize,
    file: String,
}

#[derive(Serialize, Deserialize)]
struct CheckpointIndex {
    model: ModelConfig,
    train: TrainConfig,
    /// Epoch the weights were taken from.
    epoch: Option<usize>,
    params: Vec<ParamEntry>,
}

/// A trained model together with the configuration it was trained under.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    pub train: TrainConfig,
    pub epoch: Option<usize>,
}

/// Writes `checkpoint.json` plus one CSV per parameter under `dir/params`.
pub fn save_checkpoint(dir: &Path, ckpt: &Checkpoint) -> Result<(), TrainError> {
    let pdir = dir.join("params");
    fs::create_dir_all(&pdir).map_err(io_err(&pdir))?;
    let mut entries = Vec::new();
    for (id, p) in ckpt.model.params.iter() {
        let file = format!("params/{:03}_{}.csv", id.index(), p.name);
        write_matrix_csv(&dir.join(&file), &p.value)?;
        entries.push(ParamEntry {
            name: p.name.clone(),
            group: p.group,
            rows: p.value.rows(),
            cols: p.value.cols(),
            file,
        });
    }
    let index = CheckpointIndex {
        model: ckpt.model.cfg.clone(),
        train: ckpt.train.clone(),
        epoch: ckpt.epoch,
        params: entries,
    };
    write_json_atomic(&dir.join(CHECKPOINT_FILE), &index)?;
    Ok(())
}

/// Rebuilds the architecture from the stored config and loads every weight.
pub fn load_checkpoint(dir: &Path) -> Result<Checkpoint, TrainError> {
    let index: CheckpointIndex = read_json(&dir.join(CHECKPOINT_FILE))?;
    let mut model = Model::new(index.model, 0);
    let ids: Vec<_> = model.params.ids().collect();
    if ids.len() != index.params.len() {
        return Err(TrainError::Config(format!(
            "checkpoint lists {} parameters, architecture has {}",
            index.params.len(),
            ids.len()
        )));
    }
    for (id, entry) in ids.into_iter().zip(&index.params) {
        let expected = model.params.param(id);
        if expected.name != entry.name || expected.group != entry.group {
            return Err(TrainError::Config(format!(
                "checkpoint parameter {} does not match architecture parameter {}",
                entry.name, expected.name
            )));
        }
        let value = read_matrix_csv(&dir.join(&entry.file))?;
        let shape = expected.value.shape();
        if value.shape() != shape || shape != (entry.rows, entry.cols) {
            return Err(DataError::ShapeMismatch {
                what: format!("parameter {}", entry.name),
                expected: shape,
                found: value.shape(),
            }
            .into());
        }
        *model.params.get_mut(id) = value;
    }
    Ok(Checkpoint {
        model,
        train: index.train,
        epoch: index.epoch,
    })
}
