use serde::Serialize;
use std::path::Path;

use uniconn::analysis::{
    altered_connections, edge_recovery_auroc, edge_ttest, export_edges, normalize_strengths,
    roi_importance_retrain, roi_importance_with, top_rois, NetworkStrength, Normalization, ALPHA,
    ALPHA_STRICT,
};
use uniconn::data::{load_dataset, write_matrix_csv, Dataset};
use uniconn::tensor::Matrix;
use uniconn::trainer::CvConfig;

use crate::error::{CliError, CliResult};
use crate::provenance::RunRecord;
use crate::runs::{
    create_dir, file_stem, load_run, united_connectivity, write_json_file, LoadedRun, RUN_RECORD,
};

const TOP_N: usize = 10;

fn open(
    run_dir: &Path,
    data: &Path,
    record: RunRecord,
) -> CliResult<(Dataset, LoadedRun, RunRecord)> {
    let record = record.input(run_dir)?.input_dataset(data)?;
    let ds = load_dataset(data)?;
    let run = load_run(run_dir, &ds)?;
    let record = record.with_config(&run.train, run.train.seed);
    Ok((ds, run, record))
}

/// United connectivity split into (patients, controls).
fn groups(run: &LoadedRun, ds: &Dataset) -> CliResult<(Vec<Matrix>, Vec<Matrix>)> {
    let uc = united_connectivity(run, ds)?;
    let (mut patients, mut controls) = (Vec::new(), Vec::new());
    for (m, s) in uc.into_iter().zip(&ds.subjects) {
        if s.label == 1 {
            patients.push(m);
        } else {
            controls.push(m);
        }
    }
    if patients.len() < 2 || controls.len() < 2 {
        return Err(CliError::config(
            "group tests need at least two patients and two controls",
        ));
    }
    Ok((patients, controls))
}

#[derive(Serialize)]
struct RankedRoi {
    roi: usize,
    name: String,
    score: f64,
}

fn ranked(ds: &Dataset, scores: &[f64]) -> Vec<RankedRoi> {
    top_rois(scores, TOP_N)
        .into_iter()
        .map(|r| RankedRoi {
            roi: r,
            name: ds.roi_names[r].clone(),
            score: scores[r],
        })
        .collect()
}

#[derive(Serialize)]
struct TtestReport {
    n_patients: usize,
    n_controls: usize,
    significant_005: usize,
    significant_0001: usize,
    degenerate: Vec<(usize, usize)>,
    roi_frequency: Vec<usize>,
    top_rois: Vec<RankedRoi>,
    /// Recovery of the planted edges when the cohort is synthetic.
    planted_recovery_auroc: Option<f64>,
}

pub fn ttest(run_dir: &Path, data: &Path, out: &Path, record: RunRecord) -> CliResult<()> {
    let (ds, run, record) = open(run_dir, data, record)?;
    let (patients, controls) = groups(&run, &ds)?;
    let stats = edge_ttest(&patients, &controls)?;
    let planted = match &ds.planted_edges {
        Some(p) => Some(edge_recovery_auroc(&stats, p)?),
        None => None,
    };
    let freq: Vec<f64> = stats.roi_frequency.iter().map(|&c| c as f64).collect();
    let report = TtestReport {
        n_patients: patients.len(),
        n_controls: controls.len(),
        significant_005: stats.significant_005.len(),
        significant_0001: stats.significant_0001.len(),
        degenerate: stats.degenerate.clone(),
        roi_frequency: stats.roi_frequency.clone(),
        top_rois: ranked(&ds, &freq),
        planted_recovery_auroc: planted,
    };
    create_dir(out)?;
    write_matrix_csv(&out.join("p_values.csv"), &stats.p_values)?;
    write_matrix_csv(&out.join("t_values.csv"), &stats.t_values)?;
    export_edges(&stats, ALPHA, &out.join("edges_p005.csv"))?;
    export_edges(&stats, ALPHA_STRICT, &out.join("edges_p0001.csv"))?;
    write_json_file(&out.join("ttest.json"), &report)?;
    record.write(&out.join(RUN_RECORD))
}

#[derive(Serialize)]
struct AlteredReport {
    normalization: Normalization,
    raw: NetworkStrength,
    normalized: NetworkStrength,
}

pub fn parse_normalization(s: &str) -> CliResult<Normalization> {
    match s {
        "global" => Ok(Normalization::Global),
        "per-stage" | "perstage" => Ok(Normalization::PerStage),
        other => Err(CliError::usage(format!(
            "--normalization {other:?}: expected global or per-stage"
        ))),
    }
}

pub fn altered(
    run_dir: &Path,
    data: &Path,
    out: &Path,
    normalization: &str,
    record: RunRecord,
) -> CliResult<()> {
    let mode = parse_normalization(normalization)?;
    let (ds, run, record) = open(run_dir, data, record)?;
    let (patients, controls) = groups(&run, &ds)?;
    let stats = edge_ttest(&patients, &controls)?;
    let (altered, _) = altered_connections(&patients, &controls, &stats, &ds.partition)?;
    let raw = NetworkStrength::raw(&altered, &ds.partition);
    let report = AlteredReport {
        normalization: mode,
        raw,
        normalized: normalize_strengths(&[raw], mode)[0],
    };
    create_dir(out)?;
    write_matrix_csv(&out.join("altered.csv"), &altered)?;
    write_json_file(&out.join("strength.json"), &report)?;
    record.write(&out.join(RUN_RECORD))
}

#[derive(Serialize)]
struct ImportanceReport {
    protocol: &'static str,
    importance: Vec<f64>,
    top_rois: Vec<RankedRoi>,
}

pub fn importance(
    run_dir: &Path,
    data: &Path,
    out: &Path,
    retrain: bool,
    jobs: usize,
    record: RunRecord,
) -> CliResult<()> {
    let (ds, run, record) = open(run_dir, data, record)?;
    let scores = if retrain {
        if run.index.folds.len() < 2 {
            return Err(CliError::config("--retrain needs a cross-validated run"));
        }
        let cv = CvConfig {
            folds: run.index.folds.len(),
            jobs: jobs.max(1),
        };
        (0..ds.n_rois)
            .map(|r| roi_importance_retrain(&ds, r, &run.train, &cv))
            .collect::<Result<Vec<_>, _>>()?
    } else {
        let pairs = run.pairs();
        (0..ds.n_rois)
            .map(|r| roi_importance_with(&pairs, &ds, r, run.k()))
            .collect::<Result<Vec<_>, _>>()?
    };
    let mut csv = String::from("roi,name,importance\n");
    for (r, s) in scores.iter().enumerate() {
        csv.push_str(&format!("{r},{},{s:?}\n", ds.roi_names[r]));
    }
    let report = ImportanceReport {
        protocol: if retrain { "retrain" } else { "shield" },
        top_rois: ranked(&ds, &scores),
        importance: scores,
    };
    create_dir(out)?;
    let path = out.join("importance.csv");
    std::fs::write(&path, csv).map_err(|e| CliError::io(&path, e))?;
    write_json_file(&out.join("importance.json"), &report)?;
    record.write(&out.join(RUN_RECORD))
}

pub fn export_uc(run_dir: &Path, data: &Path, out: &Path, record: RunRecord) -> CliResult<()> {
    let (ds, run, record) = open(run_dir, data, record)?;
    let uc = united_connectivity(&run, &ds)?;
    create_dir(out)?;
    for (m, s) in uc.iter().zip(&ds.subjects) {
        write_matrix_csv(&out.join(format!("{}_uc.csv", file_stem(&s.id))), m)?;
    }
    record.write(&out.join(RUN_RECORD))
}
