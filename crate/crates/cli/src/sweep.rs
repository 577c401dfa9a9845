use serde::Serialize;
use serde_json::{Map, Number, Value};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use uniconn::analysis::{summarize_cv, CvSummary};
use uniconn::data::load_dataset;
use uniconn::trainer::{cross_validate, CvConfig, TrainConfig};

use crate::error::{CliError, CliResult};
use crate::pipeline::load_train_config;
use crate::provenance::RunRecord;
use crate::runs::{create_dir, write_json_file, RUN_RECORD};

/// One swept configuration field and its values.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamAxis {
    pub name: String,
    pub values: Vec<Value>,
}

fn number(text: &str) -> Option<Value> {
    if let Ok(i) = text.parse::<u64>() {
        return Some(Value::Number(i.into()));
    }
    text.parse::<f64>()
        .ok()
        .and_then(Number::from_f64)
        .map(Value::Number)
}

fn bad(spec: &str, why: &str) -> CliError {
    CliError::usage(format!("--param {spec}: {why}"))
}

fn int_range(spec: &str, from: u64, to: u64, step: u64) -> CliResult<Vec<Value>> {
    if step == 0 {
        return Err(bad(spec, "step must be positive"));
    }
    let out: Vec<Value> = if from <= to {
        (from..=to)
            .step_by(step as usize)
            .map(|v| Value::Number(v.into()))
            .collect()
    } else {
        (to..=from)
            .rev()
            .step_by(step as usize)
            .map(|v| Value::Number(v.into()))
            .collect()
    };
    Ok(out)
}

fn decade_exponent(text: &str) -> Option<i32> {
    let v: f64 = text.parse().ok()?;
    if v <= 0.0 {
        return None;
    }
    let e = v.log10().round();
    ((v.log10() - e).abs() < 1e-9).then_some(e as i32)
}

/// Parses `name=values`. Values are a comma list (`0,2,4`), a list with an
/// ellipsis (`0,2,...,20`), an integer range with optional step (`0..20:2`)
/// or a range of powers of ten (`1e-2..1e-6`).
pub fn parse_param(spec: &str) -> CliResult<ParamAxis> {
    let (name, rest) = spec
        .split_once('=')
        .ok_or_else(|| bad(spec, "expected name=values"))?;
    let name = name.trim();
    if name.is_empty() {
        return Err(bad(spec, "empty parameter name"));
    }
    let rest = rest.trim();
    let values = if let Some((a, b)) = rest.split_once("..").filter(|_| !rest.contains(',')) {
        let (b, step) = match b.split_once(':') {
            Some((b, s)) => (b, Some(s)),
            None => (b, None),
        };
        match (a.parse::<u64>(), b.parse::<u64>()) {
            (Ok(from), Ok(to)) => {
                let step = match step {
                    Some(s) => s
                        .parse::<u64>()
                        .map_err(|_| bad(spec, "step must be an integer"))?,
                    None => 1,
                };
                int_range(spec, from, to, step)?
            }
            _ => {
                if step.is_some() {
                    return Err(bad(spec, "decade ranges take no step"));
                }
                let (ea, eb) = decade_exponent(a)
                    .zip(decade_exponent(b))
                    .ok_or_else(|| bad(spec, "range ends must be integers or powers of ten"))?;
                let exps: Vec<i32> = if ea <= eb {
                    (ea..=eb).collect()
                } else {
                    (eb..=ea).rev().collect()
                };
                exps.into_iter()
                    .map(|e| number(&format!("1e{e}")).expect("power of ten parses"))
                    .collect()
            }
        }
    } else {
        let parts: Vec<&str> = rest.split(',').map(str::trim).collect();
        match parts.iter().position(|p| *p == "...") {
            Some(pos) => {
                if pos != parts.len() - 2 || pos < 2 {
                    return Err(bad(
                        spec,
                        "an ellipsis needs two leading values and one final value",
                    ));
                }
                let ints: Option<Vec<u64>> = [parts[pos - 2], parts[pos - 1], parts[pos + 1]]
                    .iter()
                    .map(|p| p.parse().ok())
                    .collect();
                let [a, b, last] = ints
                    .and_then(|v| <[u64; 3]>::try_from(v).ok())
                    .ok_or_else(|| bad(spec, "an ellipsis needs integer values"))?;
                if b <= a || last < b {
                    return Err(bad(spec, "an ellipsis needs an increasing sequence"));
                }
                let mut vals: Vec<Value> = parts[..pos - 2]
                    .iter()
                    .map(|p| number(p).ok_or_else(|| bad(spec, &format!("{p:?} is not a number"))))
                    .collect::<CliResult<_>>()?;
                vals.extend(int_range(spec, a, last, b - a)?);
                vals
            }
            None => parts
                .iter()
                .map(|p| match number(p) {
                    Some(v) => Ok(v),
                    None if p.is_empty() => Err(bad(spec, "empty value")),
                    None => Ok(Value::String((*p).to_string())),
                })
                .collect::<CliResult<_>>()?,
        }
    };
    if values.is_empty() {
        return Err(bad(spec, "no values"));
    }
    Ok(ParamAxis {
        name: name.to_string(),
        values,
    })
}

/// Every combination of the axes, first axis slowest.
pub fn grid(axes: &[ParamAxis]) -> Vec<Vec<Value>> {
    axes.iter().fold(vec![Vec::new()], |acc, axis| {
        acc.iter()
            .flat_map(|prefix| {
                axis.values.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push(v.clone());
                    p
                })
            })
            .collect()
    })
}

fn apply(base: &TrainConfig, axes: &[ParamAxis], point: &[Value]) -> CliResult<TrainConfig> {
    let mut obj: Map<String, Value> = match serde_json::to_value(base).expect("config serializes") {
        Value::Object(m) => m,
        _ => unreachable!("config is an object"),
    };
    for (axis, v) in axes.iter().zip(point) {
        if !obj.contains_key(&axis.name) {
            return Err(CliError::config(format!(
                "unknown training parameter {:?}",
                axis.name
            )));
        }
        obj.insert(axis.name.clone(), v.clone());
    }
    let cfg: TrainConfig = serde_json::from_value(Value::Object(obj))
        .map_err(|e| CliError::config(format!("sweep point {}: {e}", describe(axes, point))))?;
    cfg.validate()
        .map_err(|e| CliError::config(format!("sweep point {}: {e}", describe(axes, point))))?;
    Ok(cfg)
}

fn describe(axes: &[ParamAxis], point: &[Value]) -> String {
    axes.iter()
        .zip(point)
        .map(|(a, v)| format!("{}={v}", a.name))
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Serialize)]
struct SweepPoint {
    params: Map<String, Value>,
    summary: CvSummary,
}

pub fn sweep(
    data: &Path,
    config: Option<&Path>,
    specs: &[String],
    folds: usize,
    jobs: usize,
    out: &Path,
    record: RunRecord,
) -> CliResult<()> {
    let axes = specs
        .iter()
        .map(|s| parse_param(s))
        .collect::<CliResult<Vec<_>>>()?;
    let base = load_train_config(config, None)?;
    let points = grid(&axes);
    let cfgs = points
        .iter()
        .map(|p| apply(&base, &axes, p))
        .collect::<CliResult<Vec<_>>>()?;
    if folds < 2 {
        return Err(CliError::config("sweeps need --folds of at least 2"));
    }
    let mut record = record.with_config(&base, base.seed).input_dataset(data)?;
    if let Some(p) = config {
        record = record.input(p)?;
    }
    let ds = load_dataset(data)?;
    if let Some(cfg) = cfgs.iter().find(|c| c.k >= ds.n_rois) {
        return Err(CliError::config(format!(
            "k = {} must be below the {} ROIs",
            cfg.k, ds.n_rois
        )));
    }

    let cv = CvConfig { folds, jobs: 1 };
    let slots: Vec<Mutex<Option<CliResult<CvSummary>>>> =
        cfgs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..jobs.clamp(1, cfgs.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= cfgs.len() {
                    break;
                }
                let r = cross_validate(&ds, &cfgs[i], &cv)
                    .map_err(CliError::from)
                    .and_then(|res| summarize_cv(&res).map_err(CliError::from));
                *slots[i].lock().expect("sweep slot") = Some(r);
            });
        }
    });
    let summaries = slots
        .into_iter()
        .map(|s| {
            s.into_inner()
                .expect("sweep slot")
                .expect("every point ran")
        })
        .collect::<CliResult<Vec<_>>>()?;

    let mut csv = axes
        .iter()
        .map(|a| a.name.as_str())
        .collect::<Vec<_>>()
        .join(",");
    csv.push_str(",mean_acc,mean_sen,mean_spe,mean_auc,pooled_auc\n");
    let mut rows = Vec::with_capacity(points.len());
    for (point, s) in points.iter().zip(summaries) {
        for v in point {
            csv.push_str(&v.to_string());
            csv.push(',');
        }
        csv.push_str(&format!(
            "{:?},{:?},{:?},{:?},{:?}\n",
            s.mean_acc, s.mean_sen, s.mean_spe, s.mean_auc, s.pooled.auc
        ));
        let params = axes
            .iter()
            .zip(point)
            .map(|(a, v)| (a.name.clone(), v.clone()))
            .collect();
        rows.push(SweepPoint { params, summary: s });
    }
    create_dir(out)?;
    let csv_path = out.join("sweep.csv");
    std::fs::write(&csv_path, csv).map_err(|e| CliError::io(&csv_path, e))?;
    write_json_file(&out.join("sweep.json"), &rows)?;
    record.write(&out.join(RUN_RECORD))
}
