//! On-disk formats: model and report JSON, trajectory CSV.
//!
//! Floats are written in shortest round-trip form, so `load(save(x)) == x`
//! holds bit for bit.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::events::csv_error;
use crate::metrics::FitReport;
use crate::model::{AffineParams, CognitiveState, HybridModel, Thresholds, Trajectory};

pub const FORMAT_VERSION: u32 = 1;

const TRAJECTORY_MAGIC: &str = "# hybrid-id trajectory";
const TRAJECTORY_HEADER: &str = "k,d,q,T,R,W";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub seed: Option<u64>,
    pub version: u32,
}

impl Default for ModelMeta {
    fn default() -> Self {
        Self {
            seed: None,
            version: FORMAT_VERSION,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    trust: AffineParams,
    risk: AffineParams,
    workload: AffineParams,
    thresholds: Thresholds,
    meta: ModelMeta,
}

#[derive(Serialize, Deserialize)]
struct ReportFile {
    #[serde(flatten)]
    report: FitReport,
    version: u32,
}

fn json_error(e: serde_json::Error, what: &str) -> Error {
    Error::Parse {
        line: e.line(),
        field: what.to_string(),
        msg: e.to_string(),
    }
}

fn check_version(found: u32) -> Result<()> {
    if found == FORMAT_VERSION {
        Ok(())
    } else {
        Err(Error::Version {
            found,
            expected: FORMAT_VERSION,
        })
    }
}

pub fn model_to_json(model: &HybridModel, meta: &ModelMeta) -> String {
    let file = ModelFile {
        trust: model.trust,
        risk: model.risk,
        workload: model.workload,
        thresholds: model.thresholds,
        meta: *meta,
    };
    let mut s = serde_json::to_string_pretty(&file).expect("model serializes");
    s.push('\n');
    s
}

pub fn model_from_json(text: &str) -> Result<(HybridModel, ModelMeta)> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| json_error(e, "model"))?;
    check_version(file.meta.version)?;
    let model = HybridModel::new(file.trust, file.risk, file.workload, file.thresholds);
    model.check_finite()?;
    Ok((model, file.meta))
}

pub fn report_to_json(report: &FitReport) -> String {
    let file = ReportFile {
        report: report.clone(),
        version: FORMAT_VERSION,
    };
    let mut s = serde_json::to_string_pretty(&file).expect("report serializes");
    s.push('\n');
    s
}

pub fn report_from_json(text: &str) -> Result<FitReport> {
    let file: ReportFile = serde_json::from_str(text).map_err(|e| json_error(e, "report"))?;
    check_version(file.version)?;
    Ok(file.report)
}

/// `k,d,q,T,R,W` rows; the state columns are blank where there is no report.
pub fn trajectory_to_csv(traj: &Trajectory) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "{TRAJECTORY_MAGIC} v{FORMAT_VERSION} sample_time={}",
        traj.sample_time()
    )
    .unwrap();
    writeln!(out, "{TRAJECTORY_HEADER}").unwrap();
    for k in 0..traj.len() {
        write!(
            out,
            "{k},{},{}",
            traj.complexity()[k],
            u8::from(traj.reliance()[k])
        )
        .unwrap();
        match traj.self_reports().get(&k) {
            Some(s) => writeln!(out, ",{},{},{}", s.trust, s.risk, s.workload).unwrap(),
            None => out.push_str(",,,\n"),
        }
    }
    out
}

#[derive(Deserialize)]
struct TrajectoryRow {
    k: usize,
    d: f64,
    q: u8,
    #[serde(rename = "T")]
    trust: Option<f64>,
    #[serde(rename = "R")]
    risk: Option<f64>,
    #[serde(rename = "W")]
    workload: Option<f64>,
}

fn parse_preamble(line: &str) -> Result<f64> {
    let rest = line
        .strip_prefix(TRAJECTORY_MAGIC)
        .ok_or_else(|| Error::Parse {
            line: 1,
            field: "preamble".into(),
            msg: format!("expected `{TRAJECTORY_MAGIC} v<N> sample_time=<s>`"),
        })?;
    let mut sample_time = Trajectory::DEFAULT_SAMPLE_TIME;
    for token in rest.split_whitespace() {
        if let Some(v) = token.strip_prefix('v') {
            let found: u32 = v.parse().map_err(|_| Error::Parse {
                line: 1,
                field: "version".into(),
                msg: format!("bad version `{v}`"),
            })?;
            check_version(found)?;
        } else if let Some(v) = token.strip_prefix("sample_time=") {
            sample_time = v.parse().map_err(|_| Error::Parse {
                line: 1,
                field: "sample_time".into(),
                msg: format!("bad sample time `{v}`"),
            })?;
        }
    }
    Ok(sample_time)
}

/// Parses the trajectory CSV. The `#` preamble line is optional; without it
/// the sample time defaults to one second.
pub fn trajectory_from_csv(text: &str) -> Result<Trajectory> {
    let (sample_time, body, offset) = match text.lines().next() {
        Some(first) if first.starts_with('#') => {
            let st = parse_preamble(first.trim_end())?;
            let body = text.split_once('\n').map_or("", |(_, rest)| rest);
            (st, body, 1)
        }
        _ => (Trajectory::DEFAULT_SAMPLE_TIME, text, 0),
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(body.as_bytes());
    let headers = reader.headers().map_err(|e| csv_error(&e))?.clone();
    if headers.iter().collect::<Vec<_>>().join(",") != TRAJECTORY_HEADER {
        return Err(Error::Parse {
            line: 1 + offset,
            field: "header".into(),
            msg: format!("expected `{TRAJECTORY_HEADER}`"),
        });
    }

    let mut d = Vec::new();
    let mut q = Vec::new();
    let mut reports = BTreeMap::new();
    for row in reader.deserialize::<TrajectoryRow>() {
        let row = row.map_err(|e| match csv_error(&e) {
            Error::Parse { line, field, msg } => Error::Parse {
                line: line + offset,
                field,
                msg,
            },
            other => other,
        })?;
        let line = d.len() + 2 + offset;
        if row.k != d.len() {
            return Err(Error::Parse {
                line,
                field: "k".into(),
                msg: format!("expected k={}, found {}", d.len(), row.k),
            });
        }
        if row.q > 1 {
            return Err(Error::Parse {
                line,
                field: "q".into(),
                msg: format!("reliance must be 0 or 1, found {}", row.q),
            });
        }
        match (row.trust, row.risk, row.workload) {
            (Some(t), Some(r), Some(w)) => {
                let s = CognitiveState::new(t, r, w).map_err(|_| Error::Parse {
                    line,
                    field: "T,R,W".into(),
                    msg: "non-finite self-report".into(),
                })?;
                reports.insert(row.k, s);
            }
            (None, None, None) => {}
            _ => {
                return Err(Error::Parse {
                    line,
                    field: "T,R,W".into(),
                    msg: "self-report needs all three values".into(),
                })
            }
        }
        d.push(row.d);
        q.push(row.q == 1);
    }
    Trajectory::new(sample_time, d, q, reports)
}

/// Two-column `k,d` signal, or a full trajectory CSV (its `d` column is used).
pub fn signal_from_csv(text: &str) -> Result<Vec<f64>> {
    let body = if text.starts_with('#') {
        text.split_once('\n').map_or("", |(_, rest)| rest)
    } else {
        text
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(body.as_bytes());
    let headers = reader.headers().map_err(|e| csv_error(&e))?.clone();
    let d_col = headers.iter().position(|h| h == "d").ok_or(Error::Parse {
        line: 1,
        field: "header".into(),
        msg: "no `d` column".into(),
    })?;
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(&e))?;
        let cell = rec.get(d_col).unwrap_or("");
        let v: f64 = cell.parse().map_err(|_| Error::Parse {
            line: i + 2,
            field: "d".into(),
            msg: format!("bad value `{cell}`"),
        })?;
        if !v.is_finite() {
            return Err(Error::Parse {
                line: i + 2,
                field: "d".into(),
                msg: "non-finite input".into(),
            });
        }
        out.push(v);
    }
    if out.is_empty() {
        return Err(Error::Parse {
            line: 2,
            field: "d".into(),
            msg: "empty signal".into(),
        });
    }
    Ok(out)
}

pub fn save_model(path: &Path, model: &HybridModel, meta: &ModelMeta) -> Result<()> {
    std::fs::write(path, model_to_json(model, meta))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<(HybridModel, ModelMeta)> {
    model_from_json(&std::fs::read_to_string(path)?)
}

pub fn save_report(path: &Path, report: &FitReport) -> Result<()> {
    std::fs::write(path, report_to_json(report))?;
    Ok(())
}

pub fn load_report(path: &Path) -> Result<FitReport> {
    report_from_json(&std::fs::read_to_string(path)?)
}

pub fn save_trajectory(path: &Path, traj: &Trajectory) -> Result<()> {
    std::fs::write(path, trajectory_to_csv(traj))?;
    Ok(())
}

pub fn load_trajectory(path: &Path) -> Result<Trajectory> {
    trajectory_from_csv(&std::fs::read_to_string(path)?)
}

/// Collects `(model, report)` pairs from `dir` and its immediate
/// subdirectories. `<name>.model.json` pairs with `<name>.report.json` and a
/// bare `model.json` with `report.json`. Models without a report are an error.
pub fn load_cohort(dir: &Path) -> Result<Vec<(HybridModel, FitReport)>> {
    let mut dirs = vec![dir.to_path_buf()];
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            dirs.push(path);
        }
    }
    let mut models = Vec::new();
    for d in &dirs {
        for entry in std::fs::read_dir(d)? {
            let path = entry?.path();
            let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
                continue;
            };
            let report = if name == "model.json" {
                d.join("report.json")
            } else if let Some(stem) = name.strip_suffix(".model.json") {
                d.join(format!("{stem}.report.json"))
            } else {
                continue;
            };
            models.push((path, report));
        }
    }
    models.sort();
    models
        .into_iter()
        .map(|(m, r)| {
            let with_path = |e: Error, p: &Path| match e {
                Error::Io(msg) => Error::Io(format!("{}: {msg}", p.display())),
                Error::Parse { line, field, msg } => Error::Parse {
                    line,
                    field: format!("{} {field}", p.display()),
                    msg,
                },
                other => other,
            };
            let model = load_model(&m).map_err(|e| with_path(e, &m))?.0;
            let report = load_report(&r).map_err(|e| with_path(e, &r))?;
            Ok((model, report))
        })
        .collect()
}
