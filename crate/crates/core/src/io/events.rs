//! Raw event logs: construction-zone and automation events plus self-reports,
//! resampled onto the analysis grid.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::model::{CognitiveState, Trajectory};

/// Self-reports are collected on a 0–100 scale in steps of this size.
pub const RAW_REPORT_STEP: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    ComplexityEnter,
    ComplexityExit,
    Engage,
    Disengage,
    SelfReport,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::ComplexityEnter => "complexity_enter",
            EventKind::ComplexityExit => "complexity_exit",
            EventKind::Engage => "engage",
            EventKind::Disengage => "disengage",
            EventKind::SelfReport => "self_report",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "complexity_enter" => EventKind::ComplexityEnter,
            "complexity_exit" => EventKind::ComplexityExit,
            "engage" => EventKind::Engage,
            "disengage" => EventKind::Disengage,
            "self_report" => EventKind::SelfReport,
            other => return Err(Error::InvalidInput(format!("unknown event kind `{other}`"))),
        })
    }
}

/// One logged event. `payload` holds `(T, R, W)` on the 0–100 scale and is
/// present exactly for self-reports.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawRecord {
    pub t: f64,
    pub kind: EventKind,
    pub payload: Option<[f64; 3]>,
}

impl RawRecord {
    pub fn event(t: f64, kind: EventKind) -> Self {
        Self {
            t,
            kind,
            payload: None,
        }
    }

    pub fn report(t: f64, trust: f64, risk: f64, workload: f64) -> Self {
        Self {
            t,
            kind: EventKind::SelfReport,
            payload: Some([trust, risk, workload]),
        }
    }

    fn validate(&self, index: usize) -> Result<()> {
        if !self.t.is_finite() {
            return Err(Error::InvalidInput(format!("record {index}: non-finite timestamp")));
        }
        match (self.kind, self.payload) {
            (EventKind::SelfReport, None) => Err(Error::InvalidInput(format!(
                "record {index}: self_report without payload"
            ))),
            (EventKind::SelfReport, Some(p)) => {
                for v in p {
                    let steps = v / RAW_REPORT_STEP;
                    if !(0.0..=100.0).contains(&v) || steps != steps.round() {
                        return Err(Error::InvalidInput(format!(
                            "record {index}: self-report value {v} is not a multiple of 5 in [0, 100]"
                        )));
                    }
                }
                Ok(())
            }
            (kind, Some(_)) => Err(Error::InvalidInput(format!(
                "record {index}: {kind} event carries a payload"
            ))),
            (_, None) => Ok(()),
        }
    }
}

/// Nearest sample index, halves rounded up.
fn nearest_sample(t: f64, origin: f64, sample_time: f64) -> i64 {
    ((t - origin) / sample_time + 0.5).floor() as i64
}

#[derive(Default)]
struct IntervalTracker {
    open: Option<i64>,
    intervals: Vec<(i64, i64)>,
}

impl IntervalTracker {
    fn open(&mut self, k: i64, index: usize, what: &str) -> Result<()> {
        if self.open.is_some() {
            return Err(Error::OverlappingInterval {
                index,
                kind: what.to_string(),
            });
        }
        self.open = Some(k);
        Ok(())
    }

    fn close(&mut self, k: i64, index: usize, what: &str) -> Result<()> {
        let start = self.open.take().ok_or_else(|| Error::UnpairedEvent {
            index,
            kind: what.to_string(),
        })?;
        self.intervals.push((start, k));
        Ok(())
    }

    /// Indicator over `0..=n` with half-open `[start, end)` intervals.
    fn indicator(&self, n: usize) -> Vec<bool> {
        let mut out = vec![false; n + 1];
        for &(s, e) in &self.intervals {
            let s = s.max(0) as usize;
            let e = (e.max(0) as usize).min(n + 1);
            for v in out.iter_mut().take(e).skip(s) {
                *v = true;
            }
        }
        out
    }
}

/// Resamples an event log onto `k T_s` starting at `window_start`.
///
/// Event timestamps are rounded to the nearest sample; construction and
/// engagement hold over `[start, end)`. Self-reports before the window are
/// dropped and the rest are scaled to 0–1.
pub fn build_trajectory(
    records: &[RawRecord],
    sample_time: f64,
    window_start: f64,
) -> Result<Trajectory> {
    if records.is_empty() {
        return Err(Error::EmptyRecords);
    }
    if !(sample_time.is_finite() && sample_time > 0.0) || !window_start.is_finite() {
        return Err(Error::InvalidInput("invalid sample time or window start".into()));
    }

    let mut construction = IntervalTracker::default();
    let mut engagement = IntervalTracker::default();
    let mut reports: BTreeMap<usize, CognitiveState> = BTreeMap::new();
    let mut last_t = f64::NEG_INFINITY;
    let mut last_k = 0i64;

    for (index, rec) in records.iter().enumerate() {
        rec.validate(index)?;
        if rec.t < last_t {
            return Err(Error::OutOfOrder { index, t: rec.t });
        }
        last_t = rec.t;
        let k = nearest_sample(rec.t, window_start, sample_time);
        last_k = last_k.max(k);
        match rec.kind {
            EventKind::ComplexityEnter => construction.open(k, index, "construction")?,
            EventKind::ComplexityExit => construction.close(k, index, "construction")?,
            EventKind::Engage => engagement.open(k, index, "engagement")?,
            EventKind::Disengage => engagement.close(k, index, "engagement")?,
            EventKind::SelfReport => {
                if rec.t < window_start {
                    continue;
                }
                let p = rec.payload.expect("validated");
                let k = k as usize;
                let state = CognitiveState::new(p[0] / 100.0, p[1] / 100.0, p[2] / 100.0)?;
                if reports.insert(k, state).is_some() {
                    return Err(Error::ReportCollision { index, k });
                }
            }
        }
    }
    if construction.open.is_some() {
        return Err(Error::UnpairedEvent {
            index: records.len(),
            kind: "construction (never exited)".into(),
        });
    }
    if engagement.open.is_some() {
        return Err(Error::UnpairedEvent {
            index: records.len(),
            kind: "engagement (never disengaged)".into(),
        });
    }
    if last_k < 1 {
        return Err(Error::InvalidInput(
            "records span less than one sample after the window start".into(),
        ));
    }
    let n = last_k as usize;
    let d = construction
        .indicator(n)
        .into_iter()
        .map(|b| if b { 1.0 } else { 0.0 })
        .collect();
    Trajectory::new(sample_time, d, engagement.indicator(n), reports)
}

#[derive(Deserialize)]
struct RawRow {
    t: f64,
    kind: String,
    #[serde(rename = "T")]
    trust: Option<f64>,
    #[serde(rename = "R")]
    risk: Option<f64>,
    #[serde(rename = "W")]
    workload: Option<f64>,
}

/// Parses a `t,kind,T,R,W` event CSV.
pub fn parse_events(text: &str) -> Result<Vec<RawRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for row in reader.deserialize::<RawRow>() {
        let row = row.map_err(|e| csv_error(&e))?;
        let line = out.len() + 2;
        let kind: EventKind = row.kind.parse().map_err(|_| Error::Parse {
            line,
            field: "kind".into(),
            msg: format!("unknown event kind `{}`", row.kind),
        })?;
        let payload = match (row.trust, row.risk, row.workload) {
            (Some(t), Some(r), Some(w)) => Some([t, r, w]),
            (None, None, None) => None,
            _ => {
                return Err(Error::Parse {
                    line,
                    field: "T,R,W".into(),
                    msg: "self-report needs all three values".into(),
                })
            }
        };
        out.push(RawRecord {
            t: row.t,
            kind,
            payload,
        });
    }
    Ok(out)
}

pub(crate) fn csv_error(e: &csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    let field = match e.kind() {
        csv::ErrorKind::Deserialize { err, .. } => err
            .field()
            .map_or_else(|| "record".to_string(), |f| format!("column {}", f + 1)),
        _ => "record".to_string(),
    };
    Error::Parse {
        line,
        field,
        msg: e.to_string(),
    }
}
