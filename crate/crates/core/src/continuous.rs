//! Identification of the continuous-state dynamics from sparse self-reports.
//!
//! Each channel is fitted on its own. Predictions are chained one sample at a
//! time from the first self-report and reset to the measured value at every
//! later report; the cost is the 2-norm of the pre-reset prediction errors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AffineParams, Channel, Trajectory};
use crate::simplex::{self, SimplexOptions};

/// Fewest self-reports accepted by [`fit_channel`].
pub const MIN_REPORTS: usize = 4;

/// Width of the band below `|a| = 1` that the penalty treats as infeasible.
pub const STABILITY_MARGIN: f64 = 1e-6;
const PENALTY_WEIGHT: f64 = 1e6;
const RESTART_INERTIAS: [f64; 5] = [0.5, 0.7, 0.9, 0.95, 0.99];
const DEFAULT_INERTIA: f64 = 0.9;
const INITIAL_STEP: f64 = 0.05;
const COST_TIE: f64 = 1e-12;

/// Pre-reset prediction errors at every self-report after the first.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionErrorTrace {
    pub errors: Vec<f64>,
    pub indices: Vec<usize>,
}

impl PredictionErrorTrace {
    pub fn norm(&self) -> f64 {
        self.errors.iter().map(|e| e * e).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuousFit {
    pub params: AffineParams,
    /// 2-norm of the error trace at `params`.
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Reports were constant under a constant input; parameters are not unique.
    pub degenerate: bool,
}

/// The report data of one channel, split into reset-to-reset segments.
struct ChannelData<'a> {
    complexity: &'a [f64],
    reports: Vec<(usize, f64)>,
}

impl<'a> ChannelData<'a> {
    fn new(channel: Channel, traj: &'a Trajectory) -> Self {
        Self {
            complexity: traj.complexity(),
            reports: traj.channel_reports(channel),
        }
    }

    fn for_each_error(&self, p: &AffineParams, mut sink: impl FnMut(usize, f64)) {
        let mut iter = self.reports.iter();
        let Some(&(mut k_prev, mut x_prev)) = iter.next() else {
            return;
        };
        for &(k, x) in iter {
            let mut xhat = x_prev;
            for &d in &self.complexity[k_prev..k] {
                xhat = p.step(xhat, d);
            }
            sink(k, xhat - x);
            k_prev = k;
            x_prev = x;
        }
    }

    fn cost(&self, p: &AffineParams) -> f64 {
        let mut ss = 0.0;
        self.for_each_error(p, |_, e| ss += e * e);
        ss.sqrt()
    }

    fn penalized_cost(&self, v: &[f64]) -> f64 {
        let bound = 1.0 - STABILITY_MARGIN;
        let a = v[0];
        if a.abs() >= bound {
            let projected = AffineParams::new(bound.copysign(a), v[1], v[2]);
            let excess = a.abs() - bound;
            self.cost(&projected) + PENALTY_WEIGHT * excess * excess
        } else {
            self.cost(&AffineParams::new(a, v[1], v[2]))
        }
    }

    fn mean_report(&self) -> f64 {
        self.reports.iter().map(|r| r.1).sum::<f64>() / self.reports.len() as f64
    }

    fn is_degenerate(&self) -> bool {
        let (k0, x0) = self.reports[0];
        let k_last = self.reports.last().map_or(k0, |r| r.0);
        let reports_constant = self.reports.iter().all(|r| r.1 == x0);
        let window = &self.complexity[k0..k_last.max(k0 + 1)];
        let input_constant = window.iter().all(|&d| d == window[0]);
        reports_constant && input_constant
    }
}

/// Chained prediction errors for `params`, starting at the first self-report.
pub fn error_trace(
    channel: Channel,
    traj: &Trajectory,
    params: &AffineParams,
) -> Result<PredictionErrorTrace> {
    if traj.report_count() < 2 {
        return Err(Error::InsufficientReports {
            needed: 2,
            found: traj.report_count(),
        });
    }
    let data = ChannelData::new(channel, traj);
    let mut trace = PredictionErrorTrace {
        errors: Vec::with_capacity(data.reports.len() - 1),
        indices: Vec::with_capacity(data.reports.len() - 1),
    };
    data.for_each_error(params, |k, e| {
        trace.indices.push(k);
        trace.errors.push(e);
    });
    Ok(trace)
}

/// Reset-chained predictions for `k = k_first..=N`: the value at a report
/// index is the prediction *before* it is replaced by the measurement.
pub fn reset_predictions(channel: Channel, traj: &Trajectory, params: &AffineParams) -> Vec<f64> {
    let reports = traj.self_reports();
    let (k0, x0) = traj.first_report();
    let mut out = Vec::with_capacity(traj.len() - k0);
    out.push(x0.get(channel));
    let mut regressor = x0.get(channel);
    for k in (k0 + 1)..traj.len() {
        let pred = params.step(regressor, traj.complexity()[k - 1]);
        out.push(pred);
        regressor = reports.get(&k).map_or(pred, |s| s.get(channel));
    }
    out
}

/// Fits `(a, b, c)` for one channel by Nelder–Mead under `|a| < 1`.
///
/// Without `init`, five deterministic starts with `a ∈ {0.5, 0.7, 0.9, 0.95, 0.99}`
/// are tried, each with `b = 0` and `c` placing the fixed point at the mean report.
pub fn fit_channel(
    channel: Channel,
    traj: &Trajectory,
    init: Option<AffineParams>,
) -> Result<ContinuousFit> {
    if traj.report_count() < MIN_REPORTS {
        return Err(Error::InsufficientReports {
            needed: MIN_REPORTS,
            found: traj.report_count(),
        });
    }
    let data = ChannelData::new(channel, traj);
    let mean = data.mean_report();

    if data.is_degenerate() {
        let params = AffineParams::new(DEFAULT_INERTIA, 0.0, (1.0 - DEFAULT_INERTIA) * mean);
        return Ok(ContinuousFit {
            params,
            cost: data.cost(&params),
            iterations: 0,
            converged: true,
            degenerate: true,
        });
    }

    let starts: Vec<AffineParams> = match init {
        Some(p) => vec![p],
        None => RESTART_INERTIAS
            .iter()
            .map(|&a| AffineParams::new(a, 0.0, (1.0 - a) * mean))
            .collect(),
    };
    let opts = SimplexOptions::uniform(3, INITIAL_STEP);

    let mut best: Option<ContinuousFit> = None;
    let mut iterations = 0;
    for start in starts {
        let run = simplex::minimize(|v| data.penalized_cost(v), &start.to_array(), &opts);
        iterations += run.iterations;
        let params = project_stable(AffineParams::new(run.x[0], run.x[1], run.x[2]));
        let candidate = ContinuousFit {
            params,
            cost: data.cost(&params),
            iterations: run.iterations,
            converged: run.converged,
            degenerate: false,
        };
        best = Some(match best {
            None => candidate,
            Some(cur) => {
                let better = candidate.cost < cur.cost - COST_TIE
                    || ((candidate.cost - cur.cost).abs() <= COST_TIE
                        && candidate.params.a.abs() < cur.params.a.abs());
                if better {
                    candidate
                } else {
                    cur
                }
            }
        });
    }
    let mut fit = best.expect("at least one start");
    fit.iterations = iterations;
    Ok(fit)
}

fn project_stable(p: AffineParams) -> AffineParams {
    let bound = 1.0 - STABILITY_MARGIN;
    if p.a.abs() >= bound {
        AffineParams::new(bound.copysign(p.a), p.b, p.c)
    } else {
        p
    }
}

/// Independent fits for trust, risk and workload, in that order.
pub fn fit_all(traj: &Trajectory) -> [Result<ContinuousFit>; 3] {
    Channel::ALL.map(|ch| fit_channel(ch, traj, None))
}
